#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "edcrit/tensor.hpp"

namespace edcrit {

/// CP factor matrices, one per mode (m_i x k). Column j of every matrix belongs to
/// term j; weights are carried inside the columns.
using FactorMatrices = std::vector<Eigen::MatrixXd>;

Shape factor_shape(const FactorMatrices& f);
std::size_t factor_rank(const FactorMatrices& f);
std::size_t parameter_count(const FactorMatrices& f);

/// Parameter vector: mode-major, each factor matrix column-major.
Eigen::VectorXd pack(const FactorMatrices& f);
FactorMatrices unpack(const Eigen::VectorXd& theta, const Shape& shape, std::size_t k);

DenseTensor cp_reconstruct(const FactorMatrices& f);
/// d y / d theta, an (prod m_i) x (k * sum m_i) matrix.
Eigen::MatrixXd cp_jacobian(const FactorMatrices& f);

/// Value, gradient and Hessian of 0.5 * ||y(theta) - x||^2.
struct CpDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
CpDerivatives cp_derivatives(const FactorMatrices& f, const DenseTensor& x, bool with_hessian = true);

/// Rescales the columns of each term to equal norms without changing the tensor.
void balance(FactorMatrices& f);

std::vector<RankOneTerm> to_terms(const FactorMatrices& f);
FactorMatrices from_terms(std::span<const RankOneTerm> terms);

/// Norm of the orthogonal projection of r onto range(jacobian). `rank`, when
/// given, receives the numerical rank of the Jacobian.
double tangent_residual(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& r, std::size_t* rank = nullptr);

/// Dimension of the tangent space at a generic point of the rank-<=k CP variety of the given shape.
std::size_t generic_tangent_dim(const Shape& shape, std::size_t k);

/// T contracted with vectors on every mode except `skip`.
Eigen::VectorXd contract_except(const DenseTensor& t, std::span<const Eigen::VectorXd> vectors, std::size_t skip);
/// T contracted with vectors on all modes.
double contract_all(const DenseTensor& t, std::span<const Eigen::VectorXd> vectors);
/// Matricized tensor times Khatri-Rao product for mode n: (m_n x k).
Eigen::MatrixXd mttkrp(const DenseTensor& t, const FactorMatrices& f, std::size_t mode);

FactorMatrices random_factors(const Shape& shape, std::size_t k, std::mt19937_64& rng, double scale = 1.0);
Eigen::VectorXd gaussian_vector(Eigen::Index n, std::mt19937_64& rng);
DenseTensor gaussian_tensor(const Shape& shape, std::mt19937_64& rng);

struct StationaryOptions {
  int max_iterations = 200;
  int gradient_steps = 10;
};

struct StationaryResult {
  FactorMatrices factors;
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// Short projected-gradient phase followed by Levenberg-Marquardt on the
/// stationarity system grad f(theta) = 0 with the exact Hessian as Jacobian.
/// Converges to critical points of any index, not only minima.
StationaryResult solve_stationary(const DenseTensor& x, FactorMatrices start, const StationaryOptions& opt = {});

/// Levenberg-Marquardt on the residual y(theta) - x (a descent method for the fit).
StationaryResult fit_least_squares(const DenseTensor& x, FactorMatrices start, int max_iterations = 200);

}  // namespace edcrit
