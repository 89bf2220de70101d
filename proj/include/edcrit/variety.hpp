#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "edcrit/multilinear.hpp"
#include "edcrit/tensor.hpp"

namespace edcrit {

struct Subspace {
  Eigen::MatrixXd basis;  // n x r, full column rank; r = 0 is the zero subspace
};
struct DiagQuadricCone {
  Eigen::VectorXd coeffs;  // sum a_i y_i^2 = 0
};
struct MatrixRankAtMost {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
};
struct TensorRankOne {
  Shape shape;
};
struct TensorRankAtMost {
  Shape shape;
  std::size_t rank = 0;
};

/// A supported variety C in R^n. Matrices and tensors are flattened row-major.
class VarietySpec {
 public:
  using Kind = std::variant<Subspace, DiagQuadricCone, MatrixRankAtMost, TensorRankOne, TensorRankAtMost>;

  static VarietySpec subspace(Eigen::MatrixXd basis);
  static VarietySpec zero(std::size_t n);
  static VarietySpec diag_quadric(Eigen::VectorXd coeffs);
  static VarietySpec matrix_rank(std::size_t p, std::size_t q, std::size_t k);
  static VarietySpec tensor_rank_one(Shape shape);
  static VarietySpec tensor_rank(Shape shape, std::size_t k);

  const Kind& kind() const { return kind_; }
  std::size_t ambient_dim() const { return ambient_dim_; }
  std::string name() const;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&kind_);
  }

  /// Orthonormal basis of a Subspace (n x r).
  const Eigen::MatrixXd& orthonormal_basis() const { return orthonormal_; }

 private:
  VarietySpec(Kind kind, std::size_t n) : kind_(std::move(kind)), ambient_dim_(n) {}
  static VarietySpec matrix_stratum(std::size_t p, std::size_t q, std::size_t k);
  friend struct StratumTree;

  Kind kind_;
  std::size_t ambient_dim_;
  Eigen::MatrixXd orthonormal_;
};

/// Singular-locus stratification: strata[0] is the variety itself, every other
/// stratum lies in the singular locus of its parent.
struct StratumTree {
  struct Node {
    VarietySpec spec;
    std::optional<std::size_t> parent;
    std::string label;
  };
  std::vector<Node> strata;

  static StratumTree build(const VarietySpec& v);
};

struct CriticalPoint {
  Eigen::VectorXd y;
  double distance = 0.0;
  std::size_t stratum = 0;  // index into the StratumTree
  double residual = 0.0;    // tangential residual of x - y
  std::optional<FactorMatrices> factors;  // CP parametrization for tensor varieties
};

struct CriticalReport {
  Eigen::VectorXd query;
  std::vector<CriticalPoint> points;  // ascending by distance
  std::size_t delta_estimate = 0;     // distinct points on the top stratum
  double uniqueness_gap = std::numeric_limits<double>::infinity();
  std::size_t starts = 0;
  std::uint64_t seed = 0;
  std::string variety;
  std::vector<std::string> strata;
  std::vector<std::string> notes;

  const CriticalPoint& best() const { return points.front(); }
  double distance() const { return points.front().distance; }
};

struct CriticalOptions {
  std::size_t starts = 50;
  std::uint64_t seed = 0;
  double dedup_tolerance = 1e-6;
  double residual_tolerance = 1e-8;
  StationaryOptions solver;
};

/// Distance from y to the variety's defining equations (0 on the variety).
double constraint_residual(const VarietySpec& v, const Eigen::VectorXd& y);

/// ||P_{T_y}(x - y)|| for a smooth point y of v. Throws std::invalid_argument if y
/// is off the variety or is a singular point (use a child stratum instead).
double critical_residual(const VarietySpec& v, const Eigen::VectorXd& x, const Eigen::VectorXd& y);
/// Tensor varieties: residual with an explicit CP parametrization of y.
double critical_residual(const VarietySpec& v, const Eigen::VectorXd& x, const FactorMatrices& factors);

CriticalReport critical_set(const VarietySpec& v, const Eigen::VectorXd& x, const CriticalOptions& opt = {});

/// True iff all a_i are pairwise distinct (the quadric meets the isotropic cone transversally).
bool quadric_transversality(const Eigen::VectorXd& coeffs);

/// |dist(x,C) - dist(z,C)| / ||x - z||; 0 for x == z.
double lipschitz_ratio(const VarietySpec& v, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                       const CriticalOptions& opt = {});
double lipschitz_probe(const VarietySpec& v, std::size_t trials, std::uint64_t seed, std::size_t starts = 50);

/// Fraction of random queries (off the variety) whose uniqueness gap exceeds 1e-6.
double uniqueness_probe(const VarietySpec& v, std::size_t trials, std::uint64_t seed, std::size_t starts = 50);

/// For a symmetric query: every mode transposition of every critical point is again
/// (within 1e-6) a reported critical point.
bool orbit_closure_check(const VarietySpec& v, const Eigen::VectorXd& x, const CriticalReport& report);

/// Directional derivatives of ||x - y(theta)||^2 along `directions` random unit
/// parameter directions by central differences; returns the largest magnitude.
double finite_difference_stationarity(const Eigen::VectorXd& x, const Shape& shape, const FactorMatrices& factors,
                                      std::size_t directions, std::uint64_t seed, double step = 1e-5);

}  // namespace edcrit
