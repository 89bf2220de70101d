#include "edcrit/multilinear.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "edcrit/levenberg_marquardt.hpp"

namespace edcrit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Shape factor_shape(const FactorMatrices& f) {
  Shape s;
  for (const auto& a : f) s.push_back(static_cast<std::size_t>(a.rows()));
  return s;
}

std::size_t factor_rank(const FactorMatrices& f) { return f.empty() ? 0 : static_cast<std::size_t>(f.front().cols()); }

std::size_t parameter_count(const FactorMatrices& f) {
  std::size_t n = 0;
  for (const auto& a : f) n += static_cast<std::size_t>(a.size());
  return n;
}

VectorXd pack(const FactorMatrices& f) {
  VectorXd theta(static_cast<Index>(parameter_count(f)));
  Index off = 0;
  for (const auto& a : f) {
    theta.segment(off, a.size()) = Eigen::Map<const VectorXd>(a.data(), a.size());
    off += a.size();
  }
  return theta;
}

FactorMatrices unpack(const VectorXd& theta, const Shape& shape, std::size_t k) {
  FactorMatrices f;
  Index off = 0;
  for (auto m : shape) {
    const auto rows = static_cast<Index>(m);
    const auto cols = static_cast<Index>(k);
    f.emplace_back(Eigen::Map<const MatrixXd>(theta.data() + off, rows, cols));
    off += rows * cols;
  }
  if (off != theta.size()) throw std::invalid_argument("unpack: parameter length mismatch");
  return f;
}

namespace {

std::vector<Index> column_offsets(const FactorMatrices& f) {
  std::vector<Index> off(f.size(), 0);
  for (std::size_t l = 1; l < f.size(); ++l) off[l] = off[l - 1] + f[l - 1].size();
  return off;
}

}  // namespace

DenseTensor cp_reconstruct(const FactorMatrices& f) {
  const Shape shape = factor_shape(f);
  const auto k = static_cast<Index>(factor_rank(f));
  DenseTensor out(shape);
  MultiIndex idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    double v = 0.0;
    for (Index j = 0; j < k; ++j) {
      double p = 1.0;
      for (std::size_t l = 0; l < f.size(); ++l) p *= f[l](static_cast<Index>(idx[l]), j);
      v += p;
    }
    out.data()[off++] = v;
  } while (next_index(idx, shape));
  return out;
}

MatrixXd cp_jacobian(const FactorMatrices& f) {
  const Shape shape = factor_shape(f);
  const auto k = static_cast<Index>(factor_rank(f));
  const auto offs = column_offsets(f);
  const std::size_t d = f.size();
  MatrixXd J = MatrixXd::Zero(static_cast<Index>(shape_size(shape)), static_cast<Index>(parameter_count(f)));
  MultiIndex idx(d, 0);
  Index row = 0;
  do {
    for (Index j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < d; ++l) {
        double p = 1.0;
        for (std::size_t i = 0; i < d; ++i)
          if (i != l) p *= f[i](static_cast<Index>(idx[i]), j);
        J(row, offs[l] + j * f[l].rows() + static_cast<Index>(idx[l])) = p;
      }
    }
    ++row;
  } while (next_index(idx, shape));
  return J;
}

CpDerivatives cp_derivatives(const FactorMatrices& f, const DenseTensor& x, bool with_hessian) {
  const Shape shape = factor_shape(f);
  if (shape != x.shape()) throw std::invalid_argument("cp_derivatives: factor shape does not match tensor");
  const MatrixXd J = cp_jacobian(f);
  const VectorXd r = cp_reconstruct(f).flat() - x.flat();
  CpDerivatives out;
  out.value = 0.5 * r.squaredNorm();
  out.gradient = J.transpose() * r;
  if (!with_hessian) return out;

  out.hessian = J.transpose() * J;
  const auto k = static_cast<Index>(factor_rank(f));
  const auto offs = column_offsets(f);
  const std::size_t d = f.size();
  MultiIndex idx(d, 0);
  Index row = 0;
  do {
    const double rv = r(row);
    for (Index j = 0; j < k; ++j) {
      for (std::size_t l = 0; l < d; ++l) {
        for (std::size_t l2 = l + 1; l2 < d; ++l2) {
          double p = rv;
          for (std::size_t i = 0; i < d; ++i)
            if (i != l && i != l2) p *= f[i](static_cast<Index>(idx[i]), j);
          const Index a = offs[l] + j * f[l].rows() + static_cast<Index>(idx[l]);
          const Index b = offs[l2] + j * f[l2].rows() + static_cast<Index>(idx[l2]);
          out.hessian(a, b) += p;
          out.hessian(b, a) += p;
        }
      }
    }
    ++row;
  } while (next_index(idx, shape));
  return out;
}

void balance(FactorMatrices& f) {
  const auto k = static_cast<Index>(factor_rank(f));
  const double d = static_cast<double>(f.size());
  for (Index j = 0; j < k; ++j) {
    double log_sum = 0.0;
    bool ok = true;
    for (const auto& a : f) {
      const double n = a.col(j).norm();
      if (!(n > 0.0)) ok = false;
      else log_sum += std::log(n);
    }
    if (!ok) continue;
    const double target = std::exp(log_sum / d);
    for (auto& a : f) a.col(j) *= target / a.col(j).norm();
  }
}

std::vector<RankOneTerm> to_terms(const FactorMatrices& f) {
  std::vector<RankOneTerm> terms;
  const auto k = static_cast<Index>(factor_rank(f));
  for (Index j = 0; j < k; ++j) {
    std::vector<VectorXd> factors;
    for (const auto& a : f) factors.emplace_back(a.col(j));
    terms.emplace_back(1.0, std::move(factors));
  }
  return terms;
}

FactorMatrices from_terms(std::span<const RankOneTerm> terms) {
  if (terms.empty()) throw std::invalid_argument("from_terms: no terms");
  const Shape shape = terms.front().shape();
  FactorMatrices f;
  for (auto m : shape) f.emplace_back(static_cast<Index>(m), static_cast<Index>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].shape() != shape) throw std::invalid_argument("from_terms: terms have different shapes");
    for (std::size_t l = 0; l < shape.size(); ++l)
      f[l].col(static_cast<Index>(j)) = terms[j].factors()[l] * (l == 0 ? terms[j].weight() : 1.0);
  }
  balance(f);
  return f;
}

double tangent_residual(const MatrixXd& jacobian, const VectorXd& r, std::size_t* rank) {
  if (jacobian.cols() == 0) {
    if (rank) *rank = 0;
    return 0.0;
  }
  Eigen::JacobiSVD<MatrixXd> svd(jacobian, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-9 * s(0);
  Index r_count = 0;
  while (r_count < s.size() && s(r_count) > cutoff) ++r_count;
  if (rank) *rank = static_cast<std::size_t>(r_count);
  return (svd.matrixU().leftCols(r_count).transpose() * r).norm();
}

std::size_t generic_tangent_dim(const Shape& shape, std::size_t k) {
  static std::mutex mu;
  static std::map<std::pair<Shape, std::size_t>, std::size_t> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(shape, k);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::mt19937_64 rng(0x5eedULL);
  std::size_t best = 0;
  // Max over a few random points guards against an unlucky draw.
  for (int trial = 0; trial < 3; ++trial) {
    auto f = random_factors(shape, k, rng);
    std::size_t r = 0;
    tangent_residual(cp_jacobian(f), VectorXd::Zero(static_cast<Index>(shape_size(shape))), &r);
    best = std::max(best, r);
  }
  cache[key] = best;
  return best;
}

VectorXd contract_except(const DenseTensor& t, std::span<const VectorXd> vectors, std::size_t skip) {
  const auto& shape = t.shape();
  if (vectors.size() != shape.size() || skip >= shape.size())
    throw std::invalid_argument("contract_except: vector count must equal tensor order");
  VectorXd out = VectorXd::Zero(static_cast<Index>(shape[skip]));
  MultiIndex idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    double p = t.data()[off++];
    for (std::size_t l = 0; l < shape.size(); ++l)
      if (l != skip) p *= vectors[l](static_cast<Index>(idx[l]));
    out(static_cast<Index>(idx[skip])) += p;
  } while (next_index(idx, shape));
  return out;
}

double contract_all(const DenseTensor& t, std::span<const VectorXd> vectors) {
  const auto& shape = t.shape();
  if (vectors.size() != shape.size()) throw std::invalid_argument("contract_all: vector count must equal tensor order");
  double sum = 0.0;
  MultiIndex idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    double p = t.data()[off++];
    for (std::size_t l = 0; l < shape.size(); ++l) p *= vectors[l](static_cast<Index>(idx[l]));
    sum += p;
  } while (next_index(idx, shape));
  return sum;
}

MatrixXd mttkrp(const DenseTensor& t, const FactorMatrices& f, std::size_t mode) {
  const auto& shape = t.shape();
  const auto k = static_cast<Index>(factor_rank(f));
  MatrixXd out = MatrixXd::Zero(static_cast<Index>(shape[mode]), k);
  MultiIndex idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    const double v = t.data()[off++];
    for (Index j = 0; j < k; ++j) {
      double p = v;
      for (std::size_t l = 0; l < shape.size(); ++l)
        if (l != mode) p *= f[l](static_cast<Index>(idx[l]), j);
      out(static_cast<Index>(idx[mode]), j) += p;
    }
  } while (next_index(idx, shape));
  return out;
}

VectorXd gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

FactorMatrices random_factors(const Shape& shape, std::size_t k, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FactorMatrices f;
  for (auto m : shape) {
    MatrixXd a(static_cast<Index>(m), static_cast<Index>(k));
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i) a(i, j) = scale * normal(rng);
    f.push_back(std::move(a));
  }
  return f;
}

DenseTensor gaussian_tensor(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseTensor t(shape);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

StationaryResult solve_stationary(const DenseTensor& x, FactorMatrices start, const StationaryOptions& opt) {
  const Shape shape = factor_shape(start);
  const std::size_t k = factor_rank(start);
  balance(start);

  // Projected gradient: descent step, then back onto the balanced gauge slice.
  for (int s = 0; s < opt.gradient_steps; ++s) {
    const auto D = cp_derivatives(start, x, false);
    const double gg = D.gradient.squaredNorm();
    if (!(gg > 0.0) || !std::isfinite(gg)) break;
    const VectorXd theta = pack(start);
    double alpha = 1.0;
    bool moved = false;
    for (int h = 0; h < 40; ++h, alpha *= 0.5) {
      auto trial = unpack(theta - alpha * D.gradient, shape, k);
      const VectorXd r = cp_reconstruct(trial).flat() - x.flat();
      if (0.5 * r.squaredNorm() <= D.value - 1e-4 * alpha * gg) {
        start = std::move(trial);
        moved = true;
        break;
      }
    }
    if (!moved) break;
    balance(start);
  }

  const double scale = 1.0 + x.flat().norm();
  LmOptions lm;
  lm.max_iterations = opt.max_iterations;
  lm.residual_tolerance = 1e-14 * scale * scale;
  lm.step_tolerance = 1e-15;
  auto eval = [&](const VectorXd& theta, VectorXd& r, MatrixXd* J) {
    const auto f = unpack(theta, shape, k);
    auto D = cp_derivatives(f, x, J != nullptr);
    r = std::move(D.gradient);
    if (J) *J = std::move(D.hessian);
  };
  const auto res = levenberg_marquardt(pack(start), eval, lm);

  StationaryResult out;
  out.factors = unpack(res.x, shape, k);
  balance(out.factors);
  out.gradient_norm = cp_derivatives(out.factors, x, false).gradient.norm();
  out.converged = res.converged && std::isfinite(out.gradient_norm);
  out.iterations = res.iterations;
  return out;
}

StationaryResult fit_least_squares(const DenseTensor& x, FactorMatrices start, int max_iterations) {
  const Shape shape = factor_shape(start);
  const std::size_t k = factor_rank(start);
  balance(start);
  LmOptions lm;
  lm.max_iterations = max_iterations;
  lm.residual_tolerance = 0.0;
  lm.step_tolerance = 1e-15;
  auto eval = [&](const VectorXd& theta, VectorXd& r, MatrixXd* J) {
    const auto f = unpack(theta, shape, k);
    r = cp_reconstruct(f).flat() - x.flat();
    if (J) *J = cp_jacobian(f);
  };
  const auto res = levenberg_marquardt(pack(start), eval, lm);
  StationaryResult out;
  out.factors = unpack(res.x, shape, k);
  balance(out.factors);
  out.gradient_norm = cp_derivatives(out.factors, x, false).gradient.norm();
  out.converged = res.converged && std::isfinite(out.gradient_norm);
  out.iterations = res.iterations;
  return out;
}

}  // namespace edcrit
