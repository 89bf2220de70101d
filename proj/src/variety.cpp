#include "edcrit/variety.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "edcrit/levenberg_marquardt.hpp"
#include "edcrit/parallel.hpp"

namespace edcrit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// ---------------------------------------------------------------------------
// VarietySpec

VarietySpec VarietySpec::subspace(MatrixXd basis) {
  if (basis.rows() == 0) throw std::invalid_argument("Subspace: ambient dimension must be positive");
  const auto n = static_cast<std::size_t>(basis.rows());
  MatrixXd q(basis.rows(), basis.cols());
  if (basis.cols() > 0) {
    if (basis.cols() > basis.rows()) throw std::invalid_argument("Subspace: basis must have full column rank");
    Eigen::JacobiSVD<MatrixXd> svd(basis);
    const auto& s = svd.singularValues();
    if (!(s(s.size() - 1) > 1e-10 * s(0))) throw std::invalid_argument("Subspace: basis must have full column rank");
    Eigen::HouseholderQR<MatrixXd> qr(basis);
    q = qr.householderQ() * MatrixXd::Identity(basis.rows(), basis.cols());
  }
  VarietySpec v(Subspace{std::move(basis)}, n);
  v.orthonormal_ = std::move(q);
  return v;
}

VarietySpec VarietySpec::zero(std::size_t n) { return subspace(MatrixXd(static_cast<Index>(n), 0)); }

VarietySpec VarietySpec::diag_quadric(VectorXd coeffs) {
  if (coeffs.size() == 0) throw std::invalid_argument("DiagQuadricCone: at least one coefficient required");
  for (Index i = 0; i < coeffs.size(); ++i)
    if (coeffs(i) == 0.0 || !std::isfinite(coeffs(i)))
      throw std::invalid_argument("DiagQuadricCone: coefficients must be nonzero and finite");
  const auto n = static_cast<std::size_t>(coeffs.size());
  return VarietySpec(DiagQuadricCone{std::move(coeffs)}, n);
}

VarietySpec VarietySpec::matrix_rank(std::size_t p, std::size_t q, std::size_t k) {
  if (k < 1 || k >= std::min(p, q))
    throw std::invalid_argument("MatrixRankAtMost: need 1 <= k < min(p,q), got p=" + std::to_string(p) +
                                " q=" + std::to_string(q) + " k=" + std::to_string(k));
  return matrix_stratum(p, q, k);
}

VarietySpec VarietySpec::matrix_stratum(std::size_t p, std::size_t q, std::size_t k) {
  return VarietySpec(MatrixRankAtMost{p, q, k}, p * q);
}

namespace {
void validate_tensor_shape(const Shape& shape) {
  if (shape.size() < 2) throw std::invalid_argument("tensor variety: order must be at least 2");
  for (auto m : shape)
    if (m == 0) throw std::invalid_argument("tensor variety: mode sizes must be positive");
}
}  // namespace

VarietySpec VarietySpec::tensor_rank_one(Shape shape) {
  validate_tensor_shape(shape);
  const auto n = shape_size(shape);
  return VarietySpec(TensorRankOne{std::move(shape)}, n);
}

VarietySpec VarietySpec::tensor_rank(Shape shape, std::size_t k) {
  validate_tensor_shape(shape);
  if (k < 1) throw std::invalid_argument("TensorRankAtMost: k must be at least 1");
  const auto n = shape_size(shape);
  return VarietySpec(TensorRankAtMost{std::move(shape), k}, n);
}

std::string VarietySpec::name() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Subspace>) {
          os << "subspace(n=" << ambient_dim_ << ",dim=" << k.basis.cols() << ")";
        } else if constexpr (std::is_same_v<T, DiagQuadricCone>) {
          os << "diag-quadric(a=";
          for (Index i = 0; i < k.coeffs.size(); ++i) os << (i ? "," : "") << k.coeffs(i);
          os << ")";
        } else if constexpr (std::is_same_v<T, MatrixRankAtMost>) {
          os << "matrix-rank(p=" << k.rows << ",q=" << k.cols << ",k=" << k.rank << ")";
        } else if constexpr (std::is_same_v<T, TensorRankOne>) {
          os << "tensor-rank1(" << shape_string(k.shape) << ")";
        } else {
          os << "tensor-rank(" << shape_string(k.shape) << ",k=" << k.rank << ")";
        }
      },
      kind_);
  return os.str();
}

StratumTree StratumTree::build(const VarietySpec& v) {
  StratumTree tree;
  const auto n = v.ambient_dim();
  tree.strata.push_back({v, std::nullopt, "top"});
  if (v.as<DiagQuadricCone>()) {
    tree.strata.push_back({VarietySpec::zero(n), 0, "vertex"});
  } else if (const auto* m = v.as<MatrixRankAtMost>()) {
    tree.strata.front().label = "rank=" + std::to_string(m->rank);
    for (std::size_t j = m->rank; j-- > 1;)
      tree.strata.push_back({VarietySpec::matrix_stratum(m->rows, m->cols, j), tree.strata.size() - 1,
                             "rank=" + std::to_string(j)});
    tree.strata.push_back({VarietySpec::zero(n), tree.strata.size() - 1, "rank=0"});
  } else if (v.as<TensorRankOne>()) {
    tree.strata.push_back({VarietySpec::zero(n), 0, "zero"});
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Residuals

namespace {

void require_dim(const VarietySpec& v, const VectorXd& p, const char* what) {
  if (static_cast<std::size_t>(p.size()) != v.ambient_dim())
    throw std::invalid_argument(std::string(what) + ": point has dimension " + std::to_string(p.size()) +
                                ", variety lives in R^" + std::to_string(v.ambient_dim()));
}

RowMatrix as_matrix(const VectorXd& y, const MatrixRankAtMost& m) {
  return Eigen::Map<const RowMatrix>(y.data(), static_cast<Index>(m.rows), static_cast<Index>(m.cols));
}

VectorXd flatten(const RowMatrix& a) { return Eigen::Map<const VectorXd>(a.data(), a.size()); }

double quadric_value(const VectorXd& a, const VectorXd& y) { return (a.array() * y.array().square()).sum(); }

struct FactorFit {
  FactorMatrices factors;
  double residual = std::numeric_limits<double>::infinity();
};

/// Rank-1 factors of a rank-one tensor via leading singular vectors of each unfolding.
FactorMatrices rank_one_factors(const DenseTensor& y) {
  FactorMatrices f;
  std::vector<VectorXd> u;
  for (std::size_t l = 0; l < y.order(); ++l) {
    Eigen::JacobiSVD<MatrixXd> svd(unfold(y, l), Eigen::ComputeThinU);
    u.emplace_back(svd.matrixU().col(0));
  }
  const double lambda = contract_all(y, u);
  for (std::size_t l = 0; l < u.size(); ++l) f.emplace_back(l == 0 ? VectorXd(lambda * u[l]) : u[l]);
  balance(f);
  return f;
}

/// Best of a few least-squares fits of a rank-k CP model to y.
FactorFit fit_rank_k(const DenseTensor& y, std::size_t k) {
  FactorFit best;
  const double scale = std::pow(std::max(hs_norm(y), 1e-300) / static_cast<double>(k), 1.0 / y.order());
  for (std::uint64_t s = 0; s < 8 && best.residual > 1e-12; ++s) {
    std::mt19937_64 rng(0xf17ULL + s);
    auto res = fit_least_squares(y, random_factors(y.shape(), k, rng, scale), 500);
    const double r = hs_norm(cp_reconstruct(res.factors) - y);
    if (r < best.residual) best = {std::move(res.factors), r};
  }
  return best;
}

double rank_one_constraint(const DenseTensor& y) {
  double worst = 0.0;
  for (std::size_t l = 0; l < y.order(); ++l) {
    Eigen::JacobiSVD<MatrixXd> svd(unfold(y, l));
    const auto& s = svd.singularValues();
    if (s.size() > 1) worst = std::max(worst, s(1));
  }
  return worst;
}

double matrix_tangent_residual(const RowMatrix& X, const RowMatrix& Y, std::size_t k) {
  Eigen::JacobiSVD<MatrixXd> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s(static_cast<Index>(k) - 1) > 1e-10 * std::max(1.0, s(0))))
    throw std::invalid_argument("critical_residual: y has rank < " + std::to_string(k) +
                                " and is a singular point; query the rank=" + std::to_string(k - 1) + " stratum");
  const MatrixXd U = svd.matrixU().leftCols(static_cast<Index>(k));
  const MatrixXd V = svd.matrixV().leftCols(static_cast<Index>(k));
  const MatrixXd R = X - Y;
  const MatrixXd UtR = U.transpose() * R;
  const MatrixXd P = U * UtR + (R * V) * V.transpose() - U * (UtR * V) * V.transpose();
  return P.norm();
}

double quadric_tangent_residual(const VectorXd& a, const VectorXd& x, const VectorXd& y) {
  const VectorXd g = a.cwiseProduct(y);
  if (!(g.norm() > 1e-12 * std::max(1.0, y.norm())))
    throw std::invalid_argument("critical_residual: y is the cone vertex (singular); query the vertex stratum");
  const VectorXd r = x - y;
  return (r - (g.dot(r) / g.squaredNorm()) * g).norm();
}

}  // namespace

double constraint_residual(const VarietySpec& v, const VectorXd& y) {
  require_dim(v, y, "constraint_residual");
  if (const auto* s = v.as<Subspace>()) {
    (void)s;
    const auto& Q = v.orthonormal_basis();
    return (y - Q * (Q.transpose() * y)).norm();
  }
  if (const auto* q = v.as<DiagQuadricCone>())
    return std::abs(quadric_value(q->coeffs, y)) / std::max(1.0, 2.0 * q->coeffs.cwiseProduct(y).norm());
  if (const auto* m = v.as<MatrixRankAtMost>()) {
    if (m->rank >= std::min(m->rows, m->cols)) return 0.0;
    Eigen::JacobiSVD<MatrixXd> svd(as_matrix(y, *m));
    return svd.singularValues()(static_cast<Index>(m->rank));
  }
  if (const auto* t = v.as<TensorRankOne>()) return rank_one_constraint(DenseTensor(t->shape, y));
  const auto& t = std::get<TensorRankAtMost>(v.kind());
  if (t.rank == 1) return rank_one_constraint(DenseTensor(t.shape, y));
  return fit_rank_k(DenseTensor(t.shape, y), t.rank).residual;
}

double critical_residual(const VarietySpec& v, const VectorXd& x, const FactorMatrices& factors) {
  require_dim(v, x, "critical_residual");
  std::size_t k = 1;
  Shape shape;
  if (const auto* t = v.as<TensorRankOne>()) {
    shape = t->shape;
  } else if (const auto* t2 = v.as<TensorRankAtMost>()) {
    shape = t2->shape;
    k = t2->rank;
  } else {
    throw std::invalid_argument("critical_residual: factor form applies to tensor varieties only");
  }
  if (factor_shape(factors) != shape || factor_rank(factors) != k)
    throw std::invalid_argument("critical_residual: factors do not match the variety");
  const MatrixXd J = cp_jacobian(factors);
  const VectorXd y = cp_reconstruct(factors).flat();
  std::size_t rank = 0;
  const double res = tangent_residual(J, x - y, &rank);
  if (rank < generic_tangent_dim(shape, k))
    throw std::invalid_argument("critical_residual: y is not a smooth point of " + v.name());
  return res;
}

double critical_residual(const VarietySpec& v, const VectorXd& x, const VectorXd& y) {
  require_dim(v, x, "critical_residual");
  require_dim(v, y, "critical_residual");
  const double on = constraint_residual(v, y);
  if (!(on <= 1e-8 * std::max(1.0, y.norm())))
    throw std::invalid_argument("critical_residual: y is off the variety (constraint residual " +
                                std::to_string(on) + ")");
  if (v.as<Subspace>()) {
    const auto& Q = v.orthonormal_basis();
    return (Q * (Q.transpose() * (x - y))).norm();
  }
  if (const auto* q = v.as<DiagQuadricCone>()) return quadric_tangent_residual(q->coeffs, x, y);
  if (const auto* m = v.as<MatrixRankAtMost>()) return matrix_tangent_residual(as_matrix(x, *m), as_matrix(y, *m), m->rank);

  Shape shape;
  std::size_t k = 1;
  if (const auto* t = v.as<TensorRankOne>()) {
    shape = t->shape;
  } else {
    const auto& t2 = std::get<TensorRankAtMost>(v.kind());
    shape = t2.shape;
    k = t2.rank;
  }
  const DenseTensor yt(shape, y);
  if (hs_norm(yt) <= 1e-12) throw std::invalid_argument("critical_residual: y = 0 is a singular point");
  const FactorMatrices f = k == 1 ? rank_one_factors(yt) : fit_rank_k(yt, k).factors;
  return critical_residual(v, x, f);
}

// ---------------------------------------------------------------------------
// Critical points per stratum

namespace {

using Poly = std::vector<double>;  // ascending coefficients

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly c(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

double poly_eval(const Poly& p, double t) {
  double v = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) v = v * t + p[i];
  return v;
}

Poly poly_derivative(const Poly& p) {
  Poly d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(static_cast<double>(i) * p[i]);
  return d;
}

void poly_trim(Poly& p) {
  double scale = 0.0;
  for (double c : p) scale = std::max(scale, std::abs(c));
  while (!p.empty() && std::abs(p.back()) <= 1e-14 * scale) p.pop_back();
}

/// All real roots. The derivative's roots split the line into monotone pieces;
/// each piece with a sign change holds exactly one root, found by bisection.
std::vector<double> real_roots(Poly p) {
  poly_trim(p);
  if (p.size() <= 1) return {};
  if (p.size() == 2) return {-p[0] / p[1]};
  const auto crit = real_roots(poly_derivative(p));
  double bound = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) bound = std::max(bound, std::abs(p[i] / p.back()));
  bound += 1.0;
  std::vector<double> knots{-bound};
  for (double c : crit)
    if (c > -bound && c < bound) knots.push_back(c);
  knots.push_back(bound);
  std::sort(knots.begin(), knots.end());

  double coeff_scale = 0.0;
  for (double c : p) coeff_scale += std::abs(c);
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double lo = knots[i], hi = knots[i + 1];
    double flo = poly_eval(p, lo), fhi = poly_eval(p, hi);
    const double touch = 1e-13 * coeff_scale * std::pow(std::max(1.0, std::abs(lo)), static_cast<double>(p.size() - 1));
    if (i > 0 && std::abs(flo) <= touch) roots.push_back(lo);  // root at a critical point (even multiplicity)
    if ((flo < 0) == (fhi < 0) || flo == 0.0 || fhi == 0.0) continue;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = poly_eval(p, mid);
      if ((fm < 0) == (flo < 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
              roots.end());
  return roots;
}

struct CoeffGroup {
  double a;
  std::vector<Index> members;
  double weight;  // a * sum_{i in group} x_i^2
};

std::vector<CoeffGroup> group_coefficients(const VectorXd& a, const VectorXd& x) {
  std::vector<CoeffGroup> groups;
  for (Index i = 0; i < a.size(); ++i) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const CoeffGroup& g) {
      return std::abs(g.a - a(i)) <= 1e-14 * std::max(std::abs(g.a), std::abs(a(i)));
    });
    if (it == groups.end()) {
      groups.push_back({a(i), {i}, 0.0});
      it = std::prev(groups.end());
    } else {
      it->members.push_back(i);
    }
    it->weight += a(i) * x(i) * x(i);
  }
  return groups;
}

/// Smooth critical points of ||x - y||^2 on sum a_i y_i^2 = 0.
/// Stationarity gives y_i = x_i / (1 + lambda a_i); the constraint becomes
/// f(lambda) = sum_g w_g / (1 + lambda a_g)^2 = 0, cleared to a polynomial.
std::vector<VectorXd> quadric_critical_points(const VectorXd& a, const VectorXd& x, std::vector<std::string>& notes) {
  const auto groups = group_coefficients(a, x);
  const double xnorm = x.norm();
  std::vector<VectorXd> out;

  Poly P{0.0};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Poly term{groups[g].weight};
    for (std::size_t h = 0; h < groups.size(); ++h)
      if (h != g) {
        const Poly lin{1.0, groups[h].a};
        term = poly_mul(term, poly_mul(lin, lin));
      }
    if (term.size() > P.size()) P.resize(term.size(), 0.0);
    for (std::size_t i = 0; i < term.size(); ++i) P[i] += term[i];
  }

  auto f = [&](double lam) {
    double v = 0.0, dv = 0.0;
    for (const auto& g : groups) {
      const double s = 1.0 + lam * g.a;
      v += g.weight / (s * s);
      dv += -2.0 * g.weight * g.a / (s * s * s);
    }
    return std::make_pair(v, dv);
  };

  for (double lam : real_roots(P)) {
    bool near_pole = false;
    for (const auto& g : groups)
      if (std::abs(1.0 + lam * g.a) <= 1e-9 * (1.0 + std::abs(lam * g.a))) near_pole = true;
    if (near_pole) continue;
    for (int it = 0; it < 8; ++it) {
      const auto [v, dv] = f(lam);
      if (dv == 0.0) break;
      const double next = lam - v / dv;
      if (!std::isfinite(next) || std::abs(f(next).first) >= std::abs(v)) break;
      lam = next;
    }
    VectorXd y(x.size());
    for (Index i = 0; i < x.size(); ++i) y(i) = x(i) / (1.0 + lam * a(i));
    if (y.norm() > 1e-12 * std::max(1.0, xnorm)) out.push_back(std::move(y));
  }

  // lambda = -1/a_g is admissible when x vanishes on group g: y_g is then free on a sphere.
  for (std::size_t g = 0; g < groups.size(); ++g) {
    bool vanishes = true;
    for (auto i : groups[g].members)
      if (std::abs(x(i)) > 1e-14 * std::max(1.0, xnorm)) vanishes = false;
    if (!vanishes) continue;
    const double lam = -1.0 / groups[g].a;
    VectorXd y = VectorXd::Zero(x.size());
    double rest = 0.0;
    for (std::size_t h = 0; h < groups.size(); ++h) {
      if (h == g) continue;
      for (auto i : groups[h].members) {
        y(i) = x(i) / (1.0 + lam * a(i));
        rest += a(i) * y(i) * y(i);
      }
    }
    const double rho2 = -rest / groups[g].a;
    if (!(rho2 > 1e-24 * std::max(1.0, xnorm * xnorm))) continue;
    if (groups[g].members.size() > 1)
      notes.push_back("positive-dimensional critical set at lambda=" + std::to_string(lam) +
                      "; reporting axis representatives");
    for (double sign : {1.0, -1.0}) {
      VectorXd z = y;
      z(groups[g].members.front()) = sign * std::sqrt(rho2);
      out.push_back(std::move(z));
    }
  }
  return out;
}

std::vector<VectorXd> matrix_critical_points(const VectorXd& x, const MatrixRankAtMost& m) {
  const RowMatrix X = as_matrix(x, m);
  Eigen::JacobiSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const auto r = static_cast<std::size_t>(s.size());
  const std::size_t k = m.rank;
  std::vector<VectorXd> out;
  if (k > r) return out;
  const double cutoff = 1e-12 * std::max(1.0, s(0));
  // Every k-subset Omega of nonzero singular triplets gives sum_{i in Omega} s_i u_i v_i^T.
  std::vector<bool> mask(r, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  do {
    RowMatrix Y = RowMatrix::Zero(static_cast<Index>(m.rows), static_cast<Index>(m.cols));
    bool ok = true;
    for (std::size_t i = 0; i < r; ++i) {
      if (!mask[i]) continue;
      const auto ii = static_cast<Index>(i);
      if (!(s(ii) > cutoff)) ok = false;
      Y += s(ii) * svd.matrixU().col(ii) * svd.matrixV().col(ii).transpose();
    }
    if (ok) out.push_back(flatten(Y));
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

FactorMatrices hosvd_center(const DenseTensor& X, std::size_t k, std::mt19937_64& rng) {
  FactorMatrices f;
  std::vector<MatrixXd> U;
  for (std::size_t l = 0; l < X.order(); ++l) {
    Eigen::JacobiSVD<MatrixXd> svd(unfold(X, l), Eigen::ComputeThinU);
    const Index m = static_cast<Index>(X.shape()[l]);
    MatrixXd u(m, static_cast<Index>(k));
    for (Index j = 0; j < u.cols(); ++j)
      u.col(j) = j < svd.matrixU().cols() ? VectorXd(svd.matrixU().col(j)) : gaussian_vector(m, rng).normalized();
    U.push_back(std::move(u));
  }
  for (Index j = 0; j < static_cast<Index>(k); ++j) {
    std::vector<VectorXd> cols;
    for (const auto& u : U) cols.emplace_back(u.col(j));
    double w = contract_all(X, cols);
    if (std::abs(w) < 1e-12) w = hs_norm(X) / static_cast<double>(k);
    U[0].col(j) *= w;
  }
  balance(U);
  return U;
}

/// Gauss-Newton on the singular-tuple equations X(x_{-l}) = lambda x_l, |x_l| = 1,
/// from the given unit factors. Returns factors of lambda x_1 (x) ... (x) x_d.
std::optional<FactorMatrices> singular_tuple(const DenseTensor& X, std::vector<VectorXd> xs) {
  const Shape& shape = X.shape();
  const std::size_t d = shape.size();
  const auto n = static_cast<Index>(std::accumulate(shape.begin(), shape.end(), std::size_t{0}));
  const Index rows = n + static_cast<Index>(d);
  VectorXd theta(n + 1);
  Index o = 0;
  for (const auto& v : xs) {
    theta.segment(o, v.size()) = v;
    o += v.size();
  }
  theta(n) = contract_all(X, xs);
  auto split = [&](const VectorXd& t) {
    std::vector<VectorXd> v;
    Index off = 0;
    for (auto m : shape) {
      v.emplace_back(t.segment(off, static_cast<Index>(m)));
      off += static_cast<Index>(m);
    }
    return v;
  };
  auto eval = [&](const VectorXd& t, VectorXd& r, MatrixXd* J) {
    const auto v = split(t);
    const double lambda = t(n);
    r.resize(rows);
    if (J) J->setZero(rows, n + 1);
    Index ro = 0;
    for (std::size_t l = 0; l < d; ++l) {
      const auto ml = static_cast<Index>(shape[l]);
      r.segment(ro, ml) = contract_except(X, v, l) - lambda * v[l];
      if (J) {
        Index co = 0;
        for (std::size_t q = 0; q < d; ++q) {
          const auto mq = static_cast<Index>(shape[q]);
          if (q == l) {
            J->block(ro, co, ml, mq) = -lambda * MatrixXd::Identity(ml, mq);
          } else {
            auto w = v;
            for (Index j = 0; j < mq; ++j) {
              w[q] = VectorXd::Unit(mq, j);
              J->block(ro, co + j, ml, 1) = contract_except(X, w, l);
            }
          }
          co += mq;
        }
        J->block(ro, n, ml, 1) = -v[l];
      }
      ro += ml;
    }
    Index co = 0;
    for (std::size_t l = 0; l < d; ++l) {
      const auto ml = static_cast<Index>(shape[l]);
      r(n + static_cast<Index>(l)) = 0.5 * (v[l].squaredNorm() - 1.0);
      if (J) J->block(n + static_cast<Index>(l), co, 1, ml) = v[l].transpose();
      co += ml;
    }
  };
  LmOptions lm;
  lm.max_iterations = 100;
  lm.residual_tolerance = 1e-15 * std::max(1.0, hs_norm(X));
  const auto res = levenberg_marquardt(theta, eval, lm);
  if (!res.x.allFinite()) return std::nullopt;
  auto v = split(res.x);
  FactorMatrices f;
  for (auto& a : v) f.emplace_back(a.normalized());
  f.front() *= res.x(n);
  balance(f);
  return f;
}

struct TensorSearchResult {
  std::vector<CriticalPoint> points;
  std::size_t converged = 0;
};

TensorSearchResult tensor_critical_points(const VarietySpec& v, const Shape& shape, std::size_t k, const VectorXd& x,
                                          const CriticalOptions& opt) {
  const DenseTensor X(shape, x);
  const double xnorm = hs_norm(X);
  const std::size_t tangent_dim = generic_tangent_dim(shape, k);
  const double d = static_cast<double>(shape.size());
  std::mt19937_64 center_rng(opt.seed);
  const FactorMatrices center = hosvd_center(X, k, center_rng);

  std::vector<std::optional<CriticalPoint>> found(opt.starts);
  parallel_for(opt.starts, [&](std::size_t s) {
    std::mt19937_64 rng(opt.seed + s);
    FactorMatrices start;
    std::optional<FactorMatrices> solved;
    if (k == 1) {
      std::vector<VectorXd> xs;
      for (std::size_t l = 0; l < shape.size(); ++l)
        xs.push_back(s == 0 ? VectorXd(center[l].col(0).normalized()) : gaussian_vector(static_cast<Index>(shape[l]), rng).normalized());
      solved = singular_tuple(X, std::move(xs));
      if (!solved) return;
    } else if (s % 2 == 0) {
      start = center;
      for (auto& a : start) {
        const double spread = 0.5 * a.norm() / std::sqrt(static_cast<double>(a.size()));
        a += random_factors({static_cast<std::size_t>(a.rows())}, k, rng, spread).front();
      }
    } else {
      const double scale = std::pow(std::max(xnorm, 1e-12) / static_cast<double>(k), 1.0 / d);
      start = random_factors(shape, k, rng, 1.0);
      for (auto& a : start) a *= scale / std::sqrt(static_cast<double>(a.rows()));
    }
    if (!solved) solved = solve_stationary(X, std::move(start), opt.solver).factors;
    const auto& f = *solved;
    for (const auto& a : f)
      if (!a.allFinite()) return;
    for (Index j = 0; j < static_cast<Index>(k); ++j) {
      double term = 1.0;
      for (const auto& a : f) term *= a.col(j).norm();
      if (!(term > 1e-8 * std::max(1.0, xnorm))) return;  // collapsed onto a lower stratum
    }
    const MatrixXd J = cp_jacobian(f);
    const VectorXd y = cp_reconstruct(f).flat();
    std::size_t rank = 0;
    const double residual = tangent_residual(J, x - y, &rank);
    if (rank < tangent_dim || !(residual <= opt.residual_tolerance)) return;
    found[s] = CriticalPoint{y, (x - y).norm(), 0, residual, f};
  });

  TensorSearchResult out;
  for (auto& p : found)
    if (p) {
      ++out.converged;
      out.points.push_back(std::move(*p));
    }
  (void)v;
  return out;
}

CriticalPoint make_point(const VarietySpec& v, const VectorXd& x, VectorXd y, std::size_t stratum) {
  CriticalPoint p;
  p.distance = (x - y).norm();
  p.stratum = stratum;
  if (v.as<Subspace>()) {
    const auto& Q = v.orthonormal_basis();
    p.residual = (Q * (Q.transpose() * (x - y))).norm();
  } else if (const auto* q = v.as<DiagQuadricCone>()) {
    p.residual = quadric_tangent_residual(q->coeffs, x, y);
  } else if (const auto* m = v.as<MatrixRankAtMost>()) {
    p.residual = matrix_tangent_residual(as_matrix(x, *m), as_matrix(y, *m), m->rank);
  }
  p.y = std::move(y);
  return p;
}

void dedup_into(std::vector<CriticalPoint>& kept, std::vector<CriticalPoint> candidates, double tol) {
  for (auto& c : candidates) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const CriticalPoint& p) { return (p.y - c.y).norm() <= tol; });
    if (!dup) kept.push_back(std::move(c));
  }
}

}  // namespace

CriticalReport critical_set(const VarietySpec& v, const VectorXd& x, const CriticalOptions& opt) {
  require_dim(v, x, "critical_set");
  if (!x.allFinite()) throw std::invalid_argument("critical_set: query must be finite");
  if (opt.starts < 1) throw std::invalid_argument("critical_set: starts must be at least 1");

  CriticalReport report;
  report.query = x;
  report.starts = opt.starts;
  report.seed = opt.seed;
  report.variety = v.name();
  const auto tree = StratumTree::build(v);
  for (const auto& node : tree.strata) report.strata.push_back(node.label);

  std::vector<CriticalPoint> kept;
  for (std::size_t s = 0; s < tree.strata.size(); ++s) {
    const auto& spec = tree.strata[s].spec;
    std::vector<CriticalPoint> candidates;
    if (const auto* sub = spec.as<Subspace>()) {
      (void)sub;
      const auto& Q = spec.orthonormal_basis();
      candidates.push_back(make_point(spec, x, Q * (Q.transpose() * x), s));
    } else if (const auto* q = spec.as<DiagQuadricCone>()) {
      for (auto& y : quadric_critical_points(q->coeffs, x, report.notes)) candidates.push_back(make_point(spec, x, std::move(y), s));
    } else if (const auto* m = spec.as<MatrixRankAtMost>()) {
      for (auto& y : matrix_critical_points(x, *m)) candidates.push_back(make_point(spec, x, std::move(y), s));
    } else {
      Shape shape;
      std::size_t k = 1;
      if (const auto* t = spec.as<TensorRankOne>()) {
        shape = t->shape;
      } else {
        const auto& t2 = std::get<TensorRankAtMost>(spec.kind());
        shape = t2.shape;
        k = t2.rank;
        report.notes.push_back("singular locus of the rank<=" + std::to_string(k) +
                               " tensor variety is not characterized; search covers smooth points only");
      }
      auto res = tensor_critical_points(spec, shape, k, x, opt);
      report.notes.push_back("multistart: " + std::to_string(res.converged) + " of " + std::to_string(opt.starts) +
                             " starts reached a smooth critical point");
      candidates = std::move(res.points);
    }
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                    [&](const CriticalPoint& p) { return !(p.residual <= opt.residual_tolerance); }),
                     candidates.end());

    if (s == 0) {
      dedup_into(kept, std::move(candidates), opt.dedup_tolerance);
      report.delta_estimate = kept.size();
    } else {
      // Points on singular strata matter only if they could realize the distance.
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : kept) best = std::min(best, p.distance);
      std::vector<CriticalPoint> closer;
      for (auto& c : candidates)
        if (kept.empty() || c.distance < best - 1e-12) closer.push_back(std::move(c));
      dedup_into(kept, std::move(closer), opt.dedup_tolerance);
    }
  }
  if (kept.empty()) throw NumericError("no critical point found on " + v.name());

  std::stable_sort(kept.begin(), kept.end(),
                   [](const CriticalPoint& a, const CriticalPoint& b) { return a.distance < b.distance; });
  report.points = std::move(kept);
  if (report.points.size() > 1) report.uniqueness_gap = report.points[1].distance - report.points[0].distance;
  return report;
}

// ---------------------------------------------------------------------------
// Probes

bool quadric_transversality(const VectorXd& coeffs) {
  for (Index i = 0; i < coeffs.size(); ++i)
    if (coeffs(i) == 0.0) throw std::invalid_argument("quadric_transversality: coefficients must be nonzero");
  for (Index i = 0; i < coeffs.size(); ++i)
    for (Index j = i + 1; j < coeffs.size(); ++j)
      if (coeffs(i) == coeffs(j)) return false;
  return true;
}

double lipschitz_ratio(const VarietySpec& v, const VectorXd& x, const VectorXd& z, const CriticalOptions& opt) {
  const double gap = (x - z).norm();
  if (gap == 0.0) return 0.0;
  const double dx = critical_set(v, x, opt).distance();
  const double dz = critical_set(v, z, opt).distance();
  return std::abs(dx - dz) / gap;
}

double lipschitz_probe(const VarietySpec& v, std::size_t trials, std::uint64_t seed, std::size_t starts) {
  if (trials < 1) throw std::invalid_argument("lipschitz_probe: trials must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> exponent(-3.0, 0.0);
  const auto n = static_cast<Index>(v.ambient_dim());
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const VectorXd x = gaussian_vector(n, rng);
    // Alternate independent pairs with nearby pairs.
    const VectorXd z = t % 2 == 0 ? gaussian_vector(n, rng) : VectorXd(x + std::pow(10.0, exponent(rng)) * gaussian_vector(n, rng));
    CriticalOptions opt;
    opt.starts = starts;
    opt.seed = seed + t;
    worst = std::max(worst, lipschitz_ratio(v, x, z, opt));
  }
  return worst;
}

double uniqueness_probe(const VarietySpec& v, std::size_t trials, std::uint64_t seed, std::size_t starts) {
  if (trials < 1) throw std::invalid_argument("uniqueness_probe: trials must be at least 1");
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Index>(v.ambient_dim());
  std::size_t unique = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    VectorXd x = gaussian_vector(n, rng);
    while (constraint_residual(v, x) <= 1e-12) x = gaussian_vector(n, rng);  // queries on C are excluded
    CriticalOptions opt;
    opt.starts = starts;
    opt.seed = seed + t;
    if (critical_set(v, x, opt).uniqueness_gap > 1e-6) ++unique;
  }
  return static_cast<double>(unique) / static_cast<double>(trials);
}

bool orbit_closure_check(const VarietySpec& v, const VectorXd& x, const CriticalReport& report) {
  Shape shape;
  if (const auto* t = v.as<TensorRankOne>()) shape = t->shape;
  else if (const auto* t2 = v.as<TensorRankAtMost>()) shape = t2->shape;
  else return false;
  const DenseTensor X(shape, x);
  if (!X.is_cubical() || !is_symmetric(X, 1e-10 * std::max(1.0, hs_norm(X)))) return false;
  const std::size_t d = shape.size();
  for (const auto& p : report.points) {
    const DenseTensor Y(shape, p.y);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i + 1; j < d; ++j) {
        std::vector<std::size_t> perm(d);
        std::iota(perm.begin(), perm.end(), 0);
        std::swap(perm[i], perm[j]);
        const VectorXd moved = permute_modes(Y, perm).flat();
        const bool hit = std::any_of(report.points.begin(), report.points.end(),
                                     [&](const CriticalPoint& q) { return (q.y - moved).norm() <= 1e-6; });
        if (!hit) return false;
      }
    }
  }
  return true;
}

double finite_difference_stationarity(const VectorXd& x, const Shape& shape, const FactorMatrices& factors,
                                      std::size_t directions, std::uint64_t seed, double step) {
  const std::size_t k = factor_rank(factors);
  const VectorXd theta = pack(factors);
  std::mt19937_64 rng(seed);
  auto f = [&](const VectorXd& th) { return (x - cp_reconstruct(unpack(th, shape, k)).flat()).squaredNorm(); };
  double worst = 0.0;
  for (std::size_t i = 0; i < directions; ++i) {
    const VectorXd dir = gaussian_vector(theta.size(), rng).normalized();
    const double deriv = (f(theta + step * dir) - f(theta - step * dir)) / (2.0 * step);
    worst = std::max(worst, std::abs(deriv));
  }
  return worst;
}

}  // namespace edcrit
