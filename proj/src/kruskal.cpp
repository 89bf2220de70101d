#include "edcrit/kruskal.hpp"

#include <algorithm>
#include <stdexcept>

namespace edcrit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void FactorBundle::validate() const {
  if (Y.cols() < 1) throw std::invalid_argument("FactorBundle: at least one term required");
  if (Z.cols() != Y.cols() || W.cols() != Y.cols())
    throw std::invalid_argument("FactorBundle: Y, Z, W must have the same number of columns");
  for (const MatrixXd* m : {&Y, &Z, &W})
    for (Index j = 0; j < m->cols(); ++j)
      if (m->col(j).isZero(0.0)) throw std::invalid_argument("FactorBundle: zero column " + std::to_string(j));
}

std::size_t krank(const MatrixXd& columns) {
  const Index l = columns.cols();
  if (l == 0) throw std::invalid_argument("krank: matrix has no columns");
  for (Index j = 0; j < l; ++j)
    if (columns.col(j).isZero(0.0)) throw std::invalid_argument("krank: zero column " + std::to_string(j));
  const double smax = Eigen::JacobiSVD<MatrixXd>(columns).singularValues()(0);
  const double cutoff = 1e-10 * smax;
  const Index kmax = std::min<Index>(l, columns.rows());

  std::size_t result = 0;
  for (Index k = 1; k <= kmax; ++k) {
    std::vector<bool> mask(static_cast<std::size_t>(l), false);
    std::fill(mask.begin(), mask.begin() + k, true);
    bool all = true;
    MatrixXd sub(columns.rows(), k);
    do {
      Index c = 0;
      for (Index j = 0; j < l; ++j)
        if (mask[static_cast<std::size_t>(j)]) sub.col(c++) = columns.col(j);
      const auto s = Eigen::JacobiSVD<MatrixXd>(sub).singularValues();
      if (!(s(k - 1) > cutoff)) all = false;
    } while (all && std::prev_permutation(mask.begin(), mask.end()));
    if (!all) break;
    result = static_cast<std::size_t>(k);
  }
  return result;
}

KruskalCertificate certify(const FactorBundle& f) {
  f.validate();
  KruskalCertificate c;
  c.r = f.terms();
  c.kappas = {krank(f.Y), krank(f.Z), krank(f.W)};
  c.condition_met = c.kappas[0] + c.kappas[1] + c.kappas[2] >= 2 * c.r + 2;
  if (c.condition_met) c.rank_certified = c.r;
  c.uniqueness_certified = c.condition_met;
  c.verdict = c.condition_met ? "certified" : "kruskal condition failed";
  return c;
}

namespace {

VectorXd kron(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

VectorXd kron_range(const std::vector<VectorXd>& f, std::size_t begin, std::size_t end) {
  VectorXd out = VectorXd::Ones(1);
  for (std::size_t i = begin; i < end; ++i) out = kron(out, f[i]);
  return out;
}

void check_terms(std::span<const RankOneTerm> terms, const ModeSplit& split) {
  if (terms.empty()) throw std::invalid_argument("at least one term required");
  if (split.a == 0 || split.b == 0 || split.c == 0) throw std::invalid_argument("ModeSplit: blocks must be positive");
  const Shape shape = terms.front().shape();
  for (const auto& t : terms) {
    if (t.shape() != shape) throw std::invalid_argument("terms must share one shape");
    if (t.weight() == 0.0) throw std::invalid_argument("terms must be nonzero");
  }
  if (split.total() != shape.size())
    throw std::invalid_argument("ModeSplit: a+b+c must equal the order " + std::to_string(shape.size()));
}

void check_cubical(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d) {
  if (m < 2) throw std::invalid_argument("m must be at least 2");
  if (d < 3) throw std::invalid_argument("d must be at least 3");
  for (const auto& t : terms)
    if (t.shape() != Shape(d, m)) throw std::invalid_argument("terms must have shape " + shape_string(Shape(d, m)));
}

std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

bool all_symmetric(std::span<const RankOneTerm> terms) {
  return std::all_of(terms.begin(), terms.end(), [](const RankOneTerm& t) {
    const auto& f = t.factors();
    return std::all_of(f.begin(), f.end(), [&](const VectorXd& u) {
      return u.size() == f.front().size() && (u - f.front()).norm() <= 1e-12;
    });
  });
}

FactorBundle grouped_bundle(std::span<const RankOneTerm> terms, const ModeSplit& split) {
  check_terms(terms, split);
  const auto& f0 = terms.front().factors();
  const Index r = static_cast<Index>(terms.size());
  const Index na = kron_range(f0, 0, split.a).size();
  const Index nb = kron_range(f0, split.a, split.a + split.b).size();
  const Index nc = kron_range(f0, split.a + split.b, split.total()).size();
  FactorBundle out{MatrixXd(na, r), MatrixXd(nb, r), MatrixXd(nc, r)};
  for (Index j = 0; j < r; ++j) {
    const auto& t = terms[static_cast<std::size_t>(j)];
    out.Y.col(j) = t.weight() * kron_range(t.factors(), 0, split.a);
    out.Z.col(j) = kron_range(t.factors(), split.a, split.a + split.b);
    out.W.col(j) = kron_range(t.factors(), split.a + split.b, split.total());
  }
  return out;
}

bool is_abc_generic(std::span<const RankOneTerm> terms, const ModeSplit& split, std::size_t m) {
  const FactorBundle f = grouped_bundle(terms, split);
  const bool sym = all_symmetric(terms);
  const std::size_t r = terms.size();
  auto bound = [&](std::size_t a) { return std::min(sym ? binomial(m + a - 1, a) : ipow(m, a), r); };
  return krank(f.Y) >= bound(split.a) && krank(f.Z) >= bound(split.b) && krank(f.W) >= bound(split.c);
}

Rational n_bound(std::size_t m, std::size_t d) {
  if (m < 2) throw std::invalid_argument("n_bound: m must be at least 2");
  if (d < 3) throw std::invalid_argument("n_bound: d must be at least 3");
  const auto mm = static_cast<long long>(m);
  if (d % 2 == 1) return Rational(binomial(m + (d - 3) / 2, m - 1)) + Rational(mm - 2, 2);
  return Rational(binomial(m + (d - 4) / 2, m - 1)) + Rational(mm - 2);
}

Rational n_bound_tensor(std::size_t m, std::size_t d) {
  if (m < 2) throw std::invalid_argument("n_bound_tensor: m must be at least 2");
  if (d < 3) throw std::invalid_argument("n_bound_tensor: d must be at least 3");
  const auto mm = static_cast<long long>(m);
  const std::size_t b = (d - 1) / 2;
  if (d % 2 == 1) return Rational(ipow(m, b)) + Rational(mm - 2, 2);
  return Rational(ipow(m, b)) + Rational(mm - 2);
}

namespace {

KruskalCertificate certify_with_bound(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d,
                                      const Rational& bound) {
  const ModeSplit split = ModeSplit::canonical(d);
  KruskalCertificate c = certify(grouped_bundle(terms, split));
  c.bound = bound;
  c.generic = is_abc_generic(terms, split, m);
  const bool within = Rational(terms.size()) <= bound;
  if (!within) c.verdict = "bound exceeded";
  else if (!*c.generic) c.verdict = "not generic";
  else if (!c.condition_met) c.verdict = "kruskal condition failed";
  else c.verdict = "certified";
  return c;
}

}  // namespace

KruskalCertificate certify_symmetric_rank(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d) {
  check_cubical(terms, m, d);
  if (terms.empty()) throw std::invalid_argument("certify_symmetric_rank: at least one term required");
  if (!all_symmetric(terms)) throw std::invalid_argument("certify_symmetric_rank: terms must be symmetric");
  for (const auto& t : terms)
    if (std::abs(std::abs(t.weight()) - 1.0) > 1e-9)
      throw std::invalid_argument("certify_symmetric_rank: weights must be +1 or -1 (unit factors), got " +
                                  std::to_string(t.weight()));
  return certify_with_bound(terms, m, d, n_bound(m, d));
}

KruskalCertificate certify_tensor_rank(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d) {
  check_cubical(terms, m, d);
  if (terms.empty()) throw std::invalid_argument("certify_tensor_rank: at least one term required");
  return certify_with_bound(terms, m, d, n_bound_tensor(m, d));
}

}  // namespace edcrit
