#include "edcrit/sym_decomp.hpp"

#include <algorithm>
#include <stdexcept>

namespace edcrit {

namespace {

void check_vectors(const RationalVector& u, const RationalVector& v) {
  if (u.empty()) throw std::invalid_argument("vectors must be nonempty");
  if (u.size() != v.size()) throw std::invalid_argument("u and v must have the same length");
}

}  // namespace

RationalSymTensor sym_power(const RationalVector& u, std::size_t d) {
  if (u.empty()) throw std::invalid_argument("sym_power: vector must be nonempty");
  RationalSymTensor s(u.size(), d);
  const auto idx = sorted_indices(u.size(), d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Rational p = 1;
    for (auto i : idx[r]) p *= u[i];
    s.coeffs()[r] = p;
  }
  return s;
}

RationalSymTensor mixed_power(const RationalVector& u, const RationalVector& v, std::size_t k, std::size_t d) {
  check_vectors(u, v);
  if (k > d) throw std::invalid_argument("mixed_power: need 0 <= k <= d, got k=" + std::to_string(k));
  RationalSymTensor s(u.size(), d);
  const auto idx = sorted_indices(u.size(), d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    // prod_p (t u_{i_p} + v_{i_p}), coefficient of t^k
    std::vector<Rational> poly{Rational(1)};
    for (auto i : idx[r]) {
      std::vector<Rational> next(poly.size() + 1, Rational(0));
      for (std::size_t j = 0; j < poly.size(); ++j) {
        next[j] += poly[j] * v[i];
        next[j + 1] += poly[j] * u[i];
      }
      poly = std::move(next);
    }
    s.coeffs()[r] = poly[k];
  }
  return s;
}

SymCombination vandermonde_decompose(const RationalVector& u, const RationalVector& v, std::size_t k, std::size_t d,
                                     std::vector<Rational> nodes) {
  check_vectors(u, v);
  if (d < 1) throw std::invalid_argument("vandermonde_decompose: d must be positive");
  if (k > d) throw std::invalid_argument("vandermonde_decompose: need 0 <= k <= d, got k=" + std::to_string(k));
  if (nodes.empty())
    for (std::size_t i = 0; i < d; ++i) nodes.emplace_back(static_cast<long long>(i));
  if (nodes.size() != d)
    throw std::invalid_argument("vandermonde_decompose: need exactly d=" + std::to_string(d) + " nodes");
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (nodes[i] == nodes[j]) throw std::invalid_argument("vandermonde_decompose: nodes must be distinct");

  SymCombination out;
  out.d = d;
  if (k == d) {
    out.terms.emplace_back(Rational(1), u);
    return out;
  }
  // (x)^d(tau_i u + v) - tau_i^d (x)^d u = sum_{j<d} tau_i^j S_j
  RationalMatrix V(d, RationalVector(d));
  for (std::size_t i = 0; i < d; ++i) {
    Rational p = 1;
    for (std::size_t j = 0; j < d; ++j) {
      V[i][j] = p;
      p *= nodes[i];
    }
  }
  const RationalMatrix W = exact_inverse(V);
  Rational u_coeff = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const Rational& w = W[k][i];
    if (w == 0) continue;
    Rational taud = 1;
    for (std::size_t j = 0; j < d; ++j) taud *= nodes[i];
    u_coeff -= w * taud;
    RationalVector x(u.size());
    for (std::size_t a = 0; a < u.size(); ++a) x[a] = nodes[i] * u[a] + v[a];
    out.terms.emplace_back(w, std::move(x));
  }
  if (u_coeff != 0) out.terms.emplace_back(u_coeff, u);
  return out;
}

RationalSymTensor expand(const SymCombination& c, std::size_t m) {
  RationalSymTensor s(m, c.d);
  for (const auto& [coeff, x] : c.terms) {
    if (x.size() != m) throw std::invalid_argument("expand: vector length differs from m");
    const auto p = sym_power(x, c.d);
    for (std::size_t r = 0; r < s.coeffs().size(); ++r) s.coeffs()[r] += coeff * p.coeffs()[r];
  }
  return s;
}

PowerBasis power_basis(std::size_t m, std::size_t d) {
  if (m < 2 || d < 2) throw std::invalid_argument("power_basis: need m, d >= 2");
  std::vector<RationalVector> candidates;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    RationalVector e(m, Rational(0));
    e[j] = 1;
    candidates.push_back(std::move(e));
  }
  // Grid e_m + sum_j t_j e_j; t_{m-1} varies slowest, following the peeling order.
  std::vector<std::size_t> t(m - 1, 0);
  while (true) {
    RationalVector x(m, Rational(0));
    x[m - 1] = 1;
    for (std::size_t j = 0; j + 1 < m; ++j) x[j] = static_cast<long long>(t[j]);
    candidates.push_back(std::move(x));
    std::size_t pos = 0;
    while (pos < t.size() && ++t[pos] == d) t[pos++] = 0;
    if (pos == t.size()) break;
  }

  const std::size_t n = sym_dim(m, d);
  PowerBasis out;
  for (const auto& x : candidates) {
    if (out.vectors.size() == n) break;
    auto trial = out.coefficients;
    trial.push_back(sym_power(x, d).coeffs());
    if (exact_rank(trial) == trial.size()) {
      out.coefficients = std::move(trial);
      out.vectors.push_back(x);
    }
  }
  if (out.vectors.size() != n)
    throw NumericError("power_basis: candidate set spans only " + std::to_string(out.vectors.size()) + " of " +
                       std::to_string(n) + " dimensions");
  out.determinant = exact_determinant(out.coefficients);
  return out;
}

std::size_t sym_dim(std::size_t m, std::size_t d) {
  if (m < 1 || d < 1) throw std::invalid_argument("sym_dim: need m, d >= 1");
  return binomial(m + d - 1, d);
}

SymTensor to_double(const RationalSymTensor& s) {
  std::vector<double> c;
  c.reserve(s.coeffs().size());
  for (const auto& q : s.coeffs()) c.push_back(to_double(q));
  return SymTensor(s.m(), s.d(), std::move(c));
}

}  // namespace edcrit
