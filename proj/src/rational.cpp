#include "edcrit/rational.hpp"

#include <stdexcept>

namespace edcrit {

std::string to_string(const Rational& q) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

Rational parse_rational(const std::string& text) {
  using Int = boost::multiprecision::cpp_int;
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) return Rational(Int(text));
    const Int den(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator");
    return Rational(Int(text.substr(0, slash)), den);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid rational literal '" + text + "'");
  }
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

namespace {

/// Reduces a to row-echelon form in place; returns the pivot count and the
/// determinant sign/product when the matrix is square.
std::size_t eliminate(RationalMatrix& a, Rational* det) {
  const std::size_t rows = a.size();
  const std::size_t cols = rows ? a.front().size() : 0;
  std::size_t rank = 0;
  Rational d = 1;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t pivot = rank;
    while (pivot < rows && a[pivot][c] == 0) ++pivot;
    if (pivot == rows) {
      d = 0;
      continue;
    }
    if (pivot != rank) {
      std::swap(a[pivot], a[rank]);
      d = -d;
    }
    d *= a[rank][c];
    for (std::size_t r = rank + 1; r < rows; ++r) {
      if (a[r][c] == 0) continue;
      const Rational f = a[r][c] / a[rank][c];
      for (std::size_t j = c; j < cols; ++j) a[r][j] -= f * a[rank][j];
    }
    ++rank;
  }
  if (det) *det = rank == rows && rows == cols ? d : Rational(0);
  return rank;
}

}  // namespace

std::size_t exact_rank(RationalMatrix a) { return eliminate(a, nullptr); }

Rational exact_determinant(RationalMatrix a) {
  for (const auto& row : a)
    if (row.size() != a.size()) throw std::invalid_argument("exact_determinant: matrix must be square");
  if (a.empty()) return 1;
  Rational det;
  eliminate(a, &det);
  return det;
}

RationalMatrix exact_inverse(RationalMatrix a) {
  const std::size_t n = a.size();
  for (auto& row : a) {
    if (row.size() != n) throw std::invalid_argument("exact_inverse: matrix must be square");
    row.resize(2 * n, Rational(0));
  }
  for (std::size_t i = 0; i < n; ++i) a[i][n + i] = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t pivot = c;
    while (pivot < n && a[pivot][c] == 0) ++pivot;
    if (pivot == n) throw std::invalid_argument("exact_inverse: matrix is singular");
    std::swap(a[pivot], a[c]);
    const Rational inv = 1 / a[c][c];
    for (auto& x : a[c]) x *= inv;
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[r][c] == 0) continue;
      const Rational f = a[r][c];
      for (std::size_t j = c; j < 2 * n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  RationalMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(a[i].begin() + static_cast<std::ptrdiff_t>(n), a[i].end());
  return out;
}

}  // namespace edcrit
