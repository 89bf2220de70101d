#pragma once

#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace edcrit {

using Rational = boost::multiprecision::cpp_rational;
using RationalMatrix = std::vector<std::vector<Rational>>;

/// "p/q", or "p" for integers.
std::string to_string(const Rational& q);
/// Accepts "p", "p/q" and "-p/q".
Rational parse_rational(const std::string& text);
double to_double(const Rational& q);

/// Rank by fraction-exact Gaussian elimination.
std::size_t exact_rank(RationalMatrix a);
Rational exact_determinant(RationalMatrix a);
/// Inverse of a square matrix; throws std::invalid_argument if singular.
RationalMatrix exact_inverse(RationalMatrix a);

}  // namespace edcrit
