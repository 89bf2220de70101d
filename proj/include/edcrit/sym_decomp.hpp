#pragma once

#include <optional>
#include <vector>

#include "edcrit/rational.hpp"
#include "edcrit/tensor.hpp"

namespace edcrit {

using RationalVector = std::vector<Rational>;
using RationalSymTensor = BasicSymTensor<Rational>;

/// sum_i c_i (x)^d v_i with exact coefficients.
struct SymCombination {
  std::size_t d = 0;
  std::vector<std::pair<Rational, RationalVector>> terms;
};

/// (x)^d u
RationalSymTensor sym_power(const RationalVector& u, std::size_t d);

/// S_{k,d-k}(u,v): all arrangements of k copies of u and d-k copies of v, i.e. the
/// coefficient of t^k in (x)^d (t u + v).
RationalSymTensor mixed_power(const RationalVector& u, const RationalVector& v, std::size_t k, std::size_t d);

/// Writes S_{k,d-k}(u,v) as a combination of (x)^d(tau_i u + v) and (x)^d u by an
/// exact Vandermonde inversion. Empty `nodes` means 0, 1, ..., d-1.
SymCombination vandermonde_decompose(const RationalVector& u, const RationalVector& v, std::size_t k, std::size_t d,
                                     std::vector<Rational> nodes = {});

/// Sum of the combination as a symmetric tensor on m coordinates.
RationalSymTensor expand(const SymCombination& c, std::size_t m);

struct PowerBasis {
  std::vector<RationalVector> vectors;  // binom(m+d-1, d) integer vectors
  RationalMatrix coefficients;          // row i: entries of (x)^d vectors[i] by sorted index
  Rational determinant;
};

/// Vectors whose d-th powers form a basis of the symmetric tensors. Candidates are
/// e_1..e_{m-1} followed by e_m + sum_j t_j e_j over the node grid t_j in {0..d-1};
/// a candidate is kept when it raises the exact rank.
PowerBasis power_basis(std::size_t m, std::size_t d);

std::size_t sym_dim(std::size_t m, std::size_t d);

SymTensor to_double(const RationalSymTensor& s);

}  // namespace edcrit
