#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "edcrit/tensor.hpp"

namespace edcrit {

using GFMatrix = std::vector<std::vector<std::uint32_t>>;
using GFVector = std::vector<std::uint32_t>;

bool is_prime(std::uint32_t p);

/// Tensor over GF(p), entries row-major in [0, p).
struct GFTensor {
  std::uint32_t p = 2;
  Shape shape;
  GFVector entries;

  GFTensor() = default;
  /// Reduces entries mod p; throws std::invalid_argument for composite p or a size mismatch.
  GFTensor(std::uint32_t p, Shape shape, std::vector<std::int64_t> entries);
  static GFTensor zeros(std::uint32_t p, Shape shape);

  std::uint32_t& operator()(std::initializer_list<std::size_t> index);
  std::uint32_t operator()(std::initializer_list<std::size_t> index) const;
  bool is_symmetric() const;
  bool operator==(const GFTensor&) const = default;
};

/// Row-echelon rank over GF(p). Requires p prime and p <= 97.
std::size_t gf_rank(GFMatrix a, std::uint32_t p);

/// a^{-1} mod p for a != 0.
std::uint32_t gf_inverse(std::uint32_t a, std::uint32_t p);

/// (x)_i u_i over GF(p).
GFTensor gf_outer(std::uint32_t p, const std::vector<GFVector>& factors);
/// Applies g to every mode.
GFTensor gf_transform(const GFTensor& t, const GFMatrix& g);

struct SymTerm {
  std::uint32_t weight = 1;
  GFVector u;
};

struct SrankResult {
  std::optional<std::size_t> srank;
  std::vector<SymTerm> witness;  // sum_j weight_j (x)^d u_j
};

struct RankResult {
  std::optional<std::size_t> rank;
  std::vector<std::vector<GFVector>> witness;  // one factor list per term
};

/// Smallest s <= max_terms with S = sum_j t_j (x)^d u_j over GF(p); absent if none.
/// Requires p^m <= 64 and max_terms <= 4.
SrankResult srank_exhaustive(const GFTensor& s, std::size_t max_terms);

/// Smallest r <= max_terms with t a sum of r rank-one tensors over GF(p).
RankResult rank_exhaustive(const GFTensor& t, std::size_t max_terms);

struct Prop61Result {
  bool inequality_holds = false;  // binom(m+d-1, d) > (p^m - 1)/(p - 1)
  std::size_t sym_dim = 0;
  std::size_t span_dim = 0;  // dimension of the span of the d-th powers
  std::optional<GFTensor> witness;
  GFVector witness_coords;  // coordinates by sorted index
  GFMatrix span_basis;      // d-th powers of the nonzero vectors, by sorted index
};

/// When the inequality holds, returns a symmetric tensor outside the span of
/// {(x)^d u : u != 0}. Requires p^m <= 256.
Prop61Result prop61_witness(std::uint32_t p, std::size_t m, std::size_t d);

/// e1 (x) e2 + e2 (x) e1 over GF(2).
GFTensor example64_tensor();

}  // namespace edcrit
