#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "edcrit/finite_field.hpp"

using namespace edcrit;

namespace {

/// Determinant mod p by permutation expansion.
std::uint32_t det_mod(const GFMatrix& a, std::uint32_t p) {
  const std::size_t n = a.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t total = 0;
  do {
    std::size_t inversions = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) inversions += perm[i] > perm[j];
    std::int64_t prod = 1;
    for (std::size_t i = 0; i < n; ++i) prod = prod * a[i][perm[i]] % p;
    total += inversions % 2 ? -prod : prod;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<std::uint32_t>(((total % p) + p) % p);
}

/// Rank as the size of the largest nonzero minor.
std::size_t minor_rank(const GFMatrix& a, std::uint32_t p) {
  const std::size_t rows = a.size(), cols = a[0].size();
  for (std::size_t k = std::min(rows, cols); k > 0; --k) {
    std::vector<bool> rp(rows, false), cp(cols, false);
    std::fill(rp.begin(), rp.begin() + static_cast<std::ptrdiff_t>(k), true);
    do {
      std::fill(cp.begin(), cp.end(), false);
      std::fill(cp.begin(), cp.begin() + static_cast<std::ptrdiff_t>(k), true);
      do {
        GFMatrix sub;
        for (std::size_t r = 0; r < rows; ++r) {
          if (!rp[r]) continue;
          sub.emplace_back();
          for (std::size_t c = 0; c < cols; ++c)
            if (cp[c]) sub.back().push_back(a[r][c]);
        }
        if (det_mod(sub, p) != 0) return k;
      } while (std::prev_permutation(cp.begin(), cp.end()));
    } while (std::prev_permutation(rp.begin(), rp.end()));
  }
  return 0;
}

/// Dense evaluation of sum_j w_j (x)^d u_j.
GFTensor sum_of_powers(std::uint32_t p, std::size_t d, const std::vector<SymTerm>& terms, std::size_t m) {
  GFTensor t = GFTensor::zeros(p, Shape(d, m));
  MultiIndex i(d, 0);
  std::size_t flat = 0;
  do {
    std::uint64_t v = 0;
    for (const auto& term : terms) {
      std::uint64_t prod = term.weight;
      for (std::size_t k : i) prod = prod * term.u[k] % p;
      v += prod;
    }
    t.entries[flat++] = static_cast<std::uint32_t>(v % p);
  } while (next_index(i, t.shape));
  return t;
}

GFTensor sum_of_products(std::uint32_t p, const std::vector<std::vector<GFVector>>& terms, const Shape& shape) {
  GFTensor t = GFTensor::zeros(p, shape);
  for (const auto& factors : terms) {
    const GFTensor r = gf_outer(p, factors);
    for (std::size_t i = 0; i < t.entries.size(); ++i) t.entries[i] = (t.entries[i] + r.entries[i]) % p;
  }
  return t;
}

/// Symmetric tensor with random values on each sorted multi-index.
GFTensor random_symmetric(std::uint32_t p, std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> value(0, p - 1);
  std::map<MultiIndex, std::uint32_t> by_sorted;
  GFTensor t = GFTensor::zeros(p, Shape(d, m));
  MultiIndex i(d, 0);
  std::size_t flat = 0;
  do {
    MultiIndex s = i;
    std::sort(s.begin(), s.end());
    auto it = by_sorted.find(s);
    if (it == by_sorted.end()) it = by_sorted.emplace(s, value(rng)).first;
    t.entries[flat++] = it->second;
  } while (next_index(i, t.shape));
  return t;
}

GFMatrix random_invertible(std::uint32_t p, std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> value(0, p - 1);
  for (;;) {
    GFMatrix g(m, GFVector(m));
    for (auto& row : g)
      for (auto& x : row) x = value(rng);
    if (det_mod(g, p) != 0) return g;
  }
}

}  // namespace

TEST_SUITE("finite-field") {

TEST_CASE("gf arithmetic examples") {
  CHECK(is_prime(2));
  CHECK(is_prime(97));
  CHECK(!is_prime(1));
  CHECK(!is_prime(91));
  CHECK(gf_inverse(3, 7) == 5);
  CHECK(gf_inverse(1, 2) == 1);
  CHECK_THROWS_AS(gf_inverse(0, 5), std::invalid_argument);
  CHECK(gf_rank({{1, 1}, {1, 1}}, 2) == 1);
  CHECK(gf_rank({{1, 2}, {2, 1}}, 3) == 1);
  CHECK(gf_rank({{1, 2}, {2, 1}}, 5) == 2);
  CHECK_THROWS_AS(gf_rank({{1, 0}, {0, 1}}, 4), std::invalid_argument);
  CHECK_THROWS_AS(GFTensor(6, Shape{2}, {1, 2}), std::invalid_argument);
  CHECK(GFTensor(3, Shape{2}, {-1, 4}).entries == GFVector{2, 1});
}

TEST_CASE("gf_rank agrees with the largest nonzero minor") {
  std::mt19937_64 rng(1);
  for (std::uint32_t p : {2u, 3u, 5u, 7u}) {
    std::uniform_int_distribution<std::uint32_t> value(0, p - 1);
    for (int t = 0; t < 40; ++t) {
      const std::size_t rows = 1 + static_cast<std::size_t>(t % 4), cols = 1 + static_cast<std::size_t>((t / 4) % 4);
      GFMatrix a(rows, GFVector(cols));
      for (auto& row : a)
        for (auto& x : row) x = t % 3 ? value(rng) : value(rng) % 2;
      CHECK(gf_rank(a, p) == minor_rank(a, p));
    }
  }
}

TEST_CASE("the GF(2) example has rank 2 and symmetric rank 3") {
  const GFTensor t = example64_tensor();
  CHECK(t.is_symmetric());
  CHECK(t.entries == GFVector{0, 1, 1, 0});
  const auto r = rank_exhaustive(t, 4);
  REQUIRE(r.rank);
  CHECK(*r.rank == 2);
  CHECK(sum_of_products(2, r.witness, t.shape) == t);

  const auto s = srank_exhaustive(t, 4);
  REQUIRE(s.srank);
  CHECK(*s.srank == 3);
  CHECK(sum_of_powers(2, 2, s.witness, 2) == t);

  CHECK(!srank_exhaustive(t, 2).srank);
  CHECK(srank_exhaustive(t, 2).witness.empty());
}

TEST_CASE("small rank and srank examples") {
  const GFTensor zero = GFTensor::zeros(3, Shape{2, 2, 2});
  CHECK(*rank_exhaustive(zero, 2).rank == 0);
  CHECK(*srank_exhaustive(zero, 2).srank == 0);

  const GFTensor cube = sum_of_powers(3, 3, {{1, {1, 1}}}, 2);
  CHECK(*srank_exhaustive(cube, 3).srank == 1);
  CHECK(*rank_exhaustive(cube, 3).rank == 1);

  const GFTensor neg = sum_of_powers(3, 3, {{2, {1, 2}}}, 2);
  const auto s = srank_exhaustive(neg, 3);
  CHECK(*s.srank == 1);
  CHECK(sum_of_powers(3, 3, s.witness, 2) == neg);

  const GFTensor general = gf_outer(2, {{1, 0}, {0, 1}, {1, 1}});
  CHECK(*rank_exhaustive(general, 2).rank == 1);
  CHECK_THROWS_AS(srank_exhaustive(general, 2), std::invalid_argument);
  CHECK_THROWS_AS(srank_exhaustive(zero, 5), std::invalid_argument);
  CHECK_THROWS_AS(srank_exhaustive(GFTensor::zeros(5, Shape{3, 3}), 2), std::invalid_argument);
}

TEST_CASE("witnesses reproduce the tensor and srank dominates rank") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 25; ++t) {
    const std::uint32_t p = t % 2 ? 2 : 3;
    const GFTensor s = random_symmetric(p, 2, 3, rng);
    const auto sr = srank_exhaustive(s, 4);
    const auto r = rank_exhaustive(s, 4);
    REQUIRE(r.rank);
    CHECK(sum_of_products(p, r.witness, s.shape) == s);
    if (sr.srank) {
      CHECK(*sr.srank >= *r.rank);
      CHECK(sr.witness.size() == *sr.srank);
      CHECK(sum_of_powers(p, 3, sr.witness, 2) == s);
    }
  }
}

TEST_CASE("rank and srank are GL(m) invariant") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::uint32_t p = t % 2 ? 2 : 3;
    const GFTensor s = random_symmetric(p, 2, 3, rng);
    const GFMatrix g = random_invertible(p, 2, rng);
    const GFTensor gs = gf_transform(s, g);
    CHECK(gs.is_symmetric());
    CHECK(rank_exhaustive(gs, 4).rank == rank_exhaustive(s, 4).rank);
    CHECK(srank_exhaustive(gs, 4).srank == srank_exhaustive(s, 4).srank);
  }
}

TEST_CASE("tensors outside the span of powers exist exactly when the inequality holds") {
  const auto a = prop61_witness(2, 2, 3);
  CHECK(a.inequality_holds);
  CHECK(a.sym_dim == 4);
  CHECK(a.span_dim < a.sym_dim);
  REQUIRE(a.witness);
  CHECK(a.witness->is_symmetric());
  CHECK(!srank_exhaustive(*a.witness, 4).srank);

  const auto b = prop61_witness(2, 2, 2);
  CHECK(!b.inequality_holds);
  CHECK(!b.witness);

  const auto c = prop61_witness(3, 2, 4);
  CHECK(c.inequality_holds);
  REQUIRE(c.witness);
  CHECK(c.sym_dim == 5);
}

TEST_CASE("outside-span witnesses avoid every combination of powers (enumeration oracle)") {
  for (const auto& [p, m, d] : std::vector<std::array<std::uint32_t, 3>>{{2, 2, 3}, {3, 2, 4}, {2, 3, 4}}) {
    const auto res = prop61_witness(p, m, d);
    REQUIRE(res.witness);
    // all nonzero vectors of GF(p)^m
    std::vector<GFVector> vs;
    GFVector u(m, 0);
    for (;;) {
      std::size_t k = 0;
      while (k < m && ++u[k] == p) u[k++] = 0;
      if (k == m) break;
      vs.push_back(u);
    }
    // every combination sum c_u (x)^d u, coefficients in GF(p)
    std::vector<std::uint32_t> c(vs.size(), 0);
    bool hit = false;
    for (;;) {
      std::vector<SymTerm> terms;
      for (std::size_t i = 0; i < vs.size(); ++i)
        if (c[i]) terms.push_back({c[i], vs[i]});
      hit = hit || sum_of_powers(p, d, terms, m) == *res.witness;
      std::size_t k = 0;
      while (k < c.size() && ++c[k] == p) c[k++] = 0;
      if (k == c.size()) break;
    }
    CHECK(!hit);
    GFMatrix extended = res.span_basis;
    extended.push_back(res.witness_coords);
    CHECK(gf_rank(extended, p) == gf_rank(res.span_basis, p) + 1);
  }
}

TEST_CASE("powers span the symmetric tensors when the inequality fails") {
  for (const auto& [p, m, d] : std::vector<std::array<std::uint32_t, 3>>{{2, 2, 2}, {3, 2, 2}, {5, 2, 3}, {3, 3, 2}}) {
    const auto res = prop61_witness(p, m, d);
    CHECK(!res.inequality_holds);
    CHECK(res.span_dim == res.sym_dim);
    CHECK(!res.witness);
  }
}

}  // TEST_SUITE
