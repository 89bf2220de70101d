#include "edcrit/finite_field.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace edcrit {

namespace {

constexpr double kMaxLeaves = 3e7;
constexpr std::size_t kMaxEntries = 4096;

void check_field(std::uint32_t p) {
  if (!is_prime(p)) throw std::invalid_argument("GF(p): p=" + std::to_string(p) + " is not prime");
  if (p > 97) throw std::invalid_argument("GF(p): p must be at most 97");
}

std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

/// Nonzero vectors of GF(p)^m in lexicographic order (first coordinate most significant).
std::vector<GFVector> nonzero_vectors(std::uint32_t p, std::size_t m, bool projective) {
  std::vector<GFVector> out;
  const std::uint64_t total = ipow(p, m);
  for (std::uint64_t code = 1; code < total; ++code) {
    GFVector u(m);
    std::uint64_t c = code;
    for (std::size_t i = m; i-- > 0;) {
      u[i] = static_cast<std::uint32_t>(c % p);
      c /= p;
    }
    if (projective) {
      const auto first = std::find_if(u.begin(), u.end(), [](std::uint32_t x) { return x != 0; });
      if (*first != 1) continue;
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::string key_of(const GFVector& v) { return std::string(v.begin(), v.end()); }

/// Entries of (x)^d u at every sorted index.
GFVector sym_power_coords(const GFVector& u, std::uint32_t p, const std::vector<MultiIndex>& idx) {
  GFVector out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::uint64_t x = 1;
    for (auto i : idx[r]) x = x * u[i] % p;
    out[r] = static_cast<std::uint32_t>(x);
  }
  return out;
}

/// Lexicographically first multiset of s candidate indices summing to target, for the
/// smallest s <= max_terms.
std::optional<std::vector<std::size_t>> multiset_search(const GFVector& target, const std::vector<GFVector>& cands,
                                                        std::size_t max_terms, std::uint32_t p) {
  if (std::all_of(target.begin(), target.end(), [](std::uint32_t x) { return x == 0; }))
    return std::vector<std::size_t>{};
  const double n = static_cast<double>(cands.size());
  double leaves = 1.0;  // multisets of size max_terms - 1
  for (std::size_t i = 1; i < max_terms; ++i) leaves = leaves * (n + static_cast<double>(i) - 1.0) / static_cast<double>(i);
  if (leaves > kMaxLeaves)
    throw std::invalid_argument("exhaustive search space too large (" + std::to_string(cands.size()) +
                                " candidates, max_terms=" + std::to_string(max_terms) + ")");

  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < cands.size(); ++i) lookup.emplace(key_of(cands[i]), i);

  const std::size_t len = target.size();
  for (std::size_t s = 1; s <= max_terms; ++s) {
    std::vector<std::size_t> chosen;
    std::optional<std::vector<std::size_t>> hit;
    std::function<void(std::size_t, const GFVector&)> dfs = [&](std::size_t from, const GFVector& rest) {
      if (hit) return;
      if (chosen.size() + 1 == s) {
        const auto it = lookup.find(key_of(rest));
        if (it != lookup.end() && it->second >= from) {
          hit = chosen;
          hit->push_back(it->second);
        }
        return;
      }
      GFVector next(len);
      for (std::size_t i = from; i < cands.size() && !hit; ++i) {
        for (std::size_t e = 0; e < len; ++e) next[e] = (rest[e] + p - cands[i][e]) % p;
        chosen.push_back(i);
        dfs(i, next);
        chosen.pop_back();
      }
    };
    dfs(0, target);
    if (hit) return hit;
  }
  return std::nullopt;
}

void check_search(const GFTensor& t, std::size_t max_terms) {
  check_field(t.p);
  if (max_terms > 4) throw std::invalid_argument("exhaustive search: max_terms must be at most 4");
  if (t.shape.empty()) throw std::invalid_argument("exhaustive search: tensor must have at least one mode");
  for (auto m : t.shape)
    if (ipow(t.p, m) > 64) throw std::invalid_argument("exhaustive search: p^m must be at most 64");
  if (t.entries.size() > kMaxEntries) throw std::invalid_argument("exhaustive search: tensor too large");
}

}  // namespace

bool is_prime(std::uint32_t p) {
  if (p < 2) return false;
  for (std::uint32_t q = 2; q * q <= p; ++q)
    if (p % q == 0) return false;
  return true;
}

GFTensor::GFTensor(std::uint32_t p_, Shape shape_, std::vector<std::int64_t> values) : p(p_), shape(std::move(shape_)) {
  if (!is_prime(p)) throw std::invalid_argument("GFTensor: p=" + std::to_string(p) + " is not prime");
  if (values.size() != shape_size(shape))
    throw std::invalid_argument("GFTensor: " + std::to_string(values.size()) + " entries for shape " + shape_string(shape));
  const auto pp = static_cast<std::int64_t>(p);
  entries.reserve(values.size());
  for (auto v : values) entries.push_back(static_cast<std::uint32_t>(((v % pp) + pp) % pp));
}

GFTensor GFTensor::zeros(std::uint32_t p, Shape shape) {
  const auto n = shape_size(shape);
  return GFTensor(p, std::move(shape), std::vector<std::int64_t>(n, 0));
}

namespace {
std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> index) {
  if (index.size() != shape.size()) throw std::invalid_argument("GFTensor: index length must equal the order");
  std::size_t off = 0, l = 0;
  for (auto i : index) {
    if (i >= shape[l]) throw std::out_of_range("GFTensor: index out of range");
    off = off * shape[l++] + i;
  }
  return off;
}
}  // namespace

std::uint32_t& GFTensor::operator()(std::initializer_list<std::size_t> index) { return entries[flat_index(shape, index)]; }
std::uint32_t GFTensor::operator()(std::initializer_list<std::size_t> index) const {
  return entries[flat_index(shape, index)];
}

bool GFTensor::is_symmetric() const {
  if (shape.empty() || std::any_of(shape.begin(), shape.end(), [&](std::size_t m) { return m != shape.front(); }))
    return false;
  MultiIndex idx(shape.size(), 0);
  std::size_t flat = 0;
  do {
    MultiIndex sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::size_t off = 0;
    for (auto i : sorted) off = off * shape.front() + i;
    if (entries[off] != entries[flat]) return false;
    ++flat;
  } while (next_index(idx, shape));
  return true;
}

std::uint32_t gf_inverse(std::uint32_t a, std::uint32_t p) {
  a %= p;
  if (a == 0) throw std::invalid_argument("gf_inverse: zero has no inverse");
  std::uint64_t r = 1, b = a;
  for (std::uint32_t e = p - 2; e; e >>= 1, b = b * b % p)
    if (e & 1) r = r * b % p;
  return static_cast<std::uint32_t>(r);
}

std::size_t gf_rank(GFMatrix a, std::uint32_t p) {
  check_field(p);
  const std::size_t rows = a.size();
  const std::size_t cols = rows ? a.front().size() : 0;
  for (auto& row : a) {
    if (row.size() != cols) throw std::invalid_argument("gf_rank: ragged matrix");
    for (auto& x : row) x %= p;
  }
  std::size_t rank = 0;
  for (std::size_t c = 0; c < cols && rank < rows; ++c) {
    std::size_t pivot = rank;
    while (pivot < rows && a[pivot][c] == 0) ++pivot;
    if (pivot == rows) continue;
    std::swap(a[pivot], a[rank]);
    const std::uint64_t inv = gf_inverse(a[rank][c], p);
    for (std::size_t r = rank + 1; r < rows; ++r) {
      if (a[r][c] == 0) continue;
      const std::uint64_t f = a[r][c] * inv % p;
      for (std::size_t j = c; j < cols; ++j) a[r][j] = static_cast<std::uint32_t>((a[r][j] + p - f * a[rank][j] % p) % p);
    }
    ++rank;
  }
  return rank;
}

GFTensor gf_outer(std::uint32_t p, const std::vector<GFVector>& factors) {
  check_field(p);
  Shape shape;
  for (const auto& u : factors) shape.push_back(u.size());
  GFTensor t = GFTensor::zeros(p, shape);
  MultiIndex idx(shape.size(), 0);
  std::size_t flat = 0;
  do {
    std::uint64_t x = 1;
    for (std::size_t l = 0; l < idx.size(); ++l) x = x * (factors[l][idx[l]] % p) % p;
    t.entries[flat++] = static_cast<std::uint32_t>(x);
  } while (next_index(idx, shape));
  return t;
}

GFTensor gf_transform(const GFTensor& t, const GFMatrix& g) {
  check_field(t.p);
  GFTensor cur = t;
  for (std::size_t mode = 0; mode < t.shape.size(); ++mode) {
    const std::size_t m = t.shape[mode];
    if (g.size() != m || std::any_of(g.begin(), g.end(), [&](const GFVector& r) { return r.size() != m; }))
      throw std::invalid_argument("gf_transform: g must be " + std::to_string(m) + "x" + std::to_string(m));
    GFTensor next = GFTensor::zeros(t.p, t.shape);
    MultiIndex idx(t.shape.size(), 0);
    std::size_t stride = 1;
    for (std::size_t l = mode + 1; l < t.shape.size(); ++l) stride *= t.shape[l];
    std::size_t flat = 0;
    do {
      const std::size_t base = flat - idx[mode] * stride;
      std::uint64_t acc = 0;
      for (std::size_t j = 0; j < m; ++j) acc += std::uint64_t(g[idx[mode]][j] % t.p) * cur.entries[base + j * stride] % t.p;
      next.entries[flat++] = static_cast<std::uint32_t>(acc % t.p);
    } while (next_index(idx, t.shape));
    cur = std::move(next);
  }
  return cur;
}

SrankResult srank_exhaustive(const GFTensor& s, std::size_t max_terms) {
  check_search(s, max_terms);
  if (!s.is_symmetric()) throw std::invalid_argument("srank_exhaustive: tensor must be symmetric");
  const std::size_t m = s.shape.front(), d = s.shape.size();
  const auto idx = sorted_indices(m, d);

  GFVector target(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::size_t off = 0;
    for (auto i : idx[r]) off = off * m + i;
    target[r] = s.entries[off];
  }
  std::vector<GFVector> cands;
  std::vector<SymTerm> terms;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& u : nonzero_vectors(s.p, m, true)) {
    const GFVector base = sym_power_coords(u, s.p, idx);
    for (std::uint32_t w = 1; w < s.p; ++w) {
      GFVector c(base.size());
      for (std::size_t r = 0; r < c.size(); ++r) c[r] = static_cast<std::uint32_t>(std::uint64_t(w) * base[r] % s.p);
      if (!seen.emplace(key_of(c), cands.size()).second) continue;
      cands.push_back(std::move(c));
      terms.push_back({w, u});
    }
  }
  SrankResult out;
  if (auto hit = multiset_search(target, cands, max_terms, s.p)) {
    out.srank = hit->size();
    for (auto i : *hit) out.witness.push_back(terms[i]);
  }
  return out;
}

RankResult rank_exhaustive(const GFTensor& t, std::size_t max_terms) {
  check_search(t, max_terms);
  const std::size_t d = t.shape.size();
  std::vector<std::vector<GFVector>> per_mode;
  for (std::size_t l = 0; l < d; ++l) per_mode.push_back(nonzero_vectors(t.p, t.shape[l], l + 1 < d));

  std::vector<GFVector> cands;
  std::vector<std::vector<GFVector>> factors;
  std::vector<std::size_t> pick(d, 0);
  while (true) {
    std::vector<GFVector> f;
    for (std::size_t l = 0; l < d; ++l) f.push_back(per_mode[l][pick[l]]);
    cands.push_back(gf_outer(t.p, f).entries);
    factors.push_back(std::move(f));
    if (cands.size() > 1e6) throw std::invalid_argument("rank_exhaustive: search space too large");
    std::size_t l = d;
    while (l-- > 0) {
      if (++pick[l] < per_mode[l].size()) break;
      pick[l] = 0;
    }
    if (l == static_cast<std::size_t>(-1)) break;
  }
  RankResult out;
  if (auto hit = multiset_search(t.entries, cands, max_terms, t.p)) {
    out.rank = hit->size();
    for (auto i : *hit) out.witness.push_back(factors[i]);
  }
  return out;
}

Prop61Result prop61_witness(std::uint32_t p, std::size_t m, std::size_t d) {
  check_field(p);
  if (m < 1 || d < 1) throw std::invalid_argument("prop61_witness: need m, d >= 1");
  if (ipow(p, m) > 256) throw std::invalid_argument("prop61_witness: p^m must be at most 256");
  Prop61Result out;
  out.sym_dim = binomial(m + d - 1, d);
  if (out.sym_dim > kMaxEntries) throw std::invalid_argument("prop61_witness: dim S too large");
  const std::uint64_t projective_count = (ipow(p, m) - 1) / (p - 1);
  out.inequality_holds = out.sym_dim > projective_count;

  const auto idx = sorted_indices(m, d);
  for (const auto& u : nonzero_vectors(p, m, false)) out.span_basis.push_back(sym_power_coords(u, p, idx));
  out.span_dim = gf_rank(out.span_basis, p);
  if (!out.inequality_holds) return out;

  for (std::size_t r = 0; r < idx.size(); ++r) {
    GFMatrix trial = out.span_basis;
    GFVector e(idx.size(), 0);
    e[r] = 1;
    trial.push_back(e);
    if (gf_rank(trial, p) == out.span_dim + 1) {
      out.witness_coords = e;
      GFTensor w = GFTensor::zeros(p, Shape(d, m));
      MultiIndex i(d, 0);
      std::size_t flat = 0;
      do {
        MultiIndex sorted = i;
        std::sort(sorted.begin(), sorted.end());
        if (sorted == idx[r]) w.entries[flat] = 1;
        ++flat;
      } while (next_index(i, w.shape));
      out.witness = std::move(w);
      return out;
    }
  }
  throw NumericError("prop61_witness: the d-th powers span S although the inequality holds");
}

GFTensor example64_tensor() { return GFTensor(2, {2, 2}, {0, 1, 1, 0}); }

}  // namespace edcrit
