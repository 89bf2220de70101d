#include "edcrit/experiments.hpp"

#include <algorithm>
#include <stdexcept>

#include "edcrit/kruskal.hpp"

namespace edcrit {

using Eigen::VectorXd;

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  std::uint64_t z = seed * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
  return z ^ (z >> 33);
}

namespace {

void finish(ExperimentSummary& s) {
  const double n = static_cast<double>(s.rows.size());
  std::size_t sym = 0, uniq = 0, matched = 0;
  for (const auto& r : s.rows) {
    sym += r.symmetric;
    uniq += r.gap > 1e-6;
    matched += r.match_angle <= 1e-2;
    s.escapes += r.escape;
    s.min_gap = std::min(s.min_gap, r.gap);
    s.max_objective = std::max(s.max_objective, r.objective);
  }
  s.fraction_symmetric = static_cast<double>(sym) / n;
  s.fraction_unique = static_cast<double>(uniq) / n;
  s.fraction_matched = static_cast<double>(matched) / n;
}

}  // namespace

ExperimentSummary experiment_thm71(std::size_t m, std::size_t d, std::size_t trials, std::size_t starts,
                                   std::uint64_t seed, bool rank_one_inputs) {
  if (m < 1 || m > 4 || d < 2 || d > 5) throw std::invalid_argument("thm71: need 1 <= m <= 4 and 2 <= d <= 5");
  if (trials < 1) throw std::invalid_argument("thm71: trials must be at least 1");
  ExperimentSummary s;
  s.name = "thm71";
  s.m = m;
  s.d = d;
  s.trials = trials;
  s.starts = starts;
  s.seed = seed;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::uint64_t ts = trial_seed(seed, i);
    std::mt19937_64 rng(ts);
    DenseTensor t = rank_one_inputs ? rank_one(symmetric_term(1.0, gaussian_vector(static_cast<Eigen::Index>(m), rng), d))
                                    : densify(random_symmetric(m, d, rng));
    const CPModel model = best_rank1(t, starts, ts);
    const SymmetryVerdict v = symmetry_verdict(model);
    TrialRow row;
    row.seed = ts;
    row.objective = model.objective;
    row.symmetric = v.is_symmetric;
    row.gap = model.uniqueness_gap;
    row.escape = model.border_escape;
    row.max_angle = v.max_factor_angle;
    s.rows.push_back(row);
  }
  finish(s);
  return s;
}

std::vector<RankOneTerm> planted_symmetric_terms(std::size_t m, std::size_t d, std::size_t k, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<RankOneTerm> terms;
    for (std::size_t j = 0; j < k; ++j)
      terms.push_back(symmetric_term(coin(rng) ? 1.0 : -1.0, gaussian_vector(static_cast<Eigen::Index>(m), rng).normalized(), d));
    if (certify_symmetric_rank(terms, m, d).verdict == "certified") return terms;
  }
  throw NumericError("planted_symmetric_terms: no certified decomposition after 1000 draws");
}

ExperimentSummary experiment_thm72(std::size_t m, std::size_t d, std::size_t k, double noise, std::size_t trials,
                                   std::size_t starts, std::uint64_t seed) {
  if (m < 2 || m > 4 || d < 3 || d > 5) throw std::invalid_argument("thm72: need 2 <= m <= 4 and 3 <= d <= 5");
  if (k < 2 || Rational(k) > n_bound(m, d))
    throw std::invalid_argument("thm72: k=" + std::to_string(k) + " is outside certified regime (N(" + std::to_string(m) +
                                "," + std::to_string(d) + ")=" + to_string(n_bound(m, d)) + ")");
  if (!(noise >= 0.0)) throw std::invalid_argument("thm72: noise must be nonnegative");
  if (trials < 1) throw std::invalid_argument("thm72: trials must be at least 1");
  ExperimentSummary s;
  s.name = "thm72";
  s.m = m;
  s.d = d;
  s.k = k;
  s.noise = noise;
  s.trials = trials;
  s.starts = starts;
  s.seed = seed;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::uint64_t ts = trial_seed(seed, i);
    std::mt19937_64 rng(ts);
    const auto planted = planted_symmetric_terms(m, d, k, rng);
    DenseTensor t = rank_one(planted.front());
    for (std::size_t j = 1; j < planted.size(); ++j) t += rank_one(planted[j]);
    if (noise > 0.0) {
      DenseTensor e = densify(random_symmetric(m, d, rng));
      t += (noise / hs_norm(e)) * e;
    }
    const CPModel model = best_rank_k(t, k, starts, ts);
    const SymmetryVerdict v = symmetry_verdict(model);
    TrialRow row;
    row.seed = ts;
    row.objective = model.objective;
    row.symmetric = v.is_symmetric;
    row.gap = model.uniqueness_gap;
    row.escape = model.border_escape;
    row.max_angle = v.max_factor_angle;
    row.match_angle = match_terms(model.terms, planted).max_angle;
    s.rows.push_back(row);
  }
  finish(s);
  return s;
}

}  // namespace edcrit
