#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "edcrit/approx.hpp"

namespace edcrit {

struct TrialRow {
  std::uint64_t seed = 0;
  double objective = 0.0;
  bool symmetric = false;
  double gap = std::numeric_limits<double>::infinity();
  bool escape = false;
  double max_angle = 0.0;  // factor symmetry angle of the optimizer
  double match_angle = std::numeric_limits<double>::quiet_NaN();  // planted-term recovery, when applicable
};

struct ExperimentSummary {
  std::string name;
  std::size_t m = 0, d = 0, k = 1;
  double noise = 0.0;
  std::size_t trials = 0, starts = 0;
  std::uint64_t seed = 0;
  double fraction_symmetric = 0.0;
  double fraction_unique = 0.0;   // gap > 1e-6
  double fraction_matched = 0.0;  // recovered terms within 1e-2 rad of the planted ones
  double min_gap = std::numeric_limits<double>::infinity();
  double max_objective = 0.0;
  std::size_t escapes = 0;
  std::vector<TrialRow> rows;
};

/// Per-trial seed derived from the run seed.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial);

/// Random symmetric tensors (or planted rank-one symmetric ones when
/// `rank_one_inputs`), unconstrained best rank-one fit, symmetry and uniqueness census.
ExperimentSummary experiment_thm71(std::size_t m, std::size_t d, std::size_t trials, std::size_t starts,
                                   std::uint64_t seed, bool rank_one_inputs = false);

/// Certified generic symmetric rank-k tensors with t_j = +-1, symmetric noise of the given
/// norm, unconstrained best rank-k fit. Requires 2 <= k <= N(m,d).
ExperimentSummary experiment_thm72(std::size_t m, std::size_t d, std::size_t k, double noise, std::size_t trials,
                                   std::size_t starts, std::uint64_t seed);

/// Terms sum t_j (x)^d u_j with unit u_j and t_j = +-1 that pass certify_symmetric_rank.
std::vector<RankOneTerm> planted_symmetric_terms(std::size_t m, std::size_t d, std::size_t k, std::mt19937_64& rng);

}  // namespace edcrit
