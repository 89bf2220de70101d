#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "edcrit/multilinear.hpp"
#include "edcrit/tensor.hpp"

namespace edcrit {

struct CPModel {
  std::vector<RankOneTerm> terms;
  double objective = 0.0;  // ||T - sum of terms||
  int iterations = 0;      // ALS sweeps of the winning start
  bool converged = false;
  std::vector<double> history;  // objective after every sweep of the winning start
  double stationarity = 0.0;    // critical residual of the returned model
  /// Objective gap between the best and the next distinct critical point found.
  double uniqueness_gap = std::numeric_limits<double>::infinity();
  bool border_escape = false;
  std::size_t start_index = 0;
  std::size_t distinct_candidates = 0;

  DenseTensor reconstruct() const;
};

struct ApproxOptions {
  std::size_t starts = 20;
  std::uint64_t seed = 0;
  int max_sweeps = 500;
  double relative_tolerance = 1e-12;
  bool polish = true;
};

/// Multistart alternating rank-one fit; start 0 uses leading singular vectors of the unfoldings.
CPModel best_rank1(const DenseTensor& t, const ApproxOptions& opt);
CPModel best_rank1(const DenseTensor& t, std::size_t starts, std::uint64_t seed);

/// Rank-one fit with a single repeated factor: shifted symmetric power iteration,
/// then Newton on S u^{d-1} = lambda u, ||u|| = 1.
CPModel best_rank1_symmetric(const SymTensor& s, const ApproxOptions& opt);
CPModel best_rank1_symmetric(const SymTensor& s, std::size_t starts, std::uint64_t seed);

/// Multistart CP-ALS with least-squares polishing. A start whose normal equations have
/// condition number above 1e12 is abandoned.
CPModel best_rank_k(const DenseTensor& t, std::size_t k, const ApproxOptions& opt);
CPModel best_rank_k(const DenseTensor& t, std::size_t k, std::size_t starts, std::uint64_t seed);

/// Singular-tuple residual max_l ||T(x_{-l}) - lambda x_l|| of a rank-one model.
double rank1_residual(const DenseTensor& t, const RankOneTerm& term);

struct SymmetryVerdict {
  bool is_symmetric = false;
  double max_factor_angle = 0.0;  // radians, sign-agnostic
  bool orbit_collapsed = false;   // reconstruction invariant under every mode transposition
};

/// Angle between the lines spanned by unit vectors a and b.
double line_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

SymmetryVerdict symmetry_verdict(const CPModel& model);

struct TermMatch {
  std::vector<std::size_t> assignment;  // model term i matched to reference term assignment[i]
  double max_angle = 0.0;               // worst factor angle over matched pairs
};

/// Greedy matching by smallest worst-factor angle.
TermMatch match_terms(std::span<const RankOneTerm> model, std::span<const RankOneTerm> reference);

/// S_d-invariant Gaussian: symmetrization of a standard Gaussian tensor.
SymTensor random_symmetric(std::size_t m, std::size_t d, std::mt19937_64& rng);

}  // namespace edcrit
