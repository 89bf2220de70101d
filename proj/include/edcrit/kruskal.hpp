#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "edcrit/rational.hpp"
#include "edcrit/tensor.hpp"

namespace edcrit {

/// Three factor matrices whose j-th columns multiply to the j-th term of a 3-mode decomposition.
struct FactorBundle {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd Z;
  Eigen::MatrixXd W;

  std::size_t terms() const { return static_cast<std::size_t>(Y.cols()); }
  /// Throws std::invalid_argument unless r >= 1, column counts agree and no column is zero.
  void validate() const;
};

struct KruskalCertificate {
  std::array<std::size_t, 3> kappas{};
  std::size_t r = 0;
  bool condition_met = false;
  std::optional<std::size_t> rank_certified;
  bool uniqueness_certified = false;
  // Filled by certify_symmetric_rank.
  std::optional<Rational> bound;
  std::optional<bool> generic;
  std::string verdict;
};

/// Largest k such that every k columns are linearly independent. A subset counts as
/// independent when its smallest singular value exceeds 1e-10 times the largest
/// singular value of the whole matrix.
std::size_t krank(const Eigen::MatrixXd& columns);

KruskalCertificate certify(const FactorBundle& f);

/// Groups every term's factors by the split into three Kronecker-product columns.
/// Symmetric terms (all factors equal) carry the weight on the first block.
FactorBundle grouped_bundle(std::span<const RankOneTerm> terms, const ModeSplit& split);

/// True iff all terms are symmetric (every factor equal up to 1e-12).
bool all_symmetric(std::span<const RankOneTerm> terms);

/// Checks the (a,b,c)-genericity conditions: every min(bound, r) grouped columns
/// of each block are independent, where bound is m^a for general terms and
/// binom(m+a-1, a) for symmetric ones.
bool is_abc_generic(std::span<const RankOneTerm> terms, const ModeSplit& split, std::size_t m);

/// Term bound for generic symmetric decompositions, exact.
Rational n_bound(std::size_t m, std::size_t d);
/// The same bound for general (non-symmetric) decompositions: m^b + (m-2)/2 for
/// d = 2b+1 and m^b + m - 2 for d = 2b+2.
Rational n_bound_tensor(std::size_t m, std::size_t d);

/// Rank and symmetric-rank certificate for sum t_j (x)^d u_j with t_j = +-1.
KruskalCertificate certify_symmetric_rank(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d);
/// Rank certificate for a general decomposition of an m x ... x m tensor.
KruskalCertificate certify_tensor_rank(std::span<const RankOneTerm> terms, std::size_t m, std::size_t d);

}  // namespace edcrit
