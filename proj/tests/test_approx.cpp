#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "edcrit/approx.hpp"
#include "edcrit/experiments.hpp"
#include "oracles.hpp"

using namespace edcrit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd e(int m, int i) { return VectorXd::Unit(m, i); }

DenseTensor from_matrix(const MatrixXd& a) {
  DenseTensor t(Shape{static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols())});
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) t({static_cast<std::size_t>(i), static_cast<std::size_t>(j)}) = a(i, j);
  return t;
}

/// max over the unit circle of |S(u,u,u)| for a 2x2x2 tensor: dense grid, then golden-section refinement.
double spectral_norm_2x2x2(const DenseTensor& s) {
  const auto f = [&](double th) {
    const double c = std::cos(th), sn = std::sin(th);
    const double u[2] = {c, sn};
    double v = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 2; ++k) v += s({i, j, k}) * u[i] * u[j] * u[k];
    return std::abs(v);
  };
  const int n = 20000;
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (f(std::numbers::pi * i / n) > f(std::numbers::pi * best / n)) best = i;
  double a = std::numbers::pi * (best - 1) / n, b = std::numbers::pi * (best + 1) / n;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 100; ++it) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (f(x1) > f(x2)) b = x2;
    else a = x1;
  }
  return f((a + b) / 2);
}

}  // namespace

TEST_SUITE("approx-engine") {

TEST_CASE("best rank-one examples") {
  const DenseTensor a = 2.0 * rank_one(RankOneTerm(1.0, {e(2, 0), e(2, 0), e(2, 0)}));
  const CPModel ma = best_rank1(a, 5, 1);
  REQUIRE(ma.terms.size() == 1);
  CHECK(std::abs(ma.terms[0].weight()) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(ma.objective <= 1e-12);
  CHECK(symmetry_verdict(ma).is_symmetric);

  DenseTensor b = 3.0 * rank_one(RankOneTerm(1.0, {e(2, 0), e(2, 0), e(2, 0)}));
  b += rank_one(RankOneTerm(1.0, {e(2, 1), e(2, 1), e(2, 1)}));
  const CPModel mb = best_rank1(b, 20, 2);
  CHECK(std::abs(mb.terms[0].weight()) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(mb.objective == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mb.uniqueness_gap > 1e-6);

  const CPModel mc = best_rank1(from_matrix((MatrixXd(2, 2) << 3, 0, 0, 2).finished()), 5, 3);
  CHECK(std::abs(mc.terms[0].weight()) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(mc.objective == doctest::Approx(2.0).epsilon(1e-12));

  const CPModel zero = best_rank1(DenseTensor(Shape{2, 2, 2}), 3, 0);
  CHECK(zero.objective == 0.0);
}

TEST_CASE("best rank-one of a matrix is the leading singular pair") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    const MatrixXd a = MatrixXd::NullaryExpr(3 + t % 3, 4, [&]() { return std::normal_distribution<double>()(rng); });
    const VectorXd s = Eigen::JacobiSVD<MatrixXd>(a).singularValues();
    const CPModel m = best_rank1(from_matrix(a), 10, static_cast<std::uint64_t>(t));
    CHECK(m.objective == doctest::Approx(s.tail(s.size() - 1).norm()).epsilon(1e-10));
    CHECK(std::abs(m.terms[0].weight()) == doctest::Approx(s(0)).epsilon(1e-10));
  }
}

TEST_CASE("best rank-one models are critical") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const DenseTensor x = gaussian_tensor(Shape{2, 3, 2}, rng);
    const CPModel m = best_rank1(x, 20, static_cast<std::uint64_t>(t));
    CHECK(m.stationarity <= 1e-8);
    CHECK(rank1_residual(x, m.terms[0]) <= 1e-8);
    CHECK(m.objective == doctest::Approx(hs_norm(x - m.reconstruct())).epsilon(1e-12));
  }
}

TEST_CASE("symmetric rank-one fit matches a grid-search spectral norm") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const SymTensor s = random_symmetric(2, 3, rng);
    const DenseTensor ds = densify(s);
    const double lambda = spectral_norm_2x2x2(ds);
    const CPModel m = best_rank1_symmetric(s, 10, static_cast<std::uint64_t>(t));
    CHECK(std::abs(m.terms[0].weight()) == doctest::Approx(lambda).epsilon(1e-9));
    CHECK(m.objective == doctest::Approx(std::sqrt(hs_norm(ds) * hs_norm(ds) - lambda * lambda)).epsilon(1e-7));
    CHECK(symmetry_verdict(m).is_symmetric);
  }
}

TEST_CASE("symmetric and unconstrained rank-one fits coincide on symmetric tensors") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const SymTensor s = random_symmetric(3, 3, rng);
    const CPModel sym = best_rank1_symmetric(s, 20, static_cast<std::uint64_t>(t));
    const CPModel gen = best_rank1(densify(s), 20, static_cast<std::uint64_t>(t));
    CHECK(std::abs(sym.objective - gen.objective) <= 1e-9);
    CHECK(symmetry_verdict(gen).is_symmetric);
  }
}

TEST_CASE("best rank-k of a matrix is the truncated SVD") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const MatrixXd a = MatrixXd::NullaryExpr(4, 4, [&]() { return std::normal_distribution<double>()(rng); });
    const VectorXd s = Eigen::JacobiSVD<MatrixXd>(a).singularValues();
    const CPModel m = best_rank_k(from_matrix(a), 2, 10, static_cast<std::uint64_t>(t));
    CHECK(m.objective == doctest::Approx(s.tail(2).norm()).epsilon(1e-9));
  }
}

TEST_CASE("rank-k examples and errors") {
  const DenseTensor x = rank_one(RankOneTerm(2.0, {e(2, 0), e(2, 0), e(2, 0)})) + rank_one(RankOneTerm(-1.0, {e(2, 1), e(2, 1), e(2, 1)}));
  const CPModel m = best_rank_k(x, 2, 10, 1);
  CHECK(m.objective <= 1e-10);
  CHECK(!m.border_escape);
  CHECK(match_terms(m.terms, std::vector<RankOneTerm>{RankOneTerm(2.0, {e(2, 0), e(2, 0), e(2, 0)}), RankOneTerm(-1.0, {e(2, 1), e(2, 1), e(2, 1)})}).max_angle <= 1e-8);
  CHECK_THROWS_AS(best_rank_k(x, 0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(best_rank1(x, 0, 1), std::invalid_argument);
}

TEST_CASE("ALS objectives never increase") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const DenseTensor x = gaussian_tensor(Shape{3, 3, 3}, rng);
    ApproxOptions opt;
    opt.starts = 3;
    opt.seed = static_cast<std::uint64_t>(t);
    opt.polish = false;
    const CPModel m = best_rank_k(x, 2, opt);
    REQUIRE(!m.history.empty());
    for (std::size_t i = 1; i < m.history.size(); ++i) CHECK(m.history[i] <= m.history[i - 1] * (1 + 1e-12) + 1e-14);
  }
}

TEST_CASE("the best rank-one distance is invariant under orthogonal changes of basis") {
  std::mt19937_64 rng(7);
  const DenseTensor x = densify(random_symmetric(3, 3, rng));
  const double base = best_rank1(x, 20, 1).objective;
  for (int t = 0; t < 20; ++t) {
    const MatrixXd q = oracle::random_orthogonal(3, rng);
    const DenseTensor y = oracle::transform_all_modes(x, q);
    CHECK(std::abs(best_rank1(y, 20, static_cast<std::uint64_t>(t)).objective - base) <= 1e-9);
  }
}

TEST_CASE("line angles and symmetry verdicts") {
  CHECK(line_angle(e(2, 0), -e(2, 0)) == doctest::Approx(0.0));
  CHECK(line_angle(e(2, 0), e(2, 1)) == doctest::Approx(std::numbers::pi / 2));
  const VectorXd d = (VectorXd(2) << 1, 1).finished().normalized();
  CHECK(line_angle(e(2, 0), d) == doctest::Approx(std::numbers::pi / 4));

  CPModel sym;
  sym.terms = {RankOneTerm(1.0, {d, -d, d})};
  const auto vs = symmetry_verdict(sym);
  CHECK(vs.is_symmetric);
  CHECK(vs.orbit_collapsed);
  CHECK(vs.max_factor_angle <= 1e-12);

  CPModel asym;
  asym.terms = {RankOneTerm(1.0, {e(2, 0), e(2, 1), e(2, 1)})};
  const auto va = symmetry_verdict(asym);
  CHECK(!va.is_symmetric);
  CHECK(!va.orbit_collapsed);
  CHECK(va.max_factor_angle == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("symmetry verdicts ignore term order") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    CPModel a;
    for (int j = 0; j < 3; ++j) {
      const VectorXd u = gaussian_vector(3, rng);
      a.terms.push_back(t % 2 ? symmetric_term(1.0, u, 3) : RankOneTerm(1.0, {u, u, gaussian_vector(3, rng)}));
    }
    CPModel b = a;
    std::reverse(b.terms.begin(), b.terms.end());
    CHECK(symmetry_verdict(a).is_symmetric == symmetry_verdict(b).is_symmetric);
    CHECK(symmetry_verdict(a).is_symmetric == (t % 2 == 1));
    CHECK(symmetry_verdict(a).max_factor_angle == doctest::Approx(symmetry_verdict(b).max_factor_angle));
  }
}

TEST_CASE("term matching") {
  const std::vector<RankOneTerm> ref{symmetric_term(1.0, e(2, 0), 3), symmetric_term(1.0, e(2, 1), 3)};
  const std::vector<RankOneTerm> model{symmetric_term(-1.0, e(2, 1), 3), symmetric_term(1.0, e(2, 0), 3)};
  const TermMatch m = match_terms(model, ref);
  CHECK(m.assignment == std::vector<std::size_t>{1, 0});
  CHECK(m.max_angle <= 1e-15);
}

TEST_CASE("small symmetric optimizer census") {
  const auto s = experiment_thm71(2, 3, 10, 10, 5);
  CHECK(s.rows.size() == 10);
  CHECK(s.fraction_symmetric == 1.0);
  CHECK(s.fraction_unique >= 0.9);
  const auto r = experiment_thm71(2, 3, 5, 10, 6, true);
  CHECK(r.max_objective <= 1e-10);
  CHECK(experiment_thm71(2, 3, 10, 10, 5).rows[3].objective == s.rows[3].objective);
}

TEST_CASE("small planted rank-k census") {
  const auto clean = experiment_thm72(2, 3, 2, 0.0, 5, 10, 1);
  CHECK(clean.max_objective <= 1e-10);
  CHECK(clean.fraction_matched == 1.0);
  const auto noisy = experiment_thm72(2, 3, 2, 1e-4, 5, 10, 2);
  CHECK(noisy.escapes == 0);
  CHECK(noisy.fraction_symmetric >= 0.8);
  CHECK_THROWS_AS(experiment_thm72(2, 3, 3, 0.0, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(experiment_thm72(2, 3, 1, 0.0, 1, 1, 0), std::invalid_argument);
}

}  // TEST_SUITE
