#include <doctest.h>

#include <cmath>
#include <random>

#include "edcrit/json_io.hpp"
#include "edcrit/multilinear.hpp"
#include "edcrit/tensor.hpp"
#include "oracles.hpp"

using namespace edcrit;
using Eigen::VectorXd;

namespace {

VectorXd e(int m, int i) { return VectorXd::Unit(m, i); }

DenseTensor outer2(const VectorXd& a, const VectorXd& b) {
  std::vector<VectorXd> f{a, b};
  return outer(f);
}

DenseTensor outer3(const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  std::vector<VectorXd> f{a, b, c};
  return outer(f);
}

}  // namespace

TEST_SUITE("tensor-core") {

TEST_CASE("dense tensor construction and errors") {
  CHECK_THROWS_AS(DenseTensor(Shape{2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(DenseTensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  DenseTensor t(Shape{2, 3});
  t({1, 2}) = 5.0;
  CHECK(t.data()[5] == 5.0);
  CHECK(t.strides() == Shape{3, 1});
}

TEST_CASE("hs_inner examples") {
  const DenseTensor e11 = outer2(e(2, 0), e(2, 0));
  CHECK(hs_inner(e11, e11) == 1.0);
  CHECK(hs_inner(outer2(e(2, 0), e(2, 1)), outer2(e(2, 1), e(2, 0))) == 0.0);
  const DenseTensor d(Shape{2, 2}, std::vector<double>{3, 0, 0, 2});
  CHECK(hs_inner(d, d) == 13.0);
  CHECK_THROWS_AS(hs_inner(d, DenseTensor(Shape{4})), std::invalid_argument);
}

TEST_CASE("hs_inner is bilinear, symmetric and satisfies Cauchy-Schwarz") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coef(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{2, 3, 2};
    const DenseTensor x = gaussian_tensor(shape, rng), y = gaussian_tensor(shape, rng), z = gaussian_tensor(shape, rng);
    const double a = coef(rng);
    CHECK(std::abs(hs_inner(x, y) - hs_inner(y, x)) <= 1e-10);
    CHECK(std::abs(hs_inner(a * x + z, y) - (a * hs_inner(x, y) + hs_inner(z, y))) <= 1e-10);
    CHECK(std::abs(hs_inner(x, y)) <= hs_norm(x) * hs_norm(y) + 1e-10);
  }
}

TEST_CASE("symmetrize examples") {
  const SymTensor s = symmetrize(outer2(e(2, 0), e(2, 1)));
  CHECK(s.at({0, 1}) == doctest::Approx(0.5));
  CHECK(s.at({0, 0}) == 0.0);
  CHECK(s.at({1, 1}) == 0.0);

  DenseTensor t = outer3(e(2, 0), e(2, 1), e(2, 1));
  t += outer3(e(2, 1), e(2, 0), e(2, 1));
  t += outer3(e(2, 1), e(2, 1), e(2, 0));
  const SymTensor s3 = symmetrize(t);
  CHECK(s3.at({0, 1, 1}) == doctest::Approx(1.0));
  CHECK(s3.at({0, 0, 0}) == 0.0);
  CHECK(s3.at({1, 1, 1}) == 0.0);

  CHECK_THROWS_AS(symmetrize(DenseTensor(Shape{2, 3})), std::invalid_argument);
}

TEST_CASE("symmetrize averages the orbit (explicit permutation oracle)") {
  std::mt19937_64 rng(5);
  const Shape shape{3, 3, 3};
  const DenseTensor t = gaussian_tensor(shape, rng);
  const DenseTensor s = densify(symmetrize(t));
  const auto perms = oracle::permutations(3);
  MultiIndex i(3, 0);
  do {
    double mean = 0.0;
    for (const auto& p : perms) mean += t({i[p[0]], i[p[1]], i[p[2]]});
    mean /= static_cast<double>(perms.size());
    CHECK(s(i) == doctest::Approx(mean).epsilon(1e-12));
  } while (next_index(i, shape));
}

TEST_CASE("symmetrization is an idempotent non-expansive projection") {
  std::mt19937_64 rng(7);
  for (std::size_t d = 2; d <= 4; ++d) {
    const DenseTensor t = gaussian_tensor(Shape(d, 3), rng);
    const SymTensor s = symmetrize(t);
    const DenseTensor once = densify(s);
    const DenseTensor twice = densify(symmetrize(once));
    CHECK((once.flat() - twice.flat()).norm() <= 1e-12);
    CHECK(hs_norm(once) <= hs_norm(t) + 1e-12);
    CHECK(is_symmetric(once, 1e-12));
    const auto perms = oracle::permutations(d);
    for (const auto& p : perms) CHECK((permute_modes(once, p).flat() - once.flat()).norm() <= 1e-12);
    CHECK(symmetrize(once).coeffs().size() == binomial(3 + d - 1, d));
  }
}

TEST_CASE("sorted index bookkeeping") {
  const auto idx = sorted_indices(3, 3);
  CHECK(idx.size() == 10);
  for (std::size_t r = 0; r < idx.size(); ++r) CHECK(sorted_rank(idx[r], 3) == r);
  std::size_t total = 0;
  for (const auto& i : idx) total += orbit_size(i);
  CHECK(total == 27);
  const std::vector<std::size_t> i{0, 1, 1};
  CHECK(orbit_size(i) == 3);
}

TEST_CASE("unfold_split examples") {
  std::mt19937_64 rng(3);
  const DenseTensor t = gaussian_tensor(Shape{2, 2, 2}, rng);
  const DenseTensor same = unfold_split(t, {1, 1, 1});
  CHECK(same.shape() == t.shape());
  CHECK(same.data() == t.data());

  const VectorXd u = (VectorXd(2) << 0.6, -0.8).finished();
  const DenseTensor u4 = rank_one(symmetric_term(1.0, u, 4));
  const DenseTensor g = unfold_split(u4, {1, 1, 2});
  CHECK(g.shape() == Shape{2, 2, 4});
  VectorXd uu(4);
  uu << u(0) * u(0), u(0) * u(1), u(1) * u(0), u(1) * u(1);
  std::vector<VectorXd> f{u, u, uu};
  CHECK((outer(f).flat() - g.flat()).norm() <= 1e-15);

  const DenseTensor r = gaussian_tensor(Shape{2, 2, 2, 2}, rng);
  const DenseTensor rs = unfold_split(r, {1, 1, 2});
  // mode-3 flattening of the split equals the (3,4)-versus-(1,2) flattening of r
  Eigen::MatrixXd direct(4, 4);
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t dd = 0; dd < 2; ++dd) direct(static_cast<Eigen::Index>(c * 2 + dd), static_cast<Eigen::Index>(a * 2 + b)) = r({a, b, c, dd});
  const VectorXd s1 = Eigen::JacobiSVD<Eigen::MatrixXd>(unfold(rs, 2)).singularValues();
  const VectorXd s2 = Eigen::JacobiSVD<Eigen::MatrixXd>(direct).singularValues();
  CHECK((s1 - s2).norm() <= 1e-12);
  CHECK(hs_norm(rs) == hs_norm(r));

  CHECK_THROWS_AS(unfold_split(t, {1, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(unfold_split(DenseTensor(Shape{2, 3, 2}), {1, 1, 1}), std::invalid_argument);
}

TEST_CASE("rank_one examples") {
  const DenseTensor a = rank_one(RankOneTerm(1.0, {e(2, 0), e(2, 0), e(2, 0)}));
  CHECK(a({0, 0, 0}) == 1.0);
  CHECK(hs_norm(a) == 1.0);
  const DenseTensor b = rank_one(RankOneTerm(-2.0, {e(2, 0), e(2, 1)}));
  CHECK(b({0, 1}) == -2.0);
  CHECK(hs_norm(b) == 2.0);
  const VectorXd u = VectorXd::Constant(2, 1.0 / std::sqrt(2.0));
  const DenseTensor c = rank_one(RankOneTerm(1.0, {u, u, u}));
  for (double x : c.data()) CHECK(x == doctest::Approx(std::pow(2.0, -1.5)).epsilon(1e-14));
}

TEST_CASE("rank-one term normalizes factors into the weight") {
  const RankOneTerm t(3.0, {VectorXd::Constant(2, 2.0), VectorXd::Unit(3, 1) * -0.5});
  for (const auto& f : t.factors()) CHECK(f.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.weight() == doctest::Approx(3.0 * std::sqrt(8.0) * 0.5));
  CHECK(hs_norm(rank_one(t)) == doctest::Approx(std::abs(t.weight())));
  CHECK_THROWS_AS(RankOneTerm(1.0, {VectorXd::Zero(2)}), std::invalid_argument);
}

TEST_CASE("rank_one agrees with an explicit loop oracle") {
  std::mt19937_64 rng(9);
  const std::vector<VectorXd> f{gaussian_vector(2, rng), gaussian_vector(3, rng), gaussian_vector(2, rng)};
  const DenseTensor t = rank_one(RankOneTerm(1.7, f));
  MultiIndex i(3, 0);
  do CHECK(t(i) == doctest::Approx(oracle::entry({f}, {1.7}, i)).epsilon(1e-12));
  while (next_index(i, t.shape()));
}

TEST_CASE("JSON round trips are lossless") {
  std::mt19937_64 rng(1);
  const DenseTensor t = gaussian_tensor(Shape{2, 3}, rng);
  const DenseTensor back = dense_from_json(Json::parse(to_json(t).dump()));
  CHECK(back.shape() == t.shape());
  CHECK(back.data() == t.data());

  const SymTensor s = symmetrize(gaussian_tensor(Shape{2, 2, 2}, rng));
  const Json js = to_json(s);
  CHECK(js["coeffs"].contains("1,2,2"));
  CHECK(sym_from_json(Json::parse(js.dump())) == s);
}

}  // TEST_SUITE
