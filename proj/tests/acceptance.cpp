// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "edcrit/approx.hpp"
#include "edcrit/experiments.hpp"
#include "edcrit/finite_field.hpp"
#include "edcrit/kruskal.hpp"
#include "edcrit/sym_decomp.hpp"
#include "edcrit/variety.hpp"

using namespace edcrit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << "failed: " << what << "; ";
    ok = ok && cond;
  }
};

struct Criterion {
  std::string name;
  double limit_seconds;
  std::function<void(Outcome&)> body;
};

MatrixXd gaussian_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return MatrixXd::NullaryExpr(r, c, [&]() { return g(rng); });
}

void subspace_projection(Outcome& o) {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 2 + t % 7;
    const Eigen::Index r = 1 + (t / 7) % n;
    const MatrixXd b = gaussian_matrix(n, std::min(r, n), rng);
    const VectorXd x = gaussian_matrix(n, 1, rng);
    const auto rep = critical_set(VarietySpec::subspace(b), x);
    o.require(rep.points.size() == 1, "exactly one critical point");
    const VectorXd proj = b * b.colPivHouseholderQr().solve(x);
    worst = std::max(worst, (rep.best().y - proj).norm());
  }
  o.require(worst <= 1e-10, "projection error <= 1e-10");
  o.detail << "max projection error " << worst;
}

void matrix_census(Outcome& o) {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  std::size_t queries = 0;
  for (std::size_t k = 1; k <= 2; ++k) {
    for (int t = 0; t < 25; ++t) {
      const MatrixXd a = gaussian_matrix(3, 3, rng);
      const MatrixXd s = (a + a.transpose()) / 2;
      const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(s).singularValues();
      if (sv(0) - sv(1) < 1e-6 || sv(1) - sv(2) < 1e-6) continue;
      VectorXd x(9);
      for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) x(i * 3 + j) = s(i, j);
      const auto rep = critical_set(VarietySpec::matrix_rank(3, 3, k), x);
      o.require(rep.delta_estimate == binomial(3, k) && rep.points.size() == binomial(3, k), "binom(3,k) critical points");
      worst = std::max(worst, std::abs(rep.distance() - sv.tail(static_cast<Eigen::Index>(3 - k)).norm()));
      ++queries;
    }
  }
  o.require(worst <= 1e-9, "Eckart-Young distance within 1e-9");
  o.detail << queries << " queries, max distance error " << worst;
}

void lipschitz(Outcome& o) {
  const double a = lipschitz_probe(VarietySpec::matrix_rank(3, 3, 1), 200, 103);
  VectorXd coeffs(3);
  coeffs << 1.0, 2.0, -3.0;
  const double b = lipschitz_probe(VarietySpec::diag_quadric(coeffs), 200, 104);
  o.require(a <= 1 + 1e-6, "matrix ratio <= 1 + 1e-6");
  o.require(b <= 1 + 1e-6, "quadric ratio <= 1 + 1e-6");
  o.detail << "max ratio matrix " << a << ", quadric " << b;
}

void kruskal(Outcome& o) {
  FactorBundle f{MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
  const auto c = certify(f);
  o.require(c.kappas == std::array<std::size_t, 3>{2, 2, 2} && c.rank_certified == std::optional<std::size_t>(2), "diagonal tensor certified with kappas (2,2,2)");
  f.Y.col(1) = f.Y.col(0);
  o.require(!certify(f).condition_met, "degraded factors fail the condition");

  std::mt19937_64 rng(105);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto planted = planted_symmetric_terms(2, 3, 2, rng);
    DenseTensor x = rank_one(planted[0]) + rank_one(planted[1]);
    const CPModel m = best_rank_k(x, 2, 20, 500 + static_cast<std::uint64_t>(t));
    worst = std::max(worst, match_terms(m.terms, planted).max_angle);
  }
  o.require(worst <= 1e-6, "re-decomposition recovers planted factors within 1e-6 rad");
  o.detail << "max recovery angle " << worst;
}

void nbound(Outcome& o) {
  const Rational a = n_bound(2, 3), b = n_bound(3, 3), c = n_bound(3, 4);
  o.require(a == 2 && b == Rational(7) / 2 && c == 4, "N(2,3)=2, N(3,3)=7/2, N(3,4)=4");
  o.detail << to_string(a) << ", " << to_string(b) << ", " << to_string(c);
}

void finite_field(Outcome& o) {
  const GFTensor t = example64_tensor();
  const auto r = rank_exhaustive(t, 4);
  const auto s = srank_exhaustive(t, 4);
  o.require(r.rank == std::optional<std::size_t>(2), "rank 2 over GF(2)");
  o.require(s.srank == std::optional<std::size_t>(3), "srank 3 over GF(2)");
  o.require(prop61_witness(2, 2, 3).witness.has_value(), "witness for (p,m,d)=(2,2,3)");
  o.require(!prop61_witness(2, 2, 2).witness.has_value(), "no witness for (2,2,2)");
  o.detail << "rank " << (r.rank ? std::to_string(*r.rank) : "none") << ", srank " << (s.srank ? std::to_string(*s.srank) : "none");
}

void decompositions(Outcome& o) {
  std::mt19937_64 rng(106);
  std::uniform_int_distribution<long long> num(-6, 6), den(1, 5);
  std::size_t checked = 0;
  for (std::size_t d = 1; d <= 5; ++d)
    for (std::size_t k = 0; k <= d; ++k)
      for (int trial = 0; trial < 4; ++trial) {
        RationalVector u, v;
        for (int i = 0; i < 3; ++i) {
          u.push_back(Rational(num(rng)) / den(rng));
          v.push_back(Rational(num(rng)) / den(rng));
        }
        o.require(expand(vandermonde_decompose(u, v, k, d), 3) == mixed_power(u, v, k, d), "exact Vandermonde identity");
        ++checked;
      }
  for (const auto& [m, d] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 2}, {2, 3}, {3, 3}}) {
    const auto b = power_basis(m, d);
    o.require(b.determinant != 0 && b.vectors.size() == sym_dim(m, d), "power basis determinant nonzero");
  }
  o.detail << checked << " exact identities";
}

void banach(Outcome& o) {
  std::mt19937_64 rng(107);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const SymTensor s = random_symmetric(3, 3, rng);
    const double a = best_rank1_symmetric(s, 20, static_cast<std::uint64_t>(t)).objective;
    const double b = best_rank1(densify(s), 20, static_cast<std::uint64_t>(t)).objective;
    worst = std::max(worst, std::abs(a - b));
  }
  o.require(worst <= 1e-9, "symmetric and unconstrained optima agree within 1e-9");
  o.detail << "max discrepancy " << worst;
}

void thm71(Outcome& o) {
  for (const auto& [m, d] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 3}, {3, 3}, {2, 4}}) {
    const auto s = experiment_thm71(m, d, 100, 50, 108);
    o.require(s.fraction_symmetric >= 0.99, "fraction symmetric >= 0.99");
    o.require(s.fraction_unique >= 0.99, "fraction unique >= 0.99");
    o.detail << "(" << m << "," << d << "): sym " << s.fraction_symmetric << " unique " << s.fraction_unique << "; ";
  }
}

void thm72(Outcome& o) {
  for (const auto& [m, d, k] : std::vector<std::array<std::size_t, 3>>{{2, 3, 2}, {3, 4, 4}}) {
    const auto noisy = experiment_thm72(m, d, k, 1e-4, 50, 50, 109);
    o.require(noisy.fraction_symmetric >= 0.9, "fraction symmetric >= 0.9");
    o.require(noisy.escapes == 0, "no border escapes");
    const auto clean = experiment_thm72(m, d, k, 0.0, 50, 50, 110);
    o.require(clean.max_objective <= 1e-10, "noise-free objective <= 1e-10 in every trial");
    o.detail << "(" << m << "," << d << "," << k << "): sym " << noisy.fraction_symmetric << " escapes " << noisy.escapes
             << " clean max objective " << clean.max_objective << "; ";
  }
}

void saturation(Outcome& o) {
  std::mt19937_64 rng(111);
  const Shape shape{2, 2, 2};
  const auto v = VarietySpec::tensor_rank_one(shape);
  double fd = 0.0;
  std::size_t mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    const VectorXd x = gaussian_tensor(shape, rng).flat();
    CriticalOptions lo, hi;
    lo.starts = 200;
    hi.starts = 400;
    lo.seed = hi.seed = 1000 + static_cast<std::uint64_t>(t);
    const auto a = critical_set(v, x, lo);
    const auto b = critical_set(v, x, hi);
    mismatches += a.delta_estimate != b.delta_estimate;
    for (const auto& p : b.points)
      if (p.factors) fd = std::max(fd, finite_difference_stationarity(x, shape, *p.factors, 8, static_cast<std::uint64_t>(t)));
  }
  o.require(mismatches == 0, "delta estimate equal at 200 and 400 starts");
  o.require(fd <= 1e-6, "finite-difference stationarity <= 1e-6");
  o.detail << mismatches << " census mismatches, max FD derivative " << fd;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"subspace: unique critical point at the orthogonal projection", 5, subspace_projection},
      {"rank-k matrices: binom(3,k) critical points, Eckart-Young distance", 5, matrix_census},
      {"distance function is 1-Lipschitz", 30, lipschitz},
      {"Kruskal certificate and noise-free recovery", 10, kruskal},
      {"exact term bounds", 1, nbound},
      {"rank and symmetric rank over GF(2); spanning witness", 10, finite_field},
      {"exact Vandermonde decompositions and power bases", 10, decompositions},
      {"symmetric and unconstrained best rank-one agree", 120, banach},
      {"best rank-one fits of symmetric tensors are symmetric and unique", 600, thm71},
      {"best rank-k fits near certified symmetric tensors are symmetric", 900, thm72},
      {"rank-one tensor census saturates and is stationary", 300, saturation},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(o);
    } catch (const std::exception& e) {
      o.ok = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) {
      o.ok = false;
      o.detail << " [runtime " << secs << " s exceeds " << c.limit_seconds << " s]";
    }
    failures += !o.ok;
    std::printf("%s  %2zu  %-66s %8.2f s  %s\n", o.ok ? "PASS" : "FAIL", i + 1, c.name.c_str(), secs, o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
