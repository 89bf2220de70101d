#include "edcrit/approx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "edcrit/levenberg_marquardt.hpp"
#include "edcrit/parallel.hpp"

namespace edcrit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

std::uint64_t start_seed(std::uint64_t seed, std::size_t s) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (s + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Candidate {
  std::vector<RankOneTerm> terms;
  DenseTensor y;
  double objective = std::numeric_limits<double>::infinity();
  double residual = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
  bool escape = false;
  FactorMatrices factors;
};

bool sweep_done(double prev, double cur, double rel_tol, double tnorm) {
  const double change = std::abs(prev - cur);
  return change <= rel_tol * std::max(prev, 1e-300) || cur <= 1e-15 * tnorm;
}

/// Picks the best critical candidate (lowest objective, ties to lower start index)
/// and measures the gap to the next distinct one.
CPModel reduce(std::vector<std::optional<Candidate>>& cands, double tnorm, double critical_tol, bool require_critical,
               const char* what) {
  std::vector<std::size_t> valid, finite;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!cands[i] || !std::isfinite(cands[i]->objective)) continue;
    finite.push_back(i);
    if (cands[i]->residual <= critical_tol) valid.push_back(i);
  }
  if (finite.empty() || (require_critical && valid.empty()))
    throw NumericError(std::string(what) + ": no start reached a critical point");
  auto& pool = valid.empty() ? finite : valid;
  std::stable_sort(pool.begin(), pool.end(),
                   [&](std::size_t a, std::size_t b) { return cands[a]->objective < cands[b]->objective; });

  std::vector<std::size_t> distinct;
  const double dedup = 1e-6 * std::max(1.0, tnorm);
  for (auto i : pool) {
    const bool dup = std::any_of(distinct.begin(), distinct.end(), [&](std::size_t j) {
      return (cands[i]->y.flat() - cands[j]->y.flat()).norm() <= dedup;
    });
    if (!dup) distinct.push_back(i);
  }

  Candidate& best = *cands[pool.front()];
  CPModel m;
  m.terms = std::move(best.terms);
  m.objective = best.objective;
  m.iterations = best.iterations;
  m.converged = best.converged && !valid.empty();
  m.history = std::move(best.history);
  m.stationarity = best.residual;
  m.border_escape = best.escape;
  m.start_index = pool.front();
  m.distinct_candidates = distinct.size();
  if (distinct.size() > 1) m.uniqueness_gap = cands[distinct[1]]->objective - cands[distinct[0]]->objective;
  return m;
}

VectorXd leading_left_vector(const MatrixXd& a, Index col = 0) {
  Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeThinU);
  return svd.matrixU().col(col);
}

double objective_of(const DenseTensor& t, const DenseTensor& y) { return (t.flat() - y.flat()).norm(); }

void check_start_count(std::size_t starts, const char* what) {
  if (starts < 1) throw std::invalid_argument(std::string(what) + ": starts must be at least 1");
}

std::vector<RankOneTerm> zero_model(const Shape& shape) {
  std::vector<VectorXd> f;
  for (auto m : shape) f.push_back(VectorXd::Unit(static_cast<Index>(m), 0));
  return {RankOneTerm(0.0, std::move(f))};
}

CPModel trivial_model(const DenseTensor& t) {
  CPModel m;
  m.terms = zero_model(t.shape());
  m.converged = true;
  m.history = {0.0};
  return m;
}

/// Entries of t contracted with u on its last q modes (row-major head index).
VectorXd contract_tail(const DenseTensor& t, const VectorXd& u, std::size_t q) {
  VectorXd kp = VectorXd::Ones(1);
  for (std::size_t i = 0; i < q; ++i) {
    VectorXd next(kp.size() * u.size());
    for (Index a = 0; a < kp.size(); ++a) next.segment(a * u.size(), u.size()) = kp(a) * u;
    kp = std::move(next);
  }
  const Index tail = kp.size();
  const Index head = static_cast<Index>(t.size()) / tail;
  return Eigen::Map<const RowMatrix>(t.data().data(), head, tail) * kp;
}

}  // namespace

DenseTensor CPModel::reconstruct() const {
  if (terms.empty()) throw std::invalid_argument("CPModel: no terms");
  DenseTensor y = rank_one(terms.front());
  for (std::size_t i = 1; i < terms.size(); ++i) y += rank_one(terms[i]);
  return y;
}

double rank1_residual(const DenseTensor& t, const RankOneTerm& term) {
  const auto& x = term.factors();
  const double lambda = contract_all(t, x);
  double worst = 0.0;
  for (std::size_t l = 0; l < x.size(); ++l) worst = std::max(worst, (contract_except(t, x, l) - lambda * x[l]).norm());
  return worst;
}

// ---------------------------------------------------------------------------

CPModel best_rank1(const DenseTensor& t, std::size_t starts, std::uint64_t seed) {
  ApproxOptions opt;
  opt.starts = starts;
  opt.seed = seed;
  return best_rank1(t, opt);
}

CPModel best_rank1(const DenseTensor& t, const ApproxOptions& opt) {
  check_start_count(opt.starts, "best_rank1");
  const double tnorm = hs_norm(t);
  if (tnorm == 0.0) return trivial_model(t);
  const std::size_t d = t.order();

  std::vector<std::optional<Candidate>> cands(opt.starts);
  parallel_for(opt.starts, [&](std::size_t s) {
    std::mt19937_64 rng(start_seed(opt.seed, s));
    std::vector<VectorXd> x;
    for (std::size_t l = 0; l < d; ++l)
      x.push_back(s == 0 ? leading_left_vector(unfold(t, l)) : gaussian_vector(static_cast<Index>(t.shape()[l]), rng).normalized());

    Candidate c;
    double lambda = contract_all(t, x);
    double prev = objective_of(t, rank_one(RankOneTerm(lambda, x)));
    for (int it = 0; it < opt.max_sweeps; ++it) {
      for (std::size_t l = 0; l < d; ++l) {
        VectorXd v = contract_except(t, x, l);
        const double n = v.norm();
        if (n > 0.0) x[l] = v / n;
      }
      lambda = contract_all(t, x);
      const double obj = objective_of(t, rank_one(RankOneTerm(lambda, x)));
      c.history.push_back(obj);
      c.iterations = it + 1;
      const bool done = sweep_done(prev, obj, opt.relative_tolerance, tnorm);
      prev = obj;
      if (done) {
        c.converged = true;
        break;
      }
    }
    if (lambda == 0.0) return;
    RankOneTerm term(lambda, x);
    double obj = prev;
    double res = rank1_residual(t, term);
    if (opt.polish && res > 1e-14 * tnorm) {
      FactorMatrices f;
      for (std::size_t l = 0; l < d; ++l) f.emplace_back(l == 0 ? VectorXd(lambda * x[l]) : x[l]);
      StationaryOptions so;
      so.gradient_steps = 0;
      so.max_iterations = 100;
      auto pol = solve_stationary(t, std::move(f), so);
      bool finite = true;
      for (const auto& a : pol.factors) finite = finite && a.allFinite() && a.norm() > 0.0;
      if (finite) {
        std::vector<VectorXd> px;
        for (const auto& a : pol.factors) px.emplace_back(a.col(0));
        RankOneTerm pt(1.0, px);
        const double pobj = objective_of(t, rank_one(pt));
        const double pres = rank1_residual(t, pt);
        if (pobj <= obj + 1e-12 * tnorm && pres < res) {
          term = pt;
          obj = pobj;
          res = pres;
        }
      }
    }
    c.y = rank_one(term);
    c.objective = obj;
    c.residual = res;
    c.terms = {std::move(term)};
    cands[s] = std::move(c);
  });
  return reduce(cands, tnorm, 1e-8 * std::max(1.0, tnorm), true, "best_rank1");
}

// ---------------------------------------------------------------------------

CPModel best_rank1_symmetric(const SymTensor& s, std::size_t starts, std::uint64_t seed) {
  ApproxOptions opt;
  opt.starts = starts;
  opt.seed = seed;
  return best_rank1_symmetric(s, opt);
}

CPModel best_rank1_symmetric(const SymTensor& sym, const ApproxOptions& opt) {
  check_start_count(opt.starts, "best_rank1_symmetric");
  const DenseTensor t = densify(sym);
  const double tnorm = hs_norm(t);
  if (tnorm == 0.0) return trivial_model(t);
  const std::size_t d = sym.d();
  const Index m = static_cast<Index>(sym.m());
  const double shift = static_cast<double>(d > 1 ? d - 1 : 1) * tnorm;
  const std::size_t signs = d % 2 == 0 ? 2 : 1;
  const std::size_t runs = opt.starts * signs;

  auto power = [&](const VectorXd& u) {
    return d >= 1 ? contract_tail(t, u, d - 1) : VectorXd(VectorXd::Zero(m));
  };

  std::vector<std::optional<Candidate>> cands(runs);
  parallel_for(runs, [&](std::size_t run) {
    const std::size_t s = run / signs;
    const double sigma = run % signs == 0 ? 1.0 : -1.0;
    std::mt19937_64 rng(start_seed(opt.seed, s));
    VectorXd u = s == 0 ? leading_left_vector(unfold(t, 0)) : gaussian_vector(m, rng).normalized();

    Candidate c;
    auto obj_of = [&](const VectorXd& v) {
      const double lambda = power(v).dot(v);
      return std::make_pair(lambda, objective_of(t, rank_one(symmetric_term(lambda, v, d))));
    };
    auto [lambda, prev] = obj_of(u);
    for (int it = 0; it < opt.max_sweeps; ++it) {
      const VectorXd next = sigma * power(u) + shift * u;
      if (!(next.norm() > 0.0)) break;
      u = next.normalized();
      const auto [l2, obj] = obj_of(u);
      lambda = l2;
      c.history.push_back(obj);
      c.iterations = it + 1;
      const bool done = sweep_done(prev, obj, opt.relative_tolerance, tnorm);
      prev = obj;
      if (done) {
        c.converged = true;
        break;
      }
    }

    double obj = prev;
    auto residual_of = [&](const VectorXd& v, double lam) { return (power(v) - lam * v).norm(); };
    double res = residual_of(u, lambda);
    if (opt.polish && res > 1e-14 * tnorm) {
      VectorXd z(m + 1);
      z << u, lambda;
      auto eval = [&](const VectorXd& zz, VectorXd& r, MatrixXd* J) {
        const VectorXd v = zz.head(m);
        const double lam = zz(m);
        r.resize(m + 1);
        r.head(m) = power(v) - lam * v;
        r(m) = 0.5 * (v.squaredNorm() - 1.0);
        if (J) {
          J->resize(m + 1, m + 1);
          const VectorXd flat = d >= 2 ? contract_tail(t, v, d - 2) : VectorXd(VectorXd::Zero(m * m));
          const MatrixXd H = d >= 2 ? MatrixXd(Eigen::Map<const RowMatrix>(flat.data(), m, m)) : MatrixXd::Zero(m, m);
          J->topLeftCorner(m, m) = static_cast<double>(d - 1) * H - lam * MatrixXd::Identity(m, m);
          J->topRightCorner(m, 1) = -v;
          J->bottomLeftCorner(1, m) = v.transpose();
          (*J)(m, m) = 0.0;
        }
      };
      LmOptions lm;
      lm.max_iterations = 100;
      lm.residual_tolerance = 1e-15 * tnorm;
      const auto r = levenberg_marquardt(z, eval, lm);
      if (r.x.allFinite() && r.x.head(m).norm() > 0.0) {
        const VectorXd pu = r.x.head(m).normalized();
        const auto [plam, pobj] = obj_of(pu);
        const double pres = residual_of(pu, plam);
        if (pobj <= obj + 1e-12 * tnorm && pres < res) {
          u = pu;
          lambda = plam;
          obj = pobj;
          res = pres;
        }
      }
    }
    if (lambda == 0.0) return;
    RankOneTerm term = symmetric_term(lambda, u, d);
    c.y = rank_one(term);
    c.objective = obj;
    c.residual = res;
    c.terms = {std::move(term)};
    cands[run] = std::move(c);
  });
  CPModel out = reduce(cands, tnorm, 1e-8 * std::max(1.0, tnorm), true, "best_rank1_symmetric");
  out.start_index /= signs;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

FactorMatrices als_start(const DenseTensor& t, std::size_t k, std::size_t s, std::mt19937_64& rng) {
  const Index kk = static_cast<Index>(k);
  const double tnorm = hs_norm(t);
  FactorMatrices f;
  for (std::size_t l = 0; l < t.order(); ++l) {
    const Index m = static_cast<Index>(t.shape()[l]);
    MatrixXd a(m, kk);
    if (s == 0) {
      Eigen::JacobiSVD<MatrixXd> svd(unfold(t, l), Eigen::ComputeThinU);
      for (Index j = 0; j < kk; ++j)
        a.col(j) = j < svd.matrixU().cols() ? VectorXd(svd.matrixU().col(j)) : gaussian_vector(m, rng).normalized();
    } else {
      for (Index j = 0; j < kk; ++j) a.col(j) = gaussian_vector(m, rng).normalized();
    }
    f.push_back(std::move(a));
  }
  for (Index j = 0; j < kk; ++j) {
    std::vector<VectorXd> cols;
    for (const auto& a : f) cols.emplace_back(a.col(j));
    double w = s == 0 ? contract_all(t, cols) : tnorm / std::sqrt(static_cast<double>(k));
    if (std::abs(w) < 1e-12 * std::max(1.0, tnorm)) w = tnorm / std::sqrt(static_cast<double>(k));
    f[0].col(j) *= w;
  }
  return f;
}

double max_term_weight(const FactorMatrices& f) {
  double w = 0.0;
  for (Index j = 0; j < f.front().cols(); ++j) {
    double p = 1.0;
    for (const auto& a : f) p *= a.col(j).norm();
    w = std::max(w, p);
  }
  return w;
}

double cp_residual(const DenseTensor& t, const FactorMatrices& f) {
  return tangent_residual(cp_jacobian(f), t.flat() - cp_reconstruct(f).flat());
}

bool usable(const FactorMatrices& f) {
  for (const auto& a : f)
    if (!a.allFinite()) return false;
  for (Index j = 0; j < f.front().cols(); ++j)
    for (const auto& a : f)
      if (!(a.col(j).norm() > 0.0)) return false;
  return true;
}

}  // namespace

CPModel best_rank_k(const DenseTensor& t, std::size_t k, std::size_t starts, std::uint64_t seed) {
  ApproxOptions opt;
  opt.starts = starts;
  opt.seed = seed;
  return best_rank_k(t, k, opt);
}

CPModel best_rank_k(const DenseTensor& t, std::size_t k, const ApproxOptions& opt) {
  if (k < 1) throw std::invalid_argument("best_rank_k: k must be at least 1");
  check_start_count(opt.starts, "best_rank_k");
  if (k == 1) return best_rank1(t, opt);
  const double tnorm = hs_norm(t);
  if (tnorm == 0.0) return trivial_model(t);
  const std::size_t d = t.order();
  const double escape_limit = 1e6 * std::max(1.0, tnorm);

  auto polish = [&](Candidate& c, int lsq_iterations) {
    if (max_term_weight(c.factors) > escape_limit) return;
    auto try_accept = [&](StationaryResult&& r) {
      if (!usable(r.factors)) return;
      const double pobj = objective_of(t, cp_reconstruct(r.factors));
      const double pres = cp_residual(t, r.factors);
      if (pobj <= c.objective + 1e-12 * tnorm && pres < c.residual) {
        c.factors = std::move(r.factors);
        c.objective = pobj;
        c.residual = pres;
      }
    };
    if (c.residual > 1e-12 * tnorm) try_accept(fit_least_squares(t, c.factors, lsq_iterations));
    if (c.residual > 1e-14 * tnorm) {
      StationaryOptions so;
      so.gradient_steps = 0;
      so.max_iterations = 100;
      try_accept(solve_stationary(t, c.factors, so));
    }
  };

  std::vector<std::optional<Candidate>> cands(opt.starts);
  parallel_for(opt.starts, [&](std::size_t s) {
    std::mt19937_64 rng(start_seed(opt.seed, s));
    FactorMatrices f = als_start(t, k, s, rng);
    Candidate c;
    double prev = objective_of(t, cp_reconstruct(f));
    for (int it = 0; it < opt.max_sweeps; ++it) {
      for (std::size_t n = 0; n < d; ++n) {
        MatrixXd H = MatrixXd::Ones(static_cast<Index>(k), static_cast<Index>(k));
        for (std::size_t l = 0; l < d; ++l)
          if (l != n) H = H.cwiseProduct(f[l].transpose() * f[l]);
        const auto sv = Eigen::JacobiSVD<MatrixXd>(H).singularValues();
        if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e12) return;  // ill-conditioned: abandon
        f[n] = H.ldlt().solve(mttkrp(t, f, n).transpose()).transpose();
      }
      const double obj = objective_of(t, cp_reconstruct(f));
      c.history.push_back(obj);
      c.iterations = it + 1;
      const bool done = sweep_done(prev, obj, opt.relative_tolerance, tnorm);
      prev = obj;
      if (done) {
        c.converged = true;
        break;
      }
      if (max_term_weight(f) > escape_limit) break;
    }
    if (!usable(f)) return;
    balance(f);
    c.objective = prev;
    c.residual = cp_residual(t, f);
    c.factors = std::move(f);
    if (opt.polish) polish(c, 200);
    cands[s] = std::move(c);
  });

  // Swamps: the leading candidates get a much longer least-squares run.
  if (opt.polish) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (cands[i] && std::isfinite(cands[i]->objective)) order.push_back(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cands[a]->objective < cands[b]->objective; });
    std::vector<std::size_t> slow;
    for (std::size_t i = 0; i < std::min<std::size_t>(order.size(), 3); ++i)
      if (cands[order[i]]->residual > 1e-10 * std::max(1.0, tnorm)) slow.push_back(order[i]);
    parallel_for(slow.size(), [&](std::size_t i) { polish(*cands[slow[i]], 5000); });
  }
  for (auto& c : cands)
    if (c) {
      c->escape = max_term_weight(c->factors) > escape_limit;
      c->converged = c->converged || c->residual <= 1e-10 * std::max(1.0, tnorm);
      c->y = cp_reconstruct(c->factors);
      c->terms = to_terms(c->factors);
    }
  return reduce(cands, tnorm, 1e-6 * std::max(1.0, tnorm), false, "best_rank_k");
}

// ---------------------------------------------------------------------------

double line_angle(const VectorXd& a, const VectorXd& b) {
  const VectorXd x = a.normalized(), y = b.normalized();
  const double chord = std::min((x - y).norm(), (x + y).norm());
  return 2.0 * std::asin(std::min(1.0, chord / 2.0));
}

SymmetryVerdict symmetry_verdict(const CPModel& model) {
  if (model.terms.empty()) throw std::invalid_argument("symmetry_verdict: model has no terms");
  const Shape shape = model.terms.front().shape();
  if (std::any_of(shape.begin(), shape.end(), [&](std::size_t m) { return m != shape.front(); }))
    throw std::invalid_argument("symmetry_verdict: model must be cubical");
  SymmetryVerdict v;
  for (const auto& term : model.terms) {
    const auto& f = term.factors();
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = i + 1; j < f.size(); ++j) v.max_factor_angle = std::max(v.max_factor_angle, line_angle(f[i], f[j]));
  }
  v.is_symmetric = v.max_factor_angle <= 1e-6;
  const DenseTensor y = model.reconstruct();
  const double tol = 1e-8 * std::max(1.0, hs_norm(y));
  v.orbit_collapsed = true;
  std::vector<std::size_t> perm(shape.size());
  for (std::size_t i = 0; i < shape.size() && v.orbit_collapsed; ++i)
    for (std::size_t j = i + 1; j < shape.size() && v.orbit_collapsed; ++j) {
      std::iota(perm.begin(), perm.end(), 0);
      std::swap(perm[i], perm[j]);
      v.orbit_collapsed = (permute_modes(y, perm).flat() - y.flat()).norm() <= tol;
    }
  return v;
}

TermMatch match_terms(std::span<const RankOneTerm> model, std::span<const RankOneTerm> reference) {
  const std::size_t n = model.size(), r = reference.size();
  std::vector<std::vector<double>> cost(n, std::vector<double>(r, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const auto& a = model[i].factors();
      const auto& b = reference[j].factors();
      if (a.size() != b.size()) throw std::invalid_argument("match_terms: orders differ");
      for (std::size_t l = 0; l < a.size(); ++l) cost[i][j] = std::max(cost[i][j], line_angle(a[l], b[l]));
    }
  TermMatch out;
  out.assignment.assign(n, static_cast<std::size_t>(-1));
  std::vector<bool> used_i(n, false), used_j(r, false);
  for (std::size_t step = 0; step < std::min(n, r); ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < r; ++j)
        if (!used_i[i] && !used_j[j] && cost[i][j] < best) {
          best = cost[i][j];
          bi = i;
          bj = j;
        }
    used_i[bi] = used_j[bj] = true;
    out.assignment[bi] = bj;
    out.max_angle = std::max(out.max_angle, best);
  }
  return out;
}

SymTensor random_symmetric(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  return symmetrize(gaussian_tensor(Shape(d, m), rng));
}

}  // namespace edcrit
