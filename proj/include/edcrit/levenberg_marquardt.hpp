#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace edcrit {

struct LmOptions {
  int max_iterations = 200;
  double residual_tolerance = 0.0;  // stop once ||r|| <= this
  double step_tolerance = 1e-15;    // stop once ||dx|| <= tol * (||x|| + tol)
  double initial_damping = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double residual_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton on ||r(x)||^2 with Nielsen's damping update.
/// `eval(x, r, J)` fills the residual and, when `J` is non-null, its Jacobian.
template <class Eval>
LmResult levenberg_marquardt(Eigen::VectorXd x, Eval&& eval, const LmOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  VectorXd r, r_try;
  MatrixXd J;
  eval(x, r, &J);
  double cost = r.squaredNorm();
  MatrixXd A = J.transpose() * J;
  VectorXd g = J.transpose() * r;
  double mu = opt.initial_damping * std::max(A.diagonal().maxCoeff(), 1e-300);
  double nu = 2.0;

  LmResult res;
  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (!std::isfinite(cost)) break;
    if (std::sqrt(cost) <= opt.residual_tolerance) {
      res.converged = true;
      break;
    }
    MatrixXd damped = A;
    damped.diagonal().array() += mu;
    const VectorXd dx = damped.ldlt().solve(-g);
    if (!dx.allFinite()) break;
    if (dx.norm() <= opt.step_tolerance * (x.norm() + opt.step_tolerance)) {
      res.converged = true;
      break;
    }
    const VectorXd x_try = x + dx;
    eval(x_try, r_try, nullptr);
    const double cost_try = r_try.squaredNorm();
    const double predicted = dx.dot(mu * dx - g);
    const double rho = predicted > 0 ? (cost - cost_try) / predicted : -1.0;
    if (std::isfinite(cost_try) && rho > 0) {
      x = x_try;
      eval(x, r, &J);
      cost = r.squaredNorm();
      A = J.transpose() * J;
      g = J.transpose() * r;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!std::isfinite(mu) || mu > 1e300) break;
    }
  }
  if (std::sqrt(cost) <= opt.residual_tolerance) res.converged = true;
  res.x = std::move(x);
  res.residual_norm = std::sqrt(cost);
  return res;
}

}  // namespace edcrit
