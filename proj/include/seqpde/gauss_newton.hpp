#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/models.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

struct GnOptions {
  int max_iterations = 50;
  double step_size = 1.0;  // damping alpha applied to every Gauss-Newton step
  bool line_search = true;
  double tolerance = 1e-9;  // first-order stop, relative to the initial violation
  double tau = 1e-10;       // Gram-spectrum truncation for the inner solves
};

struct GnReport {
  ParamVector theta;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;           // M-norm at the returned iterate
  double first_order_violation = 0.0;   // | <grad r, r>_M | at the returned iterate
  int effective_rank = 0;               // of the last linearization
  Eigen::VectorXd gram_spectrum;        // of the last linearization (descending)
  std::vector<double> residual_history; // accepted-iterate residual norms, starting at theta0
};

/// Damped Gauss-Newton with truncated-SVD min-norm inner solves on the
/// weighted sample matrix. residual(theta) returns node values, jacobian(theta)
/// their theta-derivatives (p x n); the driver applies the quadrature weights.
/// With line search enabled the residual M-norm never increases across
/// accepted iterates; on stall or iteration exhaustion the best iterate seen is
/// returned with converged = false.
inline GnReport gauss_newton_minimize(
    const std::function<Eigen::VectorXd(const ParamVector&)>& residual,
    const std::function<Eigen::MatrixXd(const ParamVector&)>& jacobian,
    const ParamVector& theta0, const QuadratureRule& rule, const GnOptions& opts) {
  const Eigen::VectorXd sqrtw = rule.weights.array().sqrt();

  GnReport rep;
  rep.theta = theta0;
  Eigen::VectorXd rw = (sqrtw.array() * residual(theta0).array()).matrix();
  double rnorm = rw.norm();
  rep.residual_history.push_back(rnorm);

  ParamVector best_theta = theta0;
  double best_norm = rnorm;
  double scale = 1.0;

  for (int l = 0; l <= opts.max_iterations; ++l) {
    const Eigen::MatrixXd jw = jacobian(rep.theta) * sqrtw.asDiagonal();
    const Eigen::VectorXd grad = jw * rw;
    rep.first_order_violation = grad.norm();
    if (l == 0) scale = std::max(1.0, rep.first_order_violation);
    if (rep.first_order_violation <= opts.tolerance * scale) {
      rep.converged = true;
      rep.residual_norm = rnorm;
      if (rep.gram_spectrum.size() == 0) {
        const LstsqSolution sol = solve_least_squares(jw, -rw, opts.tau);
        rep.gram_spectrum = sol.singular_values;
        rep.effective_rank = sol.effective_rank;
      }
      return rep;
    }
    if (l == opts.max_iterations) break;

    const LstsqSolution sol = solve_least_squares(jw, -rw, opts.tau);
    rep.gram_spectrum = sol.singular_values;
    rep.effective_rank = sol.effective_rank;
    const Eigen::VectorXd step = opts.step_size * sol.x;

    bool accepted = false;
    double s = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      const ParamVector cand = rep.theta + s * step;
      if (!cand.allFinite()) { s *= 0.5; continue; }
      const Eigen::VectorXd cand_rw = (sqrtw.array() * residual(cand).array()).matrix();
      const double cand_norm = cand_rw.norm();
      if (!opts.line_search || cand_norm <= rnorm || !std::isfinite(rnorm)) {
        rep.theta = cand;
        rw = cand_rw;
        rnorm = cand_norm;
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;  // stalled; keep best iterate
    ++rep.iterations;
    rep.residual_history.push_back(rnorm);
    if (rnorm <= best_norm) {
      best_norm = rnorm;
      best_theta = rep.theta;
    }
  }

  if (rnorm > best_norm) {
    rep.theta = best_theta;
    rnorm = best_norm;
  }
  rep.residual_norm = rnorm;
  return rep;
}

/// Least-squares fit of a model to target node values, used to produce initial
/// parameters from a seeded random guess.
inline GnReport fit_to_values(const Model& model, const Eigen::VectorXd& target_vals,
                              const QuadratureRule& rule, const ParamVector& theta_init,
                              const GnOptions& opts) {
  auto residual = [&](const ParamVector& th) -> Eigen::VectorXd {
    return model.eval(th, rule.nodes) - target_vals;
  };
  auto jac = [&](const ParamVector& th) -> Eigen::MatrixXd {
    return model.grad_theta(th, rule.nodes);
  };
  return gauss_newton_minimize(residual, jac, theta_init, rule, opts);
}

}  // namespace seqpde
