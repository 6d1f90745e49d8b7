#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/gauss_newton.hpp"
#include "seqpde/models.hpp"
#include "seqpde/pde.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

/// Behavior when the tangent-space Gram matrix is rank deficient: continue
/// with the minimal-norm solution, or fail hard.
enum class RankPolicy { min_norm, fail };

/// Per-step state record of an OtD trajectory. Record k describes the state
/// theta_k before the step to k+1: the projection-error estimate eps(t_k), the
/// spectrum of P(theta_k), and the running bound/envelope values at t_k.
struct OtdStepRecord {
  int step = 0;
  double t = 0.0;
  ParamVector theta;

  double epsilon = 0.0;          // ||f - P f||_M at theta_k
  double rhs_norm = 0.0;         // ||f||_M
  double projection_norm = 0.0;  // ||P f||_M
  Eigen::VectorXd gram_spectrum;
  int effective_rank = 0;
  double norm_m = 0.0;  // ||u_hat(theta_k)||_M

  bool inner_converged = true;
  int inner_iterations = 0;

  static constexpr double unset() { return std::numeric_limits<double>::quiet_NaN(); }
  double bound_lipschitz = unset();
  double bound_laplacian = unset();
  double stability_bound = unset();
  double stability_bound_laplacian = unset();

  double sigma_max() const { return gram_spectrum.size() ? gram_spectrum[0] : 0.0; }
  double sigma_min() const {
    return gram_spectrum.size() ? gram_spectrum[gram_spectrum.size() - 1] : 0.0;
  }
};

struct ProjectionEstimate {
  double epsilon = 0.0;
  double rhs_norm = 0.0;
  double projection_norm = 0.0;
  Eigen::VectorXd gram_spectrum;
  int effective_rank = 0;
};

/// Least-squares residual of projecting rhs node values onto the span of the
/// gradient components under the quadrature inner product.
inline ProjectionEstimate estimate_projection_error(const Model& model, const ParamVector& theta,
                                                    const Eigen::VectorXd& rhs_vals,
                                                    const QuadratureRule& rule, double tau) {
  const Eigen::MatrixXd jw = weighted_sample_matrix(model.grad_theta(theta, rule.nodes), rule);
  const Eigen::VectorXd bw = weighted_samples(rhs_vals, rule);
  const LstsqSolution sol = solve_least_squares(jw, bw, tau);
  ProjectionEstimate est;
  est.epsilon = sol.residual_norm;
  est.rhs_norm = bw.norm();
  est.projection_norm = sol.projection_norm;
  est.gram_spectrum = sol.singular_values;
  est.effective_rank = sol.effective_rank;
  return est;
}

namespace detail {

inline void enforce_rank_policy(RankPolicy policy, int effective_rank, int p, int step) {
  if (policy == RankPolicy::fail && effective_rank < p)
    throw NumericalError("tangent space collapsed at step " + std::to_string(step) +
                         ": effective rank " + std::to_string(effective_rank) + " < " +
                         std::to_string(p));
}

inline void check_step_finite(const ParamVector& theta, int step) {
  if (!theta.allFinite())
    throw DivergenceError("time stepper produced non-finite parameters", step);
}

}  // namespace detail

/// One explicit Euler step of the projected dynamics: solves the linear
/// least-squares problem min_eta || grad u^T eta - f(t_k) ||_M at theta_k and
/// advances theta_{k+1} = theta_k + dt * eta. The solve residual is the
/// projection-error estimate eps(t_k).
inline std::pair<ParamVector, OtdStepRecord> otd_step_explicit(
    const Model& model, const ParamVector& theta_k, const RhsOperator& rhs, double t_k, double dt,
    const QuadratureRule& rule, double tau, int step_index = 0,
    RankPolicy policy = RankPolicy::min_norm) {
  model.check_theta(theta_k);
  const Eigen::MatrixXd jw = weighted_sample_matrix(model.grad_theta(theta_k, rule.nodes), rule);
  const Eigen::VectorXd f = eval_rhs(rhs, t_k, model, theta_k, rule);
  const Eigen::VectorXd bw = weighted_samples(f, rule);
  const LstsqSolution sol = solve_least_squares(jw, bw, tau);
  detail::enforce_rank_policy(policy, sol.effective_rank, model.param_count(), step_index);

  OtdStepRecord rec;
  rec.step = step_index;
  rec.t = t_k;
  rec.theta = theta_k;
  rec.epsilon = sol.residual_norm;
  rec.rhs_norm = bw.norm();
  rec.projection_norm = sol.projection_norm;
  rec.gram_spectrum = sol.singular_values;
  rec.effective_rank = sol.effective_rank;
  rec.norm_m = norm_m(rule, model.eval(theta_k, rule.nodes));

  ParamVector theta_next = theta_k + dt * sol.x;
  detail::check_step_finite(theta_next, step_index);
  return {std::move(theta_next), std::move(rec)};
}

/// One step of the one-parameter blended scheme. zeta = 1 reduces exactly to
/// the explicit step; zeta < 1 minimizes
///   || grad u(theta)^T (theta - theta_k)
///      - dt (zeta f(t_k, theta_k) + (1-zeta) f(t_{k+1}, theta)) ||_M
/// by Gauss-Newton, linearizing the implicit rhs part and dropping the
/// curvature term of the moving gradient.
inline std::pair<ParamVector, OtdStepRecord> otd_step_zeta(
    const Model& model, const ParamVector& theta_k, const RhsOperator& rhs, double t_k, double dt,
    double zeta, const QuadratureRule& rule, const GnOptions& inner, int step_index = 0,
    RankPolicy policy = RankPolicy::min_norm) {
  if (zeta < 0.0 || zeta > 1.0) throw ConfigError("otd_step_zeta: zeta must lie in [0, 1]");
  if (zeta == 1.0)
    return otd_step_explicit(model, theta_k, rhs, t_k, dt, rule, inner.tau, step_index, policy);

  model.check_theta(theta_k);
  const Eigen::VectorXd f_k = eval_rhs(rhs, t_k, model, theta_k, rule);
  const double t_next = t_k + dt;

  auto residual = [&](const ParamVector& th) -> Eigen::VectorXd {
    const Eigen::MatrixXd g = model.grad_theta(th, rule.nodes);
    Eigen::VectorXd r = g.transpose() * (th - theta_k) - dt * zeta * f_k;
    if (zeta < 1.0) r -= dt * (1.0 - zeta) * eval_rhs(rhs, t_next, model, th, rule);
    return r;
  };
  auto jacobian = [&](const ParamVector& th) -> Eigen::MatrixXd {
    const Eigen::MatrixXd g = model.grad_theta(th, rule.nodes);
    return g - dt * (1.0 - zeta) * rhs_theta_jacobian(rhs, t_next, model, th, rule.nodes, g);
  };

  const GnReport gn = gauss_newton_minimize(residual, jacobian, theta_k, rule, inner);

  // State diagnostics at theta_k, matching the explicit stepper's semantics.
  const ProjectionEstimate est = estimate_projection_error(model, theta_k, f_k, rule, inner.tau);
  detail::enforce_rank_policy(policy, est.effective_rank, model.param_count(), step_index);

  OtdStepRecord rec;
  rec.step = step_index;
  rec.t = t_k;
  rec.theta = theta_k;
  rec.epsilon = est.epsilon;
  rec.rhs_norm = est.rhs_norm;
  rec.projection_norm = est.projection_norm;
  rec.gram_spectrum = est.gram_spectrum;
  rec.effective_rank = est.effective_rank;
  rec.norm_m = norm_m(rule, model.eval(theta_k, rule.nodes));
  rec.inner_converged = gn.converged;
  rec.inner_iterations = gn.iterations;

  detail::check_step_finite(gn.theta, step_index);
  return {gn.theta, std::move(rec)};
}

/// Terminal record for the final state of a trajectory (projection estimate
/// computed directly; no step is taken from it).
inline OtdStepRecord otd_state_record(const Model& model, const ParamVector& theta,
                                      const RhsOperator& rhs, double t, const QuadratureRule& rule,
                                      double tau, int step_index) {
  const Eigen::VectorXd f = eval_rhs(rhs, t, model, theta, rule);
  const ProjectionEstimate est = estimate_projection_error(model, theta, f, rule, tau);
  OtdStepRecord rec;
  rec.step = step_index;
  rec.t = t;
  rec.theta = theta;
  rec.epsilon = est.epsilon;
  rec.rhs_norm = est.rhs_norm;
  rec.projection_norm = est.projection_norm;
  rec.gram_spectrum = est.gram_spectrum;
  rec.effective_rank = est.effective_rank;
  rec.norm_m = norm_m(rule, model.eval(theta, rule.nodes));
  return rec;
}

/// Gronwall accumulation of the projection-error estimates for Lipschitz
/// right-hand sides:
///   B_k = e^{C t_k} e0 + e^{C t_k} * integral_0^{t_k} e^{-C s} eps(s) ds,
/// the integral evaluated by the trapezoid rule on the step times. Writes the
/// series into the records and returns it.
inline std::vector<double> accumulate_bound_lipschitz(std::vector<OtdStepRecord>& records,
                                                      double C, double e0) {
  std::vector<double> bounds(records.size());
  double integral = 0.0;
  for (size_t k = 0; k < records.size(); ++k) {
    if (k > 0) {
      const double dt = records[k].t - records[k - 1].t;
      integral += 0.5 * dt *
                  (std::exp(-C * records[k - 1].t) * records[k - 1].epsilon +
                   std::exp(-C * records[k].t) * records[k].epsilon);
    }
    bounds[k] = std::exp(C * records[k].t) * (e0 + integral);
    records[k].bound_lipschitz = bounds[k];
  }
  return bounds;
}

/// Same accumulation with the Dirichlet-Laplacian contraction folded in: the
/// effective rate is C1 = C - lambda_star, where C is the Lipschitz constant
/// of the bounded part only.
inline std::vector<double> accumulate_bound_laplacian(std::vector<OtdStepRecord>& records,
                                                      double C, double lambda_star, double e0) {
  const double c1 = C - lambda_star;
  std::vector<double> bounds(records.size());
  double integral = 0.0;
  for (size_t k = 0; k < records.size(); ++k) {
    if (k > 0) {
      const double dt = records[k].t - records[k - 1].t;
      integral += 0.5 * dt *
                  (std::exp(-c1 * records[k - 1].t) * records[k - 1].epsilon +
                   std::exp(-c1 * records[k].t) * records[k].epsilon);
    }
    bounds[k] = std::exp(c1 * records[k].t) * (e0 + integral);
    records[k].bound_laplacian = bounds[k];
  }
  return bounds;
}

/// Norm-growth envelope under the affine growth assumption
/// ||f(u)||_M <= C ||u||_M + C0:
///   S(t) = ||u_hat(theta_0)||_M e^{C t} + (C0/C)(e^{C t} - 1).
/// When lambda_star is supplied the rate C is replaced by C - lambda_star
/// (Dirichlet dissipation), which may be negative; C = 0 or a zero effective
/// rate uses the linear-in-t limit.
inline std::vector<double> stability_envelope(std::vector<OtdStepRecord>& records, double C,
                                              double C0, const double* lambda_star = nullptr) {
  if (C < 0.0) throw ConfigError("stability_envelope: C must be nonnegative");
  if (records.empty()) return {};
  const double rate = lambda_star ? C - *lambda_star : C;
  const double base = records[0].norm_m;
  std::vector<double> env(records.size());
  for (size_t k = 0; k < records.size(); ++k) {
    const double t = records[k].t - records[0].t;
    double s;
    if (rate == 0.0) {
      s = base + C0 * t;
    } else {
      s = base * std::exp(rate * t) + (C0 / rate) * (std::exp(rate * t) - 1.0);
    }
    env[k] = s;
    if (lambda_star)
      records[k].stability_bound_laplacian = s;
    else
      records[k].stability_bound = s;
  }
  return env;
}

}  // namespace seqpde
