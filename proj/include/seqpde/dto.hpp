#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/gauss_newton.hpp"
#include "seqpde/models.hpp"
#include "seqpde/pde.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

/// Record of one optimization-based step k -> k+1. Holds the arrived state
/// theta_{k+1}, the residual of the time-discrete matching problem at it, and
/// the inner Gauss-Newton diagnostics.
struct DtoStepRecord {
  int step = 0;     // k
  double t_next = 0.0;  // t_{k+1}
  ParamVector theta_next;

  double residual_norm = 0.0;  // || r_k(theta_{k+1}) ||_M
  int gn_iterations = 0;
  bool gn_converged = false;
  double first_order_violation = 0.0;  // | <grad r, r>_M | at theta_{k+1}
  double norm_m = 0.0;                 // || u_hat(theta_{k+1}) ||_M
  Eigen::VectorXd gram_spectrum;       // of the last inner linearization
  int effective_rank = 0;
  std::vector<double> residual_history;

  static constexpr double unset() { return std::numeric_limits<double>::quiet_NaN(); }
  double bound_explicit = unset();
  double bound_implicit = unset();
  double stationary_envelope = unset();  // squared-norm envelope value at t_{k+1}

  double sigma_max() const { return gram_spectrum.size() ? gram_spectrum[0] : 0.0; }
  double sigma_min() const {
    return gram_spectrum.size() ? gram_spectrum[gram_spectrum.size() - 1] : 0.0;
  }
};

/// Residual of the blended time-discrete matching problem at candidate theta:
///   r = u_hat(theta) - [u_hat(theta_k) + dt zeta f(t_k, theta_k)
///                       + dt (1-zeta) f(t_{k+1}, theta)].
inline Eigen::VectorXd dto_residual(const Model& model, const ParamVector& theta,
                                    const ParamVector& theta_k, const RhsOperator& rhs,
                                    double t_k, double dt, double zeta,
                                    const QuadratureRule& rule) {
  if (zeta < 0.0 || zeta > 1.0) throw ConfigError("dto_residual: zeta must lie in [0, 1]");
  Eigen::VectorXd r = model.eval(theta, rule.nodes) - model.eval(theta_k, rule.nodes);
  if (zeta > 0.0) r -= dt * zeta * eval_rhs(rhs, t_k, model, theta_k, rule);
  if (zeta < 1.0) r -= dt * (1.0 - zeta) * eval_rhs(rhs, t_k + dt, model, theta, rule);
  return r;
}

namespace detail {

inline std::pair<ParamVector, DtoStepRecord> finish_dto_step(const Model& model, GnReport gn,
                                                             double t_next, int step_index,
                                                             const QuadratureRule& rule) {
  DtoStepRecord rec;
  rec.step = step_index;
  rec.t_next = t_next;
  rec.theta_next = gn.theta;
  rec.residual_norm = gn.residual_norm;
  rec.gn_iterations = gn.iterations;
  rec.gn_converged = gn.converged;
  rec.first_order_violation = gn.first_order_violation;
  rec.gram_spectrum = gn.gram_spectrum;
  rec.effective_rank = gn.effective_rank;
  rec.residual_history = std::move(gn.residual_history);
  rec.norm_m = norm_m(rule, model.eval(gn.theta, rule.nodes));
  if (!gn.theta.allFinite())
    throw DivergenceError("optimization-based stepper produced non-finite parameters",
                          step_index);
  return {gn.theta, std::move(rec)};
}

}  // namespace detail

/// One step of the blended scheme solved by damped Gauss-Newton with min-norm
/// inner solves, started from theta_k. For zeta = 1 the first linearization is
/// the same least-squares problem as the explicit projected step, so a single
/// undamped iteration reproduces it.
inline std::pair<ParamVector, DtoStepRecord> dto_gauss_newton_step(
    const Model& model, const ParamVector& theta_k, const RhsOperator& rhs, double t_k, double dt,
    double zeta, const QuadratureRule& rule, const GnOptions& opts, int step_index = 0,
    const ParamVector* inner_start = nullptr) {
  if (zeta < 0.0 || zeta > 1.0)
    throw ConfigError("dto_gauss_newton_step: zeta must lie in [0, 1]");
  model.check_theta(theta_k);

  const Eigen::VectorXd u_k = model.eval(theta_k, rule.nodes);
  Eigen::VectorXd base = u_k;
  if (zeta > 0.0) base += dt * zeta * eval_rhs(rhs, t_k, model, theta_k, rule);
  const double t_next = t_k + dt;

  auto residual = [&](const ParamVector& th) -> Eigen::VectorXd {
    Eigen::VectorXd r = model.eval(th, rule.nodes) - base;
    if (zeta < 1.0) r -= dt * (1.0 - zeta) * eval_rhs(rhs, t_next, model, th, rule);
    return r;
  };
  auto jacobian = [&](const ParamVector& th) -> Eigen::MatrixXd {
    Eigen::MatrixXd g = model.grad_theta(th, rule.nodes);
    if (zeta < 1.0) g -= dt * (1.0 - zeta) * rhs_theta_jacobian(rhs, t_next, model, th, rule.nodes, g);
    return g;
  };

  GnReport gn = gauss_newton_minimize(residual, jacobian, inner_start ? *inner_start : theta_k,
                                      rule, opts);
  return detail::finish_dto_step(model, std::move(gn), t_next, step_index, rule);
}

/// One implicit-in-Laplacian, explicit-in-g step: minimizes
///   || u_hat(theta) - dt Delta u_hat(theta) - u_hat(theta_k) - dt g(t_k, theta_k) ||_M
/// by Gauss-Newton; the linearization carries the analytic mixed term
/// Delta grad_theta u_hat.
inline std::pair<ParamVector, DtoStepRecord> dto_step_imex(
    const Model& model, const ParamVector& theta_k, const RhsOperator& rhs, double t_k, double dt,
    const QuadratureRule& rule, const GnOptions& opts, int step_index = 0) {
  if (!rhs.has_laplacian())
    throw ConfigError("dto_step_imex: operator must have a Laplacian stiff part");
  model.check_theta(theta_k);

  const Eigen::VectorXd u_k = model.eval(theta_k, rule.nodes);
  Eigen::VectorXd base = u_k;
  if (rhs.bounded->needs_grad_u()) {
    const Eigen::MatrixXd gx = model.grad_x(theta_k, rule.nodes);
    base += dt * rhs.bounded->eval(t_k, rule.nodes, u_k, &gx);
  } else {
    base += dt * rhs.bounded->eval(t_k, rule.nodes, u_k, nullptr);
  }

  auto residual = [&](const ParamVector& th) -> Eigen::VectorXd {
    return model.eval(th, rule.nodes) - dt * model.laplacian(th, rule.nodes) - base;
  };
  auto jacobian = [&](const ParamVector& th) -> Eigen::MatrixXd {
    return model.grad_theta(th, rule.nodes) - dt * model.laplacian_grad_theta(th, rule.nodes);
  };

  GnReport gn = gauss_newton_minimize(residual, jacobian, theta_k, rule, opts);
  return detail::finish_dto_step(model, std::move(gn), t_k + dt, step_index, rule);
}

/// Which time-discrete matching problem a trajectory solved; controls the
/// consistency-error definition e_k used by the a posteriori accumulators.
enum class DtoSchemeKind { explicit_euler, implicit_euler, imex };

/// M-norms of the time-integration errors e_k of the true solution, assembled
/// from a reference solution:
///   explicit:  e_k = u(t_{k+1}) - u(t_k) - dt f(t_k, u(t_k))
///   implicit:  e_k = u(t_{k+1}) - u(t_k) - dt f(t_{k+1}, u(t_{k+1}))
///   imex:      e_k = u(t_{k+1}) - u(t_k) - dt Delta u(t_{k+1}) - dt g(t_k, u(t_k)).
inline std::vector<double> time_integration_error_norms(const ReferenceSolution& ref,
                                                        const RhsOperator& rhs,
                                                        const QuadratureRule& rule, double t0,
                                                        double dt, int n_steps,
                                                        DtoSchemeKind kind) {
  std::vector<double> norms(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    const double tk = t0 + k * dt;
    const double tn = tk + dt;
    const Eigen::VectorXd uk = ref.values(tk, rule.nodes);
    const Eigen::VectorXd un = ref.values(tn, rule.nodes);
    Eigen::VectorXd e = un - uk;
    switch (kind) {
      case DtoSchemeKind::explicit_euler: {
        const Eigen::MatrixXd gx = ref.grad_x(tk, rule.nodes);
        const Eigen::VectorXd lap = ref.laplacian(tk, rule.nodes);
        e -= dt * eval_rhs_on_values(rhs, tk, rule.nodes, uk, &gx, &lap);
        break;
      }
      case DtoSchemeKind::implicit_euler: {
        const Eigen::MatrixXd gx = ref.grad_x(tn, rule.nodes);
        const Eigen::VectorXd lap = ref.laplacian(tn, rule.nodes);
        e -= dt * eval_rhs_on_values(rhs, tn, rule.nodes, un, &gx, &lap);
        break;
      }
      case DtoSchemeKind::imex: {
        e -= dt * ref.laplacian(tn, rule.nodes);
        const Eigen::MatrixXd gx = ref.grad_x(tk, rule.nodes);
        e -= dt * rhs.bounded->eval(tk, rule.nodes, uk, &gx);
        break;
      }
    }
    norms[k] = norm_m(rule, e);
  }
  return norms;
}

/// Recursive accumulation of the explicit-scheme error bound
///   B_{k+1} = (1 + C dt) B_k + ||e_k|| + ||r_k||,   B_0 = e0.
/// Returns the series B_0..B_K and writes B_{k+1} onto record k.
inline std::vector<double> accumulate_dto_bound_explicit(std::vector<DtoStepRecord>& records,
                                                         double C, double dt, double e0,
                                                         const std::vector<double>& e_norms) {
  if (e_norms.size() != records.size())
    throw ConfigError("dto bound: need one time-integration error norm per step");
  std::vector<double> bounds(records.size() + 1);
  bounds[0] = e0;
  for (size_t k = 0; k < records.size(); ++k) {
    bounds[k + 1] = (1.0 + C * dt) * bounds[k] + e_norms[k] + records[k].residual_norm;
    records[k].bound_explicit = bounds[k + 1];
  }
  return bounds;
}

/// Geometric accumulation for the implicit scheme with Dirichlet dissipation:
///   B_{k+1} = rho (B_k + ||r_k|| + ||e_k||),  rho = 1 / (1 + (lambda* - C) dt),
/// valid under 1 + (lambda* - C) dt > 0 (validated).
inline std::vector<double> accumulate_dto_bound_implicit(std::vector<DtoStepRecord>& records,
                                                         double C, double lambda_star, double dt,
                                                         double e0,
                                                         const std::vector<double>& e_norms) {
  if (e_norms.size() != records.size())
    throw ConfigError("dto bound: need one time-integration error norm per step");
  const double denom = 1.0 + (lambda_star - C) * dt;
  if (denom <= 0.0)
    throw ConfigError("dto implicit bound requires 1 + (lambda* - C) dt > 0; got " +
                      std::to_string(denom));
  const double rho = 1.0 / denom;
  std::vector<double> bounds(records.size() + 1);
  bounds[0] = e0;
  for (size_t k = 0; k < records.size(); ++k) {
    bounds[k + 1] = rho * (bounds[k] + records[k].residual_norm + e_norms[k]);
    records[k].bound_implicit = bounds[k + 1];
  }
  return bounds;
}

/// Squared-norm growth envelope of stationary-point trajectories under the
/// affine growth assumption on f (or on g for the imex variant), for any
/// eps_param with 1 - eps_param dt > 0:
///   S_{k+1} = rho S_k + (rho - 1) q,  rho = (1 + 2 C^2 dt / eps)/(1 - eps dt),
///   q = 2 C0^2 / (2 C^2 + eps^2),    S_0 = ||u_hat(theta_0)||_M^2.
/// Requires a parametrization whose value lies in its own tangent space.
inline std::vector<double> dto_stability_envelope(std::vector<DtoStepRecord>& records, double C,
                                                  double C0, double dt, double eps_param,
                                                  double initial_norm_m, bool model_spans_self) {
  if (!model_spans_self)
    throw ConfigError(
        "dto stability envelope requires a parametrization contained in its own tangent span");
  if (eps_param <= 0.0) throw ConfigError("dto stability envelope: eps_param must be positive");
  if (1.0 - eps_param * dt <= 0.0)
    throw ConfigError("dto stability envelope requires 1 - eps_param * dt > 0; got " +
                      std::to_string(1.0 - eps_param * dt));
  const double rho = (1.0 + 2.0 * C * C * dt / eps_param) / (1.0 - eps_param * dt);
  const double q = 2.0 * C0 * C0 / (2.0 * C * C + eps_param * eps_param);
  std::vector<double> env(records.size() + 1);
  env[0] = initial_norm_m * initial_norm_m;
  for (size_t k = 0; k < records.size(); ++k) {
    env[k + 1] = rho * env[k] + (rho - 1.0) * q;
    records[k].stationary_envelope = env[k + 1];
  }
  return env;
}

}  // namespace seqpde
