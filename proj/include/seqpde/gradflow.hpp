#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <utility>

#include "seqpde/common.hpp"
#include "seqpde/models.hpp"
#include "seqpde/pde.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

/// L2 least-squares energy E(v) = 1/2 || v - g ||_M^2 toward a fixed target
/// function g, discretized on a quadrature rule. Its function-space gradient
/// at v is v - g, so the associated flow relaxes toward the target.
class L2LeastSquaresEnergy {
 public:
  explicit L2LeastSquaresEnergy(std::function<Eigen::VectorXd(const PointBatch&)> target)
      : target_(std::move(target)) {}

  Eigen::VectorXd target_values(const PointBatch& points) const { return target_(points); }

  double value(const Model& model, const ParamVector& theta, const QuadratureRule& rule) const {
    const Eigen::VectorXd diff = model.eval(theta, rule.nodes) - target_(rule.nodes);
    return 0.5 * inner(rule, diff, diff);
  }

  /// Function-space gradient of E at u_hat(theta, .), as node values.
  Eigen::VectorXd function_space_gradient(const Model& model, const ParamVector& theta,
                                          const QuadratureRule& rule) const {
    return model.eval(theta, rule.nodes) - target_(rule.nodes);
  }

  /// Chain-rule parameter gradient <grad_theta u, grad_u E>_M.
  Eigen::VectorXd parameter_gradient(const Model& model, const ParamVector& theta,
                                     const QuadratureRule& rule) const {
    return assemble_moment_from_samples(model.grad_theta(theta, rule.nodes),
                                        function_space_gradient(model, theta, rule), rule);
  }

  /// The flow right-hand side -grad_u E = g - u as a bounded term, pluggable
  /// into the time steppers.
  std::shared_ptr<BoundedTerm> flow_term() const {
    return std::make_shared<TargetRelaxationTerm>(target_);
  }

  /// Full rhs operator for the relaxation flow; g - u is 1-Lipschitz in u.
  RhsOperator flow_operator(const QuadratureRule& rule) const {
    RhsOperator op;
    op.stiff = RhsOperator::StiffPart::none;
    op.bounded = flow_term();
    op.lipschitz_C = 1.0;
    op.affine_C0 = norm_m(rule, target_(rule.nodes));
    return op;
  }

 private:
  std::function<Eigen::VectorXd(const PointBatch&)> target_;
};

/// -grad_u E evaluated at u_hat(theta, .) on the nodes.
inline Eigen::VectorXd gradient_flow_rhs(const L2LeastSquaresEnergy& energy, const Model& model,
                                         const ParamVector& theta, const QuadratureRule& rule) {
  return -energy.function_space_gradient(model, theta, rule);
}

/// One preconditioned descent step on the parameter-space loss
/// L(theta) = E(u_hat(theta, .)):
///   theta_{k+1} = theta_k - dt * pinv(P(theta_k)) grad L(theta_k),
/// with the truncated spectral pseudo-inverse of the Gram matrix. The energy
/// metric may be evaluated on its own rule; passing the same rule everywhere
/// reproduces the explicit projected step on the relaxation flow.
inline std::pair<ParamVector, MinNormSolution> natural_gradient_step(
    const Model& model, const ParamVector& theta_k, const L2LeastSquaresEnergy& energy, double dt,
    const QuadratureRule& rule, double tau) {
  model.check_theta(theta_k);
  const Eigen::MatrixXd grads = model.grad_theta(theta_k, rule.nodes);
  const GramMatrix gram = assemble_gram_from_samples(grads, rule, tau);
  const Eigen::VectorXd grad_l = assemble_moment_from_samples(
      grads, energy.function_space_gradient(model, theta_k, rule), rule);
  MinNormSolution sol = solve_min_norm(gram, grad_l, tau);
  ParamVector theta_next = theta_k - dt * sol.x;
  if (!theta_next.allFinite())
    throw NumericalError("natural_gradient_step: non-finite update");
  return {std::move(theta_next), std::move(sol)};
}

}  // namespace seqpde
