#pragma once

// Canonical miniature problems shared across the scheme-level test suites.

#include <memory>

#include "seqpde/gauss_newton.hpp"
#include "seqpde/models.hpp"
#include "seqpde/pde.hpp"
#include "seqpde/quadrature.hpp"

namespace helpers {

using namespace seqpde;

struct HeatProblem {
  std::shared_ptr<const Model> model;
  ParamVector theta0;
  RhsOperator rhs;
  QuadratureRule rule;
  Box box;
  double lambda_star = 0.0;
  double reaction_c = 0.0;
  std::shared_ptr<SineModeReference> reference;
};

/// Dirichlet-masked trainable-bandwidth mixture fitted to sin(pi x) on [0,1],
/// evolving under u_t = Delta u + c u. The exact solution is the decaying sine
/// mode, available as an analytic reference.
inline HeatProblem make_masked_heat_problem(int n_kernels = 3, double c = 1.0, int nodes = 64,
                                            std::uint64_t seed = 7) {
  HeatProblem prob;
  prob.box = Box::interval(0.0, 1.0);
  prob.rule = gauss_legendre_rule(prob.box, nodes);
  BoundaryMask mask;
  mask.kind = BoundaryMask::Kind::homogeneous_dirichlet;
  mask.domain = prob.box;
  prob.model = std::make_shared<MaskedModel>(
      std::make_shared<GaussianMixtureModel>(n_kernels, 1, 0.3, /*trainable=*/true), mask);
  prob.rhs.stiff = RhsOperator::StiffPart::laplacian;
  prob.rhs.bounded = std::make_shared<LinearReactionTerm>(c);
  prob.rhs.lipschitz_C = std::abs(c);
  prob.reaction_c = c;
  prob.lambda_star = smallest_dirichlet_eigenvalue(prob.box);
  prob.reference = std::make_shared<SineModeReference>(prob.box, 1.0, c);

  Eigen::VectorXd target(prob.rule.node_count());
  for (int q = 0; q < prob.rule.node_count(); ++q)
    target[q] = std::sin(BoundaryMask::pi() * prob.rule.nodes(0, q));
  Rng rng(seed);
  GnOptions fit;
  fit.max_iterations = 300;
  fit.tolerance = 1e-13;
  prob.theta0 = fit_to_values(*prob.model, target, prob.rule, prob.model->random_init(rng, prob.box),
                              fit).theta;
  return prob;
}

struct AdvectionProblem {
  std::shared_ptr<const GaussianMixtureModel> model;
  ParamVector theta0;
  RhsOperator rhs;
  std::shared_ptr<const AdvectionTerm> advection;
  QuadratureRule rule;
  Box box;
  std::shared_ptr<TransportReference> reference;
};

/// Shift-capable single-bump ansatz on a wide window; the rhs is w(t) d/dx u
/// with an optional smooth speed modulation. The bump is exactly representable
/// at t = 0 and the transported profile is the analytic solution.
inline AdvectionProblem make_advection_problem(double amplitude = 0.0, double omega = 0.0,
                                               double w0 = -1.0, int nodes = 96) {
  AdvectionProblem prob;
  prob.box = Box::interval(-5.0, 6.0);
  prob.rule = gauss_legendre_rule(prob.box, nodes);
  prob.model = std::make_shared<GaussianMixtureModel>(1, 1, 0.5);
  prob.theta0 = ParamVector(2);
  prob.theta0 << 0.0, 1.0;
  prob.advection =
      std::make_shared<AdvectionTerm>(Eigen::VectorXd::Constant(1, w0), amplitude, omega);
  prob.rhs.bounded = prob.advection;
  prob.rhs.lipschitz_C = 0.0;
  prob.reference = std::make_shared<TransportReference>(prob.model, prob.theta0, prob.advection);
  return prob;
}

inline double error_vs(const Model& model, const ParamVector& theta,
                       const ReferenceSolution& ref, double t, const QuadratureRule& rule) {
  return norm_m(rule, (model.eval(theta, rule.nodes) - ref.values(t, rule.nodes)).eval());
}

}  // namespace helpers
