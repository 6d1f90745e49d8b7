#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "seqpde/gradflow.hpp"
#include "seqpde/otd.hpp"

using namespace seqpde;

namespace {

Eigen::VectorXd bump(const PointBatch& x, double c, double w) {
  Eigen::VectorXd v(x.cols());
  for (int q = 0; q < x.cols(); ++q) {
    double s = 0.0;
    for (int k = 0; k < x.rows(); ++k) s += (x(k, q) - c) * (x(k, q) - c);
    v[q] = std::exp(-0.5 * s / (w * w));
  }
  return v;
}

}  // namespace

TEST_CASE("relaxation flow right-hand side", "[gradflow]") {
  const Box box = Box::interval(-3.0, 3.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 48);
  const L2LeastSquaresEnergy energy([](const PointBatch& x) { return bump(x, 0.4, 0.6); });
  const GaussianMixtureModel gm(2, 1, 0.6);
  Rng rng(3);
  const ParamVector theta = gm.random_init(rng, box);

  SECTION("rhs is target minus state pointwise") {
    const Eigen::VectorXd rhs = gradient_flow_rhs(energy, gm, theta, rule);
    const Eigen::VectorXd want = bump(rule.nodes, 0.4, 0.6) - gm.eval(theta, rule.nodes);
    CHECK((rhs - want).cwiseAbs().maxCoeff() < 1e-14);
  }

  SECTION("rhs vanishes when the state equals the target") {
    const GaussianMixtureModel single(1, 1, 0.6);
    ParamVector exact(2);
    exact << 0.4, 1.0;
    const L2LeastSquaresEnergy self_energy(
        [&](const PointBatch& x) { return single.eval(exact, x); });
    const Eigen::VectorXd rhs = gradient_flow_rhs(self_energy, single, exact, rule);
    CHECK(rhs.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(self_energy.value(single, exact, rule) < 1e-28);
  }
}

TEST_CASE("parameter gradient matches finite differences of the loss", "[gradflow][oracle]") {
  const Box box = Box::interval(-3.0, 3.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 64);
  const L2LeastSquaresEnergy energy([](const PointBatch& x) { return bump(x, 0.3, 0.7); });
  const GaussianMixtureModel gm(2, 1, 0.7);
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamVector theta = gm.random_init(rng, box);
    const Eigen::VectorXd grad = energy.parameter_gradient(gm, theta, rule);
    const double h = 1e-6;
    for (int i = 0; i < gm.param_count(); ++i) {
      ParamVector tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      const double fd = (energy.value(gm, tp, rule) - energy.value(gm, tm, rule)) / (2.0 * h);
      CHECK(oracles::rel_err(grad[i], fd) < 1e-6);
    }
  }
}

TEST_CASE("preconditioned descent equals the explicit projected step on the flow",
          "[gradflow][equivalence]") {
  const Box box = Box::interval(-4.0, 4.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 64);
  const L2LeastSquaresEnergy energy([](const PointBatch& x) { return bump(x, 0.5, 0.8); });
  const GaussianMixtureModel gm(2, 1, 0.8);
  RhsOperator flow = energy.flow_operator(rule);
  Rng rng(17);
  const double dt = 1e-3, tau = 1e-10;
  for (int trial = 0; trial < 100; ++trial) {
    const ParamVector theta = gm.random_init(rng, box);
    const ParamVector ngd = natural_gradient_step(gm, theta, energy, dt, rule, tau).first;
    const ParamVector otd =
        otd_step_explicit(gm, theta, flow, 0.0, dt, rule, tau).first;
    CHECK((ngd - otd).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + theta.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("representable targets are fixed points of the descent step", "[gradflow]") {
  const Box box = Box::interval(-3.0, 3.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 48);
  const GaussianMixtureModel gm(1, 1, 0.5);
  ParamVector star(2);
  star << -0.3, 1.2;
  const L2LeastSquaresEnergy energy([&](const PointBatch& x) { return gm.eval(star, x); });
  const ParamVector next = natural_gradient_step(gm, star, energy, 1e-2, rule, 1e-10).first;
  CHECK((next - star).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("energy descends along the explicit flow for small steps", "[gradflow]") {
  const Box box = Box::interval(-4.0, 4.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 64);
  const L2LeastSquaresEnergy energy([](const PointBatch& x) { return bump(x, 0.6, 0.5); });
  const GaussianMixtureModel gm(2, 1, 0.8);
  RhsOperator flow = energy.flow_operator(rule);
  Rng rng(23);
  ParamVector theta = gm.random_init(rng, box);
  double prev = energy.value(gm, theta, rule);
  for (int k = 0; k < 100; ++k) {
    theta = otd_step_explicit(gm, theta, flow, 0.0, 1e-3, rule, 1e-10, k).first;
    const double now = energy.value(gm, theta, rule);
    CHECK(now <= prev + 1e-14);
    prev = now;
  }
}

TEST_CASE("a separate energy metric changes the dynamics", "[gradflow]") {
  // Demonstration of the metric split: evaluating the preconditioner on a
  // different rule than the flow projection produces distinct trajectories.
  const Box box = Box::interval(-4.0, 4.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 64);
  const QuadratureRule coarse = monte_carlo_rule(box, 40, 5);
  const L2LeastSquaresEnergy energy([](const PointBatch& x) { return bump(x, 0.5, 0.8); });
  const GaussianMixtureModel gm(2, 1, 0.8);
  RhsOperator flow = energy.flow_operator(rule);
  Rng rng(29);
  const ParamVector theta = gm.random_init(rng, box);
  const ParamVector same = natural_gradient_step(gm, theta, energy, 1e-3, rule, 1e-10).first;
  const ParamVector split = natural_gradient_step(gm, theta, energy, 1e-3, coarse, 1e-10).first;
  const ParamVector otd = otd_step_explicit(gm, theta, flow, 0.0, 1e-3, rule, 1e-10).first;
  CHECK((same - otd).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((split - otd).cwiseAbs().maxCoeff() > 1e-10);
}
