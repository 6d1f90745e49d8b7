#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "seqpde/models.hpp"
#include "seqpde/quadrature.hpp"

using namespace seqpde;

TEST_CASE("deterministic rules reproduce the box volume", "[quadrature]") {
  const Box b1 = Box::interval(0.0, 1.0);
  Box b2;
  b2.lo = Eigen::Vector2d(-1.0, 0.0);
  b2.hi = Eigen::Vector2d(2.0, 0.5);

  CHECK(std::abs(gauss_legendre_rule(b1, 64).weights.sum() - 1.0) < 1e-12);
  CHECK(std::abs(trapezoid_rule(b1, 65).weights.sum() - 1.0) < 1e-12);
  CHECK(std::abs(gauss_legendre_rule(b2, 32).weights.sum() - 1.5) < 1e-12);
  CHECK(std::abs(trapezoid_rule(b2, 33).weights.sum() - 1.5) < 1e-12);
  CHECK(std::abs(monte_carlo_rule(b2, 777, 3).weights.sum() - 1.5) < 1e-12);

  CHECK(gauss_legendre_rule(b1, 64).weights.minCoeff() > 0.0);
  CHECK(trapezoid_rule(b1, 65).weights.minCoeff() > 0.0);
}

TEST_CASE("inner product matches analytic integrals", "[quadrature]") {
  const Box box = Box::interval(0.0, 1.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 64);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(rule.node_count());
  CHECK(std::abs(inner(rule, ones, ones) - 1.0) < 1e-12);

  Eigen::VectorXd s(rule.node_count());
  for (int q = 0; q < rule.node_count(); ++q) s[q] = std::sin(M_PI * rule.nodes(0, q));
  CHECK(std::abs(inner(rule, s, s) - 0.5) < 1e-10);
}

TEST_CASE("inner product is symmetric, bilinear and nonnegative", "[quadrature]") {
  const QuadratureRule rule = gauss_legendre_rule(Box::interval(-2.0, 3.0), 48);
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd f = rng.normal_vector(rule.node_count());
    const Eigen::VectorXd g = rng.normal_vector(rule.node_count());
    const Eigen::VectorXd h = rng.normal_vector(rule.node_count());
    const double a = rng.uniform(-2.0, 2.0);
    CHECK(inner(rule, f, f) >= 0.0);
    CHECK(std::abs(inner(rule, f, g) - inner(rule, g, f)) < 1e-12 * (1.0 + std::abs(inner(rule, f, g))));
    const double lhs = inner(rule, f, (a * g + h).eval());
    const double rhs = a * inner(rule, f, g) + inner(rule, f, h);
    CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST_CASE("assembled Gram equals the brute-force triple loop", "[quadrature][oracle]") {
  const Box box = Box::interval(-3.0, 3.0);
  Rng rng(5);
  const GaussianMixtureModel gm(3, 1, 0.6);
  const ShallowNetworkModel net(3, 1);
  for (const Model* model : {static_cast<const Model*>(&gm), static_cast<const Model*>(&net)}) {
    for (const auto& rule : {gauss_legendre_rule(box, 40), trapezoid_rule(box, 81)}) {
      for (int trial = 0; trial < 3; ++trial) {
        const ParamVector theta = model->random_init(rng, box);
        const GramMatrix gram =
            assemble_gram_from_samples(model->grad_theta(theta, rule.nodes), rule, 1e-10);
        const Eigen::MatrixXd brute = oracles::brute_force_gram(*model, theta, rule);
        CHECK((gram.entries - brute).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((gram.entries - gram.entries.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.entries);
        CHECK(eig.eigenvalues().minCoeff() >
              -1e-10 * gram.entries.cwiseAbs().maxCoeff());

        const Eigen::VectorXd rhs = rng.normal_vector(rule.node_count());
        const Eigen::VectorXd moment =
            assemble_moment_from_samples(model->grad_theta(theta, rule.nodes), rhs, rule);
        const Eigen::VectorXd brute_moment = oracles::brute_force_moment(*model, theta, rhs, rule);
        CHECK((moment - brute_moment).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("zero rhs gives a zero moment vector", "[quadrature]") {
  const Box box = Box::interval(0.0, 1.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 16);
  const GaussianMixtureModel gm(2, 1, 0.4);
  Rng rng(7);
  const ParamVector theta = gm.random_init(rng, box);
  const Eigen::VectorXd moment = assemble_moment_from_samples(
      gm.grad_theta(theta, rule.nodes), Eigen::VectorXd::Zero(rule.node_count()), rule);
  CHECK(moment.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gram assembly is invariant under node permutation", "[quadrature][property]") {
  const Box box = Box::interval(-1.0, 1.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 32);
  const GaussianMixtureModel gm(2, 1, 0.5);
  Rng rng(13);
  const ParamVector theta = gm.random_init(rng, box);
  const GramMatrix gram =
      assemble_gram_from_samples(gm.grad_theta(theta, rule.nodes), rule, 1e-10);

  QuadratureRule shuffled = rule;
  const int n = rule.node_count();
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);
  for (int q = 0; q < n; ++q) {
    shuffled.nodes.col(q) = rule.nodes.col(perm[q]);
    shuffled.weights[q] = rule.weights[perm[q]];
  }
  const GramMatrix gram2 =
      assemble_gram_from_samples(gm.grad_theta(theta, shuffled.nodes), shuffled, 1e-10);
  CHECK((gram.entries - gram2.entries).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("min-norm solve: identity, range solves and duplicated symmetry", "[quadrature]") {
  Rng rng(17);

  SECTION("identity gram returns b") {
    GramMatrix gram;
    gram.entries = Eigen::MatrixXd::Identity(5, 5);
    gram.singular_values = Eigen::VectorXd::Ones(5);
    gram.eigenvectors = Eigen::MatrixXd::Identity(5, 5);
    const Eigen::VectorXd b = rng.normal_vector(5);
    const MinNormSolution sol = solve_min_norm(gram, b, 1e-10);
    CHECK((sol.x - b).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(sol.effective_rank == 5);
  }

  SECTION("random full-rank systems solve to 1e-10") {
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::MatrixXd a(10, 10);
      for (int i = 0; i < 10; ++i) a.row(i) = rng.normal_vector(10).transpose();
      Eigen::MatrixXd p = a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(10, 10);
      GramMatrix gram;
      gram.entries = p;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p);
      gram.singular_values = eig.eigenvalues().reverse();
      gram.eigenvectors = eig.eigenvectors().rowwise().reverse();
      const Eigen::VectorXd b = rng.normal_vector(10);
      const MinNormSolution sol = solve_min_norm(gram, b, 0.0);
      CHECK((p * sol.x - b).norm() / b.norm() < 1e-10);
      // direct dense solve oracle
      const Eigen::VectorXd direct = p.partialPivLu().solve(b);
      CHECK((sol.x - direct).norm() < 1e-8 * (1.0 + direct.norm()));
    }
  }

  SECTION("duplicated-kernel gram yields symmetric min-norm components") {
    const Box box = Box::interval(-4.0, 4.0);
    const QuadratureRule rule = gauss_legendre_rule(box, 64);
    const GaussianMixtureModel gm(2, 1, 0.7);
    ParamVector theta(4);
    theta << 0.3, 0.3, 0.9, 0.9;  // identical kernels
    const Eigen::MatrixXd grads = gm.grad_theta(theta, rule.nodes);
    const GramMatrix gram = assemble_gram_from_samples(grads, rule, 1e-10);
    CHECK(gram.singular_values[gram.size() - 1] < 1e-12 * gram.singular_values[0]);
    CHECK((gram.entries.row(0) - gram.entries.row(1)).cwiseAbs().maxCoeff() < 1e-14);

    const Eigen::VectorXd rhs = gm.laplacian(theta, rule.nodes);
    const Eigen::VectorXd b = assemble_moment_from_samples(grads, rhs, rule);
    const MinNormSolution sol = solve_min_norm(gram, b, 1e-10);
    CHECK(std::abs(sol.x[0] - sol.x[1]) < 1e-12);
    CHECK(std::abs(sol.x[2] - sol.x[3]) < 1e-12);
    CHECK(sol.effective_rank < gram.size());
  }
}

TEST_CASE("least-squares path agrees with the normal equations", "[quadrature][oracle]") {
  const Box box = Box::interval(-2.0, 2.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 48);
  const GaussianMixtureModel gm(3, 1, 0.5);
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const ParamVector theta = gm.random_init(rng, box);
    const Eigen::MatrixXd grads = gm.grad_theta(theta, rule.nodes);
    const Eigen::VectorXd rhs = rng.normal_vector(rule.node_count());

    const LstsqSolution ls = solve_least_squares(weighted_sample_matrix(grads, rule),
                                                 weighted_samples(rhs, rule), 1e-12);
    const GramMatrix gram = assemble_gram_from_samples(grads, rule, 1e-12);
    const Eigen::VectorXd moment = assemble_moment_from_samples(grads, rhs, rule);
    const MinNormSolution mn = solve_min_norm(gram, moment, 1e-12);

    CHECK((ls.x - mn.x).norm() < 1e-8 * (1.0 + mn.x.norm()));
    // normal-equation residual of the least-squares solution
    CHECK((gram.entries * ls.x - moment).norm() < 1e-10 * (1.0 + moment.norm()));
  }
}

TEST_CASE("least-squares: representable targets and first-order optimality", "[quadrature]") {
  const Box box = Box::interval(-2.0, 2.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 48);
  const GaussianMixtureModel gm(2, 1, 0.6);
  Rng rng(29);
  const ParamVector theta = gm.random_init(rng, box);
  const Eigen::MatrixXd grads = gm.grad_theta(theta, rule.nodes);
  const Eigen::MatrixXd jw = weighted_sample_matrix(grads, rule);

  SECTION("target in the row space has zero residual") {
    const Eigen::VectorXd coef = rng.normal_vector(gm.param_count());
    const Eigen::VectorXd target = grads.transpose() * coef;
    const LstsqSolution sol = solve_least_squares(jw, weighted_samples(target, rule), 1e-12);
    CHECK(sol.residual_norm < 1e-10 * (1.0 + norm_m(rule, target)));
  }

  SECTION("random perturbations never reduce the residual") {
    const Eigen::VectorXd target = rng.normal_vector(rule.node_count());
    const Eigen::VectorXd tw = weighted_samples(target, rule);
    const LstsqSolution sol = solve_least_squares(jw, tw, 1e-12);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd delta = rng.normal_vector(gm.param_count());
      delta *= 1e-3 / delta.norm();
      const double perturbed = (jw.transpose() * (sol.x + delta) - tw).norm();
      CHECK(perturbed >= sol.residual_norm - 1e-12);
    }
  }

  SECTION("rank-deficient sample matrix keeps the symmetric min-norm pattern") {
    ParamVector dup(4);
    dup << -0.2, -0.2, 1.1, 1.1;
    const Eigen::MatrixXd grads_dup = gm.grad_theta(dup, rule.nodes);
    const Eigen::VectorXd target = gm.laplacian(dup, rule.nodes);
    const LstsqSolution sol = solve_least_squares(weighted_sample_matrix(grads_dup, rule),
                                                  weighted_samples(target, rule), 1e-10);
    CHECK(std::abs(sol.x[0] - sol.x[1]) < 1e-12);
    CHECK(std::abs(sol.x[2] - sol.x[3]) < 1e-12);
  }
}
