#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <memory>

#include "helpers.hpp"
#include "oracles.hpp"
#include "seqpde/diagnostics.hpp"

using namespace seqpde;

namespace {

/// Four identical kernels on a wide window under pure diffusion; the analytic
/// reference is the free-space widening of the initial mixture.
struct CollapseSetup {
  GaussianMixtureModel model{4, 1, 0.7};
  QuadratureRule rule = gauss_legendre_rule(Box::interval(-6.0, 6.0), 128);
  RhsOperator rhs;
  ParamVector theta0 = ParamVector(8);

  CollapseSetup(double perturb_first = 0.0) {
    rhs.stiff = RhsOperator::StiffPart::laplacian;
    theta0 << 0.0, 0.0, 0.0, 0.0, 0.8, 0.8, 0.8, 0.8;
    theta0[0] += perturb_first;
  }
};

}  // namespace

TEST_CASE("duplicate detection on mixtures", "[diagnostics]") {
  const Box box = Box::interval(-4.0, 4.0);
  const QuadratureRule rule = gauss_legendre_rule(box, 96);
  const GaussianMixtureModel gm(3, 1, 0.6);

  SECTION("duplicated kernels group their center and weight components") {
    ParamVector theta(6);
    theta << 0.5, 0.5, -1.2, 0.9, 0.9, 0.4;  // kernels 0 and 1 identical
    const auto groups = detect_duplicates(gm, theta, rule, 1e-8);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0] == std::vector<int>{0, 1});          // center components
    CHECK(groups[1] == std::vector<int>{3, 4});          // weight components
  }

  SECTION("well-separated kernels have no duplicate groups") {
    ParamVector theta(6);
    theta << -1.5, 0.0, 1.5, 0.9, -0.7, 0.4;
    CHECK(detect_duplicates(gm, theta, rule, 1e-8).empty());
  }

  SECTION("near-duplicates are caught at a loose tolerance") {
    ParamVector theta(6);
    theta << 0.5, 0.5 + 1e-9, -1.2, 0.9, 0.9, 0.4;
    const auto groups = detect_duplicates(gm, theta, rule, 1e-6);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0] == std::vector<int>{0, 1});
  }

  SECTION("tolerance is validated") {
    ParamVector theta = ParamVector::Zero(6);
    CHECK_THROWS_AS(detect_duplicates(gm, theta, rule, 0.0), ConfigError);
    CHECK_THROWS_AS(detect_duplicates(gm, theta, rule, 1.0), ConfigError);
  }
}

TEST_CASE("min-norm updates preserve duplicate groups for one step", "[diagnostics][property]") {
  const CollapseSetup setup;
  auto [next, rec] =
      otd_step_explicit(setup.model, setup.theta0, setup.rhs, 0.0, 1e-3, setup.rule, 1e-10);
  for (int i = 1; i < 4; ++i) {
    CHECK(std::abs(next[0] - next[i]) < 1e-12);
    CHECK(std::abs(next[4] - next[4 + i]) < 1e-12);
  }
}

TEST_CASE("degenerate start keeps its duplicates and rank over 100 steps",
          "[diagnostics][collapse]") {
  const CollapseSetup setup;
  CollapseExperimentConfig cfg;
  cfg.n_steps = 100;
  cfg.dt = 1e-3;

  const auto result =
      run_collapse_experiment(setup.model, setup.theta0, setup.rhs, setup.rule, cfg);
  CHECK(result.duplicates_persist);
  CHECK(result.first_divergence_step == -1);
  CHECK(result.rank_constant);
  CHECK(result.initial_rank == 2);  // one center direction + one weight direction
  for (const auto& rep : result.reports) CHECK(rep.max_group_deviation < 1e-10);

  // the tracked groups are the four centers and the four weights
  REQUIRE(result.tracked_groups.size() == 2);
  CHECK(result.tracked_groups[0] == std::vector<int>{0, 1, 2, 3});
  CHECK(result.tracked_groups[1] == std::vector<int>{4, 5, 6, 7});
}

TEST_CASE("perturbing one kernel raises the rank and lowers the error",
          "[diagnostics][collapse]") {
  CollapseExperimentConfig cfg;
  cfg.n_steps = 100;
  cfg.dt = 1e-3;

  const CollapseSetup degenerate;
  const CollapseSetup perturbed(1e-2);

  const auto run_deg = run_collapse_experiment(degenerate.model, degenerate.theta0,
                                               degenerate.rhs, degenerate.rule, cfg);
  const auto run_pert = run_collapse_experiment(perturbed.model, perturbed.theta0, perturbed.rhs,
                                                perturbed.rule, cfg);

  CHECK(run_pert.reports.back().effective_rank > run_deg.reports.back().effective_rank);

  // each run is measured against the diffusion of its own initial state
  const FreeSpaceHeatMixtureReference ref_deg(degenerate.model, degenerate.theta0);
  const FreeSpaceHeatMixtureReference ref_pert(perturbed.model, perturbed.theta0);
  const double t_final = cfg.n_steps * cfg.dt;
  const double err_deg = helpers::error_vs(degenerate.model, run_deg.trajectory.back(), ref_deg,
                                           t_final, degenerate.rule);
  const double err_pert = helpers::error_vs(perturbed.model, run_pert.trajectory.back(), ref_pert,
                                            t_final, perturbed.rule);
  CHECK(err_pert < err_deg);
}

TEST_CASE("optimization scheme with symmetry-breaking noise is observed, not asserted",
          "[diagnostics][collapse]") {
  const CollapseSetup setup;
  CollapseExperimentConfig cfg;
  cfg.n_steps = 20;
  cfg.dt = 1e-3;
  cfg.scheme = CollapseExperimentConfig::Scheme::dto_gauss_newton;
  cfg.gn.max_iterations = 20;
  cfg.gn.tolerance = 1e-12;
  cfg.inner_perturbation = 1e-8;
  cfg.perturbation_seed = 99;

  const auto result =
      run_collapse_experiment(setup.model, setup.theta0, setup.rhs, setup.rule, cfg);
  // whichever way it lands, the experiment reports a finding instead of crashing
  CHECK(result.reports.size() == 20);
  if (!result.duplicates_persist) CHECK(result.first_divergence_step >= 0);
  WARN("degenerate start under the optimization scheme with 1e-8 inner noise: duplicates "
       << (result.duplicates_persist ? "persist" : "break at step ")
       << (result.duplicates_persist ? std::string("")
                                     : std::to_string(result.first_divergence_step)));
}
