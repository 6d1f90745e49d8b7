#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/dto.hpp"
#include "seqpde/models.hpp"
#include "seqpde/otd.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

/// Groups of parameter indices whose gradient component functions coincide in
/// the M-norm within a relative tolerance. Groups are disjoint, sorted, and
/// only groups of size >= 2 are reported.
inline std::vector<std::vector<int>> detect_duplicates(const Model& model,
                                                       const ParamVector& theta,
                                                       const QuadratureRule& rule, double tol) {
  if (tol <= 0.0 || tol >= 1.0) throw ConfigError("detect_duplicates: tol must lie in (0, 1)");
  const Eigen::MatrixXd g = model.grad_theta(theta, rule.nodes);
  const int p = static_cast<int>(g.rows());
  Eigen::VectorXd norms(p);
  for (int i = 0; i < p; ++i) norms[i] = norm_m(rule, g.row(i).transpose());

  std::vector<int> parent(p);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };

  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      const double mx = std::max(norms[i], norms[j]);
      const double diff = norm_m(rule, (g.row(i) - g.row(j)).transpose());
      const bool same = (mx > 0.0) ? (diff < tol * mx) : true;  // two zero components coincide
      if (same) parent[find(i)] = find(j);
    }
  }

  std::vector<std::vector<int>> groups;
  for (int root = 0; root < p; ++root) {
    if (find(root) != root) continue;
    std::vector<int> members;
    for (int i = 0; i < p; ++i)
      if (find(i) == root) members.push_back(i);
    if (members.size() >= 2) groups.push_back(std::move(members));
  }
  std::sort(groups.begin(), groups.end());
  return groups;
}

/// Per-step collapse diagnostics of a degenerate-start trajectory.
struct CollapseReport {
  int step = 0;
  double t = 0.0;
  double sigma_ratio = 0.0;  // sigma_min / sigma_max of P(theta_k)
  int effective_rank = 0;
  int param_count = 0;
  std::vector<std::vector<int>> duplicate_groups;
  double max_group_deviation = 0.0;  // max |theta_i - theta_j| within tracked groups
  bool persists = true;              // deviation below the persistence tolerance
};

struct CollapseExperimentConfig {
  int n_steps = 100;
  double dt = 1e-3;
  double tau = 1e-10;
  double duplicate_tol = 1e-8;     // relative tolerance of the gradient comparison
  double persistence_tol = 1e-10;  // absolute tolerance on parameter deviations

  enum class Scheme { otd_explicit, dto_gauss_newton };
  Scheme scheme = Scheme::otd_explicit;
  GnOptions gn;                      // inner options for the optimization scheme
  double inner_perturbation = 0.0;   // symmetry-breaking noise on each inner start
  std::uint64_t perturbation_seed = 1;
};

struct CollapseExperimentResult {
  std::vector<CollapseReport> reports;
  std::vector<ParamVector> trajectory;  // theta_0 .. theta_K
  std::vector<std::vector<int>> tracked_groups;  // parameter-index groups at t0
  bool duplicates_persist = true;
  int first_divergence_step = -1;  // first step whose deviation exceeded the tolerance
  int initial_rank = 0;
  int final_rank = 0;
  bool rank_constant = true;
};

/// Runs a trajectory from a (typically degenerate) start and tracks whether
/// the parameter-index duplicate groups present at t0 survive: with exact
/// min-norm solves, identical kernels receive identical updates, so the
/// groups persist and the tangent-space rank cannot grow. A divergence of the
/// groups is reported as a finding, not an error.
inline CollapseExperimentResult run_collapse_experiment(const Model& model,
                                                        const ParamVector& theta0,
                                                        const RhsOperator& rhs,
                                                        const QuadratureRule& rule,
                                                        const CollapseExperimentConfig& cfg) {
  CollapseExperimentResult result;
  result.tracked_groups = detect_duplicates(model, theta0, rule, cfg.duplicate_tol);
  Rng perturb_rng(cfg.perturbation_seed);

  auto group_deviation = [&](const ParamVector& theta) {
    double dev = 0.0;
    for (const auto& grp : result.tracked_groups)
      for (size_t a = 0; a < grp.size(); ++a)
        for (size_t b = a + 1; b < grp.size(); ++b)
          dev = std::max(dev, std::abs(theta[grp[a]] - theta[grp[b]]));
    return dev;
  };

  ParamVector theta = theta0;
  result.trajectory.push_back(theta);
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = k * cfg.dt;
    CollapseReport rep;
    rep.step = k;
    rep.t = t;
    rep.param_count = model.param_count();

    ParamVector theta_next;
    if (cfg.scheme == CollapseExperimentConfig::Scheme::otd_explicit) {
      auto [next, rec] = otd_step_explicit(model, theta, rhs, t, cfg.dt, rule, cfg.tau, k);
      theta_next = next;
      rep.effective_rank = rec.effective_rank;
      rep.sigma_ratio = rec.sigma_max() > 0.0 ? rec.sigma_min() / rec.sigma_max() : 0.0;
    } else {
      ParamVector start = theta;
      if (cfg.inner_perturbation > 0.0)
        start += cfg.inner_perturbation * perturb_rng.normal_vector(theta.size());
      auto [next, rec] =
          dto_gauss_newton_step(model, theta, rhs, t, cfg.dt, /*zeta=*/1.0, rule, cfg.gn, k,
                                &start);
      theta_next = next;
      rep.effective_rank = rec.effective_rank;
      rep.sigma_ratio = rec.sigma_max() > 0.0 ? rec.sigma_min() / rec.sigma_max() : 0.0;
    }

    rep.duplicate_groups = detect_duplicates(model, theta_next, rule, cfg.duplicate_tol);
    rep.max_group_deviation = group_deviation(theta_next);
    rep.persists = rep.max_group_deviation < cfg.persistence_tol;
    if (!rep.persists && result.first_divergence_step < 0) {
      result.first_divergence_step = k;
      result.duplicates_persist = false;
    }

    if (k == 0) result.initial_rank = rep.effective_rank;
    result.final_rank = rep.effective_rank;
    if (rep.effective_rank != result.initial_rank) result.rank_constant = false;

    result.reports.push_back(std::move(rep));
    theta = theta_next;
    result.trajectory.push_back(theta);
  }
  return result;
}

}  // namespace seqpde
