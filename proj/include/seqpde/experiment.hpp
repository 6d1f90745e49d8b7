#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "seqpde/config.hpp"
#include "seqpde/diagnostics.hpp"
#include "seqpde/dto.hpp"
#include "seqpde/gradflow.hpp"
#include "seqpde/otd.hpp"

namespace seqpde {

/// Everything a run needs, assembled from a config: model, initial parameters,
/// rhs operator, quadrature, reference oracle and constants.
struct ProblemSetup {
  std::shared_ptr<const Model> model;
  ParamVector theta0;
  RhsOperator rhs;
  QuadratureRule rule;
  QuadratureRule energy_rule;  // equals rule unless the energy metric is overridden
  std::shared_ptr<const ReferenceSolution> reference;
  std::shared_ptr<L2LeastSquaresEnergy> energy;
  std::shared_ptr<const AdvectionTerm> advection;
  double lambda_star = std::numeric_limits<double>::quiet_NaN();
  double initial_fit_residual = 0.0;

  bool has_lambda_star() const { return std::isfinite(lambda_star); }
};

namespace detail {

inline QuadratureRule make_rule(const QuadratureConfig& q, const Box& box) {
  if (q.kind == "gauss-legendre") return gauss_legendre_rule(box, q.nodes_per_dim);
  if (q.kind == "trapezoid") return trapezoid_rule(box, q.nodes_per_dim);
  return monte_carlo_rule(box, q.mc_nodes, q.mc_seed);
}

inline std::shared_ptr<const Model> make_model(const ExperimentConfig& cfg) {
  std::shared_ptr<const Model> base;
  if (cfg.model.kind == "gaussian") {
    base = std::make_shared<GaussianMixtureModel>(cfg.model.n, cfg.domain.dimension(),
                                                  cfg.model.bandwidth,
                                                  cfg.model.trainable_bandwidth);
  } else {
    base = std::make_shared<ShallowNetworkModel>(cfg.model.n, cfg.domain.dimension());
  }
  if (cfg.model.mask == "homogeneous-dirichlet") {
    BoundaryMask mask;
    mask.kind = BoundaryMask::Kind::homogeneous_dirichlet;
    mask.domain = cfg.domain;
    return std::make_shared<MaskedModel>(base, mask);
  }
  return base;
}

inline ParamVector degenerate_theta(const ExperimentConfig& cfg) {
  if (cfg.model.kind != "gaussian")
    throw ConfigError("model.init.type 'degenerate' requires a gaussian model");
  const int d = cfg.domain.dimension();
  if (static_cast<int>(cfg.model.init.alpha.size()) != d)
    throw ConfigError("model.init.alpha: needs one coordinate per dimension");
  GaussianMixtureModel probe(cfg.model.n, d, cfg.model.bandwidth, cfg.model.trainable_bandwidth);
  ParamVector theta = ParamVector::Zero(probe.param_count());
  for (int i = 0; i < cfg.model.n; ++i) {
    for (int k = 0; k < d; ++k) theta[probe.alpha_index(i, k)] = cfg.model.init.alpha[k];
    theta[probe.beta_index(i)] = cfg.model.init.beta;
    if (cfg.model.trainable_bandwidth)
      theta[probe.bandwidth_index(i)] = cfg.model.bandwidth;
  }
  theta[probe.alpha_index(0, 0)] += cfg.model.init.perturb_first;
  return theta;
}

}  // namespace detail

inline ProblemSetup build_problem(const ExperimentConfig& cfg) {
  ProblemSetup prob;
  prob.rule = detail::make_rule(cfg.quadrature, cfg.domain);
  prob.energy_rule = (cfg.energy_metric_nodes > 0)
                         ? gauss_legendre_rule(cfg.domain, cfg.energy_metric_nodes)
                         : prob.rule;
  prob.model = detail::make_model(cfg);

  // Right-hand side.
  if (cfg.pde.kind == "advection") {
    if (static_cast<int>(cfg.pde.advection_w.size()) != cfg.domain.dimension())
      throw ConfigError("pde.advection.w: needs one component per dimension");
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(cfg.pde.advection_w.data(),
                                                          cfg.pde.advection_w.size());
    prob.advection =
        std::make_shared<AdvectionTerm>(w, cfg.pde.advection_amplitude, cfg.pde.advection_omega);
    prob.rhs.stiff = RhsOperator::StiffPart::none;
    prob.rhs.bounded = prob.advection;
  } else if (cfg.pde.kind == "heat-reaction") {
    prob.rhs.stiff = RhsOperator::StiffPart::laplacian;
    prob.rhs.bounded = std::make_shared<LinearReactionTerm>(cfg.pde.reaction_c);
  } else if (cfg.pde.kind == "heat-free") {
    prob.rhs.stiff = RhsOperator::StiffPart::laplacian;
    prob.rhs.bounded = std::make_shared<ZeroTerm>();
  } else {  // gradient-flow
    prob.energy =
        std::make_shared<L2LeastSquaresEnergy>(make_expression(cfg.energy_target, cfg.domain));
    prob.rhs = prob.energy->flow_operator(prob.energy_rule);
  }
  prob.rhs.lipschitz_C = cfg.constants.C;
  prob.rhs.affine_C0 = cfg.constants.C0;

  // Dirichlet eigenvalue, when meaningful for this run.
  if (cfg.constants.lambda_star >= 0.0) {
    prob.lambda_star = cfg.constants.lambda_star;
  } else if (cfg.model.mask == "homogeneous-dirichlet") {
    prob.lambda_star = smallest_dirichlet_eigenvalue(cfg.domain);
  }

  // Initial parameters.
  std::function<Eigen::VectorXd(const PointBatch&)> u0;
  if (cfg.pde.initial != "model") u0 = make_expression(cfg.pde.initial, cfg.domain);

  if (cfg.model.init.type == "values") {
    if (static_cast<int>(cfg.model.init.theta.size()) != prob.model->param_count())
      throw ConfigError("model.init.theta: expected " +
                        std::to_string(prob.model->param_count()) + " entries, got " +
                        std::to_string(cfg.model.init.theta.size()));
    prob.theta0 = Eigen::Map<const Eigen::VectorXd>(cfg.model.init.theta.data(),
                                                    cfg.model.init.theta.size());
  } else if (cfg.model.init.type == "degenerate") {
    prob.theta0 = detail::degenerate_theta(cfg);
  } else {  // fit
    if (!u0)
      throw ConfigError(
          "model.init.type 'fit' requires pde.initial to name a target expression");
    Rng rng(cfg.model.init.seed);
    GnOptions fit_opts;
    fit_opts.max_iterations = cfg.model.init.iterations;
    fit_opts.tolerance = 1e-12;
    fit_opts.tau = cfg.tau;
    const GnReport fit =
        fit_to_values(*prob.model, u0(prob.rule.nodes), prob.rule, prob.model->random_init(rng, cfg.domain), fit_opts);
    prob.theta0 = fit.theta;
    prob.initial_fit_residual = fit.residual_norm;
  }

  // Reference oracle.
  const bool want_ref = cfg.reference.kind != "none";
  if (want_ref) {
    const std::string kind = cfg.reference.kind;
    if (cfg.pde.kind == "advection" && (kind == "auto" || kind == "analytic")) {
      if (cfg.pde.initial != "model")
        throw ConfigError("advection reference transports the initial model state; set "
                          "pde.initial = 'model'");
      prob.reference =
          std::make_shared<TransportReference>(prob.model, prob.theta0, prob.advection);
    } else if (cfg.pde.kind == "heat-free" && (kind == "auto" || kind == "analytic")) {
      auto mixture = std::dynamic_pointer_cast<const GaussianMixtureModel>(prob.model);
      if (!mixture || cfg.model.trainable_bandwidth)
        throw ConfigError(
            "free-space heat reference requires an unmasked fixed-bandwidth gaussian model");
      prob.reference = std::make_shared<FreeSpaceHeatMixtureReference>(*mixture, prob.theta0);
    } else if (cfg.pde.kind == "heat-reaction" && (kind == "auto" || kind == "analytic")) {
      if (cfg.pde.initial.rfind("sine", 0) != 0)
        throw ConfigError("analytic heat-reaction reference requires pde.initial = 'sine'");
      const PointBatch probe = PointBatch::Zero(cfg.domain.dimension(), 0);
      double amp = 1.0;
      {
        // recover the amplitude from the expression id
        const auto expr = make_expression(cfg.pde.initial, cfg.domain);
        PointBatch mid(cfg.domain.dimension(), 1);
        for (int k = 0; k < cfg.domain.dimension(); ++k)
          mid(k, 0) = 0.5 * (cfg.domain.lo[k] + cfg.domain.hi[k]);
        amp = expr(mid)[0];
      }
      (void)probe;
      prob.reference = std::make_shared<SineModeReference>(cfg.domain, amp, cfg.pde.reaction_c);
    } else if (kind == "fine-grid") {
      if (cfg.pde.kind != "heat-reaction" && cfg.pde.kind != "heat-free")
        throw ConfigError("reference.kind 'fine-grid' requires a heat-type problem");
      std::function<Eigen::VectorXd(const PointBatch&)> init_fn = u0;
      if (!init_fn) {
        auto model = prob.model;
        auto theta = prob.theta0;
        init_fn = [model, theta](const PointBatch& x) { return model->eval(theta, x); };
      }
      std::vector<double> times(cfg.n_steps() + 1);
      for (int k = 0; k <= cfg.n_steps(); ++k) times[k] = k * cfg.dt;
      std::shared_ptr<FineGridHeatReference> grid_ref;
      std::string cache_path;
      if (cfg.reference.cache) {
        const std::string key = cfg.raw.dump() + "|grid";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(key)));
        cache_path = cfg.output_dir + "/ref_cache_" + buf + ".bin";
        grid_ref = FineGridHeatReference::load_cache(cache_path);
      }
      if (!grid_ref) {
        grid_ref = std::make_shared<FineGridHeatReference>(
            cfg.domain, cfg.reference.grid_n, cfg.reference.dt_ref, prob.rhs, init_fn, times);
        if (cfg.reference.cache && !cache_path.empty()) {
          std::filesystem::create_directories(cfg.output_dir);
          grid_ref->save_cache(cache_path);
        }
      }
      prob.reference = grid_ref;
    }
    // "auto" quietly yields no reference when no oracle matches (e.g. gradient flows).
  }

  return prob;
}

/// Margin report of one bound family against its measured counterpart.
struct BoundCheck {
  std::string name;
  double min_margin = std::numeric_limits<double>::quiet_NaN();
  int argmin_step = -1;
  bool valid = true;
  std::string mode;  // "oracle-assisted" or "assumed"
};

struct RunResult {
  ExperimentConfig cfg;
  std::string scheme_kind;
  int param_count = 0;

  std::vector<double> times;            // t_0 .. t_K
  std::vector<ParamVector> trajectory;  // theta_0 .. theta_K
  std::vector<OtdStepRecord> otd_records;
  std::vector<DtoStepRecord> dto_records;

  bool has_reference = false;
  std::vector<double> errors;    // M-norm error vs reference at t_0..t_K
  std::vector<double> energies;  // gradient-flow runs

  double e0 = 0.0;
  double final_error = std::numeric_limits<double>::quiet_NaN();
  std::vector<BoundCheck> bound_checks;
  bool bounds_valid = true;

  CollapseExperimentResult collapse;
  bool is_collapse_run = false;

  double wall_seconds = 0.0;

  double final_residual = std::numeric_limits<double>::quiet_NaN();
  double max_residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double error_vs_reference(const ProblemSetup& prob, const ParamVector& theta, double t) {
  const Eigen::VectorXd u_hat = prob.model->eval(theta, prob.rule.nodes);
  const Eigen::VectorXd u_ref = prob.reference->values(t, prob.rule.nodes);
  return norm_m(prob.rule, u_hat - u_ref);
}

inline void add_margin_check(RunResult& result, const std::string& name,
                             const std::vector<double>& bound, const std::vector<double>& measured,
                             const std::string& mode) {
  BoundCheck check;
  check.name = name;
  check.mode = mode;
  bool seen = false;
  for (size_t k = 0; k < bound.size() && k < measured.size(); ++k) {
    if (!std::isfinite(bound[k]) || !std::isfinite(measured[k])) continue;
    const double margin = bound[k] - measured[k];
    if (!seen || margin < check.min_margin) {
      check.min_margin = margin;
      check.argmin_step = static_cast<int>(k);
      seen = true;
    }
  }
  check.valid = !seen || check.min_margin >= 0.0;
  if (!check.valid) result.bounds_valid = false;
  result.bound_checks.push_back(std::move(check));
}

}  // namespace detail

inline RunResult run_experiment(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  ProblemSetup prob = build_problem(cfg);

  RunResult result;
  result.cfg = cfg;
  result.scheme_kind = cfg.scheme.kind;
  result.param_count = prob.model->param_count();
  result.has_reference = static_cast<bool>(prob.reference);
  const int K = cfg.n_steps();
  const RankPolicy policy =
      cfg.on_rank_deficiency == "error" ? RankPolicy::fail : RankPolicy::min_norm;

  GnOptions gn;
  gn.max_iterations = cfg.scheme.kind == "otd-zeta" ? cfg.scheme.max_inner : cfg.scheme.L;
  gn.step_size = cfg.scheme.alpha;
  gn.line_search = cfg.scheme.line_search;
  gn.tolerance = cfg.scheme.gn_tolerance;
  gn.tau = cfg.tau;

  if (cfg.scheme.kind == "ngd" && cfg.pde.kind != "gradient-flow")
    throw ConfigError("scheme 'ngd' requires pde.kind = 'gradient-flow'");
  if (cfg.scheme.kind == "dto-imex" && !prob.rhs.has_laplacian())
    throw ConfigError("scheme 'dto-imex' requires a Laplacian stiff part");

  ParamVector theta = prob.theta0;
  result.times.resize(K + 1);
  for (int k = 0; k <= K; ++k) result.times[k] = k * cfg.dt;
  result.trajectory.push_back(theta);

  const bool otd_family = cfg.scheme.kind == "otd-explicit" || cfg.scheme.kind == "otd-zeta" ||
                          cfg.scheme.kind == "ngd";

  for (int k = 0; k < K; ++k) {
    const double t = result.times[k];
    if (cfg.scheme.kind == "otd-explicit") {
      auto [next, rec] = otd_step_explicit(*prob.model, theta, prob.rhs, t, cfg.dt, prob.rule,
                                           cfg.tau, k, policy);
      result.otd_records.push_back(std::move(rec));
      theta = next;
    } else if (cfg.scheme.kind == "otd-zeta") {
      auto [next, rec] = otd_step_zeta(*prob.model, theta, prob.rhs, t, cfg.dt, cfg.scheme.zeta,
                                       prob.rule, gn, k, policy);
      result.otd_records.push_back(std::move(rec));
      theta = next;
    } else if (cfg.scheme.kind == "ngd") {
      OtdStepRecord rec =
          otd_state_record(*prob.model, theta, prob.rhs, t, prob.rule, cfg.tau, k);
      result.otd_records.push_back(std::move(rec));
      theta = natural_gradient_step(*prob.model, theta, *prob.energy, cfg.dt, prob.energy_rule,
                                    cfg.tau)
                  .first;
    } else if (cfg.scheme.kind == "dto-gn") {
      auto [next, rec] = dto_gauss_newton_step(*prob.model, theta, prob.rhs, t, cfg.dt,
                                               cfg.scheme.zeta, prob.rule, gn, k);
      result.dto_records.push_back(std::move(rec));
      theta = next;
    } else {  // dto-imex
      auto [next, rec] =
          dto_step_imex(*prob.model, theta, prob.rhs, t, cfg.dt, prob.rule, gn, k);
      result.dto_records.push_back(std::move(rec));
      theta = next;
    }
    result.trajectory.push_back(theta);
    const double nrm = norm_m(prob.rule, prob.model->eval(theta, prob.rule.nodes));
    if (!std::isfinite(nrm) || nrm > 1e10)
      throw DivergenceError("norm blew up at step " + std::to_string(k + 1), k);
  }
  if (otd_family) {
    result.otd_records.push_back(otd_state_record(*prob.model, theta, prob.rhs, result.times[K],
                                                  prob.rule, cfg.tau, K));
  }

  // Errors against the reference and energies along the trajectory.
  if (result.has_reference) {
    result.errors.resize(K + 1);
    for (int k = 0; k <= K; ++k)
      result.errors[k] = detail::error_vs_reference(prob, result.trajectory[k], result.times[k]);
    result.final_error = result.errors[K];
  }
  if (prob.energy) {
    result.energies.resize(K + 1);
    for (int k = 0; k <= K; ++k)
      result.energies[k] = prob.energy->value(*prob.model, result.trajectory[k], prob.energy_rule);
  }

  // Initial error feeding the accumulated bounds.
  std::string e0_mode = "assumed";
  if (cfg.bounds.e0 >= 0.0) {
    result.e0 = cfg.bounds.e0;
  } else if (result.has_reference) {
    result.e0 = result.errors[0];
    e0_mode = "oracle-assisted";
  } else {
    result.e0 = 0.0;
  }

  const double stab_C = cfg.constants.stability_C >= 0.0 ? cfg.constants.stability_C
                                                         : std::max(cfg.constants.C, 0.0);
  const double stab_C0 =
      cfg.constants.stability_C0 >= 0.0 ? cfg.constants.stability_C0 : cfg.constants.C0;

  if (otd_family && !result.otd_records.empty()) {
    auto& recs = result.otd_records;
    std::vector<double> norm_series(recs.size());
    for (size_t k = 0; k < recs.size(); ++k) norm_series[k] = recs[k].norm_m;

    const auto b_lip = accumulate_bound_lipschitz(recs, cfg.constants.C, result.e0);
    if (result.has_reference)
      detail::add_margin_check(result, "error-bound-lipschitz", b_lip, result.errors, e0_mode);
    if (prob.has_lambda_star()) {
      const auto b_lap =
          accumulate_bound_laplacian(recs, cfg.constants.C, prob.lambda_star, result.e0);
      if (result.has_reference)
        detail::add_margin_check(result, "error-bound-laplacian", b_lap, result.errors, e0_mode);
    }
    const auto env = stability_envelope(recs, stab_C, stab_C0);
    detail::add_margin_check(result, "norm-envelope", env, norm_series, "declared-constants");
    if (prob.has_lambda_star()) {
      const auto env_lap = stability_envelope(recs, stab_C, stab_C0, &prob.lambda_star);
      detail::add_margin_check(result, "norm-envelope-laplacian", env_lap, norm_series,
                               "declared-constants");
    }
    result.max_residual = 0.0;
    for (const auto& r : recs) result.max_residual = std::max(result.max_residual, r.epsilon);
    result.final_residual = recs.back().epsilon;
  }

  if (!otd_family && !result.dto_records.empty()) {
    auto& recs = result.dto_records;
    const int steps = static_cast<int>(recs.size());

    std::vector<double> e_norms(steps, cfg.bounds.ek_assumed);
    std::string ek_mode = "assumed";
    DtoSchemeKind kind = DtoSchemeKind::explicit_euler;
    bool bound_applicable = true;
    if (cfg.scheme.kind == "dto-imex") {
      kind = DtoSchemeKind::imex;
    } else if (cfg.scheme.zeta == 0.0) {
      kind = DtoSchemeKind::implicit_euler;
    } else if (cfg.scheme.zeta != 1.0) {
      bound_applicable = false;  // blends between the two analyzed endpoints
    }
    if (bound_applicable && cfg.bounds.ek_mode == "oracle" && result.has_reference) {
      e_norms =
          time_integration_error_norms(*prob.reference, prob.rhs, prob.rule, 0.0, cfg.dt, steps,
                                       kind);
      ek_mode = "oracle-assisted";
    }

    if (bound_applicable) {
      std::vector<double> measured(steps + 1);
      if (result.has_reference)
        measured = result.errors;
      else
        measured.assign(steps + 1, 0.0);
      if (kind == DtoSchemeKind::explicit_euler) {
        const auto b =
            accumulate_dto_bound_explicit(recs, cfg.constants.C, cfg.dt, result.e0, e_norms);
        if (result.has_reference)
          detail::add_margin_check(result, "dto-error-bound-explicit", b, measured, ek_mode);
      } else {
        if (prob.has_lambda_star()) {
          const auto b = accumulate_dto_bound_implicit(recs, cfg.constants.C, prob.lambda_star,
                                                       cfg.dt, result.e0, e_norms);
          if (result.has_reference)
            detail::add_margin_check(result, "dto-error-bound-implicit", b, measured, ek_mode);
        }
      }
    }

    // Stationary-point norm envelopes (squared norms), one per eps parameter.
    const double init_norm = norm_m(prob.rule, prob.model->eval(prob.theta0, prob.rule.nodes));
    std::vector<double> norm_sq(steps + 1);
    norm_sq[0] = init_norm * init_norm;
    for (int k = 0; k < steps; ++k) norm_sq[k + 1] = recs[k].norm_m * recs[k].norm_m;
    for (double eps : cfg.constants.eps_params) {
      if (1.0 - eps * cfg.dt <= 0.0)
        throw ConfigError("constants.eps_params: requires 1 - eps*dt > 0, violated by eps=" +
                          std::to_string(eps));
      const auto env = dto_stability_envelope(recs, stab_C, stab_C0, cfg.dt, eps, init_norm,
                                              prob.model->spans_self());
      char label[64];
      std::snprintf(label, sizeof(label), "stationary-envelope(eps=%g)", eps);
      detail::add_margin_check(result, label, env, norm_sq, "declared-constants");
    }

    result.max_residual = 0.0;
    for (const auto& r : recs) result.max_residual = std::max(result.max_residual, r.residual_norm);
    result.final_residual = recs.back().residual_norm;
  }

  // Collapse diagnostics from the computed trajectory.
  if (cfg.problem == "collapse") {
    result.is_collapse_run = true;
    auto& col = result.collapse;
    col.tracked_groups =
        detect_duplicates(*prob.model, prob.theta0, prob.rule, cfg.collapse.duplicate_tol);
    col.trajectory = result.trajectory;
    for (int k = 0; k < K; ++k) {
      CollapseReport rep;
      rep.step = k;
      rep.t = result.times[k + 1];
      rep.param_count = prob.model->param_count();
      if (otd_family) {
        rep.effective_rank = result.otd_records[k].effective_rank;
        rep.sigma_ratio = result.otd_records[k].sigma_max() > 0.0
                              ? result.otd_records[k].sigma_min() / result.otd_records[k].sigma_max()
                              : 0.0;
      } else {
        rep.effective_rank = result.dto_records[k].effective_rank;
        rep.sigma_ratio = result.dto_records[k].sigma_max() > 0.0
                              ? result.dto_records[k].sigma_min() / result.dto_records[k].sigma_max()
                              : 0.0;
      }
      const ParamVector& th = result.trajectory[k + 1];
      rep.duplicate_groups =
          detect_duplicates(*prob.model, th, prob.rule, cfg.collapse.duplicate_tol);
      double dev = 0.0;
      for (const auto& grp : col.tracked_groups)
        for (size_t a = 0; a < grp.size(); ++a)
          for (size_t b = a + 1; b < grp.size(); ++b)
            dev = std::max(dev, std::abs(th[grp[a]] - th[grp[b]]));
      rep.max_group_deviation = dev;
      rep.persists = dev < cfg.collapse.persistence_tol;
      if (!rep.persists && col.first_divergence_step < 0) {
        col.first_divergence_step = k;
        col.duplicates_persist = false;
      }
      if (k == 0) col.initial_rank = rep.effective_rank;
      col.final_rank = rep.effective_rank;
      if (rep.effective_rank != col.initial_rank) col.rank_constant = false;
      col.reports.push_back(std::move(rep));
    }
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

/// Smallest time step at which the explicit projected scheme blows up on the
/// given problem, found by doubling from dt_start and refining by bisection.
/// "Blow-up" means a divergence error or a norm exceeding 100x the initial
/// norm within n_probe_steps.
inline double find_explicit_blowup_dt(const ExperimentConfig& base_cfg, int n_probe_steps = 50,
                                      double dt_start = 1e-5) {
  ProblemSetup prob = build_problem(base_cfg);
  const double init_norm = norm_m(prob.rule, prob.model->eval(prob.theta0, prob.rule.nodes));

  auto blows_up = [&](double dt) {
    ParamVector theta = prob.theta0;
    for (int k = 0; k < n_probe_steps; ++k) {
      try {
        auto [next, rec] = otd_step_explicit(*prob.model, theta, prob.rhs, k * dt, dt, prob.rule,
                                             base_cfg.tau, k);
        theta = next;
      } catch (const DivergenceError&) {
        return true;
      } catch (const NumericalError&) {
        return true;
      }
      const double nrm = norm_m(prob.rule, prob.model->eval(theta, prob.rule.nodes));
      if (!std::isfinite(nrm) || nrm > 100.0 * (init_norm + 1.0)) return true;
    }
    return false;
  };

  double lo = dt_start;
  if (blows_up(lo)) return lo;
  double hi = lo;
  for (int i = 0; i < 40; ++i) {
    hi *= 2.0;
    if (blows_up(hi)) break;
    lo = hi;
  }
  for (int i = 0; i < 10; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (blows_up(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace seqpde
