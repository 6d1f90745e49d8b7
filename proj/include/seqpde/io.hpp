#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "seqpde/experiment.hpp"

namespace seqpde {

/// 17 significant digits: enough for exact double round-trips.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file '" + path + "'");
  out << content;
}

}  // namespace detail

inline void write_run_artifacts(const RunResult& result, const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  const int p = result.param_count;
  const bool otd_family = !result.otd_records.empty();

  std::string csv;
  if (otd_family) {
    csv += "step,t,epsilon,rhs_norm,projection_norm,sigma_max,sigma_min,effective_rank,norm_m,"
           "inner_converged,inner_iterations,bound_lipschitz,bound_laplacian,stability_bound,"
           "stability_bound_laplacian,error_vs_ref,energy";
    for (int i = 0; i < p; ++i) csv += ",theta_" + std::to_string(i);
    csv += "\n";
    for (size_t k = 0; k < result.otd_records.size(); ++k) {
      const auto& r = result.otd_records[k];
      csv += std::to_string(r.step) + "," + fmt17(r.t) + "," + fmt17(r.epsilon) + "," +
             fmt17(r.rhs_norm) + "," + fmt17(r.projection_norm) + "," + fmt17(r.sigma_max()) +
             "," + fmt17(r.sigma_min()) + "," + std::to_string(r.effective_rank) + "," +
             fmt17(r.norm_m) + "," + (r.inner_converged ? "1" : "0") + "," +
             std::to_string(r.inner_iterations) + "," + fmt17(r.bound_lipschitz) + "," +
             fmt17(r.bound_laplacian) + "," + fmt17(r.stability_bound) + "," +
             fmt17(r.stability_bound_laplacian) + ",";
      csv += (k < result.errors.size() ? fmt17(result.errors[k]) : "nan");
      csv += ",";
      csv += (k < result.energies.size() ? fmt17(result.energies[k]) : "nan");
      for (int i = 0; i < p; ++i) csv += "," + fmt17(r.theta[i]);
      csv += "\n";
    }
  } else {
    csv += "step,t,residual_norm,gn_iterations,gn_converged,first_order_violation,sigma_max,"
           "sigma_min,effective_rank,norm_m,bound_explicit,bound_implicit,stationary_envelope,"
           "error_vs_ref";
    for (int i = 0; i < p; ++i) csv += ",theta_" + std::to_string(i);
    csv += "\n";
    for (size_t k = 0; k < result.dto_records.size(); ++k) {
      const auto& r = result.dto_records[k];
      csv += std::to_string(r.step) + "," + fmt17(r.t_next) + "," + fmt17(r.residual_norm) + "," +
             std::to_string(r.gn_iterations) + "," + (r.gn_converged ? "1" : "0") + "," +
             fmt17(r.first_order_violation) + "," + fmt17(r.sigma_max()) + "," +
             fmt17(r.sigma_min()) + "," + std::to_string(r.effective_rank) + "," +
             fmt17(r.norm_m) + "," + fmt17(r.bound_explicit) + "," + fmt17(r.bound_implicit) +
             "," + fmt17(r.stationary_envelope) + ",";
      csv += (k + 1 < result.errors.size() ? fmt17(result.errors[k + 1]) : "nan");
      for (int i = 0; i < p; ++i) csv += "," + fmt17(r.theta_next[i]);
      csv += "\n";
    }
  }
  detail::write_file(outdir + "/steps.csv", csv);

  // Singular spectra of the per-step linearizations, at the configured stride.
  std::string spectra = "step,t";
  for (int i = 0; i < p; ++i) spectra += ",sigma_" + std::to_string(i);
  spectra += "\n";
  const int stride = std::max(1, result.cfg.spectra_stride);
  auto spectrum_row = [&](int step, double t, const Eigen::VectorXd& s) {
    spectra += std::to_string(step) + "," + fmt17(t);
    for (int i = 0; i < p; ++i) spectra += "," + fmt17(i < s.size() ? s[i] : 0.0);
    spectra += "\n";
  };
  if (otd_family) {
    for (size_t k = 0; k < result.otd_records.size(); k += stride)
      spectrum_row(result.otd_records[k].step, result.otd_records[k].t,
                   result.otd_records[k].gram_spectrum);
  } else {
    for (size_t k = 0; k < result.dto_records.size(); k += stride)
      spectrum_row(result.dto_records[k].step, result.dto_records[k].t_next,
                   result.dto_records[k].gram_spectrum);
  }
  detail::write_file(outdir + "/spectra.csv", spectra);

  json summary;
  summary["schema_version"] = 1;
  summary["config_hash"] = result.cfg.config_hash();
  summary["problem"] = result.cfg.problem;
  summary["scheme"] = result.scheme_kind;
  summary["param_count"] = result.param_count;
  summary["steps"] = result.cfg.n_steps();
  summary["dt"] = result.cfg.dt;
  summary["T"] = result.cfg.T;
  summary["tau"] = result.cfg.tau;
  summary["seed"] = result.cfg.seed;
  summary["has_reference"] = result.has_reference;
  summary["e0"] = result.e0;
  if (std::isfinite(result.final_error)) summary["final_error"] = result.final_error;
  if (std::isfinite(result.final_residual)) summary["final_residual"] = result.final_residual;
  if (std::isfinite(result.max_residual)) summary["max_residual"] = result.max_residual;
  summary["bounds_valid"] = result.bounds_valid;
  json checks = json::array();
  for (const auto& c : result.bound_checks) {
    json jc;
    jc["name"] = c.name;
    jc["min_margin"] = c.min_margin;
    jc["argmin_step"] = c.argmin_step;
    jc["valid"] = c.valid;
    jc["mode"] = c.mode;
    checks.push_back(jc);
  }
  summary["bound_checks"] = checks;
  if (!result.energies.empty()) {
    summary["energy_initial"] = result.energies.front();
    summary["energy_final"] = result.energies.back();
    bool monotone = true;
    for (size_t k = 1; k < result.energies.size(); ++k)
      if (result.energies[k] > result.energies[k - 1] + 1e-14) monotone = false;
    summary["energy_monotone_decreasing"] = monotone;
  }
  if (result.is_collapse_run) {
    json col;
    col["duplicates_persist"] = result.collapse.duplicates_persist;
    col["first_divergence_step"] = result.collapse.first_divergence_step;
    col["initial_rank"] = result.collapse.initial_rank;
    col["final_rank"] = result.collapse.final_rank;
    col["rank_constant"] = result.collapse.rank_constant;
    json groups = json::array();
    for (const auto& g : result.collapse.tracked_groups) groups.push_back(g);
    col["tracked_groups"] = groups;
    summary["collapse"] = col;

    std::string ccsv = "step,t,sigma_ratio,effective_rank,max_group_deviation,persists\n";
    for (const auto& rep : result.collapse.reports)
      ccsv += std::to_string(rep.step) + "," + fmt17(rep.t) + "," + fmt17(rep.sigma_ratio) + "," +
              std::to_string(rep.effective_rank) + "," + fmt17(rep.max_group_deviation) + "," +
              (rep.persists ? "1" : "0") + "\n";
    detail::write_file(outdir + "/collapse.csv", ccsv);
  }
  summary["wall_seconds"] = result.wall_seconds;
  detail::write_file(outdir + "/summary.json", summary.dump(2) + "\n");
}

/// Runs a run-config and writes its artifacts into cfg.output_dir.
inline RunResult run_and_write(const ExperimentConfig& cfg) {
  RunResult result = run_experiment(cfg);
  write_run_artifacts(result, cfg.output_dir);
  return result;
}

struct SweepRow {
  double value = 0.0;
  double final_error = std::numeric_limits<double>::quiet_NaN();
  double observed_order = std::numeric_limits<double>::quiet_NaN();
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  bool bounds_valid = true;
  bool duplicates_persist = true;
  std::string run_dir;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
};

/// One run per axis value, plus derived columns (observed convergence order on
/// a dt sweep via successive error ratios).
inline SweepResult run_sweep(const ExperimentConfig& base, const std::string& axis,
                             const std::vector<double>& values, bool write_artifacts = true) {
  if (values.empty()) throw ConfigError("sweep: need at least one axis value");
  const bool is_dto = base.scheme.kind == "dto-gn" || base.scheme.kind == "dto-imex";
  if (axis == "L" && !is_dto)
    throw ConfigError("sweep axis 'L' applies only to the optimization-based schemes");
  if (axis == "n_kernels" && base.model.kind != "gaussian")
    throw ConfigError("sweep axis 'n_kernels' applies only to gaussian models");
  if (axis != "dt" && axis != "tau" && axis != "n_kernels" && axis != "L")
    throw ConfigError("sweep: unknown axis '" + axis + "' (dt, tau, n_kernels, L)");

  SweepResult sweep;
  sweep.axis = axis;
  for (size_t i = 0; i < values.size(); ++i) {
    json j = base.raw;
    if (axis == "dt")
      j["dt"] = values[i];
    else if (axis == "tau")
      j["tau"] = values[i];
    else if (axis == "n_kernels")
      j["model"]["n"] = static_cast<int>(values[i]);
    else
      j["scheme"]["L"] = static_cast<int>(values[i]);
    j["output_dir"] = base.output_dir + "/" + axis + "_" + std::to_string(i);
    ExperimentConfig cfg = parse_config(j);

    const RunResult run = write_artifacts ? run_and_write(cfg) : run_experiment(cfg);
    SweepRow row;
    row.value = values[i];
    row.final_error = run.final_error;
    row.final_residual = run.final_residual;
    row.bounds_valid = run.bounds_valid;
    row.duplicates_persist = !run.is_collapse_run || run.collapse.duplicates_persist;
    row.run_dir = cfg.output_dir;
    sweep.rows.push_back(row);
  }
  if (axis == "dt") {
    for (size_t i = 1; i < sweep.rows.size(); ++i) {
      const double e0 = sweep.rows[i - 1].final_error, e1 = sweep.rows[i].final_error;
      const double v0 = sweep.rows[i - 1].value, v1 = sweep.rows[i].value;
      if (e0 > 0.0 && e1 > 0.0 && v0 != v1)
        sweep.rows[i].observed_order = std::log(e0 / e1) / std::log(v0 / v1);
    }
  }
  if (write_artifacts) {
    std::filesystem::create_directories(base.output_dir);
    std::string csv = "value,final_error,observed_order,final_residual,bounds_valid,"
                      "duplicates_persist,run_dir\n";
    for (const auto& r : sweep.rows)
      csv += fmt17(r.value) + "," + fmt17(r.final_error) + "," + fmt17(r.observed_order) + "," +
             fmt17(r.final_residual) + "," + (r.bounds_valid ? "1" : "0") + "," +
             (r.duplicates_persist ? "1" : "0") + "," + r.run_dir + "\n";
    detail::write_file(base.output_dir + "/sweep.csv", csv);
  }
  return sweep;
}

struct CompareResult {
  std::vector<double> per_step_max_diff;  // aligned on shared steps
  double max_diff = 0.0;
  int steps_compared = 0;
};

/// Paired trajectory diff of two runs (equal parameter counts required).
inline CompareResult compare_runs(const RunResult& a, const RunResult& b) {
  if (a.param_count != b.param_count)
    throw ConfigError("compare: parameter counts differ (" + std::to_string(a.param_count) +
                      " vs " + std::to_string(b.param_count) + ")");
  CompareResult cmp;
  cmp.steps_compared =
      static_cast<int>(std::min(a.trajectory.size(), b.trajectory.size()));
  cmp.per_step_max_diff.resize(cmp.steps_compared);
  for (int k = 0; k < cmp.steps_compared; ++k) {
    cmp.per_step_max_diff[k] =
        (a.trajectory[k] - b.trajectory[k]).cwiseAbs().maxCoeff();
    cmp.max_diff = std::max(cmp.max_diff, cmp.per_step_max_diff[k]);
  }
  return cmp;
}

inline CompareResult run_compare(const ExperimentConfig& cfg_a, const ExperimentConfig& cfg_b,
                                 const std::string& outdir) {
  const RunResult a = run_and_write(cfg_a);
  const RunResult b = run_and_write(cfg_b);
  const CompareResult cmp = compare_runs(a, b);
  std::filesystem::create_directories(outdir);
  std::string csv = "step,t,max_coord_diff\n";
  for (int k = 0; k < cmp.steps_compared; ++k)
    csv += std::to_string(k) + "," + fmt17(k * cfg_a.dt) + "," + fmt17(cmp.per_step_max_diff[k]) +
           "\n";
  detail::write_file(outdir + "/compare.csv", csv);
  json summary;
  summary["config_hash_a"] = cfg_a.config_hash();
  summary["config_hash_b"] = cfg_b.config_hash();
  summary["max_coordinate_difference"] = cmp.max_diff;
  summary["steps_compared"] = cmp.steps_compared;
  detail::write_file(outdir + "/compare_summary.json", summary.dump(2) + "\n");
  return cmp;
}

}  // namespace seqpde
