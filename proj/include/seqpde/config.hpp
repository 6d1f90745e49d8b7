#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/models.hpp"

namespace seqpde {

using json = nlohmann::json;

/// Closed-form scalar fields by id, used for initial conditions and flow
/// targets. Supported: "zero", "const(v)", "sine" / "sine(amp)" (product of
/// half-period sines spanning the box), "gauss_bump(center, width)" (radial,
/// same center coordinate in every dimension).
inline std::function<Eigen::VectorXd(const PointBatch&)> make_expression(const std::string& id,
                                                                         const Box& box) {
  std::string name = id;
  std::vector<double> args;
  const auto open = id.find('(');
  if (open != std::string::npos) {
    if (id.back() != ')') throw ConfigError("expression '" + id + "': missing ')'");
    name = id.substr(0, open);
    std::stringstream ss(id.substr(open + 1, id.size() - open - 2));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("expression '" + id + "': bad numeric argument '" + tok + "'");
      }
    }
  }

  if (name == "zero") {
    return [](const PointBatch& x) { return Eigen::VectorXd::Zero(x.cols()).eval(); };
  }
  if (name == "const") {
    if (args.size() != 1) throw ConfigError("expression 'const' takes one argument");
    const double v = args[0];
    return [v](const PointBatch& x) { return Eigen::VectorXd::Constant(x.cols(), v).eval(); };
  }
  if (name == "sine") {
    const double amp = args.empty() ? 1.0 : args[0];
    return [amp, box](const PointBatch& x) {
      Eigen::VectorXd v = Eigen::VectorXd::Constant(x.cols(), amp);
      for (int q = 0; q < x.cols(); ++q)
        for (int k = 0; k < box.dimension(); ++k)
          v[q] *= std::sin(BoundaryMask::pi() * (x(k, q) - box.lo[k]) / (box.hi[k] - box.lo[k]));
      return v;
    };
  }
  if (name == "gauss_bump") {
    if (args.size() != 2) throw ConfigError("expression 'gauss_bump' takes (center, width)");
    const double c = args[0], w = args[1];
    if (w <= 0.0) throw ConfigError("expression 'gauss_bump': width must be positive");
    return [c, w](const PointBatch& x) {
      Eigen::VectorXd v(x.cols());
      for (int q = 0; q < x.cols(); ++q) {
        double s = 0.0;
        for (int k = 0; k < x.rows(); ++k) s += (x(k, q) - c) * (x(k, q) - c);
        v[q] = std::exp(-0.5 * s / (w * w));
      }
      return v;
    };
  }
  throw ConfigError("unknown expression id '" + id + "'");
}

struct ModelConfig {
  std::string kind = "gaussian";  // gaussian | network
  int n = 1;                      // kernels or hidden units
  double bandwidth = 0.5;
  bool trainable_bandwidth = false;
  std::string mask = "none";  // none | homogeneous-dirichlet

  struct Init {
    std::string type = "fit";  // fit | values | degenerate
    std::uint64_t seed = 1;
    int iterations = 200;
    std::vector<double> theta;       // for "values"
    std::vector<double> alpha;       // for "degenerate": shared center
    double beta = 1.0;               // for "degenerate": shared weight
    double perturb_first = 0.0;      // offset added to the first kernel center
  } init;
};

struct PdeConfig {
  std::string kind = "heat-reaction";  // advection | heat-reaction | heat-free | gradient-flow
  double reaction_c = 0.0;
  std::vector<double> advection_w = {-1.0};
  double advection_amplitude = 0.0;
  double advection_omega = 0.0;
  std::string initial = "sine";  // expression id, or "model" for u0 := u_hat(theta_0)
};

struct SchemeConfig {
  std::string kind = "otd-explicit";  // otd-explicit | otd-zeta | dto-gn | dto-imex | ngd
  double zeta = 1.0;
  int L = 20;
  double alpha = 1.0;
  bool line_search = true;
  double gn_tolerance = 1e-9;
  int max_inner = 50;
};

struct ConstantsConfig {
  double C = 0.0;
  double C0 = 0.0;
  double lambda_star = -1.0;  // < 0: derive from the domain when Dirichlet-masked
  double stability_C = -1.0;  // < 0: reuse C
  double stability_C0 = -1.0;
  std::vector<double> eps_params = {0.1, 1.0};
};

struct ReferenceConfig {
  std::string kind = "auto";  // auto | analytic | fine-grid | none
  int grid_n = 1024;
  double dt_ref = 2e-6;
  bool cache = false;
};

struct BoundsConfig {
  double e0 = -1.0;             // < 0: measure from the reference at t = 0
  std::string ek_mode = "oracle";  // oracle | assumed
  double ek_assumed = 0.0;
};

struct QuadratureConfig {
  std::string kind = "gauss-legendre";  // gauss-legendre | trapezoid | monte-carlo
  int nodes_per_dim = 64;
  int mc_nodes = 512;
  std::uint64_t mc_seed = 1;
};

struct CollapseConfig {
  double duplicate_tol = 1e-8;
  double persistence_tol = 1e-10;
  double inner_perturbation = 0.0;
};

struct ExperimentConfig {
  std::string problem = "P2";  // P1 | P2 | P3 | collapse
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  double tau = 1e-10;
  double dt = 1e-3;
  double T = 0.1;
  Box domain;
  QuadratureConfig quadrature;
  ModelConfig model;
  PdeConfig pde;
  SchemeConfig scheme;
  ConstantsConfig constants;
  ReferenceConfig reference;
  BoundsConfig bounds;
  std::string energy_target = "gauss_bump(0.5,0.3)";
  int energy_metric_nodes = 0;  // > 0: separate quadrature for the energy metric
  std::string on_rank_deficiency = "min-norm";  // min-norm | error
  int spectra_stride = 1;
  bool strict_bounds = false;
  CollapseConfig collapse;

  json raw;  // canonical form, hashed for determinism checks

  int n_steps() const { return static_cast<int>(std::llround(T / dt)); }

  std::string config_hash() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(raw.dump())));
    return std::string(buf);
  }
};

namespace detail {

template <typename T>
T field_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

inline void apply_problem_preset(ExperimentConfig& cfg) {
  if (cfg.problem == "P1") {
    cfg.domain = Box::interval(-5.0, 6.0);
    cfg.quadrature.nodes_per_dim = 96;
    cfg.model.kind = "gaussian";
    cfg.model.n = 1;
    cfg.model.bandwidth = 0.5;
    cfg.model.trainable_bandwidth = false;
    cfg.model.mask = "none";
    cfg.model.init.type = "values";
    cfg.model.init.theta = {0.0, 1.0};  // centered unit bump
    cfg.pde.kind = "advection";
    cfg.pde.advection_w = {-1.0};
    cfg.pde.initial = "model";
    cfg.dt = 1e-3;
    cfg.T = 0.5;
    cfg.constants.C = 0.0;
    cfg.constants.C0 = 0.0;
    cfg.constants.stability_C = 4.0;  // |w|_max * sup ||grad u|| / ||u|| along bump profiles
    cfg.constants.stability_C0 = 0.0;
  } else if (cfg.problem == "P2") {
    cfg.domain = Box::interval(0.0, 1.0);
    cfg.quadrature.nodes_per_dim = 64;
    cfg.model.kind = "gaussian";
    cfg.model.n = 3;
    cfg.model.bandwidth = 0.3;
    cfg.model.trainable_bandwidth = true;
    cfg.model.mask = "homogeneous-dirichlet";
    cfg.model.init.type = "fit";
    cfg.pde.kind = "heat-reaction";
    cfg.pde.reaction_c = 1.0;
    cfg.pde.initial = "sine";
    cfg.dt = 1e-4;
    cfg.T = 0.02;
    cfg.constants.C = 1.0;  // Lipschitz constant of the reaction part
    cfg.constants.C0 = 0.0;
    cfg.constants.stability_C = 25.0;  // affine growth of the full rhs along the run
    cfg.constants.stability_C0 = 0.1;
  } else if (cfg.problem == "P3") {
    cfg.domain = Box::interval(-3.0, 3.0);
    cfg.quadrature.nodes_per_dim = 64;
    cfg.model.kind = "gaussian";
    cfg.model.n = 2;
    cfg.model.bandwidth = 0.8;
    cfg.model.mask = "none";
    cfg.model.init.type = "fit";
    cfg.pde.kind = "gradient-flow";
    cfg.pde.initial = "model";
    cfg.energy_target = "gauss_bump(0.5,0.6)";
    cfg.dt = 1e-3;
    cfg.T = 0.1;
    cfg.reference.kind = "none";
    cfg.constants.C = 1.0;  // target relaxation is 1-Lipschitz
  } else if (cfg.problem == "collapse") {
    cfg.domain = Box::interval(-6.0, 6.0);
    cfg.quadrature.nodes_per_dim = 128;
    cfg.model.kind = "gaussian";
    cfg.model.n = 4;
    cfg.model.bandwidth = 0.7;
    cfg.model.trainable_bandwidth = false;
    cfg.model.mask = "none";
    cfg.model.init.type = "degenerate";
    cfg.model.init.alpha = {0.0};
    cfg.model.init.beta = 0.8;
    cfg.pde.kind = "heat-free";
    cfg.pde.initial = "model";
    cfg.dt = 1e-3;
    cfg.T = 0.1;
    cfg.constants.C = 0.0;
  } else {
    throw ConfigError("config field 'problem': unknown id '" + cfg.problem +
                      "' (expected P1, P2, P3 or collapse)");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  cfg.problem = detail::field_or<std::string>(j, "problem", "P2");
  detail::apply_problem_preset(cfg);

  cfg.seed = detail::field_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.output_dir = detail::field_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.tau = detail::field_or<double>(j, "tau", cfg.tau);
  cfg.dt = detail::field_or<double>(j, "dt", cfg.dt);
  cfg.T = detail::field_or<double>(j, "T", cfg.T);
  cfg.spectra_stride = detail::field_or<int>(j, "spectra_stride", cfg.spectra_stride);
  cfg.strict_bounds = detail::field_or<bool>(j, "strict_bounds", cfg.strict_bounds);
  cfg.on_rank_deficiency =
      detail::field_or<std::string>(j, "on_rank_deficiency", cfg.on_rank_deficiency);

  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    const auto lo = detail::field_or<std::vector<double>>(d, "lo", {});
    const auto hi = detail::field_or<std::vector<double>>(d, "hi", {});
    if (lo.empty() || lo.size() != hi.size())
      throw ConfigError("config field 'domain': lo/hi must be equal-length non-empty arrays");
    cfg.domain.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), lo.size());
    cfg.domain.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), hi.size());
    for (int k = 0; k < cfg.domain.dimension(); ++k)
      if (!(cfg.domain.lo[k] < cfg.domain.hi[k]))
        throw ConfigError("config field 'domain': lo must be strictly below hi");
    if (cfg.domain.dimension() > 2)
      throw ConfigError("config field 'domain': only d <= 2 is supported");
  }

  if (j.contains("quadrature")) {
    const auto& q = j.at("quadrature");
    cfg.quadrature.kind = detail::field_or<std::string>(q, "kind", cfg.quadrature.kind);
    cfg.quadrature.nodes_per_dim =
        detail::field_or<int>(q, "nodes_per_dim", cfg.quadrature.nodes_per_dim);
    cfg.quadrature.mc_nodes = detail::field_or<int>(q, "mc_nodes", cfg.quadrature.mc_nodes);
    cfg.quadrature.mc_seed = detail::field_or<std::uint64_t>(q, "mc_seed", cfg.quadrature.mc_seed);
    if (cfg.quadrature.kind != "gauss-legendre" && cfg.quadrature.kind != "trapezoid" &&
        cfg.quadrature.kind != "monte-carlo")
      throw ConfigError("config field 'quadrature.kind': unknown kind '" + cfg.quadrature.kind +
                        "'");
  }

  if (j.contains("model")) {
    const auto& m = j.at("model");
    cfg.model.kind = detail::field_or<std::string>(m, "kind", cfg.model.kind);
    cfg.model.n = detail::field_or<int>(m, "n", cfg.model.n);
    cfg.model.bandwidth = detail::field_or<double>(m, "bandwidth", cfg.model.bandwidth);
    cfg.model.trainable_bandwidth =
        detail::field_or<bool>(m, "trainable_bandwidth", cfg.model.trainable_bandwidth);
    cfg.model.mask = detail::field_or<std::string>(m, "mask", cfg.model.mask);
    if (cfg.model.kind != "gaussian" && cfg.model.kind != "network")
      throw ConfigError("config field 'model.kind': unknown kind '" + cfg.model.kind + "'");
    if (cfg.model.mask != "none" && cfg.model.mask != "homogeneous-dirichlet")
      throw ConfigError("config field 'model.mask': unknown kind '" + cfg.model.mask + "'");
    if (cfg.model.n < 1) throw ConfigError("config field 'model.n': must be >= 1");
    if (m.contains("init")) {
      const auto& i = m.at("init");
      cfg.model.init.type = detail::field_or<std::string>(i, "type", cfg.model.init.type);
      cfg.model.init.seed = detail::field_or<std::uint64_t>(i, "seed", cfg.model.init.seed);
      cfg.model.init.iterations =
          detail::field_or<int>(i, "iterations", cfg.model.init.iterations);
      cfg.model.init.theta =
          detail::field_or<std::vector<double>>(i, "theta", cfg.model.init.theta);
      cfg.model.init.alpha =
          detail::field_or<std::vector<double>>(i, "alpha", cfg.model.init.alpha);
      cfg.model.init.beta = detail::field_or<double>(i, "beta", cfg.model.init.beta);
      cfg.model.init.perturb_first =
          detail::field_or<double>(i, "perturb_first", cfg.model.init.perturb_first);
      if (cfg.model.init.type != "fit" && cfg.model.init.type != "values" &&
          cfg.model.init.type != "degenerate")
        throw ConfigError("config field 'model.init.type': unknown type '" + cfg.model.init.type +
                          "'");
    }
  }

  if (j.contains("pde")) {
    const auto& p = j.at("pde");
    cfg.pde.kind = detail::field_or<std::string>(p, "kind", cfg.pde.kind);
    cfg.pde.reaction_c = detail::field_or<double>(p, "reaction_c", cfg.pde.reaction_c);
    cfg.pde.initial = detail::field_or<std::string>(p, "initial", cfg.pde.initial);
    if (p.contains("advection")) {
      const auto& a = p.at("advection");
      cfg.pde.advection_w =
          detail::field_or<std::vector<double>>(a, "w", cfg.pde.advection_w);
      cfg.pde.advection_amplitude =
          detail::field_or<double>(a, "amplitude", cfg.pde.advection_amplitude);
      cfg.pde.advection_omega = detail::field_or<double>(a, "omega", cfg.pde.advection_omega);
    }
    if (cfg.pde.kind != "advection" && cfg.pde.kind != "heat-reaction" &&
        cfg.pde.kind != "heat-free" && cfg.pde.kind != "gradient-flow")
      throw ConfigError("config field 'pde.kind': unknown kind '" + cfg.pde.kind + "'");
  }

  if (j.contains("scheme")) {
    const auto& s = j.at("scheme");
    cfg.scheme.kind = detail::field_or<std::string>(s, "kind", cfg.scheme.kind);
    cfg.scheme.zeta = detail::field_or<double>(s, "zeta", cfg.scheme.zeta);
    cfg.scheme.L = detail::field_or<int>(s, "L", cfg.scheme.L);
    cfg.scheme.alpha = detail::field_or<double>(s, "alpha", cfg.scheme.alpha);
    cfg.scheme.line_search = detail::field_or<bool>(s, "line_search", cfg.scheme.line_search);
    cfg.scheme.gn_tolerance = detail::field_or<double>(s, "gn_tolerance", cfg.scheme.gn_tolerance);
    cfg.scheme.max_inner = detail::field_or<int>(s, "max_inner", cfg.scheme.max_inner);
    if (cfg.scheme.kind != "otd-explicit" && cfg.scheme.kind != "otd-zeta" &&
        cfg.scheme.kind != "dto-gn" && cfg.scheme.kind != "dto-imex" && cfg.scheme.kind != "ngd")
      throw ConfigError("config field 'scheme.kind': unknown kind '" + cfg.scheme.kind + "'");
    if (cfg.scheme.zeta < 0.0 || cfg.scheme.zeta > 1.0)
      throw ConfigError("config field 'scheme.zeta': must lie in [0, 1], got " +
                        std::to_string(cfg.scheme.zeta));
    if (cfg.scheme.L < 1) throw ConfigError("config field 'scheme.L': must be >= 1");
    if (cfg.scheme.alpha <= 0.0 || cfg.scheme.alpha > 1.0)
      throw ConfigError("config field 'scheme.alpha': must lie in (0, 1]");
  }

  if (j.contains("constants")) {
    const auto& c = j.at("constants");
    cfg.constants.C = detail::field_or<double>(c, "C", cfg.constants.C);
    cfg.constants.C0 = detail::field_or<double>(c, "C0", cfg.constants.C0);
    cfg.constants.lambda_star =
        detail::field_or<double>(c, "lambda_star", cfg.constants.lambda_star);
    cfg.constants.stability_C =
        detail::field_or<double>(c, "stability_C", cfg.constants.stability_C);
    cfg.constants.stability_C0 =
        detail::field_or<double>(c, "stability_C0", cfg.constants.stability_C0);
    cfg.constants.eps_params =
        detail::field_or<std::vector<double>>(c, "eps_params", cfg.constants.eps_params);
  }

  if (j.contains("reference")) {
    const auto& r = j.at("reference");
    cfg.reference.kind = detail::field_or<std::string>(r, "kind", cfg.reference.kind);
    cfg.reference.grid_n = detail::field_or<int>(r, "grid_n", cfg.reference.grid_n);
    cfg.reference.dt_ref = detail::field_or<double>(r, "dt_ref", cfg.reference.dt_ref);
    cfg.reference.cache = detail::field_or<bool>(r, "cache", cfg.reference.cache);
    if (cfg.reference.kind != "auto" && cfg.reference.kind != "analytic" &&
        cfg.reference.kind != "fine-grid" && cfg.reference.kind != "none")
      throw ConfigError("config field 'reference.kind': unknown kind '" + cfg.reference.kind +
                        "'");
  }

  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    cfg.bounds.e0 = detail::field_or<double>(b, "e0", cfg.bounds.e0);
    cfg.bounds.ek_mode = detail::field_or<std::string>(b, "ek_mode", cfg.bounds.ek_mode);
    cfg.bounds.ek_assumed = detail::field_or<double>(b, "ek_assumed", cfg.bounds.ek_assumed);
    if (cfg.bounds.ek_mode != "oracle" && cfg.bounds.ek_mode != "assumed")
      throw ConfigError("config field 'bounds.ek_mode': must be 'oracle' or 'assumed'");
  }

  if (j.contains("energy")) {
    const auto& e = j.at("energy");
    cfg.energy_target = detail::field_or<std::string>(e, "target", cfg.energy_target);
    cfg.energy_metric_nodes =
        detail::field_or<int>(e, "metric_nodes", cfg.energy_metric_nodes);
  }

  if (j.contains("collapse")) {
    const auto& c = j.at("collapse");
    cfg.collapse.duplicate_tol =
        detail::field_or<double>(c, "duplicate_tol", cfg.collapse.duplicate_tol);
    cfg.collapse.persistence_tol =
        detail::field_or<double>(c, "persistence_tol", cfg.collapse.persistence_tol);
    cfg.collapse.inner_perturbation =
        detail::field_or<double>(c, "inner_perturbation", cfg.collapse.inner_perturbation);
  }

  if (cfg.dt <= 0.0) throw ConfigError("config field 'dt': must be positive");
  if (cfg.T < cfg.dt) throw ConfigError("config field 'T': must be at least dt");
  if (cfg.tau < 0.0) throw ConfigError("config field 'tau': must be nonnegative");
  if (cfg.on_rank_deficiency != "min-norm" && cfg.on_rank_deficiency != "error")
    throw ConfigError("config field 'on_rank_deficiency': must be 'min-norm' or 'error'");

  cfg.raw = j;
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

}  // namespace seqpde
