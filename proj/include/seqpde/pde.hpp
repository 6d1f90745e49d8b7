#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "seqpde/common.hpp"
#include "seqpde/models.hpp"
#include "seqpde/quadrature.hpp"

namespace seqpde {

/// Bounded part g(t, x, u, grad u) of a right-hand side. Implementations are
/// pure closures; u and grad_u are node-value arrays.
class BoundedTerm {
 public:
  virtual ~BoundedTerm() = default;
  virtual std::string describe() const = 0;
  virtual bool needs_grad_u() const { return false; }

  virtual Eigen::VectorXd eval(double t, const PointBatch& points, const Eigen::VectorXd& u,
                               const Eigen::MatrixXd* grad_u) const = 0;

  /// Pointwise derivative dg/du when available (used by implicit solvers).
  virtual bool has_u_derivative() const { return false; }
  virtual Eigen::VectorXd u_derivative(double /*t*/, const PointBatch& /*points*/,
                                       const Eigen::VectorXd& /*u*/) const {
    throw ConfigError("bounded term '" + describe() + "' provides no u-derivative");
  }

  /// d/d theta of g(t, x, u_hat(theta, x)) as a p x n matrix. The default
  /// chains the pointwise u-derivative through grad_theta; gradient-dependent
  /// terms override with the mixed-derivative contraction.
  virtual Eigen::MatrixXd theta_jacobian(double t, const PointBatch& points, const Model& model,
                                         const ParamVector& theta,
                                         const Eigen::MatrixXd& grad_theta_vals) const {
    if (!has_u_derivative())
      throw ConfigError("bounded term '" + describe() +
                        "' cannot be linearized in theta (required by an implicit scheme)");
    const Eigen::VectorXd du = u_derivative(t, points, model.eval(theta, points));
    return grad_theta_vals * du.asDiagonal();
  }
};

class ZeroTerm final : public BoundedTerm {
 public:
  std::string describe() const override { return "zero"; }
  Eigen::VectorXd eval(double, const PointBatch& points, const Eigen::VectorXd&,
                       const Eigen::MatrixXd*) const override {
    return Eigen::VectorXd::Zero(points.cols());
  }
  bool has_u_derivative() const override { return true; }
  Eigen::VectorXd u_derivative(double, const PointBatch& points,
                               const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Zero(points.cols());
  }
};

/// g(u) = c * u.
class LinearReactionTerm final : public BoundedTerm {
 public:
  explicit LinearReactionTerm(double c) : c_(c) {}
  std::string describe() const override { return "reaction(c=" + std::to_string(c_) + ")"; }
  Eigen::VectorXd eval(double, const PointBatch&, const Eigen::VectorXd& u,
                       const Eigen::MatrixXd*) const override {
    return c_ * u;
  }
  bool has_u_derivative() const override { return true; }
  Eigen::VectorXd u_derivative(double, const PointBatch& points,
                               const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Constant(points.cols(), c_);
  }
  double coefficient() const { return c_; }

 private:
  double c_;
};

/// Linear advection g = w(t) . grad u with a constant direction vector and an
/// optional smooth modulation of the speed:
///   w(t) = w_vec * (1 + amplitude * sin(omega t)).
/// The accumulated displacement integral(w) is available in closed form, which
/// the transport reference solution uses.
class AdvectionTerm final : public BoundedTerm {
 public:
  AdvectionTerm(Eigen::VectorXd w_vec, double amplitude = 0.0, double omega = 0.0)
      : w_(std::move(w_vec)), amplitude_(amplitude), omega_(omega) {}

  std::string describe() const override { return "advection"; }
  bool needs_grad_u() const override { return true; }

  double speed_factor(double t) const {
    return 1.0 + (omega_ == 0.0 ? 0.0 : amplitude_ * std::sin(omega_ * t));
  }

  Eigen::VectorXd velocity(double t) const { return speed_factor(t) * w_; }

  /// integral_0^t w(s) ds.
  Eigen::VectorXd displacement(double t) const {
    double s = t;
    if (omega_ != 0.0) s += amplitude_ * (1.0 - std::cos(omega_ * t)) / omega_;
    return s * w_;
  }

  Eigen::VectorXd eval(double t, const PointBatch& points, const Eigen::VectorXd&,
                       const Eigen::MatrixXd* grad_u) const override {
    if (grad_u == nullptr)
      throw ConfigError("advection: operator requires spatial gradients the caller did not supply");
    if (grad_u->rows() != w_.size() || grad_u->cols() != points.cols())
      throw ConfigError("advection: gradient samples have the wrong shape");
    return grad_u->transpose() * velocity(t);
  }

  Eigen::MatrixXd theta_jacobian(double t, const PointBatch& points, const Model& model,
                                 const ParamVector& theta,
                                 const Eigen::MatrixXd& grad_theta_vals) const override {
    const std::vector<Eigen::MatrixXd> mixed = model.grad_x_grad_theta(theta, points);
    const Eigen::VectorXd w = velocity(t);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(grad_theta_vals.rows(), grad_theta_vals.cols());
    for (int k = 0; k < w.size(); ++k) jac += w[k] * mixed[static_cast<size_t>(k)];
    return jac;
  }

 private:
  Eigen::VectorXd w_;
  double amplitude_;
  double omega_;
};

/// g(t, x, u) = target(x) - u; the right-hand side of the L2 least-squares
/// gradient flow.
class TargetRelaxationTerm final : public BoundedTerm {
 public:
  explicit TargetRelaxationTerm(std::function<Eigen::VectorXd(const PointBatch&)> target)
      : target_(std::move(target)) {}
  std::string describe() const override { return "target-relaxation"; }
  Eigen::VectorXd eval(double, const PointBatch& points, const Eigen::VectorXd& u,
                       const Eigen::MatrixXd*) const override {
    return target_(points) - u;
  }
  bool has_u_derivative() const override { return true; }
  Eigen::VectorXd u_derivative(double, const PointBatch& points,
                               const Eigen::VectorXd&) const override {
    return Eigen::VectorXd::Constant(points.cols(), -1.0);
  }

 private:
  std::function<Eigen::VectorXd(const PointBatch&)> target_;
};

/// Right-hand side f(t, x, u) split into a stiff linear part (the Laplacian)
/// and a bounded closure g. The Lipschitz and affine-growth constants are
/// declared inputs feeding the bound trackers, never computed.
struct RhsOperator {
  enum class StiffPart { none, laplacian };

  StiffPart stiff = StiffPart::none;
  std::shared_ptr<const BoundedTerm> bounded = std::make_shared<ZeroTerm>();
  double lipschitz_C = 0.0;
  double affine_C0 = 0.0;

  bool has_laplacian() const { return stiff == StiffPart::laplacian; }
};

/// f evaluated through a model at the quadrature nodes.
inline Eigen::VectorXd eval_rhs(const RhsOperator& op, double t, const Model& model,
                                const ParamVector& theta, const QuadratureRule& rule) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(rule.node_count());
  if (op.has_laplacian()) f = model.laplacian(theta, rule.nodes);
  const Eigen::VectorXd u = model.eval(theta, rule.nodes);
  if (op.bounded->needs_grad_u()) {
    const Eigen::MatrixXd gx = model.grad_x(theta, rule.nodes);
    f += op.bounded->eval(t, rule.nodes, u, &gx);
  } else {
    f += op.bounded->eval(t, rule.nodes, u, nullptr);
  }
  if (!f.allFinite()) throw NumericalError("eval_rhs: non-finite right-hand side values");
  return f;
}

/// f evaluated on raw value arrays (reference solutions, grid solvers).
inline Eigen::VectorXd eval_rhs_on_values(const RhsOperator& op, double t,
                                          const PointBatch& points, const Eigen::VectorXd& u,
                                          const Eigen::MatrixXd* grad_u,
                                          const Eigen::VectorXd* lap_u) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(points.cols());
  if (op.has_laplacian()) {
    if (lap_u == nullptr)
      throw ConfigError("eval_rhs_on_values: operator requires Laplacian values");
    f = *lap_u;
  }
  f += op.bounded->eval(t, points, u, grad_u);
  return f;
}

/// d/d theta of f(t, x, u_hat(theta, x)) as a p x n matrix; used by implicit
/// steppers. Throws a configuration error when the bounded part cannot supply
/// the required derivative.
inline Eigen::MatrixXd rhs_theta_jacobian(const RhsOperator& op, double t, const Model& model,
                                          const ParamVector& theta, const PointBatch& points,
                                          const Eigen::MatrixXd& grad_theta_vals) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(grad_theta_vals.rows(), grad_theta_vals.cols());
  if (op.has_laplacian()) jac = model.laplacian_grad_theta(theta, points);
  jac += op.bounded->theta_jacobian(t, points, model, theta, grad_theta_vals);
  return jac;
}

/// Smallest non-zero eigenvalue of -Delta with homogeneous Dirichlet
/// conditions on an axis-aligned box: sum_k (pi / (hi_k - lo_k))^2.
inline double smallest_dirichlet_eigenvalue(const Box& box) {
  const double pi = 3.14159265358979323846264338327950288;
  double s = 0.0;
  for (int k = 0; k < box.dimension(); ++k) {
    const double w = box.hi[k] - box.lo[k];
    s += (pi / w) * (pi / w);
  }
  return s;
}

/// Known solution used as an accuracy oracle. Analytic kinds supply exact
/// spatial derivatives; the fine-grid kind differentiates its snapshots.
class ReferenceSolution {
 public:
  enum class Kind { analytic, fine_grid };

  virtual ~ReferenceSolution() = default;
  virtual Kind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual Eigen::VectorXd values(double t, const PointBatch& points) const = 0;
  virtual Eigen::MatrixXd grad_x(double t, const PointBatch& points) const = 0;
  virtual Eigen::VectorXd laplacian(double t, const PointBatch& points) const = 0;
};

/// Decaying product-of-sines mode on a box: the exact solution of
/// u_t = Delta u + c u with u0 = amp * prod_k sin(pi (x_k - lo_k)/(hi_k - lo_k)).
class SineModeReference final : public ReferenceSolution {
 public:
  SineModeReference(Box box, double amplitude, double reaction_c)
      : box_(std::move(box)), amp_(amplitude), c_(reaction_c) {
    lambda_ = smallest_dirichlet_eigenvalue(box_);
  }

  Kind kind() const override { return Kind::analytic; }
  std::string describe() const override { return "sine-mode"; }

  Eigen::VectorXd values(double t, const PointBatch& points) const override {
    const double a = amp_ * std::exp((c_ - lambda_) * t);
    Eigen::VectorXd v(points.cols());
    for (int q = 0; q < points.cols(); ++q) v[q] = a * mode(points, q);
    return v;
  }

  Eigen::MatrixXd grad_x(double t, const PointBatch& points) const override {
    const double pi = BoundaryMask::pi();
    const double a = amp_ * std::exp((c_ - lambda_) * t);
    const int d = box_.dimension();
    Eigen::MatrixXd g(d, points.cols());
    for (int q = 0; q < points.cols(); ++q) {
      for (int k = 0; k < d; ++k) {
        double v = a;
        for (int j = 0; j < d; ++j) {
          const double om = pi / (box_.hi[j] - box_.lo[j]);
          const double arg = om * (points(j, q) - box_.lo[j]);
          v *= (j == k) ? om * std::cos(arg) : std::sin(arg);
        }
        g(k, q) = v;
      }
    }
    return g;
  }

  Eigen::VectorXd laplacian(double t, const PointBatch& points) const override {
    return -lambda_ * values(t, points);
  }

 private:
  double mode(const PointBatch& points, int q) const {
    const double pi = BoundaryMask::pi();
    double m = 1.0;
    for (int k = 0; k < box_.dimension(); ++k)
      m *= std::sin(pi * (points(k, q) - box_.lo[k]) / (box_.hi[k] - box_.lo[k]));
    return m;
  }

  Box box_;
  double amp_;
  double c_;
  double lambda_;
};

/// Exact transport of an initial profile under u_t = w(t) . grad u, namely
/// u(t, x) = u0(x + integral_0^t w). The initial profile is a model snapshot.
class TransportReference final : public ReferenceSolution {
 public:
  TransportReference(std::shared_ptr<const Model> initial_model, ParamVector theta0,
                     std::shared_ptr<const AdvectionTerm> advection)
      : model_(std::move(initial_model)), theta0_(std::move(theta0)),
        advection_(std::move(advection)) {}

  Kind kind() const override { return Kind::analytic; }
  std::string describe() const override { return "transport"; }

  Eigen::VectorXd values(double t, const PointBatch& points) const override {
    return model_->eval(theta0_, shifted(t, points));
  }
  Eigen::MatrixXd grad_x(double t, const PointBatch& points) const override {
    return model_->grad_x(theta0_, shifted(t, points));
  }
  Eigen::VectorXd laplacian(double t, const PointBatch& points) const override {
    return model_->laplacian(theta0_, shifted(t, points));
  }

 private:
  PointBatch shifted(double t, const PointBatch& points) const {
    return points.colwise() + advection_->displacement(t);
  }

  std::shared_ptr<const Model> model_;
  ParamVector theta0_;
  std::shared_ptr<const AdvectionTerm> advection_;
};

/// Exact free-space heat evolution of a fixed-bandwidth Gaussian mixture
/// snapshot: each kernel widens as h(t) = sqrt(h^2 + 2t) with amplitude factor
/// (h / h(t))^d. Used on window domains where the tails are negligible.
class FreeSpaceHeatMixtureReference final : public ReferenceSolution {
 public:
  FreeSpaceHeatMixtureReference(const GaussianMixtureModel& snapshot_model, ParamVector theta0)
      : n_(snapshot_model.kernel_count()), d_(snapshot_model.dimension()) {
    if (snapshot_model.trainable_bandwidth())
      throw ConfigError("free-space heat reference expects a fixed-bandwidth mixture");
    h0_ = snapshot_model.bandwidth();
    evolved_ = std::make_shared<GaussianMixtureModel>(n_, d_, h0_, /*trainable=*/true);
    theta0_ = std::move(theta0);
  }

  Kind kind() const override { return Kind::analytic; }
  std::string describe() const override { return "free-space-heat-mixture"; }

  Eigen::VectorXd values(double t, const PointBatch& points) const override {
    return evolved_->eval(evolved_theta(t), points);
  }
  Eigen::MatrixXd grad_x(double t, const PointBatch& points) const override {
    return evolved_->grad_x(evolved_theta(t), points);
  }
  Eigen::VectorXd laplacian(double t, const PointBatch& points) const override {
    return evolved_->laplacian(evolved_theta(t), points);
  }

 private:
  ParamVector evolved_theta(double t) const {
    const double ht = std::sqrt(h0_ * h0_ + 2.0 * t);
    ParamVector theta(evolved_->param_count());
    const double amp = std::pow(h0_ / ht, d_);
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < d_; ++k)
        theta[evolved_->alpha_index(i, k)] = theta0_[i * d_ + k];
      theta[evolved_->beta_index(i)] = theta0_[n_ * d_ + i] * amp;
      theta[evolved_->bandwidth_index(i)] = ht;
    }
    return theta;
  }

  int n_;
  int d_;
  double h0_;
  ParamVector theta0_;  // [alpha; beta] of the fixed-bandwidth snapshot
  std::shared_ptr<GaussianMixtureModel> evolved_;
};

/// Residual of the PDE u_t = f at a reference solution, using a fourth-order
/// central difference in time and the reference's analytic spatial
/// derivatives. Used to certify analytic references.
inline Eigen::VectorXd reference_pde_residual(const ReferenceSolution& ref, const RhsOperator& op,
                                              double t, const PointBatch& points,
                                              double dt_fd = 1e-3) {
  const Eigen::VectorXd um2 = ref.values(t - 2 * dt_fd, points);
  const Eigen::VectorXd um1 = ref.values(t - dt_fd, points);
  const Eigen::VectorXd up1 = ref.values(t + dt_fd, points);
  const Eigen::VectorXd up2 = ref.values(t + 2 * dt_fd, points);
  const Eigen::VectorXd dudt = (-up2 + 8.0 * up1 - 8.0 * um1 + um2) / (12.0 * dt_fd);
  const Eigen::VectorXd u = ref.values(t, points);
  const Eigen::MatrixXd gx = ref.grad_x(t, points);
  const Eigen::VectorXd lap = ref.laplacian(t, points);
  return dudt - eval_rhs_on_values(op, t, points, u, &gx, &lap);
}

/// Fine-grid reference for 1-d problems with homogeneous Dirichlet conditions:
/// second-order central differences in space, backward Euler on the Laplacian
/// with the bounded part treated explicitly. Snapshots are stored at the
/// requested times; evaluation interpolates with local cubics.
class FineGridHeatReference final : public ReferenceSolution {
 public:
  /// initial: values of u0 at the grid points a + i (b-a)/n, i = 0..n.
  FineGridHeatReference(Box box, int n, double dt_ref, const RhsOperator& op,
                        std::function<Eigen::VectorXd(const PointBatch&)> initial,
                        std::vector<double> snapshot_times)
      : box_(std::move(box)), n_(n) {
    if (box_.dimension() != 1)
      throw ConfigError("fine-grid reference: only 1-d domains are supported");
    if (n_ < 256) throw ConfigError("fine-grid reference: need at least 256 cells");
    if (!op.has_laplacian())
      throw ConfigError("fine-grid reference: operator must have a Laplacian stiff part");
    if (op.bounded->needs_grad_u())
      throw ConfigError("fine-grid reference: bounded part must be pointwise in u");
    times_ = std::move(snapshot_times);
    h_ = (box_.hi[0] - box_.lo[0]) / n_;
    grid_.resize(1, n_ + 1);
    for (int i = 0; i <= n_; ++i) grid_(0, i) = box_.lo[0] + h_ * i;
    Eigen::VectorXd u = initial(grid_);
    u[0] = 0.0;
    u[n_] = 0.0;
    integrate(u, dt_ref, op);
  }

  Kind kind() const override { return Kind::fine_grid; }
  std::string describe() const override { return "fine-grid(n=" + std::to_string(n_) + ")"; }

  int grid_size() const { return n_; }
  const std::vector<double>& snapshot_times() const { return times_; }

  /// Writes the snapshots to a binary cache file.
  void save_cache(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("fine-grid reference: cannot write cache file " + path);
    const char magic[8] = {'S', 'Q', 'P', 'D', 'R', 'E', 'F', '1'};
    out.write(magic, 8);
    const std::int64_t n = n_, nt = static_cast<std::int64_t>(times_.size());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&nt), 8);
    out.write(reinterpret_cast<const char*>(&box_.lo[0]), 8);
    out.write(reinterpret_cast<const char*>(&box_.hi[0]), 8);
    out.write(reinterpret_cast<const char*>(times_.data()), 8 * nt);
    for (const auto& snap : snapshots_)
      out.write(reinterpret_cast<const char*>(snap.data()), 8 * (n_ + 1));
  }

  /// Rebuilds a reference from a cache file; returns nullptr when the file is
  /// absent or malformed (callers then recompute).
  static std::shared_ptr<FineGridHeatReference> load_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return nullptr;
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "SQPDREF1") return nullptr;
    std::int64_t n = 0, nt = 0;
    double lo = 0.0, hi = 0.0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&nt), 8);
    in.read(reinterpret_cast<char*>(&lo), 8);
    in.read(reinterpret_cast<char*>(&hi), 8);
    if (!in || n < 256 || nt < 1) return nullptr;
    auto ref = std::shared_ptr<FineGridHeatReference>(new FineGridHeatReference());
    ref->box_ = Box::interval(lo, hi);
    ref->n_ = static_cast<int>(n);
    ref->h_ = (hi - lo) / n;
    ref->grid_.resize(1, ref->n_ + 1);
    for (int i = 0; i <= ref->n_; ++i) ref->grid_(0, i) = lo + ref->h_ * i;
    ref->times_.resize(nt);
    in.read(reinterpret_cast<char*>(ref->times_.data()), 8 * nt);
    ref->snapshots_.assign(nt, Eigen::VectorXd(ref->n_ + 1));
    for (auto& snap : ref->snapshots_)
      in.read(reinterpret_cast<char*>(snap.data()), 8 * (ref->n_ + 1));
    if (!in) return nullptr;
    return ref;
  }

  Eigen::VectorXd values(double t, const PointBatch& points) const override {
    const Eigen::VectorXd& snap = snapshot_at(t);
    Eigen::VectorXd out(points.cols());
    for (int q = 0; q < points.cols(); ++q) out[q] = interpolate(snap, points(0, q));
    return out;
  }

  Eigen::MatrixXd grad_x(double t, const PointBatch& points) const override {
    const Eigen::VectorXd d1 = grid_derivative(snapshot_at(t), 1);
    Eigen::MatrixXd g(1, points.cols());
    for (int q = 0; q < points.cols(); ++q) g(0, q) = interpolate(d1, points(0, q));
    return g;
  }

  Eigen::VectorXd laplacian(double t, const PointBatch& points) const override {
    const Eigen::VectorXd d2 = grid_derivative(snapshot_at(t), 2);
    Eigen::VectorXd out(points.cols());
    for (int q = 0; q < points.cols(); ++q) out[q] = interpolate(d2, points(0, q));
    return out;
  }

 private:
  FineGridHeatReference() = default;  // cache loading

  void integrate(Eigen::VectorXd u, double dt_ref, const RhsOperator& op) {
    snapshots_.clear();
    double t = 0.0;
    if (!times_.empty() && times_.front() <= 1e-14) {
      snapshots_.push_back(u);
    } else {
      throw ConfigError("fine-grid reference: snapshot times must start at 0");
    }
    const int m = n_ - 1;  // interior unknowns
    for (size_t j = 1; j < times_.size(); ++j) {
      const double span = times_[j] - t;
      if (span <= 0.0) throw ConfigError("fine-grid reference: snapshot times must increase");
      const int steps = std::max(1, static_cast<int>(std::ceil(span / dt_ref - 1e-12)));
      const double dt = span / steps;
      const double mu = dt / (h_ * h_);
      // Thomas factorization of I - dt * Delta_h (constant tridiagonal a=c=-mu, b=1+2mu).
      Eigen::VectorXd denom(m), cprime(m);
      denom[0] = 1.0 + 2.0 * mu;
      cprime[0] = -mu / denom[0];
      for (int i = 1; i < m; ++i) {
        denom[i] = 1.0 + 2.0 * mu + mu * cprime[i - 1];
        cprime[i] = -mu / denom[i];
      }
      Eigen::VectorXd rhs(m);
      for (int s = 0; s < steps; ++s) {
        const Eigen::VectorXd g = op.bounded->eval(t, grid_, u, nullptr);
        for (int i = 0; i < m; ++i) rhs[i] = u[i + 1] + dt * g[i + 1];
        rhs[0] /= denom[0];
        for (int i = 1; i < m; ++i) rhs[i] = (rhs[i] + mu * rhs[i - 1]) / denom[i];
        for (int i = m - 2; i >= 0; --i) rhs[i] -= cprime[i] * rhs[i + 1];
        for (int i = 0; i < m; ++i) u[i + 1] = rhs[i];
        u[0] = 0.0;
        u[n_] = 0.0;
        t += dt;
        if (!u.allFinite() || u.cwiseAbs().maxCoeff() > 1e12)
          throw NumericalError("fine-grid reference: solution blew up at t=" + std::to_string(t));
      }
      t = times_[j];
      snapshots_.push_back(u);
    }
  }

  const Eigen::VectorXd& snapshot_at(double t) const {
    for (size_t j = 0; j < times_.size(); ++j)
      if (std::abs(times_[j] - t) <= 1e-10 * (1.0 + std::abs(t))) return snapshots_[j];
    throw ConfigError("fine-grid reference: no snapshot stored at t=" + std::to_string(t));
  }

  /// Fourth-order finite differences of a grid snapshot (order = 1 or 2),
  /// shifted 5-point stencils near the boundary.
  Eigen::VectorXd grid_derivative(const Eigen::VectorXd& snap, int order) const {
    // rows: evaluation offset -2..+2 relative to the stencil center
    static const double d1[5][5] = {
        {-25.0, 48.0, -36.0, 16.0, -3.0}, {-3.0, -10.0, 18.0, -6.0, 1.0},
        {1.0, -8.0, 0.0, 8.0, -1.0},      {-1.0, 6.0, -18.0, 10.0, 3.0},
        {3.0, -16.0, 36.0, -48.0, 25.0}};
    static const double d2[5][5] = {
        {35.0, -104.0, 114.0, -56.0, 11.0}, {11.0, -20.0, 6.0, 4.0, -1.0},
        {-1.0, 16.0, -30.0, 16.0, -1.0},    {-1.0, 4.0, 6.0, -20.0, 11.0},
        {11.0, -56.0, 114.0, -104.0, 35.0}};
    const double scale = (order == 1) ? 12.0 * h_ : 12.0 * h_ * h_;
    Eigen::VectorXd out(n_ + 1);
    for (int i = 0; i <= n_; ++i) {
      const int c = std::min(std::max(i, 2), n_ - 2);
      const double(&row)[5] = (order == 1) ? d1[i - c + 2] : d2[i - c + 2];
      double v = 0.0;
      for (int j = 0; j < 5; ++j) v += row[j] * snap[c - 2 + j];
      out[i] = v / scale;
    }
    return out;
  }

  /// Local cubic (4-point Lagrange) interpolation on the uniform grid.
  double interpolate(const Eigen::VectorXd& snap, double x) const {
    const double a = box_.lo[0];
    double s = (x - a) / h_;
    int i = static_cast<int>(std::floor(s));
    i = std::min(std::max(i, 1), n_ - 2);
    const double u = s - i;  // in [0,1) away from boundary
    const double ym1 = snap[i - 1], y0 = snap[i], y1 = snap[i + 1], y2 = snap[i + 2];
    return ym1 * (-u * (u - 1.0) * (u - 2.0) / 6.0) + y0 * ((u * u - 1.0) * (u - 2.0) / 2.0) +
           y1 * (-u * (u + 1.0) * (u - 2.0) / 2.0) + y2 * (u * (u * u - 1.0) / 6.0);
  }

  Box box_;
  int n_;
  double h_;
  PointBatch grid_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> snapshots_;
};

}  // namespace seqpde
