#pragma once

#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "seqpde/common.hpp"

namespace seqpde {

/// Nonlinear spatial parametrization u_hat(theta, x) with analytic derivatives
/// in both arguments. Evaluation is pure; instances are immutable after
/// construction and safe to share across threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual int param_count() const = 0;
  virtual int dimension() const = 0;
  virtual std::string describe() const = 0;

  /// u_hat(theta, x_j) for every column x_j of points.
  virtual Eigen::VectorXd eval(const ParamVector& theta, const PointBatch& points) const = 0;

  /// Row i holds d u_hat / d theta_i at every point (p x n).
  virtual Eigen::MatrixXd grad_theta(const ParamVector& theta, const PointBatch& points) const = 0;

  /// Spatial gradient, row k holds d u_hat / d x_k (d x n).
  virtual Eigen::MatrixXd grad_x(const ParamVector& theta, const PointBatch& points) const = 0;

  /// Spatial Laplacian at every point.
  virtual Eigen::VectorXd laplacian(const ParamVector& theta, const PointBatch& points) const = 0;

  /// Mixed derivatives: element k of the result holds d^2 u_hat / (d x_k d theta_i)
  /// as a p x n matrix.
  virtual std::vector<Eigen::MatrixXd> grad_x_grad_theta(const ParamVector& theta,
                                                         const PointBatch& points) const = 0;

  /// Spatial Laplacian of every gradient component (p x n), i.e. Delta_x (d u_hat / d theta_i).
  virtual Eigen::MatrixXd laplacian_grad_theta(const ParamVector& theta,
                                               const PointBatch& points) const = 0;

  /// Whether u_hat(theta, .) lies in the span of its own gradient components for
  /// every theta (true for all built-in models; their weight layers are linear).
  virtual bool spans_self() const { return true; }

  /// Seeded parameter initialization placing the model sensibly inside the box.
  virtual ParamVector random_init(Rng& rng, const Box& box) const = 0;

  void check_theta(const ParamVector& theta) const {
    if (theta.size() != param_count())
      throw ConfigError("model '" + describe() + "': parameter vector has length " +
                        std::to_string(theta.size()) + ", expected " +
                        std::to_string(param_count()));
    if (!theta.allFinite())
      throw NumericalError("model '" + describe() + "': non-finite parameter entries");
  }
};

/// Sum of N Gaussian bumps u_hat(theta, x) = sum_i beta_i phi((x - alpha_i)/h_i),
/// phi(z) = exp(-|z|^2 / 2). Parameter layout: centers alpha_1..alpha_N (d each),
/// then weights beta_1..beta_N, then, only when the bandwidth is trainable, the
/// per-kernel bandwidths h_1..h_N. With fixed bandwidth the layout is exactly
/// [alpha; beta], the configuration used in the collapse experiment.
class GaussianMixtureModel : public Model {
 public:
  GaussianMixtureModel(int n_kernels, int dimension, double bandwidth,
                       bool trainable_bandwidth = false)
      : n_(n_kernels), d_(dimension), h_(bandwidth), trainable_h_(trainable_bandwidth) {
    if (n_ < 1) throw ConfigError("gaussian mixture: need at least one kernel");
    if (d_ < 1) throw ConfigError("gaussian mixture: dimension must be positive");
    if (h_ <= 0.0) throw ConfigError("gaussian mixture: bandwidth must be positive");
  }

  int kernel_count() const { return n_; }
  double bandwidth() const { return h_; }
  bool trainable_bandwidth() const { return trainable_h_; }

  int param_count() const override { return n_ * d_ + n_ + (trainable_h_ ? n_ : 0); }
  int dimension() const override { return d_; }
  std::string describe() const override {
    return "gaussian-mixture(N=" + std::to_string(n_) + ", d=" + std::to_string(d_) + ")";
  }

  int alpha_index(int i, int k) const { return i * d_ + k; }
  int beta_index(int i) const { return n_ * d_ + i; }
  int bandwidth_index(int i) const { return n_ * d_ + n_ + i; }

  double kernel_bandwidth(const ParamVector& theta, int i) const {
    return trainable_h_ ? theta[bandwidth_index(i)] : h_;
  }

  Eigen::VectorXd eval(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      for (int q = 0; q < n; ++q) out[q] += beta * kernel_value(theta, i, h, points, q);
    }
    return out;
  }

  Eigen::MatrixXd grad_theta(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(param_count(), n);
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      const double h2 = h * h;
      for (int q = 0; q < n; ++q) {
        double s = 0.0;
        const double e = kernel_value_s(theta, i, h, points, q, s);
        for (int k = 0; k < d_; ++k) {
          const double r = points(k, q) - theta[alpha_index(i, k)];
          g(alpha_index(i, k), q) = beta * e * r / h2;
        }
        g(beta_index(i), q) = e;
        if (trainable_h_) g(bandwidth_index(i), q) = beta * e * s / (h2 * h);
      }
    }
    return g;
  }

  Eigen::MatrixXd grad_x(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d_, n);
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      const double h2 = h * h;
      for (int q = 0; q < n; ++q) {
        const double e = kernel_value(theta, i, h, points, q);
        for (int k = 0; k < d_; ++k) {
          const double r = points(k, q) - theta[alpha_index(i, k)];
          g(k, q) -= beta * e * r / h2;
        }
      }
    }
    return g;
  }

  Eigen::VectorXd laplacian(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      const double h2 = h * h;
      for (int q = 0; q < n; ++q) {
        double s = 0.0;
        const double e = kernel_value_s(theta, i, h, points, q, s);
        out[q] += beta * e * (s / (h2 * h2) - d_ / h2);
      }
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> grad_x_grad_theta(const ParamVector& theta,
                                                 const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    std::vector<Eigen::MatrixXd> out(d_, Eigen::MatrixXd::Zero(param_count(), n));
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      const double h2 = h * h;
      for (int q = 0; q < n; ++q) {
        double s = 0.0;
        const double e = kernel_value_s(theta, i, h, points, q, s);
        for (int k = 0; k < d_; ++k) {
          const double rk = points(k, q) - theta[alpha_index(i, k)];
          for (int j = 0; j < d_; ++j) {
            const double rj = points(j, q) - theta[alpha_index(i, j)];
            const double delta = (j == k) ? 1.0 : 0.0;
            out[k](alpha_index(i, j), q) = beta * e * (delta / h2 - rj * rk / (h2 * h2));
          }
          out[k](beta_index(i), q) = -e * rk / h2;
          if (trainable_h_)
            out[k](bandwidth_index(i), q) = beta * e * rk * (2.0 / (h2 * h) - s / (h2 * h2 * h));
        }
      }
    }
    return out;
  }

  Eigen::MatrixXd laplacian_grad_theta(const ParamVector& theta,
                                       const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_count(), n);
    for (int i = 0; i < n_; ++i) {
      const double beta = theta[beta_index(i)];
      const double h = kernel_bandwidth(theta, i);
      const double h2 = h * h;
      const double h4 = h2 * h2;
      for (int q = 0; q < n; ++q) {
        double s = 0.0;
        const double e = kernel_value_s(theta, i, h, points, q, s);
        for (int j = 0; j < d_; ++j) {
          const double rj = points(j, q) - theta[alpha_index(i, j)];
          out(alpha_index(i, j), q) = beta * e * (rj / h2) * (s / h4 - (d_ + 2.0) / h2);
        }
        out(beta_index(i), q) = e * (s / h4 - d_ / h2);
        if (trainable_h_)
          out(bandwidth_index(i), q) =
              beta * e * (s * s / h4 - (d_ + 4.0) * s / h2 + 2.0 * d_) / (h2 * h);
      }
    }
    return out;
  }

  ParamVector random_init(Rng& rng, const Box& box) const override {
    ParamVector theta(param_count());
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < d_; ++k) {
        const double margin = 0.15 * (box.hi[k] - box.lo[k]);
        theta[alpha_index(i, k)] = rng.uniform(box.lo[k] + margin, box.hi[k] - margin);
      }
      theta[beta_index(i)] = 0.5 * rng.normal();
      if (trainable_h_) theta[bandwidth_index(i)] = h_ * (0.75 + 0.5 * rng.uniform());
    }
    return theta;
  }

 private:
  double kernel_value(const ParamVector& theta, int i, double h, const PointBatch& points,
                      int q) const {
    double s = 0.0;
    return kernel_value_s(theta, i, h, points, q, s);
  }

  // Returns exp(-|x - alpha_i|^2 / (2 h^2)) and writes |x - alpha_i|^2 into s.
  double kernel_value_s(const ParamVector& theta, int i, double h, const PointBatch& points,
                        int q, double& s) const {
    s = 0.0;
    for (int k = 0; k < d_; ++k) {
      const double r = points(k, q) - theta[alpha_index(i, k)];
      s += r * r;
    }
    return std::exp(-0.5 * s / (h * h));
  }

  int n_;
  int d_;
  double h_;
  bool trainable_h_;
};

/// One-hidden-layer tanh network with a linear last layer:
///   u_hat(theta, x) = sum_i w_i tanh(a_i . x + b_i) + c.
/// Parameter layout: inner weights a_1..a_N (d each), inner biases b_1..b_N,
/// then outer weights w_1..w_N and the outer bias c. The linear last layer
/// makes u_hat a combination of its own gradient components.
class ShallowNetworkModel : public Model {
 public:
  ShallowNetworkModel(int n_units, int dimension) : n_(n_units), d_(dimension) {
    if (n_ < 1) throw ConfigError("shallow network: need at least one unit");
    if (d_ < 1) throw ConfigError("shallow network: dimension must be positive");
  }

  int unit_count() const { return n_; }
  int param_count() const override { return n_ * d_ + n_ + n_ + 1; }
  int dimension() const override { return d_; }
  std::string describe() const override {
    return "shallow-network(N=" + std::to_string(n_) + ", d=" + std::to_string(d_) + ")";
  }

  int a_index(int i, int k) const { return i * d_ + k; }
  int b_index(int i) const { return n_ * d_ + i; }
  int w_index(int i) const { return n_ * d_ + n_ + i; }
  int c_index() const { return n_ * d_ + 2 * n_; }

  Eigen::VectorXd eval(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, theta[c_index()]);
    for (int i = 0; i < n_; ++i)
      for (int q = 0; q < n; ++q) out[q] += theta[w_index(i)] * std::tanh(pre_activation(theta, i, points, q));
    return out;
  }

  Eigen::MatrixXd grad_theta(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(param_count(), n);
    for (int i = 0; i < n_; ++i) {
      const double w = theta[w_index(i)];
      for (int q = 0; q < n; ++q) {
        const double t = std::tanh(pre_activation(theta, i, points, q));
        const double dt = 1.0 - t * t;
        for (int k = 0; k < d_; ++k) g(a_index(i, k), q) = w * dt * points(k, q);
        g(b_index(i), q) = w * dt;
        g(w_index(i), q) = t;
      }
    }
    g.row(c_index()).setOnes();
    return g;
  }

  Eigen::MatrixXd grad_x(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d_, n);
    for (int i = 0; i < n_; ++i) {
      const double w = theta[w_index(i)];
      for (int q = 0; q < n; ++q) {
        const double t = std::tanh(pre_activation(theta, i, points, q));
        const double dt = 1.0 - t * t;
        for (int k = 0; k < d_; ++k) g(k, q) += w * dt * theta[a_index(i, k)];
      }
    }
    return g;
  }

  Eigen::VectorXd laplacian(const ParamVector& theta, const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n_; ++i) {
      const double w = theta[w_index(i)];
      double a2 = 0.0;
      for (int k = 0; k < d_; ++k) a2 += theta[a_index(i, k)] * theta[a_index(i, k)];
      for (int q = 0; q < n; ++q) {
        const double t = std::tanh(pre_activation(theta, i, points, q));
        const double ddt = -2.0 * t * (1.0 - t * t);
        out[q] += w * ddt * a2;
      }
    }
    return out;
  }

  std::vector<Eigen::MatrixXd> grad_x_grad_theta(const ParamVector& theta,
                                                 const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    std::vector<Eigen::MatrixXd> out(d_, Eigen::MatrixXd::Zero(param_count(), n));
    for (int i = 0; i < n_; ++i) {
      const double w = theta[w_index(i)];
      for (int q = 0; q < n; ++q) {
        const double t = std::tanh(pre_activation(theta, i, points, q));
        const double dt = 1.0 - t * t;
        const double ddt = -2.0 * t * dt;
        for (int k = 0; k < d_; ++k) {
          const double ak = theta[a_index(i, k)];
          for (int j = 0; j < d_; ++j) {
            const double delta = (j == k) ? 1.0 : 0.0;
            out[k](a_index(i, j), q) = w * (ddt * ak * points(j, q) + dt * delta);
          }
          out[k](b_index(i), q) = w * ddt * ak;
          out[k](w_index(i), q) = dt * ak;
        }
      }
    }
    return out;
  }

  Eigen::MatrixXd laplacian_grad_theta(const ParamVector& theta,
                                       const PointBatch& points) const override {
    check_theta(theta);
    const int n = static_cast<int>(points.cols());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_count(), n);
    for (int i = 0; i < n_; ++i) {
      const double w = theta[w_index(i)];
      double a2 = 0.0;
      for (int k = 0; k < d_; ++k) a2 += theta[a_index(i, k)] * theta[a_index(i, k)];
      for (int q = 0; q < n; ++q) {
        const double t = std::tanh(pre_activation(theta, i, points, q));
        const double dt = 1.0 - t * t;
        const double ddt = -2.0 * t * dt;
        const double dddt = -2.0 * dt * dt + 4.0 * t * t * dt;  // tanh'''
        for (int j = 0; j < d_; ++j)
          out(a_index(i, j), q) =
              w * (dddt * a2 * points(j, q) + 2.0 * ddt * theta[a_index(i, j)]);
        out(b_index(i), q) = w * dddt * a2;
        out(w_index(i), q) = ddt * a2;
      }
    }
    return out;
  }

  ParamVector random_init(Rng& rng, const Box& box) const override {
    ParamVector theta(param_count());
    for (int i = 0; i < n_; ++i) {
      for (int k = 0; k < d_; ++k) {
        const double width = box.hi[k] - box.lo[k];
        theta[a_index(i, k)] = rng.normal() * 3.0 / width;
      }
      theta[b_index(i)] = rng.normal();
      theta[w_index(i)] = 0.5 * rng.normal();
    }
    theta[c_index()] = 0.1 * rng.normal();
    return theta;
  }

 private:
  double pre_activation(const ParamVector& theta, int i, const PointBatch& points, int q) const {
    double z = theta[b_index(i)];
    for (int k = 0; k < d_; ++k) z += theta[a_index(i, k)] * points(k, q);
    return z;
  }

  int n_;
  int d_;
};

/// Smooth multiplicative mask enforcing homogeneous Dirichlet conditions on a
/// box: m(x) = prod_k sin(pi (x_k - lo_k)/(hi_k - lo_k)), which vanishes on the
/// boundary exactly and satisfies Delta m = -(sum_k (pi/(hi_k-lo_k))^2) m.
struct BoundaryMask {
  enum class Kind { none, homogeneous_dirichlet };
  Kind kind = Kind::none;
  Box domain;

  double value(const PointBatch& points, int q) const {
    double m = 1.0;
    for (int k = 0; k < domain.dimension(); ++k)
      m *= std::sin(pi() * (points(k, q) - domain.lo[k]) / (domain.hi[k] - domain.lo[k]));
    return m;
  }

  Eigen::VectorXd gradient(const PointBatch& points, int q) const {
    const int d = domain.dimension();
    Eigen::VectorXd g(d);
    for (int k = 0; k < d; ++k) {
      double v = 1.0;
      for (int j = 0; j < d; ++j) {
        const double om = pi() / (domain.hi[j] - domain.lo[j]);
        const double arg = om * (points(j, q) - domain.lo[j]);
        v *= (j == k) ? om * std::cos(arg) : std::sin(arg);
      }
      g[k] = v;
    }
    return g;
  }

  double laplacian_factor() const {
    double s = 0.0;
    for (int k = 0; k < domain.dimension(); ++k) {
      const double om = pi() / (domain.hi[k] - domain.lo[k]);
      s += om * om;
    }
    return -s;
  }

  static constexpr double pi() { return 3.14159265358979323846264338327950288; }
};

/// Wraps a model with the Dirichlet mask: u_tilde = m(x) u_hat(theta, x).
class MaskedModel : public Model {
 public:
  MaskedModel(std::shared_ptr<const Model> inner, BoundaryMask mask)
      : inner_(std::move(inner)), mask_(std::move(mask)) {
    if (mask_.kind != BoundaryMask::Kind::homogeneous_dirichlet)
      throw ConfigError("masked model: mask kind must be homogeneous-dirichlet");
    if (mask_.domain.dimension() != inner_->dimension())
      throw ConfigError("masked model: mask dimension does not match the model");
  }

  const Model& inner() const { return *inner_; }
  const BoundaryMask& mask() const { return mask_; }

  int param_count() const override { return inner_->param_count(); }
  int dimension() const override { return inner_->dimension(); }
  std::string describe() const override { return "dirichlet-masked " + inner_->describe(); }
  bool spans_self() const override { return inner_->spans_self(); }

  Eigen::VectorXd eval(const ParamVector& theta, const PointBatch& points) const override {
    Eigen::VectorXd u = inner_->eval(theta, points);
    for (int q = 0; q < u.size(); ++q) u[q] *= mask_.value(points, q);
    return u;
  }

  Eigen::MatrixXd grad_theta(const ParamVector& theta, const PointBatch& points) const override {
    Eigen::MatrixXd g = inner_->grad_theta(theta, points);
    for (int q = 0; q < g.cols(); ++q) g.col(q) *= mask_.value(points, q);
    return g;
  }

  Eigen::MatrixXd grad_x(const ParamVector& theta, const PointBatch& points) const override {
    Eigen::MatrixXd g = inner_->grad_x(theta, points);
    const Eigen::VectorXd u = inner_->eval(theta, points);
    for (int q = 0; q < g.cols(); ++q) {
      const double m = mask_.value(points, q);
      const Eigen::VectorXd dm = mask_.gradient(points, q);
      g.col(q) = m * g.col(q) + u[q] * dm;
    }
    return g;
  }

  Eigen::VectorXd laplacian(const ParamVector& theta, const PointBatch& points) const override {
    const Eigen::VectorXd u = inner_->eval(theta, points);
    const Eigen::MatrixXd gx = inner_->grad_x(theta, points);
    Eigen::VectorXd lap = inner_->laplacian(theta, points);
    const double lf = mask_.laplacian_factor();
    for (int q = 0; q < lap.size(); ++q) {
      const double m = mask_.value(points, q);
      const Eigen::VectorXd dm = mask_.gradient(points, q);
      lap[q] = lf * m * u[q] + 2.0 * dm.dot(gx.col(q)) + m * lap[q];
    }
    return lap;
  }

  std::vector<Eigen::MatrixXd> grad_x_grad_theta(const ParamVector& theta,
                                                 const PointBatch& points) const override {
    std::vector<Eigen::MatrixXd> mixed = inner_->grad_x_grad_theta(theta, points);
    const Eigen::MatrixXd gt = inner_->grad_theta(theta, points);
    for (int q = 0; q < gt.cols(); ++q) {
      const double m = mask_.value(points, q);
      const Eigen::VectorXd dm = mask_.gradient(points, q);
      for (int k = 0; k < dimension(); ++k)
        mixed[k].col(q) = m * mixed[k].col(q) + dm[k] * gt.col(q);
    }
    return mixed;
  }

  Eigen::MatrixXd laplacian_grad_theta(const ParamVector& theta,
                                       const PointBatch& points) const override {
    const Eigen::MatrixXd gt = inner_->grad_theta(theta, points);
    const std::vector<Eigen::MatrixXd> mixed = inner_->grad_x_grad_theta(theta, points);
    Eigen::MatrixXd lap = inner_->laplacian_grad_theta(theta, points);
    const double lf = mask_.laplacian_factor();
    for (int q = 0; q < gt.cols(); ++q) {
      const double m = mask_.value(points, q);
      const Eigen::VectorXd dm = mask_.gradient(points, q);
      Eigen::VectorXd cross = Eigen::VectorXd::Zero(gt.rows());
      for (int k = 0; k < dimension(); ++k) cross += dm[k] * mixed[k].col(q);
      lap.col(q) = lf * m * gt.col(q) + 2.0 * cross + m * lap.col(q);
    }
    return lap;
  }

  ParamVector random_init(Rng& rng, const Box& box) const override {
    return inner_->random_init(rng, box);
  }

 private:
  std::shared_ptr<const Model> inner_;
  BoundaryMask mask_;
};

}  // namespace seqpde
