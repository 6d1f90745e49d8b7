#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "seqpde/common.hpp"

namespace seqpde {

/// Quadrature rule realizing the computable inner product <f,g>_M = sum_q w_q f(x_q) g(x_q)
/// on an axis-aligned box. Deterministic rules reproduce the box volume exactly.
struct QuadratureRule {
  enum class Kind { gauss_legendre, trapezoid, monte_carlo };

  Kind kind = Kind::gauss_legendre;
  Box domain;
  PointBatch nodes;         // d x n
  Eigen::VectorXd weights;  // n, all positive

  int node_count() const { return static_cast<int>(weights.size()); }
  int dimension() const { return static_cast<int>(nodes.rows()); }
};

namespace detail {

/// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on the Legendre
/// recurrence. Deterministic and accurate to machine precision.
inline void gauss_legendre_reference(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const double pi = 3.14159265358979323846264338327950288;
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

inline void tensorize(const Box& box, const std::vector<std::vector<double>>& xs,
                      const std::vector<std::vector<double>>& ws, QuadratureRule& rule) {
  const int d = box.dimension();
  int n = 1;
  for (int k = 0; k < d; ++k) n *= static_cast<int>(xs[k].size());
  rule.nodes.resize(d, n);
  rule.weights.resize(n);
  std::vector<int> idx(d, 0);
  for (int q = 0; q < n; ++q) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      rule.nodes(k, q) = xs[k][idx[k]];
      w *= ws[k][idx[k]];
    }
    rule.weights[q] = w;
    for (int k = 0; k < d; ++k) {
      if (++idx[k] < static_cast<int>(xs[k].size())) break;
      idx[k] = 0;
    }
  }
}

}  // namespace detail

/// Tensor Gauss-Legendre rule with n_per_dim nodes in each dimension.
inline QuadratureRule gauss_legendre_rule(const Box& box, int n_per_dim) {
  if (n_per_dim < 1) throw ConfigError("quadrature: nodes per dimension must be >= 1");
  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::gauss_legendre;
  rule.domain = box;
  const int d = box.dimension();
  std::vector<double> xr, wr;
  detail::gauss_legendre_reference(n_per_dim, xr, wr);
  std::vector<std::vector<double>> xs(d), ws(d);
  for (int k = 0; k < d; ++k) {
    const double a = box.lo[k], b = box.hi[k];
    xs[k].resize(n_per_dim);
    ws[k].resize(n_per_dim);
    for (int i = 0; i < n_per_dim; ++i) {
      xs[k][i] = 0.5 * (b - a) * xr[i] + 0.5 * (a + b);
      ws[k][i] = 0.5 * (b - a) * wr[i];
    }
  }
  detail::tensorize(box, xs, ws, rule);
  return rule;
}

/// Uniform composite trapezoid rule including the box boundary nodes.
inline QuadratureRule trapezoid_rule(const Box& box, int n_per_dim) {
  if (n_per_dim < 2) throw ConfigError("quadrature: trapezoid needs >= 2 nodes per dimension");
  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::trapezoid;
  rule.domain = box;
  const int d = box.dimension();
  std::vector<std::vector<double>> xs(d), ws(d);
  for (int k = 0; k < d; ++k) {
    const double a = box.lo[k], b = box.hi[k];
    const double h = (b - a) / (n_per_dim - 1);
    xs[k].resize(n_per_dim);
    ws[k].resize(n_per_dim);
    for (int i = 0; i < n_per_dim; ++i) {
      xs[k][i] = a + h * i;
      ws[k][i] = (i == 0 || i == n_per_dim - 1) ? 0.5 * h : h;
    }
  }
  detail::tensorize(box, xs, ws, rule);
  return rule;
}

/// Uniform Monte Carlo rule with equal weights |Omega|/n; deterministic for a fixed seed.
inline QuadratureRule monte_carlo_rule(const Box& box, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("quadrature: Monte Carlo node count must be >= 1");
  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::monte_carlo;
  rule.domain = box;
  const int d = box.dimension();
  Rng rng(seed);
  rule.nodes.resize(d, n);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < d; ++k) rule.nodes(k, q) = rng.uniform(box.lo[k], box.hi[k]);
  rule.weights = Eigen::VectorXd::Constant(n, box.volume() / n);
  return rule;
}

/// Discrete inner product sum_q w_q f_q g_q.
inline double inner(const QuadratureRule& rule, const Eigen::VectorXd& fvals,
                    const Eigen::VectorXd& gvals) {
  if (fvals.size() != rule.weights.size() || gvals.size() != rule.weights.size())
    throw ConfigError("inner: value vectors must be sized to the node count");
  return (rule.weights.array() * fvals.array() * gvals.array()).sum();
}

/// M-norm induced by the rule.
inline double norm_m(const QuadratureRule& rule, const Eigen::VectorXd& fvals) {
  return std::sqrt(std::max(0.0, inner(rule, fvals, fvals)));
}

/// Gram matrix P = <grad_theta u, grad_theta u>_M with its spectrum cached for
/// truncated pseudo-inverse solves and rank diagnostics.
struct GramMatrix {
  Eigen::MatrixXd entries;          // p x p symmetric positive semidefinite
  Eigen::VectorXd singular_values;  // descending
  Eigen::MatrixXd eigenvectors;     // columns match singular_values
  double tau = 1e-10;               // relative truncation threshold on the spectrum

  int size() const { return static_cast<int>(entries.rows()); }

  int effective_rank() const {
    if (singular_values.size() == 0) return 0;
    const double cut = tau * singular_values[0];
    int r = 0;
    for (int i = 0; i < singular_values.size(); ++i)
      if (singular_values[i] >= cut && singular_values[i] > 0.0) ++r;
    return r;
  }
};

/// Row-sample matrix of the gradient components at the quadrature nodes,
/// scaled by sqrt(w_q) column-wise; the 2-norm of (J^T eta - sqrt(w) f) then
/// equals the M-norm of the function residual.
inline Eigen::MatrixXd weighted_sample_matrix(const Eigen::MatrixXd& rows_at_nodes,
                                              const QuadratureRule& rule) {
  return rows_at_nodes * rule.weights.array().sqrt().matrix().asDiagonal();
}

inline Eigen::VectorXd weighted_samples(const Eigen::VectorXd& vals_at_nodes,
                                        const QuadratureRule& rule) {
  return (rule.weights.array().sqrt() * vals_at_nodes.array()).matrix();
}

/// Assembles P(theta)_{ij} = <grad_i u, grad_j u>_M from gradient samples (p x n).
inline GramMatrix assemble_gram_from_samples(const Eigen::MatrixXd& grad_samples,
                                             const QuadratureRule& rule, double tau) {
  if (grad_samples.cols() != rule.weights.size())
    throw ConfigError("assemble_gram: gradient samples must be sized to the node count");
  if (!all_finite(grad_samples)) {
    for (int i = 0; i < grad_samples.rows(); ++i)
      if (!grad_samples.row(i).allFinite())
        throw NumericalError("assemble_gram: non-finite gradient component " + std::to_string(i));
  }
  GramMatrix gram;
  gram.tau = tau;
  gram.entries = grad_samples * rule.weights.asDiagonal() * grad_samples.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram.entries);
  const int p = gram.size();
  gram.singular_values.resize(p);
  gram.eigenvectors.resize(p, p);
  // SelfAdjointEigenSolver returns ascending eigenvalues; store descending.
  for (int i = 0; i < p; ++i) {
    gram.singular_values[i] = std::max(0.0, eig.eigenvalues()[p - 1 - i]);
    gram.eigenvectors.col(i) = eig.eigenvectors().col(p - 1 - i);
  }
  return gram;
}

/// Moment vector F_i = <grad_i u, f>_M from gradient samples and rhs samples.
inline Eigen::VectorXd assemble_moment_from_samples(const Eigen::MatrixXd& grad_samples,
                                                    const Eigen::VectorXd& rhs_samples,
                                                    const QuadratureRule& rule) {
  if (grad_samples.cols() != rule.weights.size() || rhs_samples.size() != rule.weights.size())
    throw ConfigError("assemble_moment: samples must be sized to the node count");
  return grad_samples * (rule.weights.array() * rhs_samples.array()).matrix();
}

/// Minimal-Euclidean-norm solution of P eta = b through the truncated spectral
/// pseudo-inverse; components with sigma < tau * sigma_max are discarded.
struct MinNormSolution {
  Eigen::VectorXd x;
  int effective_rank = 0;
};

inline MinNormSolution solve_min_norm(const GramMatrix& gram, const Eigen::VectorXd& b,
                                      double tau) {
  if (!b.allFinite()) throw NumericalError("solve_min_norm: non-finite right-hand side");
  if (b.size() != gram.size()) throw ConfigError("solve_min_norm: size mismatch");
  MinNormSolution sol;
  const int p = gram.size();
  sol.x = Eigen::VectorXd::Zero(p);
  if (p == 0) return sol;
  const double cut = tau * gram.singular_values[0];
  for (int i = 0; i < p; ++i) {
    const double s = gram.singular_values[i];
    if (s < cut || s <= 0.0) continue;
    sol.x += (gram.eigenvectors.col(i).dot(b) / s) * gram.eigenvectors.col(i);
    ++sol.effective_rank;
  }
  return sol;
}

/// Result of a truncated-SVD least-squares solve on the weighted sample matrix.
/// singular_values are those of the Gram matrix (squares of the sample-matrix
/// spectrum) so rank reporting matches solve_min_norm at the same tau.
struct LstsqSolution {
  Eigen::VectorXd x;
  double residual_norm = 0.0;     // M-norm of the unexplained part
  double projection_norm = 0.0;   // M-norm of the explained part
  int effective_rank = 0;
  Eigen::VectorXd singular_values;  // Gram spectrum, descending
};

/// Minimal-norm solution of min_x || J_w^T x - r_w ||_2 where J_w is the
/// sqrt(w)-scaled gradient sample matrix (p x n) and r_w the scaled target.
/// tau is the relative truncation threshold on the Gram spectrum; the matching
/// cut on the sample-matrix spectrum is sqrt(tau).
inline LstsqSolution solve_least_squares(const Eigen::MatrixXd& weighted_grad_samples,
                                         const Eigen::VectorXd& weighted_target, double tau) {
  if (!weighted_target.allFinite())
    throw NumericalError("solve_least_squares: non-finite target");
  if (!all_finite(weighted_grad_samples))
    throw NumericalError("solve_least_squares: non-finite sample matrix");
  const auto A = weighted_grad_samples.transpose();  // n x p
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  LstsqSolution sol;
  const int p = static_cast<int>(A.cols());
  sol.x = Eigen::VectorXd::Zero(p);
  sol.singular_values = sv.array().square();
  if (sv.size() == 0) {
    sol.residual_norm = weighted_target.norm();
    return sol;
  }
  const double cut = std::sqrt(std::max(0.0, tau)) * sv[0];
  for (int i = 0; i < sv.size(); ++i) {
    if (sv[i] < cut || sv[i] <= 0.0) continue;
    sol.x += (svd.matrixU().col(i).dot(weighted_target) / sv[i]) * svd.matrixV().col(i);
    ++sol.effective_rank;
  }
  const Eigen::VectorXd fitted = A * sol.x;
  sol.residual_norm = (fitted - weighted_target).norm();
  sol.projection_norm = fitted.norm();
  return sol;
}

}  // namespace seqpde
