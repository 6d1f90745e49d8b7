#pragma once

// Independent oracles used across the test suites: finite-difference
// derivatives, brute-force quadrature assembly, and deterministic sample
// generators. Everything here deliberately avoids the library's assembly and
// solver paths so the tests cross-check two routes.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "seqpde/models.hpp"
#include "seqpde/quadrature.hpp"

namespace oracles {

using seqpde::Box;
using seqpde::Model;
using seqpde::ParamVector;
using seqpde::PointBatch;
using seqpde::QuadratureRule;

/// Central finite differences of eval in theta: rows d u / d theta_i.
inline Eigen::MatrixXd fd_grad_theta(const Model& model, const ParamVector& theta,
                                     const PointBatch& points, double h = 1e-5) {
  Eigen::MatrixXd g(model.param_count(), points.cols());
  for (int i = 0; i < model.param_count(); ++i) {
    ParamVector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    g.row(i) = ((model.eval(tp, points) - model.eval(tm, points)) / (2.0 * h)).transpose();
  }
  return g;
}

/// Central finite differences of eval in space: rows d u / d x_k.
inline Eigen::MatrixXd fd_grad_x(const Model& model, const ParamVector& theta,
                                 const PointBatch& points, double h = 1e-6) {
  Eigen::MatrixXd g(points.rows(), points.cols());
  for (int k = 0; k < points.rows(); ++k) {
    PointBatch xp = points, xm = points;
    xp.row(k).array() += h;
    xm.row(k).array() -= h;
    g.row(k) = ((model.eval(theta, xp) - model.eval(theta, xm)) / (2.0 * h)).transpose();
  }
  return g;
}

/// Five-point-stencil Laplacian: sum of per-dimension second differences.
inline Eigen::VectorXd fd_laplacian(const Model& model, const ParamVector& theta,
                                    const PointBatch& points, double h = 1e-4) {
  Eigen::VectorXd lap = Eigen::VectorXd::Zero(points.cols());
  const Eigen::VectorXd center = model.eval(theta, points);
  for (int k = 0; k < points.rows(); ++k) {
    PointBatch xp = points, xm = points;
    xp.row(k).array() += h;
    xm.row(k).array() -= h;
    lap += (model.eval(theta, xp) - 2.0 * center + model.eval(theta, xm)) / (h * h);
  }
  return lap;
}

/// Finite differences of grad_theta in space (mixed derivatives).
inline std::vector<Eigen::MatrixXd> fd_grad_x_grad_theta(const Model& model,
                                                         const ParamVector& theta,
                                                         const PointBatch& points,
                                                         double h = 1e-6) {
  std::vector<Eigen::MatrixXd> out;
  for (int k = 0; k < points.rows(); ++k) {
    PointBatch xp = points, xm = points;
    xp.row(k).array() += h;
    xm.row(k).array() -= h;
    out.push_back((model.grad_theta(theta, xp) - model.grad_theta(theta, xm)) / (2.0 * h));
  }
  return out;
}

/// Finite differences of the analytic Laplacian in theta.
inline Eigen::MatrixXd fd_laplacian_grad_theta(const Model& model, const ParamVector& theta,
                                               const PointBatch& points, double h = 1e-5) {
  Eigen::MatrixXd g(model.param_count(), points.cols());
  for (int i = 0; i < model.param_count(); ++i) {
    ParamVector tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    g.row(i) =
        ((model.laplacian(tp, points) - model.laplacian(tm, points)) / (2.0 * h)).transpose();
  }
  return g;
}

/// Naive triple loop over (i, j, q); the reference for the assembled Gram.
inline Eigen::MatrixXd brute_force_gram(const Model& model, const ParamVector& theta,
                                        const QuadratureRule& rule) {
  const Eigen::MatrixXd g = model.grad_theta(theta, rule.nodes);
  const int p = model.param_count();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      for (int q = 0; q < rule.node_count(); ++q)
        gram(i, j) += rule.weights[q] * g(i, q) * g(j, q);
  return gram;
}

inline Eigen::VectorXd brute_force_moment(const Model& model, const ParamVector& theta,
                                          const Eigen::VectorXd& rhs_vals,
                                          const QuadratureRule& rule) {
  const Eigen::MatrixXd g = model.grad_theta(theta, rule.nodes);
  const int p = model.param_count();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < p; ++i)
    for (int q = 0; q < rule.node_count(); ++q)
      f[i] += rule.weights[q] * g(i, q) * rhs_vals[q];
  return f;
}

/// Component of v orthogonal (in the rule's inner product) to every gradient
/// component, built by modified Gram-Schmidt against an orthonormalized span.
inline Eigen::VectorXd orthogonalize_against_tangent(const Model& model, const ParamVector& theta,
                                                     const QuadratureRule& rule,
                                                     const Eigen::VectorXd& v) {
  const Eigen::MatrixXd g = model.grad_theta(theta, rule.nodes);
  std::vector<Eigen::VectorXd> basis;
  for (int i = 0; i < g.rows(); ++i) {
    Eigen::VectorXd b = g.row(i).transpose();
    for (const auto& e : basis) b -= seqpde::inner(rule, e, b) * e;
    for (const auto& e : basis) b -= seqpde::inner(rule, e, b) * e;  // re-orthogonalize
    const double n = seqpde::norm_m(rule, b);
    if (n > 1e-12) basis.push_back(b / n);
  }
  Eigen::VectorXd r = v;
  for (const auto& e : basis) r -= seqpde::inner(rule, e, r) * e;
  for (const auto& e : basis) r -= seqpde::inner(rule, e, r) * e;
  return r;
}

/// Deterministic random points inside a box.
inline PointBatch random_points(seqpde::Rng& rng, const Box& box, int n, double margin = 0.0) {
  PointBatch x(box.dimension(), n);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < box.dimension(); ++k) {
      const double pad = margin * (box.hi[k] - box.lo[k]);
      x(k, q) = rng.uniform(box.lo[k] + pad, box.hi[k] - pad);
    }
  return x;
}

/// Well-scaled random parameters for either built-in model family.
inline ParamVector random_theta(seqpde::Rng& rng, const Model& model, const Box& box) {
  return model.random_init(rng, box);
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / (1.0 + std::abs(want));
}

}  // namespace oracles
