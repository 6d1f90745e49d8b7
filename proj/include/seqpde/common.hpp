#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace seqpde {

/// Parameter vector theta of a nonlinear parametrization, length p.
using ParamVector = Eigen::VectorXd;

/// Batch of spatial points, one column per point (d x n).
using PointBatch = Eigen::MatrixXd;

/// Axis-aligned box domain in R^d.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  int dimension() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < dimension(); ++k) v *= hi[k] - lo[k];
    return v;
  }

  static Box interval(double a, double b) {
    Box box;
    box.lo = Eigen::VectorXd::Constant(1, a);
    box.hi = Eigen::VectorXd::Constant(1, b);
    return box;
  }
};

/// Invalid or inconsistent configuration (bad field, dimension mismatch, missing id).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical operation produced non-finite values or an assembly failed.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// A time-stepping run blew up; the step index of the last valid state is kept.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int last_valid_step)
      : std::runtime_error(what), last_valid_step(last_valid_step) {}
  int last_valid_step;
};

inline bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

/// Deterministic random source. All randomness in the library flows through
/// this wrapper so that runs are bitwise reproducible across standard
/// libraries (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {
    for (int i = 0; i < 8; ++i) next_u64();
  }

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// FNV-1a 64-bit hash, used for config fingerprints and cache keys.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace seqpde
