#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace condvar {

/// Explicit random state passed to every sampler. Fixed seed, fixed stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform();

  /// Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);

  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof, 1.0); }

  Eigen::VectorXd normal_vector(Eigen::Index n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Well-mixed child seed for stream `index` of `base` (splitmix64).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace condvar
