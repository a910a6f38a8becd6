#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lls {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Malformed or out-of-contract input (files, codes, shapes). CLI exit code 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (rank collapse, non-convergence, infeasibility). CLI exit code 1.
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collects non-fatal diagnostics (renormalizations, QP fallbacks, clips)
/// emitted by pipeline stages. Merged into the run manifest, deduplicated.
class Warnings {
 public:
  void add(std::string message) { messages_.push_back(std::move(message)); }
  void merge(const Warnings& other) {
    messages_.insert(messages_.end(), other.messages_.begin(), other.messages_.end());
  }
  const std::vector<std::string>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }

 private:
  std::vector<std::string> messages_;
};

/// Seeded generator with fixed-algorithm draws so outputs are byte-identical
/// across platforms (std:: distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // xorshift* — small, fast, reproducible
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

  /// Index drawn from a (not necessarily normalized) nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t state_;
};

/// Inverse standard normal CDF, |error| < 1e-13 after one Halley refinement.
double normal_quantile(double p);

/// Gauss-Legendre nodes/weights on [0, 1]; exact for polynomials of degree 2n-1.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace lls
