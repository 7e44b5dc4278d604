#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sevnet/error.hpp"

namespace sevnet {

/// Dense row-major matrix shared by every model family.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexList = std::vector<std::size_t>;

/// Deterministic generator: std::mt19937_64 (fully specified by the C++
/// standard) with hand-written conversions to uniform reals, bounded
/// integers and normals, so a seed yields the same stream on every platform.
/// The std distribution classes are implementation-defined and not used.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

namespace linalg {

/// Least-squares solve of A X ~= B (Frobenius norm). Uses column-pivoted QR;
/// if A is numerically rank deficient, retries the normal equations with a
/// ridge of 1e-10 * trace(A^T A) / n before giving up with SingularSystem.
Matrix solve_least_squares(const Matrix& a, const Matrix& b);

/// Solves (J^T J + mu I) delta = J^T e. The system is SPD for mu > 0.
Vector solve_damped_normal(const Matrix& j, const Vector& e, double mu);

/// Fisher-Yates shuffle of 0..n-1 driven by `rng`.
IndexList rand_permutation(SeededRng& rng, std::size_t n);

}  // namespace linalg
}  // namespace sevnet
