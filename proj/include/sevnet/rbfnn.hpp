#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "sevnet/dataset.hpp"
#include "sevnet/linalg.hpp"

namespace sevnet::rbf {

/// Gaussian radial-basis network y = W phi(|x - c_k|) + b.
struct RbfNetwork {
  Matrix centers;  // K x n_in, each row a training input
  double spread = 1.0;
  double beta = 0.0;  // sqrt(ln 2) / spread
  Matrix w;           // n_out x K
  Vector b;

  std::size_t neurons() const { return static_cast<std::size_t>(centers.rows()); }

  bool operator==(const RbfNetwork&) const = default;
};

inline constexpr std::size_t kMaxNeuronsCeiling = 2000;

struct RbfTrainConfig {
  double goal_mse = 0.0;
  /// Defaults to the training-set size, capped at kMaxNeuronsCeiling.
  std::optional<std::size_t> max_neurons;
  double spread = 0.2;
  /// Progress callback granularity (neurons between calls).
  std::size_t neurons_between_records = 50;
};

struct GrowthStep {
  std::size_t neurons = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN when no validation rows were given
};

struct RbfTrainResult {
  RbfNetwork network;
  std::vector<GrowthStep> growth;
};

using ProgressFn = std::function<void(const GrowthStep&)>;

double spread_to_beta(double spread);

/// exp(-(distance * beta)^2); equals 0.5 at distance == spread.
double radbas(double distance, double spread);

/// Greedy growth: starting from a bias-only fit, repeatedly add as a center the
/// training input whose residual norm is largest (lowest row wins ties), then
/// re-solve the output layer by least squares. Stops at goal_mse, max_neurons,
/// or when no candidate adds an independent basis column.
///
/// The least-squares solve is kept incremental: the design-matrix columns are
/// orthonormalized by Gram-Schmidt (applied twice) and the output weights are
/// recovered from the triangular factor.
RbfTrainResult train_rbf(const data::Dataset& data, const IndexList& train_idx,
                         const IndexList& val_idx, const RbfTrainConfig& cfg,
                         const ProgressFn& progress = {});

Vector predict_rbf(const RbfNetwork& net, const Vector& x);
Matrix predict_rbf_batch(const RbfNetwork& net, const Matrix& inputs);

}  // namespace sevnet::rbf
