#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "sevnet/dataset.hpp"
#include "sevnet/linalg.hpp"

namespace sevnet::mlp {

enum class TransferFn { HyperbolicTangentSigmoid, LogSigmoid, Linear };

inline constexpr TransferFn kAllTransferFns[] = {
    TransferFn::HyperbolicTangentSigmoid, TransferFn::LogSigmoid, TransferFn::Linear};

/// Toolbox-style names: "tansig", "logsig", "purelin".
std::string_view alias(TransferFn f);
std::optional<TransferFn> parse_transfer(std::string_view name);

double transfer(TransferFn f, double n);
/// Derivative with respect to the pre-activation `n`.
double transfer_deriv(TransferFn f, double n);

struct Shape {
  std::size_t n_in = data::kNumFeatures;
  std::size_t n_hidden = 8;
  std::size_t n_out = data::kNumClasses;
};

/// One-hidden-layer perceptron: y = f_out(W2 f_hidden(W1 x + b1) + b2).
///
/// Flattened parameter order (used by gradients, Jacobians and optimizers):
/// W1 row-major, b1, W2 row-major, b2.
struct MlpNetwork {
  Matrix w1;  // n_hidden x n_in
  Vector b1;
  Matrix w2;  // n_out x n_hidden
  Vector b2;
  TransferFn f_hidden = TransferFn::LogSigmoid;
  TransferFn f_out = TransferFn::Linear;

  std::size_t n_in() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t n_hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t n_out() const { return static_cast<std::size_t>(w2.rows()); }
  std::size_t param_count() const;

  Vector params() const;
  void set_params(const Vector& theta);

  bool operator==(const MlpNetwork&) const = default;
};

/// Zero-initialized network of the given shape.
MlpNetwork make_network(const Shape& shape, TransferFn f_hidden, TransferFn f_out);

/// Weights and biases uniform in [-0.5, 0.5] / sqrt(fan_in) of their layer.
MlpNetwork init_network(const Shape& shape, TransferFn f_hidden, TransferFn f_out, SeededRng& rng);

struct ForwardResult {
  Vector output;
  Vector hidden;
};

ForwardResult forward(const MlpNetwork& net, const Vector& x);
/// Row-wise forward pass over an N x n_in input matrix.
Matrix predict_batch(const MlpNetwork& net, const Matrix& inputs);
/// Mean over samples and output units of (target - output)^2.
double batch_mse(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets);

/// Gradient of batch_mse in flattened parameter order.
Vector backprop_gradient(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets);

/// Residuals e = target - output, sample-major (row i*n_out + k), and
/// J = de/dtheta. The MSE gradient equals 2 J^T e / (samples * outputs).
struct JacobianResult {
  Matrix jacobian;
  Vector errors;
};

JacobianResult jacobian(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets);

enum class TrainAlgorithm {
  LevenbergMarquardt,
  QuasiNewtonBfgs,
  ResilientBackprop,
  GdAdaptiveLrMomentum,
  ScaledConjugateGradient,
  ConjugateGradientPowellBeale,
  OneStepSecant,
  ConjugateGradientFletcherReeves,
  GdMomentum,
  GradientDescent,
};

inline constexpr TrainAlgorithm kAllAlgorithms[] = {
    TrainAlgorithm::LevenbergMarquardt,       TrainAlgorithm::QuasiNewtonBfgs,
    TrainAlgorithm::ResilientBackprop,        TrainAlgorithm::GdAdaptiveLrMomentum,
    TrainAlgorithm::ScaledConjugateGradient,  TrainAlgorithm::ConjugateGradientPowellBeale,
    TrainAlgorithm::OneStepSecant,            TrainAlgorithm::ConjugateGradientFletcherReeves,
    TrainAlgorithm::GdMomentum,               TrainAlgorithm::GradientDescent};

/// "trainlm", "trainbfg", ...
std::string_view alias(TrainAlgorithm a);
/// Accepts the toolbox alias or its short form ("lm", "bfg", "rp", "gdx", "scg", ...).
std::optional<TrainAlgorithm> parse_algorithm(std::string_view name);

struct TrainConfig {
  TrainAlgorithm algorithm = TrainAlgorithm::LevenbergMarquardt;
  std::size_t max_epochs = 1000;
  double goal_mse = 0.0;
  std::size_t patience = 6;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double lm_mu0 = 0.001;
  double lm_mu_inc = 10.0;
  double lm_mu_dec = 0.1;
  double lm_mu_max = 1e10;
  std::uint64_t rng_seed = 0;
};

/// Throws ConfigError if any field is out of range.
void validate(const TrainConfig& cfg);

enum class StopReason {
  GoalMet,
  MaxEpochs,
  ValidationStop,
  MuOverflow,
  /// The optimizer could not produce a new iterate (line search exhausted,
  /// vanishing gradient, or scaled-CG damping overflow).
  NoProgress,
};

std::string_view to_string(StopReason r);

struct EpochStats {
  double train_mse = 0.0;
  double val_mse = 0.0;
  double test_mse = 0.0;
  double gradient_norm = 0.0;

  bool operator==(const EpochStats&) const = default;
};

/// Entry 0 is the initial network; entry k is after the k-th epoch.
struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  StopReason stop_reason = StopReason::MaxEpochs;

  bool operator==(const TrainRecord&) const = default;
};

struct TrainResult {
  MlpNetwork network;
  TrainRecord record;
};

/// Overrides the validation MSE seen by early stopping (test hook).
using ValidationHook = std::function<double(const MlpNetwork&, std::size_t epoch)>;

/// Full-batch training on `split.train` with early stopping on `split.val`.
/// The returned network always carries the parameters of `record.best_epoch`.
/// Divergence throws NonFiniteLoss.
TrainResult train(const MlpNetwork& initial, const data::Dataset& data,
                  const data::SplitIndices& split, const TrainConfig& cfg,
                  const ValidationHook& validation_hook = {});

/// Argmax over the three outputs; ties go to the higher severity.
data::Severity predict_class(const Vector& outputs);
data::Severity predict_class(const MlpNetwork& net, const Vector& x);

}  // namespace sevnet::mlp
