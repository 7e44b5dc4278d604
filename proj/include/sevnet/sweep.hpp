#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sevnet/dataset.hpp"
#include "sevnet/metrics.hpp"
#include "sevnet/mlp.hpp"
#include "sevnet/rbfnn.hpp"

namespace sevnet::sweep {

enum class Family {
  MlpHiddenNeurons,
  MlpDivideFn,
  MlpTransferFn,
  MlpLearningStage,
  MlpTrainAlgorithm,
  RbfSpread,
  GrnnSigma,
};

/// "mlp-hidden", "mlp-divide", "mlp-transfer", "mlp-learning", "mlp-algo", "rbf-spread", "grnn-sigma".
std::string_view cli_name(Family f);
std::optional<Family> parse_family(std::string_view name);
bool is_mlp(Family f);

/// Weight-learning rule of the toolbox. It only changes the momentum
/// constant handed to the optimizer: learngdm keeps it, learngd zeroes it.
enum class LearningFn { GdMomentum, Gd };

std::string_view alias(LearningFn l);

/// Everything needed to train one MLP apart from the seed.
struct MlpSetup {
  std::size_t hidden = 8;
  mlp::TransferFn f_hidden = mlp::TransferFn::LogSigmoid;
  mlp::TransferFn f_out = mlp::TransferFn::Linear;
  data::DivideFn divide = data::DivideFn::Random;
  LearningFn learning = LearningFn::GdMomentum;
  mlp::TrainConfig train;
};

/// Starting point of the hidden-neuron experiment: tansig/tansig, trainlm, dividerand.
MlpSetup initial_setup();

/// TrainConfig with the learning rule applied.
mlp::TrainConfig effective_config(const MlpSetup& setup);

/// Trains one network. `random_split` is used for dividerand; divideind
/// uses contiguous blocks of the same sizes. Features are normalized on the
/// chosen training partition unless `data` is already normalized.
mlp::TrainResult train_mlp(const MlpSetup& setup, const data::Dataset& data,
                           const data::SplitIndices& random_split, std::uint64_t seed);

/// The split train_mlp would use for `setup`.
data::SplitIndices split_for(const MlpSetup& setup, std::size_t n,
                             const data::SplitIndices& random_split);

struct SweepSpec {
  Family family = Family::MlpHiddenNeurons;
  std::vector<double> grid;
  MlpSetup mlp;
  rbf::RbfTrainConfig rbf;
  std::size_t repetitions = 7;
  std::uint64_t base_seed = 0;
  /// Worker threads; 0 means one per hardware thread.
  std::size_t jobs = 0;
};

/// Grid of the corresponding experiment: hidden 3..13, both divide rules,
/// the nine transfer pairs (index = 3 * hidden + output over tansig, logsig,
/// purelin), both learning rules, the ten algorithms, spread 0.1..2.0 and
/// sigma 0.1..1.0 in steps of 0.1.
std::vector<double> default_grid(Family f);

/// Human-readable name of a grid point ("8", "dividerand", "logsig/purelin", "trainlm", "0.2").
std::string grid_label(Family f, double value);

/// Copy of `setup` with the swept factor set to `value`.
MlpSetup apply_grid_point(MlpSetup setup, Family f, double value);

struct SweepRow {
  double grid_value = 0.0;
  std::string label;
  /// Hidden neurons (MLP), grown neurons (RBF), stored patterns (GRNN).
  std::size_t model_size = 0;
  double train_mse = 0.0;
  double best_val_mse = 0.0;
  /// Epoch of the best validation MSE (MLP); neuron count at best validation MSE (RBF); 0 for GRNN.
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  /// Set when every repetition failed (e.g. divergence).
  std::optional<std::string> error;
};

struct SweepResult {
  Family family = Family::MlpHiddenNeurons;
  std::vector<SweepRow> rows;
  std::optional<std::size_t> selected;
};

/// Lowest best_val_mse among rows without an error; ties go to the smaller
/// model, then the lower grid value.
std::optional<std::size_t> select_row(const std::vector<SweepRow>& rows);

/// One model per grid point and repetition (MLP families only; RBF and GRNN
/// are deterministic and run once). Repetition r uses seed base_seed + r at
/// every grid point, so rows differ only in the swept factor. Each row
/// reports its best repetition.
SweepResult run_sweep(const SweepSpec& spec, const data::Dataset& data,
                      const data::SplitIndices& split);

struct StagedSearchResult {
  MlpSetup winner;
  std::vector<SweepResult> stages;
};

inline constexpr Family kStageOrder[] = {Family::MlpHiddenNeurons, Family::MlpDivideFn,
                                         Family::MlpTransferFn, Family::MlpLearningStage,
                                         Family::MlpTrainAlgorithm};

/// Hidden neurons, divide rule, transfer functions, learning rule, training
/// algorithm, in that order; each stage starts from the previous winners.
StagedSearchResult staged_mlp_search(const data::Dataset& data, const data::SplitIndices& split,
                                     std::uint64_t base_seed, std::size_t repetitions = 7,
                                     std::size_t jobs = 0, const MlpSetup& start = initial_setup());

struct ComparisonConfig {
  MlpSetup mlp;
  std::uint64_t mlp_seed = 0;
  rbf::RbfTrainConfig rbf;
  double grnn_sigma = 0.1;
};

struct FamilyScores {
  std::string family;  // "MLP", "RBFNN", "GRNN"
  metrics::MetricsReport train;
  metrics::MetricsReport test;
  double train_seconds = 0.0;
};

/// Train/test RMSE, R, R^2 and MAE for each family on one split.
struct ComparisonReport {
  std::array<FamilyScores, 3> rows;
};

ComparisonReport compare_models(const data::Dataset& data, const data::SplitIndices& split,
                                const ComparisonConfig& cfg);

}  // namespace sevnet::sweep
