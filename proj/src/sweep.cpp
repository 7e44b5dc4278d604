#include "sevnet/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "sevnet/error.hpp"
#include "sevnet/grnn.hpp"
#include "sevnet/text.hpp"

namespace sevnet::sweep {

namespace {

constexpr std::string_view kFamilyNames[] = {"mlp-hidden", "mlp-divide",  "mlp-transfer",
                                             "mlp-learning", "mlp-algo", "rbf-spread",
                                             "grnn-sigma"};

std::size_t grid_index(double value, std::size_t count, Family f) {
  const double r = std::round(value);
  if (!(r >= 0.0) || r >= static_cast<double>(count) || r != value) {
    throw Error(ErrorCode::ConfigError, "grid value " + text::format_double(value) +
                                            " is not valid for " + std::string(cli_name(f)));
  }
  return static_cast<std::size_t>(r);
}

// (i + 1) / divisor keeps 0.3 as 0.3 instead of accumulating 0.1 steps.
std::vector<double> step_grid(double divisor, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = static_cast<double>(i + 1) / divisor;
  return g;
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

struct TaskOutcome {
  double train_mse = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t epoch = 0;
  std::size_t model_size = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::optional<std::string> error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double subset_mse(const Matrix& outputs, const data::Dataset& ds, const IndexList& rows) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sum += (ds.targets.row(static_cast<Eigen::Index>(rows[i])) -
            outputs.row(static_cast<Eigen::Index>(i)))
               .squaredNorm();
  }
  return sum / static_cast<double>(rows.size() * static_cast<std::size_t>(ds.targets.cols()));
}

Matrix rows_of(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

TaskOutcome run_task(const SweepSpec& spec, const data::Dataset& data,
                     const data::SplitIndices& split, double value, std::uint64_t seed) {
  TaskOutcome out;
  out.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (is_mlp(spec.family)) {
      const MlpSetup setup = apply_grid_point(spec.mlp, spec.family, value);
      const auto res = train_mlp(setup, data, split, seed);
      const auto& best = res.record.epochs[res.record.best_epoch];
      out.train_mse = best.train_mse;
      out.best_val = best.val_mse;
      out.epoch = res.record.best_epoch;
      out.model_size = setup.hidden;
    } else {
      const data::Dataset ds = data::normalize_for_split(data, split);
      if (spec.family == Family::RbfSpread) {
        rbf::RbfTrainConfig cfg = spec.rbf;
        cfg.spread = value;
        const auto res = rbf::train_rbf(ds, split.train, split.val, cfg);
        const auto best = std::min_element(
            res.growth.begin(), res.growth.end(),
            [](const auto& a, const auto& b) { return a.val_mse < b.val_mse; });
        out.train_mse = res.growth.back().train_mse;
        out.best_val = best->val_mse;
        out.epoch = best->neurons;
        out.model_size = res.network.neurons();
      } else {
        const auto model = grnn::train_grnn(ds, split.train, value);
        out.train_mse = subset_mse(
            grnn::predict_grnn_batch(model, rows_of(ds.features, split.train)), ds, split.train);
        out.best_val = subset_mse(
            grnn::predict_grnn_batch(model, rows_of(ds.features, split.val)), ds, split.val);
        out.model_size = split.train.size();
      }
    }
    if (!std::isfinite(out.best_val)) throw Error(ErrorCode::NonFiniteLoss, "validation MSE is not finite");
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(t0);
  return out;
}

}  // namespace

std::string_view cli_name(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::optional<Family> parse_family(std::string_view name) {
  const std::string n = text::to_lower(text::trim(name));
  for (std::size_t i = 0; i < std::size(kFamilyNames); ++i) {
    if (n == kFamilyNames[i]) return static_cast<Family>(i);
  }
  return std::nullopt;
}

bool is_mlp(Family f) { return f != Family::RbfSpread && f != Family::GrnnSigma; }

std::string_view alias(LearningFn l) { return l == LearningFn::Gd ? "learngd" : "learngdm"; }

MlpSetup initial_setup() {
  MlpSetup s;
  s.f_hidden = mlp::TransferFn::HyperbolicTangentSigmoid;
  s.f_out = mlp::TransferFn::HyperbolicTangentSigmoid;
  return s;
}

mlp::TrainConfig effective_config(const MlpSetup& setup) {
  mlp::TrainConfig cfg = setup.train;
  if (setup.learning == LearningFn::Gd) cfg.momentum = 0.0;
  return cfg;
}

data::SplitIndices split_for(const MlpSetup& setup, std::size_t n,
                             const data::SplitIndices& random_split) {
  if (setup.divide == data::DivideFn::Random) return random_split;
  const double nd = static_cast<double>(n);
  data::DivideRatios ratios;
  ratios.val = static_cast<double>(random_split.val.size()) / nd;
  ratios.test = static_cast<double>(random_split.test.size()) / nd;
  ratios.train = 1.0 - ratios.val - ratios.test;
  return data::split_blocks(n, ratios);
}

mlp::TrainResult train_mlp(const MlpSetup& setup, const data::Dataset& data,
                           const data::SplitIndices& random_split, std::uint64_t seed) {
  const data::SplitIndices split = split_for(setup, data.size(), random_split);
  const data::Dataset ds = data::normalize_for_split(data, split);
  mlp::TrainConfig cfg = effective_config(setup);
  cfg.rng_seed = seed;
  SeededRng rng(seed);
  const mlp::Shape shape{data::kNumFeatures, setup.hidden, data::kNumClasses};
  const auto net = mlp::init_network(shape, setup.f_hidden, setup.f_out, rng);
  return mlp::train(net, ds, split, cfg);
}

std::vector<double> default_grid(Family f) {
  std::vector<double> g;
  switch (f) {
    case Family::MlpHiddenNeurons:
      for (int h = 3; h <= 13; ++h) g.push_back(h);
      break;
    case Family::MlpDivideFn:
    case Family::MlpLearningStage:
      g = {0.0, 1.0};
      break;
    case Family::MlpTransferFn:
      for (int i = 0; i < 9; ++i) g.push_back(i);
      break;
    case Family::MlpTrainAlgorithm:
      for (int i = 0; i < 10; ++i) g.push_back(i);
      break;
    case Family::RbfSpread:
      g = step_grid(10.0, 20);
      break;
    case Family::GrnnSigma:
      g = step_grid(10.0, 10);
      break;
  }
  return g;
}

std::string grid_label(Family f, double value) {
  switch (f) {
    case Family::MlpDivideFn:
      return std::string(data::to_string(grid_index(value, 2, f) == 0 ? data::DivideFn::Random
                                                                        : data::DivideFn::Index));
    case Family::MlpTransferFn: {
      const std::size_t i = grid_index(value, 9, f);
      return std::string(mlp::alias(mlp::kAllTransferFns[i / 3])) + "/" +
             std::string(mlp::alias(mlp::kAllTransferFns[i % 3]));
    }
    case Family::MlpLearningStage:
      return std::string(alias(grid_index(value, 2, f) == 0 ? LearningFn::GdMomentum : LearningFn::Gd));
    case Family::MlpTrainAlgorithm:
      return std::string(mlp::alias(mlp::kAllAlgorithms[grid_index(value, 10, f)]));
    default:
      return text::format_double(value);
  }
}

MlpSetup apply_grid_point(MlpSetup setup, Family f, double value) {
  switch (f) {
    case Family::MlpHiddenNeurons:
      if (!(value >= 1.0) || value != std::round(value) || value > 1e6) {
        throw Error(ErrorCode::ConfigError, "hidden neuron count must be a positive integer");
      }
      setup.hidden = static_cast<std::size_t>(value);
      break;
    case Family::MlpDivideFn:
      setup.divide = grid_index(value, 2, f) == 0 ? data::DivideFn::Random : data::DivideFn::Index;
      break;
    case Family::MlpTransferFn: {
      const std::size_t i = grid_index(value, 9, f);
      setup.f_hidden = mlp::kAllTransferFns[i / 3];
      setup.f_out = mlp::kAllTransferFns[i % 3];
      break;
    }
    case Family::MlpLearningStage:
      setup.learning = grid_index(value, 2, f) == 0 ? LearningFn::GdMomentum : LearningFn::Gd;
      break;
    case Family::MlpTrainAlgorithm:
      setup.train.algorithm = mlp::kAllAlgorithms[grid_index(value, 10, f)];
      break;
    default:
      throw Error(ErrorCode::InvalidArgument, std::string(cli_name(f)) + " is not an MLP sweep");
  }
  return setup;
}

std::optional<std::size_t> select_row(const std::vector<SweepRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& r = rows[i];
    if (r.error) continue;
    if (!best) {
      best = i;
      continue;
    }
    const SweepRow& b = rows[*best];
    if (std::tie(r.best_val_mse, r.model_size, r.grid_value) <
        std::tie(b.best_val_mse, b.model_size, b.grid_value)) {
      best = i;
    }
  }
  return best;
}

SweepResult run_sweep(const SweepSpec& spec, const data::Dataset& data,
                      const data::SplitIndices& split) {
  if (spec.grid.empty()) throw Error(ErrorCode::ConfigError, "sweep grid is empty");
  if (spec.repetitions == 0) throw Error(ErrorCode::ConfigError, "repetitions must be at least 1");
  for (double v : spec.grid) {
    if (!std::isfinite(v)) throw Error(ErrorCode::ConfigError, "sweep grid value is not finite");
    if (is_mlp(spec.family)) (void)apply_grid_point(spec.mlp, spec.family, v);
  }
  if (is_mlp(spec.family)) mlp::validate(effective_config(spec.mlp));

  const std::size_t reps = is_mlp(spec.family) ? spec.repetitions : 1;
  const std::size_t n_tasks = spec.grid.size() * reps;
  std::vector<TaskOutcome> outcomes(n_tasks);
  parallel_for(n_tasks, spec.jobs, [&](std::size_t t) {
    const std::size_t g = t / reps;
    const std::uint64_t seed = spec.base_seed + t % reps;
    outcomes[t] = run_task(spec, data, split, spec.grid[g], seed);
  });

  SweepResult result;
  result.family = spec.family;
  for (std::size_t g = 0; g < spec.grid.size(); ++g) {
    SweepRow row;
    row.grid_value = spec.grid[g];
    row.label = grid_label(spec.family, row.grid_value);
    const TaskOutcome* best = nullptr;
    for (std::size_t r = 0; r < reps; ++r) {
      const TaskOutcome& o = outcomes[g * reps + r];
      row.wall_seconds += o.seconds;
      if (o.error) continue;
      if (!best || o.best_val < best->best_val) best = &o;
    }
    if (best) {
      row.model_size = best->model_size;
      row.train_mse = best->train_mse;
      row.best_val_mse = best->best_val;
      row.epoch = best->epoch;
      row.seed = best->seed;
    } else {
      const TaskOutcome& first = outcomes[g * reps];
      row.seed = first.seed;
      row.error = first.error;
      row.best_val_mse = std::numeric_limits<double>::quiet_NaN();
      row.train_mse = std::numeric_limits<double>::quiet_NaN();
    }
    result.rows.push_back(std::move(row));
  }
  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.grid_value < b.grid_value; });
  result.selected = select_row(result.rows);
  return result;
}

StagedSearchResult staged_mlp_search(const data::Dataset& data, const data::SplitIndices& split,
                                     std::uint64_t base_seed, std::size_t repetitions,
                                     std::size_t jobs, const MlpSetup& start) {
  StagedSearchResult out;
  out.winner = start;
  for (Family f : kStageOrder) {
    SweepSpec spec;
    spec.family = f;
    spec.grid = default_grid(f);
    spec.mlp = out.winner;
    spec.repetitions = repetitions;
    spec.base_seed = base_seed;
    spec.jobs = jobs;
    SweepResult res = run_sweep(spec, data, split);
    if (!res.selected) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "every configuration failed in stage " + std::string(cli_name(f)));
    }
    out.winner = apply_grid_point(out.winner, f, res.rows[*res.selected].grid_value);
    out.stages.push_back(std::move(res));
  }
  return out;
}

ComparisonReport compare_models(const data::Dataset& data, const data::SplitIndices& split,
                                const ComparisonConfig& cfg) {
  if (split.train.empty() || split.test.empty()) {
    throw Error(ErrorCode::EmptyPartition, "comparison needs non-empty train and test partitions");
  }
  mlp::validate(effective_config(cfg.mlp));
  const data::Dataset ds = data::normalize_for_split(data, split);
  const Matrix x_train = rows_of(ds.features, split.train);
  const Matrix t_train = rows_of(ds.targets, split.train);
  const Matrix x_test = rows_of(ds.features, split.test);
  const Matrix t_test = rows_of(ds.targets, split.test);

  ComparisonReport rep;
  auto score = [&](FamilyScores& s, const char* name, double seconds, const auto& predict) {
    s.family = name;
    s.train_seconds = seconds;
    s.train = metrics::compute_metrics(predict(x_train), t_train);
    s.test = metrics::compute_metrics(predict(x_test), t_test);
  };

  {
    // The comparison uses the shared split regardless of the setup's divide rule.
    MlpSetup setup = cfg.mlp;
    setup.divide = data::DivideFn::Random;
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = train_mlp(setup, ds, split, cfg.mlp_seed);
    const double secs = seconds_since(t0);
    score(rep.rows[0], "MLP", secs, [&](const Matrix& x) { return mlp::predict_batch(res.network, x); });
  }
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = rbf::train_rbf(ds, split.train, split.val, cfg.rbf);
    const double secs = seconds_since(t0);
    score(rep.rows[1], "RBFNN", secs,
          [&](const Matrix& x) { return rbf::predict_rbf_batch(res.network, x); });
  }
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = grnn::train_grnn(ds, split.train, cfg.grnn_sigma);
    const double secs = seconds_since(t0);
    score(rep.rows[2], "GRNN", secs,
          [&](const Matrix& x) { return grnn::predict_grnn_batch(model, x); });
  }
  return rep;
}

}  // namespace sevnet::sweep
