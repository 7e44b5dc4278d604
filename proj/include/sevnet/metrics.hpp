#pragma once

#include <array>
#include <span>
#include <vector>

#include "sevnet/dataset.hpp"
#include "sevnet/linalg.hpp"

namespace sevnet::metrics {

/// Errors are taken over every output unit of every sample (N * 3 values).
struct MetricsReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  /// Pearson correlation of the flattened outputs and targets. 0 when the
  /// outputs are constant; NaN when the targets are (see degenerate_targets).
  double r = 0.0;
  /// 1 - SSE/SST with SST about the target mean. NaN for degenerate targets.
  double r2 = 0.0;
  std::size_t n = 0;
  bool degenerate_targets = false;
  std::array<double, data::kNumClasses> r_per_output{};
  /// Mean bias error mean(y - t).
  double mbe = 0.0;
  /// Mean absolute percentage error over entries with non-zero target (NaN if none).
  double mape = 0.0;
};

MetricsReport compute_metrics(const Matrix& outputs, const Matrix& targets);

/// Pearson correlation; 0 if `a` is constant, NaN if `b` is constant.
double pearson(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kHistogramBins = 20;

struct ErrorHistogram {
  std::array<double, kHistogramBins + 1> bin_edges{};
  std::array<std::size_t, kHistogramBins> counts{};
  double min_error = 0.0;
  double max_error = 0.0;
};

/// 20 equal-width bins of residuals t - y over [min, max]; bins are
/// half-open except the last. When every residual is equal the range is
/// padded by 1e-9 * max(1, |e|) on each side.
ErrorHistogram error_histogram(const Matrix& outputs, const Matrix& targets);
ErrorHistogram error_histogram(std::span<const double> residuals);

struct RegressionPlotData {
  std::vector<std::pair<double, double>> points;  // (target, output)
  double fit_slope = 0.0;
  double fit_intercept = 0.0;
  double r = 0.0;
};

/// Least-squares line of output on target over all flattened entries.
RegressionPlotData regression_plot(const Matrix& outputs, const Matrix& targets);

/// Rows = true class, columns = predicted, both in one-hot order (High, Medium, Low).
struct ConfusionMatrix {
  std::array<std::array<std::size_t, data::kNumClasses>, data::kNumClasses> counts{};
  std::size_t total = 0;
  double accuracy = 0.0;

  std::size_t at(data::Severity truth, data::Severity predicted) const {
    return counts[data::one_hot_position(truth)][data::one_hot_position(predicted)];
  }
};

ConfusionMatrix confusion(const std::vector<data::Severity>& predicted,
                          const std::vector<data::Severity>& truth);

}  // namespace sevnet::metrics
