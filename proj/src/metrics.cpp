#include "sevnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sevnet::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "outputs and targets differ in shape");
  }
}

std::span<const double> flat(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "pearson: length mismatch");
  if (a.size() < 2) throw Error(ErrorCode::TooFewRows, "pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (sbb == 0.0) return kNaN;
  if (saa == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

MetricsReport compute_metrics(const Matrix& outputs, const Matrix& targets) {
  check_shapes(outputs, targets);
  if (targets.rows() < 2) throw Error(ErrorCode::TooFewRows, "metrics need at least two samples");

  MetricsReport m;
  m.n = static_cast<std::size_t>(targets.rows());
  const Matrix diff = targets - outputs;
  const double count = static_cast<double>(diff.size());
  m.mse = diff.squaredNorm() / count;
  m.rmse = std::sqrt(m.mse);
  m.mae = diff.cwiseAbs().sum() / count;
  m.mbe = -diff.sum() / count;

  double ape = 0.0;
  std::size_t ape_n = 0;
  for (Eigen::Index i = 0; i < diff.size(); ++i) {
    const double t = targets.data()[i];
    if (t != 0.0) {
      ape += std::abs(diff.data()[i] / t);
      ++ape_n;
    }
  }
  m.mape = ape_n == 0 ? kNaN : 100.0 * ape / static_cast<double>(ape_n);

  const double sst = (targets.array() - targets.mean()).square().sum();
  m.degenerate_targets = !(sst > 0.0);
  m.r = pearson(flat(outputs), flat(targets));
  m.r2 = m.degenerate_targets ? kNaN : 1.0 - diff.squaredNorm() / sst;
  for (Eigen::Index k = 0; k < targets.cols() && k < static_cast<Eigen::Index>(data::kNumClasses); ++k) {
    const Vector yk = outputs.col(k);
    const Vector tk = targets.col(k);
    m.r_per_output[static_cast<std::size_t>(k)] =
        pearson({yk.data(), static_cast<std::size_t>(yk.size())},
                {tk.data(), static_cast<std::size_t>(tk.size())});
  }
  return m;
}

ErrorHistogram error_histogram(std::span<const double> residuals) {
  if (residuals.empty()) throw Error(ErrorCode::EmptyInput, "error_histogram: no residuals");
  ErrorHistogram h;
  const auto [lo_it, hi_it] = std::minmax_element(residuals.begin(), residuals.end());
  h.min_error = *lo_it;
  h.max_error = *hi_it;
  if (!std::isfinite(h.min_error) || !std::isfinite(h.max_error)) {
    throw Error(ErrorCode::InvalidArgument, "error_histogram: non-finite residual");
  }
  double lo = h.min_error;
  double hi = h.max_error;
  if (lo == hi) {
    const double pad = 1e-9 * std::max(1.0, std::abs(lo));
    lo -= pad;
    hi += pad;
  }
  const double width = (hi - lo) / static_cast<double>(kHistogramBins);
  for (std::size_t i = 0; i < kHistogramBins; ++i) h.bin_edges[i] = lo + static_cast<double>(i) * width;
  h.bin_edges[kHistogramBins] = hi;

  // Bin i is [edge_i, edge_{i+1}); the last bin also takes edge_20.
  const auto inner_begin = h.bin_edges.begin() + 1;
  const auto inner_end = h.bin_edges.end() - 1;
  for (double e : residuals) {
    const auto it = std::upper_bound(inner_begin, inner_end, e);
    ++h.counts[static_cast<std::size_t>(std::distance(inner_begin, it))];
  }
  return h;
}

ErrorHistogram error_histogram(const Matrix& outputs, const Matrix& targets) {
  check_shapes(outputs, targets);
  const Matrix residual = targets - outputs;
  return error_histogram(flat(residual));
}

RegressionPlotData regression_plot(const Matrix& outputs, const Matrix& targets) {
  check_shapes(outputs, targets);
  if (targets.size() < 2) throw Error(ErrorCode::TooFewRows, "regression_plot needs two points");
  RegressionPlotData d;
  d.points.reserve(static_cast<std::size_t>(targets.size()));
  double mt = 0.0;
  double my = 0.0;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    d.points.emplace_back(targets.data()[i], outputs.data()[i]);
    mt += targets.data()[i];
    my += outputs.data()[i];
  }
  const double n = static_cast<double>(targets.size());
  mt /= n;
  my /= n;
  double stt = 0.0;
  double sty = 0.0;
  for (const auto& [t, y] : d.points) {
    stt += (t - mt) * (t - mt);
    sty += (t - mt) * (y - my);
  }
  if (!(stt > 0.0)) {
    throw Error(ErrorCode::DegenerateTargets, "regression_plot: targets have zero variance");
  }
  d.fit_slope = sty / stt;
  d.fit_intercept = my - d.fit_slope * mt;
  d.r = pearson(flat(outputs), flat(targets));
  return d;
}

ConfusionMatrix confusion(const std::vector<data::Severity>& predicted,
                          const std::vector<data::Severity>& truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "confusion: " + std::to_string(predicted.size()) +
                                               " predictions vs " + std::to_string(truth.size()) +
                                               " labels");
  }
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "confusion: no samples");
  ConfusionMatrix c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++c.counts[data::one_hot_position(truth[i])][data::one_hot_position(predicted[i])];
  }
  c.total = truth.size();
  std::size_t diag = 0;
  for (std::size_t k = 0; k < data::kNumClasses; ++k) diag += c.counts[k][k];
  c.accuracy = static_cast<double>(diag) / static_cast<double>(c.total);
  return c;
}

}  // namespace sevnet::metrics
