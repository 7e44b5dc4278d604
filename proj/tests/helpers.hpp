#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "sevnet/dataset.hpp"
#include "sevnet/error.hpp"
#include "sevnet/linalg.hpp"
#include "sevnet/mlp.hpp"

namespace sevnet::testing {

inline Matrix random_matrix(SeededRng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
  }
  return m;
}

/// n rows of features in [-1, 1] with random one-hot targets.
inline data::Dataset random_dataset(SeededRng& rng, std::size_t n) {
  data::Dataset ds;
  const auto rows = static_cast<Eigen::Index>(n);
  ds.features = random_matrix(rng, rows, data::kNumFeatures);
  ds.targets = Matrix::Zero(rows, data::kNumClasses);
  for (Eigen::Index i = 0; i < rows; ++i) {
    ds.targets(i, static_cast<Eigen::Index>(rng.below(data::kNumClasses))) = 1.0;
  }
  return ds;
}

/// Rows of `ds` selected by `idx` as a matrix pair.
inline std::pair<Matrix, Matrix> rows(const data::Dataset& ds, const IndexList& idx) {
  Matrix x(static_cast<Eigen::Index>(idx.size()), ds.features.cols());
  Matrix t(static_cast<Eigen::Index>(idx.size()), ds.targets.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(idx[i]));
    t.row(static_cast<Eigen::Index>(i)) = ds.targets.row(static_cast<Eigen::Index>(idx[i]));
  }
  return {x, t};
}

/// Central differences of batch_mse with step h.
inline Vector finite_difference_gradient(const mlp::MlpNetwork& net, const Matrix& x, const Matrix& t,
                                         double h = 1e-6) {
  const Vector theta = net.params();
  Vector g(theta.size());
  mlp::MlpNetwork probe = net;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Vector p = theta;
    p[i] = theta[i] + h;
    probe.set_params(p);
    const double fp = mlp::batch_mse(probe, x, t);
    p[i] = theta[i] - h;
    probe.set_params(p);
    const double fm = mlp::batch_mse(probe, x, t);
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest elementwise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Vector& a, const Vector& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// Code of the sevnet::Error thrown by `fn`, or nullopt if it returns normally.
inline std::optional<ErrorCode> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sevnet_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sevnet::testing
