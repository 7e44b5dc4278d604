#include "sevnet/grnn.hpp"

#include <cmath>

namespace sevnet::grnn {

GrnnModel train_grnn(const data::Dataset& data, const IndexList& train_idx, double sigma) {
  if (train_idx.empty()) throw Error(ErrorCode::EmptyInput, "train_grnn: empty training set");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::NonPositiveSigma, "smoothing factor must be > 0");
  }
  const data::Dataset tr = data::subset(data, train_idx);
  return GrnnModel{tr.features, tr.targets, sigma};
}

Vector predict_grnn(const GrnnModel& model, const Vector& x) {
  if (x.size() != model.patterns.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "predict_grnn: input width does not match patterns");
  }
  const Eigen::Index n = model.patterns.rows();
  const double inv_two_var = 1.0 / (2.0 * model.sigma * model.sigma);
  Vector exponent(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    exponent[i] = -(model.patterns.row(i).transpose() - x).squaredNorm() * inv_two_var;
  }
  const double top = exponent.maxCoeff();
  if (!std::isfinite(top)) return model.targets.colwise().mean().transpose();

  const Vector w = (exponent.array() - top).exp().matrix();
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) return model.targets.colwise().mean().transpose();
  return (model.targets.transpose() * w) / total;
}

Matrix predict_grnn_batch(const GrnnModel& model, const Matrix& inputs) {
  Matrix out(inputs.rows(), model.targets.cols());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.row(i) = predict_grnn(model, inputs.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace sevnet::grnn
