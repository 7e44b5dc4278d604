#pragma once

#include "sevnet/dataset.hpp"
#include "sevnet/linalg.hpp"

namespace sevnet::grnn {

/// Nadaraya-Watson regression over stored patterns with a Gaussian kernel
/// exp(-|x - x_i|^2 / (2 sigma^2)).
struct GrnnModel {
  Matrix patterns;  // N x n_in
  Matrix targets;   // N x n_out
  double sigma = 0.1;

  bool operator==(const GrnnModel&) const = default;
};

/// Stores the training rows; there is nothing to optimize.
GrnnModel train_grnn(const data::Dataset& data, const IndexList& train_idx, double sigma);

/// Kernel-weighted mean of the stored targets. Exponents are shifted by their
/// maximum before exponentiation; if no finite weight remains (e.g. a
/// non-finite query) the plain target mean is returned.
Vector predict_grnn(const GrnnModel& model, const Vector& x);
Matrix predict_grnn_batch(const GrnnModel& model, const Matrix& inputs);

}  // namespace sevnet::grnn
