#include "sevnet/rbfnn.hpp"

#include <cmath>
#include <limits>

namespace sevnet::rbf {

double spread_to_beta(double spread) {
  if (!(spread > 0.0) || !std::isfinite(spread)) {
    throw Error(ErrorCode::NonPositiveSpread, "spread must be a positive finite number");
  }
  return std::sqrt(std::log(2.0)) / spread;
}

double radbas(double distance, double spread) {
  const double beta = spread_to_beta(spread);
  if (!(distance >= 0.0)) throw Error(ErrorCode::InvalidArgument, "distance must be >= 0");
  const double z = distance * beta;
  return std::exp(-z * z);
}

namespace {

/// phi for every row of `inputs` against one center.
Vector basis_column(const Matrix& inputs, const Eigen::RowVectorXd& center, double beta) {
  const double b2 = beta * beta;
  Vector col(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    col[i] = std::exp(-b2 * (inputs.row(i) - center).squaredNorm());
  }
  return col;
}

/// Solves the (k x k) upper-triangular system R X = C.
Matrix back_substitute(const Matrix& r, const Matrix& c, Eigen::Index k) {
  return r.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(c.topRows(k));
}

}  // namespace

RbfTrainResult train_rbf(const data::Dataset& data, const IndexList& train_idx,
                         const IndexList& val_idx, const RbfTrainConfig& cfg,
                         const ProgressFn& progress) {
  const double beta = spread_to_beta(cfg.spread);
  if (train_idx.empty()) throw Error(ErrorCode::ConfigError, "train_rbf: empty training set");
  if (!(cfg.goal_mse >= 0.0)) throw Error(ErrorCode::ConfigError, "goal_mse must be >= 0");
  if (cfg.neurons_between_records == 0) {
    throw Error(ErrorCode::ConfigError, "neurons_between_records must be >= 1");
  }
  const std::size_t max_neurons =
      cfg.max_neurons.value_or(std::min(train_idx.size(), kMaxNeuronsCeiling));
  if (max_neurons == 0 || max_neurons > train_idx.size()) {
    throw Error(ErrorCode::ConfigError, "max_neurons must be in 1.." + std::to_string(train_idx.size()));
  }

  const data::Dataset tr = data::subset(data, train_idx);
  const data::Dataset va = data::subset(data, val_idx);
  const Eigen::Index n = tr.features.rows();
  const Eigen::Index outs = tr.targets.cols();
  const auto cap = static_cast<Eigen::Index>(max_neurons) + 1;

  // Column 0 of the basis is the bias.
  Matrix q = Matrix::Zero(n, cap);
  Matrix r = Matrix::Zero(cap, cap);
  Matrix coef = Matrix::Zero(cap, outs);  // Q^T T
  Matrix val_design = Matrix::Zero(va.features.rows(), cap);
  q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  r(0, 0) = std::sqrt(static_cast<double>(n));
  val_design.col(0).setOnes();
  coef.row(0) = q.col(0).transpose() * tr.targets;
  Matrix residual = tr.targets - q.col(0) * coef.row(0);

  std::vector<char> unavailable(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> center_rows;
  RbfTrainResult result;
  const double m = static_cast<double>(n * outs);

  Eigen::Index k = 1;  // basis columns in use
  while (static_cast<std::size_t>(k - 1) < max_neurons) {
    Eigen::Index pick = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (unavailable[static_cast<std::size_t>(i)]) continue;
      const double e = residual.row(i).squaredNorm();
      if (e > best) {
        best = e;
        pick = i;
      }
    }
    if (pick < 0) break;
    unavailable[static_cast<std::size_t>(pick)] = 1;

    const Eigen::RowVectorXd center = tr.features.row(pick);
    const Vector phi = basis_column(tr.features, center, beta);
    Vector v = phi;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double proj = q.col(j).dot(v);
        v -= proj * q.col(j);
        r(j, k) += proj;
      }
    }
    const double norm = v.norm();
    if (!(norm > 1e-10 * phi.norm())) {
      // Numerically inside the current span; discard this candidate.
      r.col(k).setZero();
      continue;
    }
    // Rows with identical inputs would produce the same column.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!unavailable[static_cast<std::size_t>(i)] && tr.features.row(i) == center) {
        unavailable[static_cast<std::size_t>(i)] = 1;
      }
    }
    q.col(k) = v / norm;
    r(k, k) = norm;
    coef.row(k) = q.col(k).transpose() * residual;
    residual -= q.col(k) * coef.row(k);
    if (va.features.rows() > 0) val_design.col(k) = basis_column(va.features, center, beta);
    center_rows.push_back(pick);
    ++k;

    GrowthStep step;
    step.neurons = static_cast<std::size_t>(k - 1);
    step.train_mse = residual.squaredNorm() / m;
    if (va.features.rows() > 0) {
      const Matrix weights = back_substitute(r, coef, k);
      step.val_mse = (va.targets - val_design.leftCols(k) * weights).squaredNorm() /
                     static_cast<double>(va.targets.size());
    } else {
      step.val_mse = std::numeric_limits<double>::quiet_NaN();
    }
    result.growth.push_back(step);
    if (progress && step.neurons % cfg.neurons_between_records == 0) progress(step);
    if (step.train_mse <= cfg.goal_mse) break;
  }
  if (center_rows.empty()) {
    throw Error(ErrorCode::SingularSystem, "train_rbf: no usable center found");
  }

  const Matrix weights = back_substitute(r, coef, k);  // k x outs: bias row then one per center
  RbfNetwork& net = result.network;
  net.spread = cfg.spread;
  net.beta = beta;
  net.centers.resize(static_cast<Eigen::Index>(center_rows.size()), tr.features.cols());
  for (std::size_t c = 0; c < center_rows.size(); ++c) {
    net.centers.row(static_cast<Eigen::Index>(c)) = tr.features.row(center_rows[c]);
  }
  net.b = weights.row(0).transpose();
  net.w = weights.bottomRows(k - 1).transpose();
  if (!net.w.allFinite() || !net.b.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "train_rbf: non-finite output weights");
  }
  return result;
}

Matrix predict_rbf_batch(const RbfNetwork& net, const Matrix& inputs) {
  if (inputs.cols() != net.centers.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "predict_rbf: input width does not match centers");
  }
  Matrix phi(inputs.rows(), net.centers.rows());
  for (Eigen::Index c = 0; c < net.centers.rows(); ++c) {
    phi.col(c) = basis_column(inputs, net.centers.row(c), net.beta);
  }
  Matrix y = phi * net.w.transpose();
  y.rowwise() += net.b.transpose();
  return y;
}

Vector predict_rbf(const RbfNetwork& net, const Vector& x) {
  const Matrix row = x.transpose();
  return predict_rbf_batch(net, row).row(0).transpose();
}

}  // namespace sevnet::rbf
