#include "sevnet/mlp.hpp"

#include <cmath>
#include <memory>

#include "mlp_optimizers.hpp"
#include "sevnet/text.hpp"

namespace sevnet::mlp {

std::string_view alias(TransferFn f) {
  switch (f) {
    case TransferFn::HyperbolicTangentSigmoid: return "tansig";
    case TransferFn::LogSigmoid: return "logsig";
    case TransferFn::Linear: return "purelin";
  }
  return "purelin";
}

std::optional<TransferFn> parse_transfer(std::string_view name) {
  const std::string n = text::to_lower(name);
  if (n == "tansig" || n == "tanh") return TransferFn::HyperbolicTangentSigmoid;
  if (n == "logsig" || n == "sigmoid") return TransferFn::LogSigmoid;
  if (n == "purelin" || n == "linear") return TransferFn::Linear;
  return std::nullopt;
}

double transfer(TransferFn f, double n) {
  switch (f) {
    case TransferFn::HyperbolicTangentSigmoid: return 2.0 / (1.0 + std::exp(-2.0 * n)) - 1.0;
    case TransferFn::LogSigmoid: return 1.0 / (1.0 + std::exp(-n));
    case TransferFn::Linear: return n;
  }
  return n;
}

double transfer_deriv(TransferFn f, double n) {
  switch (f) {
    case TransferFn::HyperbolicTangentSigmoid: {
      const double a = transfer(f, n);
      return 1.0 - a * a;
    }
    case TransferFn::LogSigmoid: {
      const double a = transfer(f, n);
      return a * (1.0 - a);
    }
    case TransferFn::Linear: return 1.0;
  }
  return 1.0;
}

std::size_t MlpNetwork::param_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

Vector MlpNetwork::params() const {
  Vector theta(static_cast<Eigen::Index>(param_count()));
  Eigen::Index k = 0;
  theta.segment(k, w1.size()) = w1.reshaped<Eigen::RowMajor>();
  k += w1.size();
  theta.segment(k, b1.size()) = b1;
  k += b1.size();
  theta.segment(k, w2.size()) = w2.reshaped<Eigen::RowMajor>();
  k += w2.size();
  theta.segment(k, b2.size()) = b2;
  return theta;
}

void MlpNetwork::set_params(const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != param_count()) {
    throw Error(ErrorCode::DimensionMismatch, "set_params: expected " +
                                                  std::to_string(param_count()) + " values");
  }
  Eigen::Index k = 0;
  w1.reshaped<Eigen::RowMajor>() = theta.segment(k, w1.size());
  k += w1.size();
  b1 = theta.segment(k, b1.size());
  k += b1.size();
  w2.reshaped<Eigen::RowMajor>() = theta.segment(k, w2.size());
  k += w2.size();
  b2 = theta.segment(k, b2.size());
}

MlpNetwork make_network(const Shape& shape, TransferFn f_hidden, TransferFn f_out) {
  if (shape.n_in == 0 || shape.n_hidden == 0 || shape.n_out == 0) {
    throw Error(ErrorCode::ConfigError, "network layers must be non-empty");
  }
  const auto in = static_cast<Eigen::Index>(shape.n_in);
  const auto hid = static_cast<Eigen::Index>(shape.n_hidden);
  const auto out = static_cast<Eigen::Index>(shape.n_out);
  return MlpNetwork{Matrix::Zero(hid, in), Vector::Zero(hid), Matrix::Zero(out, hid),
                    Vector::Zero(out), f_hidden, f_out};
}

MlpNetwork init_network(const Shape& shape, TransferFn f_hidden, TransferFn f_out, SeededRng& rng) {
  MlpNetwork net = make_network(shape, f_hidden, f_out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(shape.n_in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(shape.n_hidden));
  auto draw = [&](double scale) { return scale * rng.uniform(-0.5, 0.5); };
  for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = draw(s1);
  for (Eigen::Index i = 0; i < net.b1.size(); ++i) net.b1[i] = draw(s1);
  for (Eigen::Index i = 0; i < net.w2.size(); ++i) net.w2.data()[i] = draw(s2);
  for (Eigen::Index i = 0; i < net.b2.size(); ++i) net.b2[i] = draw(s2);
  return net;
}

namespace {

Matrix apply(TransferFn f, const Matrix& n) {
  return n.unaryExpr([f](double v) { return transfer(f, v); });
}

Matrix apply_deriv(TransferFn f, const Matrix& n) {
  return n.unaryExpr([f](double v) { return transfer_deriv(f, v); });
}

struct BatchPass {
  Matrix n1;  // N x H pre-activations
  Matrix a1;  // N x H
  Matrix n2;  // N x K
  Matrix y;   // N x K
};

BatchPass run_batch(const MlpNetwork& net, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != net.n_in()) {
    throw Error(ErrorCode::DimensionMismatch, "input width " + std::to_string(inputs.cols()) +
                                                  " does not match network n_in " +
                                                  std::to_string(net.n_in()));
  }
  BatchPass p;
  p.n1 = inputs * net.w1.transpose();
  p.n1.rowwise() += net.b1.transpose();
  p.a1 = apply(net.f_hidden, p.n1);
  p.n2 = p.a1 * net.w2.transpose();
  p.n2.rowwise() += net.b2.transpose();
  p.y = apply(net.f_out, p.n2);
  return p;
}

void check_batch(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyBatch, "batch has no samples");
  if (inputs.rows() != targets.rows() ||
      static_cast<std::size_t>(targets.cols()) != net.n_out()) {
    throw Error(ErrorCode::DimensionMismatch, "inputs/targets shape mismatch");
  }
}

}  // namespace

ForwardResult forward(const MlpNetwork& net, const Vector& x) {
  Matrix row = x.transpose();
  const BatchPass p = run_batch(net, row);
  return {p.y.row(0).transpose(), p.a1.row(0).transpose()};
}

Matrix predict_batch(const MlpNetwork& net, const Matrix& inputs) {
  return run_batch(net, inputs).y;
}

double batch_mse(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets) {
  check_batch(net, inputs, targets);
  return (targets - predict_batch(net, inputs)).squaredNorm() / static_cast<double>(targets.size());
}

Vector backprop_gradient(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets) {
  check_batch(net, inputs, targets);
  const BatchPass p = run_batch(net, inputs);
  const double scale = -2.0 / static_cast<double>(targets.size());
  const Matrix d2 = (scale * (targets - p.y)).cwiseProduct(apply_deriv(net.f_out, p.n2));
  const Matrix d1 = (d2 * net.w2).cwiseProduct(apply_deriv(net.f_hidden, p.n1));

  MlpNetwork grad = net;
  grad.w1 = d1.transpose() * inputs;
  grad.b1 = d1.colwise().sum().transpose();
  grad.w2 = d2.transpose() * p.a1;
  grad.b2 = d2.colwise().sum().transpose();
  return grad.params();
}

JacobianResult jacobian(const MlpNetwork& net, const Matrix& inputs, const Matrix& targets) {
  check_batch(net, inputs, targets);
  const BatchPass p = run_batch(net, inputs);
  const Matrix f1d = apply_deriv(net.f_hidden, p.n1);
  const Matrix f2d = apply_deriv(net.f_out, p.n2);

  const Eigen::Index n = inputs.rows();
  const Eigen::Index in = inputs.cols();
  const auto hid = static_cast<Eigen::Index>(net.n_hidden());
  const auto out = static_cast<Eigen::Index>(net.n_out());
  const Eigen::Index off_b1 = hid * in;
  const Eigen::Index off_w2 = off_b1 + hid;
  const Eigen::Index off_b2 = off_w2 + out * hid;

  JacobianResult r;
  r.jacobian = Matrix::Zero(n * out, static_cast<Eigen::Index>(net.param_count()));
  r.errors = (targets - p.y).reshaped<Eigen::RowMajor>();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < out; ++k) {
      auto row = r.jacobian.row(i * out + k);
      // de/dtheta = -dy/dtheta
      const double g = -f2d(i, k);
      for (Eigen::Index h = 0; h < hid; ++h) {
        const double back = g * net.w2(k, h) * f1d(i, h);
        for (Eigen::Index j = 0; j < in; ++j) row(h * in + j) = back * inputs(i, j);
        row(off_b1 + h) = back;
        row(off_w2 + k * hid + h) = g * p.a1(i, h);
      }
      row(off_b2 + k) = g;
    }
  }
  return r;
}

std::string_view alias(TrainAlgorithm a) {
  switch (a) {
    case TrainAlgorithm::LevenbergMarquardt: return "trainlm";
    case TrainAlgorithm::QuasiNewtonBfgs: return "trainbfg";
    case TrainAlgorithm::ResilientBackprop: return "trainrp";
    case TrainAlgorithm::GdAdaptiveLrMomentum: return "traingdx";
    case TrainAlgorithm::ScaledConjugateGradient: return "trainscg";
    case TrainAlgorithm::ConjugateGradientPowellBeale: return "traincgb";
    case TrainAlgorithm::OneStepSecant: return "trainoss";
    case TrainAlgorithm::ConjugateGradientFletcherReeves: return "traincgf";
    case TrainAlgorithm::GdMomentum: return "traingdm";
    case TrainAlgorithm::GradientDescent: return "traingd";
  }
  return "trainlm";
}

std::optional<TrainAlgorithm> parse_algorithm(std::string_view name) {
  std::string n = text::to_lower(name);
  if (n.rfind("train", 0) == 0) n.erase(0, 5);
  if (n == "lm") return TrainAlgorithm::LevenbergMarquardt;
  if (n == "bfg" || n == "bfgs") return TrainAlgorithm::QuasiNewtonBfgs;
  if (n == "rp") return TrainAlgorithm::ResilientBackprop;
  if (n == "gdx") return TrainAlgorithm::GdAdaptiveLrMomentum;
  // "seg" is how the scaled conjugate gradient name is sometimes transcribed.
  if (n == "scg" || n == "seg") return TrainAlgorithm::ScaledConjugateGradient;
  if (n == "cgb") return TrainAlgorithm::ConjugateGradientPowellBeale;
  if (n == "oss") return TrainAlgorithm::OneStepSecant;
  if (n == "cgf") return TrainAlgorithm::ConjugateGradientFletcherReeves;
  if (n == "gdm") return TrainAlgorithm::GdMomentum;
  if (n == "gd") return TrainAlgorithm::GradientDescent;
  return std::nullopt;
}

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (!(cfg.goal_mse >= 0.0)) fail("goal_mse must be >= 0");
  if (cfg.patience == 0) fail("patience must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) fail("learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) fail("momentum must be in [0,1)");
  if (!(cfg.lm_mu0 > 0.0)) fail("lm_mu0 must be > 0");
  if (!(cfg.lm_mu_inc > 1.0)) fail("lm_mu_inc must be > 1");
  if (!(cfg.lm_mu_dec > 0.0 && cfg.lm_mu_dec < 1.0)) fail("lm_mu_dec must be in (0,1)");
  if (!(cfg.lm_mu_max > 0.0)) fail("lm_mu_max must be > 0");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::GoalMet: return "goal_met";
    case StopReason::MaxEpochs: return "max_epochs";
    case StopReason::ValidationStop: return "validation_stop";
    case StopReason::MuOverflow: return "mu_overflow";
    case StopReason::NoProgress: return "no_progress";
  }
  return "max_epochs";
}

TrainResult train(const MlpNetwork& initial, const data::Dataset& data,
                  const data::SplitIndices& split, const TrainConfig& cfg,
                  const ValidationHook& validation_hook) {
  validate(cfg);
  if (split.train.empty()) throw Error(ErrorCode::ConfigError, "training partition is empty");
  if (split.val.empty() && !validation_hook) {
    throw Error(ErrorCode::ConfigError, "validation partition is empty");
  }
  const data::Dataset tr = data::subset(data, split.train);
  const data::Dataset va = data::subset(data, split.val);
  const data::Dataset te = data::subset(data, split.test);

  MlpNetwork net = initial;
  detail::Objective objective(net, tr.features, tr.targets);
  auto optimizer = detail::make_optimizer(cfg, objective);

  auto mse_or_nan = [&](const data::Dataset& part) {
    return part.size() == 0 ? std::numeric_limits<double>::quiet_NaN()
                            : batch_mse(net, part.features, part.targets);
  };

  TrainRecord record;
  Vector theta = net.params();
  Vector best_theta = theta;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t fails = 0;

  // Records the state held in `theta`; returns true when training must stop.
  auto observe = [&](std::size_t epoch) -> bool {
    net.set_params(theta);
    EpochStats s;
    Vector grad;
    s.train_mse = objective.loss_and_gradient(theta, grad);
    if (!std::isfinite(s.train_mse)) {
      throw Error(ErrorCode::NonFiniteLoss, std::string(alias(cfg.algorithm)) +
                                                " diverged at epoch " + std::to_string(epoch));
    }
    s.gradient_norm = grad.norm();
    s.val_mse = validation_hook ? validation_hook(net, epoch) : mse_or_nan(va);
    s.test_mse = mse_or_nan(te);
    record.epochs.push_back(s);

    if (s.val_mse < best_val) {
      best_val = s.val_mse;
      best_theta = theta;
      record.best_epoch = epoch;
      fails = 0;
    } else if (epoch > 0) {
      ++fails;
    }
    if (s.train_mse <= cfg.goal_mse) {
      record.stop_reason = StopReason::GoalMet;
      return true;
    }
    if (fails >= cfg.patience) {
      record.stop_reason = StopReason::ValidationStop;
      return true;
    }
    return false;
  };

  bool stopped = observe(0);
  for (std::size_t epoch = 1; !stopped && epoch <= cfg.max_epochs; ++epoch) {
    const detail::StepOutcome outcome = optimizer->step(theta);
    if (outcome == detail::StepOutcome::MuOverflow) {
      record.stop_reason = StopReason::MuOverflow;
      stopped = true;
      break;
    }
    if (outcome == detail::StepOutcome::NoProgress) {
      record.stop_reason = StopReason::NoProgress;
      stopped = true;
      break;
    }
    stopped = observe(epoch);
  }
  if (!stopped) record.stop_reason = StopReason::MaxEpochs;

  net.set_params(best_theta);
  return {std::move(net), std::move(record)};
}

data::Severity predict_class(const Vector& outputs) {
  if (outputs.size() != static_cast<Eigen::Index>(data::kNumClasses)) {
    throw Error(ErrorCode::DimensionMismatch, "predict_class expects 3 outputs");
  }
  // Position 0 is High; keeping the first maximum breaks ties toward higher severity.
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < outputs.size(); ++k) {
    if (outputs[k] > outputs[best]) best = k;
  }
  return data::severity_at_position(static_cast<std::size_t>(best));
}

data::Severity predict_class(const MlpNetwork& net, const Vector& x) {
  return predict_class(forward(net, x).output);
}

}  // namespace sevnet::mlp
