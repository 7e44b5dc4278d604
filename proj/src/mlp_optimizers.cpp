#include "mlp_optimizers.hpp"

#include <algorithm>
#include <cmath>

namespace sevnet::mlp::detail {

Objective::Objective(MlpNetwork prototype, Matrix inputs, Matrix targets)
    : net_(std::move(prototype)), inputs_(std::move(inputs)), targets_(std::move(targets)) {}

double Objective::loss(const Vector& theta) {
  net_.set_params(theta);
  return batch_mse(net_, inputs_, targets_);
}

double Objective::loss_and_gradient(const Vector& theta, Vector& gradient) {
  net_.set_params(theta);
  gradient = backprop_gradient(net_, inputs_, targets_);
  return batch_mse(net_, inputs_, targets_);
}

JacobianResult Objective::jacobian_at(const Vector& theta) {
  net_.set_params(theta);
  return jacobian(net_, inputs_, targets_);
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxLineEvals = 20;

bool sufficient(double f, double f0, double alpha, double slope) {
  return std::isfinite(f) && f <= f0 + kArmijo * alpha * slope;
}

}  // namespace

LineSearchResult line_search(Objective& objective, const Vector& theta, double loss0,
                             double slope, const Vector& dir, double alpha0) {
  if (!(slope < 0.0) || !(alpha0 > 0.0) || !std::isfinite(alpha0)) return {};
  auto phi = [&](double a) { return objective.loss(theta + a * dir); };

  double alpha = alpha0;
  double f = phi(alpha);
  int evals = 1;
  if (sufficient(f, loss0, alpha, slope)) {
    while (evals < kMaxLineEvals) {
      const double a2 = 2.0 * alpha;
      const double f2 = phi(a2);
      ++evals;
      if (!(f2 < f) || !sufficient(f2, loss0, a2, slope)) break;
      alpha = a2;
      f = f2;
    }
    return {true, alpha, f};
  }

  double prev_alpha = 0.0;
  double prev_f = 0.0;
  bool have_prev = false;
  while (evals < kMaxLineEvals) {
    double next = 0.5 * alpha;
    if (std::isfinite(f)) {
      if (!have_prev) {
        const double denom = 2.0 * (f - loss0 - slope * alpha);
        if (denom > 0.0) next = -slope * alpha * alpha / denom;
      } else {
        const double ra = f - loss0 - slope * alpha;
        const double rb = prev_f - loss0 - slope * prev_alpha;
        const double a2 = alpha * alpha;
        const double b2 = prev_alpha * prev_alpha;
        const double denom = a2 * b2 * (alpha - prev_alpha);
        const double c3 = (b2 * ra - a2 * rb) / denom;
        const double c2 = (-b2 * prev_alpha * ra + a2 * alpha * rb) / denom;
        if (std::abs(c3) < 1e-300) {
          if (c2 > 0.0) next = -slope / (2.0 * c2);
        } else {
          const double disc = c2 * c2 - 3.0 * c3 * slope;
          if (disc >= 0.0) next = (-c2 + std::sqrt(disc)) / (3.0 * c3);
        }
      }
    }
    if (!std::isfinite(next)) next = 0.5 * alpha;
    next = std::clamp(next, 0.1 * alpha, 0.5 * alpha);
    if (std::isfinite(f)) {
      prev_alpha = alpha;
      prev_f = f;
      have_prev = true;
    }
    alpha = next;
    f = phi(alpha);
    ++evals;
    if (sufficient(f, loss0, alpha, slope)) return {true, alpha, f};
  }
  return {false, alpha, f};
}

namespace {

bool vanishing(const Vector& g) { return !(g.norm() > 1e-300); }

class GradientDescent final : public Optimizer {
 public:
  GradientDescent(Objective& obj, double lr) : obj_(obj), lr_(lr) {}

  StepOutcome step(Vector& theta) override {
    Vector g;
    obj_.loss_and_gradient(theta, g);
    if (vanishing(g)) return StepOutcome::NoProgress;
    theta -= lr_ * g;
    return StepOutcome::Accepted;
  }

 private:
  Objective& obj_;
  double lr_;
};

/// dx <- mc * dx - (1 - mc) * lr * g. With mc = 0 this is plain gradient descent.
class GdMomentum final : public Optimizer {
 public:
  GdMomentum(Objective& obj, double lr, double mc) : obj_(obj), lr_(lr), mc_(mc) {}

  StepOutcome step(Vector& theta) override {
    Vector g;
    obj_.loss_and_gradient(theta, g);
    if (vanishing(g)) return StepOutcome::NoProgress;
    if (dx_.size() == 0) dx_ = Vector::Zero(theta.size());
    dx_ = mc_ * dx_ - (1.0 - mc_) * lr_ * g;
    theta += dx_;
    return StepOutcome::Accepted;
  }

 private:
  Objective& obj_;
  double lr_;
  double mc_;
  Vector dx_;
};

/// Momentum plus adaptive learning rate: a step that raises the loss by more
/// than 4% is rolled back and lr shrinks by 0.7; a step that lowers it grows lr by 1.05.
class GdAdaptive final : public Optimizer {
 public:
  GdAdaptive(Objective& obj, double lr, double mc) : obj_(obj), lr_(lr), mc_(mc) {}

  StepOutcome step(Vector& theta) override {
    Vector g;
    const double f0 = obj_.loss_and_gradient(theta, g);
    if (vanishing(g)) return StepOutcome::NoProgress;
    if (dx_.size() == 0) dx_ = Vector::Zero(theta.size());
    const Vector dx = mc_ * dx_ - (1.0 - mc_) * lr_ * g;
    const Vector trial = theta + dx;
    const double f1 = obj_.loss(trial);
    if (!std::isfinite(f1) || f1 > f0 * kMaxPerfInc) {
      lr_ *= kLrDec;
      dx_.setZero();
      return StepOutcome::Rejected;
    }
    if (f1 < f0) lr_ *= kLrInc;
    dx_ = dx;
    theta = trial;
    return StepOutcome::Accepted;
  }

 private:
  static constexpr double kMaxPerfInc = 1.04;
  static constexpr double kLrInc = 1.05;
  static constexpr double kLrDec = 0.7;

  Objective& obj_;
  double lr_;
  double mc_;
  Vector dx_;
};

/// Rprop with weight-backtracking disabled (iRprop-).
class Rprop final : public Optimizer {
 public:
  explicit Rprop(Objective& obj) : obj_(obj) {}

  StepOutcome step(Vector& theta) override {
    Vector g;
    obj_.loss_and_gradient(theta, g);
    if (vanishing(g)) return StepOutcome::NoProgress;
    if (delta_.size() == 0) {
      delta_ = Vector::Constant(theta.size(), kDelta0);
      g_prev_ = Vector::Zero(theta.size());
    }
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double s = g[i] * g_prev_[i];
      if (s > 0.0) {
        delta_[i] = std::min(delta_[i] * kEtaPlus, kDeltaMax);
      } else if (s < 0.0) {
        delta_[i] = std::max(delta_[i] * kEtaMinus, kDeltaMin);
        g[i] = 0.0;
      }
      if (g[i] > 0.0) theta[i] -= delta_[i];
      else if (g[i] < 0.0) theta[i] += delta_[i];
    }
    g_prev_ = g;
    return StepOutcome::Accepted;
  }

 private:
  static constexpr double kEtaPlus = 1.2;
  static constexpr double kEtaMinus = 0.5;
  static constexpr double kDelta0 = 0.07;
  static constexpr double kDeltaMax = 50.0;
  static constexpr double kDeltaMin = 1e-9;

  Objective& obj_;
  Vector delta_;
  Vector g_prev_;
};

/// Shared state for methods that move along a direction chosen from the
/// current and previous gradients.
class DirectionSearch : public Optimizer {
 public:
  explicit DirectionSearch(Objective& obj) : obj_(obj) {}

  StepOutcome step(Vector& theta) override {
    if (!primed_) {
      f_ = obj_.loss_and_gradient(theta, g_);
      primed_ = true;
    }
    if (vanishing(g_)) return StepOutcome::NoProgress;

    Vector d = direction(theta);
    double slope = g_.dot(d);
    bool steepest = false;
    if (!(slope < 0.0)) {
      d = -g_;
      slope = -g_.squaredNorm();
      steepest = true;
      on_restart();
    }
    LineSearchResult ls = line_search(obj_, theta, f_, slope, d, initial_alpha(slope, d, steepest));
    if (!ls.ok && !steepest) {
      d = -g_;
      slope = -g_.squaredNorm();
      on_restart();
      ls = line_search(obj_, theta, f_, slope, d, initial_alpha(slope, d, true));
    }
    if (!ls.ok) return StepOutcome::NoProgress;

    const Vector s = ls.alpha * d;
    Vector g_new;
    const Vector theta_new = theta + s;
    const double f_new = obj_.loss_and_gradient(theta_new, g_new);
    after_step(s, g_new, d);
    prev_alpha_ = ls.alpha;
    prev_slope_ = slope;
    theta = theta_new;
    f_ = f_new;
    g_ = std::move(g_new);
    ++iterations_;
    return StepOutcome::Accepted;
  }

 protected:
  /// Search direction at the current point (g_ holds the gradient).
  virtual Vector direction(const Vector& theta) = 0;
  /// Called with step s, new gradient, and the direction actually used.
  virtual void after_step(const Vector& s, const Vector& g_new, const Vector& d) = 0;
  virtual void on_restart() {}

  virtual double initial_alpha(double slope, const Vector& d, bool steepest) {
    if (iterations_ == 0 || steepest || prev_alpha_ <= 0.0) {
      return std::min(1.0, 1.0 / d.norm());
    }
    return std::max(prev_alpha_ * prev_slope_ / slope, 1e-12);
  }

  Objective& obj_;
  Vector g_;
  double f_ = 0.0;
  std::size_t iterations_ = 0;
  double prev_alpha_ = 0.0;
  double prev_slope_ = 0.0;

 private:
  bool primed_ = false;
};

class Bfgs final : public DirectionSearch {
 public:
  using DirectionSearch::DirectionSearch;

 protected:
  Vector direction(const Vector& theta) override {
    if (h_.size() == 0) reset(theta.size());
    return -(h_ * g_);
  }

  void on_restart() override {
    reset(g_.size());
  }

  double initial_alpha(double slope, const Vector& d, bool steepest) override {
    if (identity_) return DirectionSearch::initial_alpha(slope, d, true);
    (void)steepest;
    return 1.0;
  }

  void after_step(const Vector& s, const Vector& g_new, const Vector&) override {
    const Vector y = g_new - g_;
    const double sy = s.dot(y);
    if (!(sy > 1e-10 * s.norm() * y.norm())) return;
    if (identity_) {
      h_ *= sy / y.squaredNorm();
      identity_ = false;
    }
    const Vector hy = h_ * y;
    const double yhy = y.dot(hy);
    h_ += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) - (hy * s.transpose() + s * hy.transpose()) / sy;
  }

 private:
  void reset(Eigen::Index n) {
    h_ = Eigen::MatrixXd::Identity(n, n);
    identity_ = true;
  }

  Eigen::MatrixXd h_;
  bool identity_ = true;
};

class CgFletcherReeves final : public DirectionSearch {
 public:
  using DirectionSearch::DirectionSearch;

 protected:
  Vector direction(const Vector& theta) override {
    if (d_prev_.size() == 0 || since_restart_ >= static_cast<std::size_t>(theta.size())) {
      since_restart_ = 0;
      return -g_;
    }
    const double beta = g_.squaredNorm() / g_prev_sq_;
    return -g_ + beta * d_prev_;
  }

  void on_restart() override { since_restart_ = 0; }

  void after_step(const Vector&, const Vector&, const Vector& d) override {
    g_prev_sq_ = g_.squaredNorm();
    d_prev_ = d;
    ++since_restart_;
  }

 private:
  Vector d_prev_;
  double g_prev_sq_ = 1.0;
  std::size_t since_restart_ = 0;
};

/// Conjugate gradient with Powell's restart test and Beale's three-term
/// direction built on the last restart pair.
class CgPowellBeale final : public DirectionSearch {
 public:
  using DirectionSearch::DirectionSearch;

 protected:
  Vector direction(const Vector& theta) override {
    const auto n = static_cast<std::size_t>(theta.size());
    if (d_prev_.size() == 0) return restart();
    const bool powell = std::abs(g_.dot(g_prev_)) >= 0.2 * g_.squaredNorm();
    if (powell || since_restart_ >= n) return restart();

    const Vector y_prev = g_ - g_prev_;
    const double dy = d_prev_.dot(y_prev);
    if (std::abs(dy) < 1e-300) return restart();
    Vector d = -g_ + (g_.dot(y_prev) / dy) * d_prev_;
    if (since_restart_ >= 2 && have_restart_pair_) {
      const double dty = d_restart_.dot(y_restart_);
      if (std::abs(dty) > 1e-300) d += (g_.dot(y_restart_) / dty) * d_restart_;
    }
    const double gd = g_.dot(d);
    const double gg = g_.squaredNorm();
    if (since_restart_ >= 2 && (gd > -0.8 * gg || gd < -1.2 * gg)) return restart();
    return d;
  }

  void on_restart() override {
    since_restart_ = 0;
    have_restart_pair_ = false;
    awaiting_pair_ = true;
  }

  void after_step(const Vector&, const Vector& g_new, const Vector& d) override {
    if (awaiting_pair_) {
      d_restart_ = d;
      y_restart_ = g_new - g_;
      have_restart_pair_ = true;
      awaiting_pair_ = false;
    }
    g_prev_ = g_;
    d_prev_ = d;
    ++since_restart_;
  }

 private:
  Vector restart() {
    on_restart();
    return -g_;
  }

  Vector d_prev_;
  Vector g_prev_;
  Vector d_restart_;
  Vector y_restart_;
  bool have_restart_pair_ = false;
  bool awaiting_pair_ = false;
  std::size_t since_restart_ = 0;
};

/// Memoryless BFGS direction from the most recent (s, y) pair.
class OneStepSecant final : public DirectionSearch {
 public:
  using DirectionSearch::DirectionSearch;

 protected:
  Vector direction(const Vector&) override {
    if (!have_pair_) return -g_;
    const double sy = s_.dot(y_);
    if (!(sy > 1e-300)) return -g_;
    const double sg = s_.dot(g_);
    const double yg = y_.dot(g_);
    const double a = -(1.0 + y_.squaredNorm() / sy) * (sg / sy) + yg / sy;
    const double b = sg / sy;
    return -g_ + a * s_ + b * y_;
  }

  double initial_alpha(double slope, const Vector& d, bool steepest) override {
    if (!have_pair_ || steepest) return DirectionSearch::initial_alpha(slope, d, true);
    return 1.0;
  }

  void after_step(const Vector& s, const Vector& g_new, const Vector&) override {
    s_ = s;
    y_ = g_new - g_;
    have_pair_ = true;
  }

 private:
  Vector s_;
  Vector y_;
  bool have_pair_ = false;
};

/// Moller's scaled conjugate gradient: no line search, curvature from a
/// finite difference of gradients, trust-region style scaling lambda.
class ScaledConjugateGradient final : public Optimizer {
 public:
  explicit ScaledConjugateGradient(Objective& obj) : obj_(obj) {}

  StepOutcome step(Vector& theta) override {
    if (!primed_) {
      f_ = obj_.loss_and_gradient(theta, g_);
      r_ = -g_;
      p_ = r_;
      primed_ = true;
    }
    const double p_sq = p_.squaredNorm();
    if (!(p_sq > 1e-300) || lambda_ > kLambdaMax) return StepOutcome::NoProgress;
    const double p_norm = std::sqrt(p_sq);

    if (success_) {
      const double sigma = kSigma0 / p_norm;
      Vector g_sigma;
      obj_.loss_and_gradient(theta + sigma * p_, g_sigma);
      delta_ = p_.dot((g_sigma - g_) / sigma);
    }
    // delta_ holds the scaled curvature from a failed step; re-scale for the new lambda.
    delta_ += (lambda_ - lambda_bar_) * p_sq;
    if (delta_ <= 0.0) {
      lambda_bar_ = 2.0 * (lambda_ - delta_ / p_sq);
      delta_ = -delta_ + lambda_ * p_sq;
      lambda_ = lambda_bar_;
    }
    const double delta = delta_;
    const double mu = p_.dot(r_);
    const double alpha = mu / delta;
    const Vector theta_new = theta + alpha * p_;
    const double f_new = obj_.loss(theta_new);
    const double comparison = std::isfinite(f_new) ? 2.0 * delta * (f_ - f_new) / (mu * mu) : -1.0;

    StepOutcome outcome = StepOutcome::Rejected;
    if (comparison >= 0.0) {
      theta = theta_new;
      f_ = obj_.loss_and_gradient(theta, g_);
      const Vector r_new = -g_;
      lambda_bar_ = 0.0;
      success_ = true;
      ++k_;
      if (k_ % static_cast<std::size_t>(theta.size()) == 0) {
        p_ = r_new;
      } else {
        const double beta = (r_new.squaredNorm() - r_new.dot(r_)) / mu;
        p_ = r_new + beta * p_;
      }
      r_ = r_new;
      if (comparison >= 0.75) lambda_ *= 0.25;
      outcome = StepOutcome::Accepted;
    } else {
      lambda_bar_ = lambda_;
      success_ = false;
    }
    if (comparison < 0.25) lambda_ += delta * (1.0 - comparison) / p_sq;
    return outcome;
  }

 private:
  static constexpr double kSigma0 = 5e-5;
  static constexpr double kLambdaMax = 1e100;

  Objective& obj_;
  Vector g_;
  Vector r_;
  Vector p_;
  double f_ = 0.0;
  double delta_ = 0.0;
  double lambda_ = 5e-7;
  double lambda_bar_ = 0.0;
  bool success_ = true;
  bool primed_ = false;
  std::size_t k_ = 0;
};

/// Damped Gauss-Newton. Each epoch retries with mu *= mu_inc until the
/// training MSE strictly decreases; success divides mu by 1/mu_dec.
class LevenbergMarquardt final : public Optimizer {
 public:
  LevenbergMarquardt(Objective& obj, const TrainConfig& cfg)
      : obj_(obj), mu_(cfg.lm_mu0), inc_(cfg.lm_mu_inc), dec_(cfg.lm_mu_dec), max_(cfg.lm_mu_max) {}

  StepOutcome step(Vector& theta) override {
    const JacobianResult jr = obj_.jacobian_at(theta);
    const double f0 = jr.errors.squaredNorm() / static_cast<double>(jr.errors.size());
    while (mu_ <= max_) {
      const Vector delta = linalg::solve_damped_normal(jr.jacobian, jr.errors, mu_);
      const Vector trial = theta - delta;
      const double f1 = obj_.loss(trial);
      if (std::isfinite(f1) && f1 < f0) {
        theta = trial;
        mu_ *= dec_;
        return StepOutcome::Accepted;
      }
      mu_ *= inc_;
    }
    return StepOutcome::MuOverflow;
  }

 private:
  Objective& obj_;
  double mu_;
  double inc_;
  double dec_;
  double max_;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg, Objective& objective) {
  switch (cfg.algorithm) {
    case TrainAlgorithm::LevenbergMarquardt:
      return std::make_unique<LevenbergMarquardt>(objective, cfg);
    case TrainAlgorithm::QuasiNewtonBfgs: return std::make_unique<Bfgs>(objective);
    case TrainAlgorithm::ResilientBackprop: return std::make_unique<Rprop>(objective);
    case TrainAlgorithm::GdAdaptiveLrMomentum:
      return std::make_unique<GdAdaptive>(objective, cfg.learning_rate, cfg.momentum);
    case TrainAlgorithm::ScaledConjugateGradient:
      return std::make_unique<ScaledConjugateGradient>(objective);
    case TrainAlgorithm::ConjugateGradientPowellBeale:
      return std::make_unique<CgPowellBeale>(objective);
    case TrainAlgorithm::OneStepSecant: return std::make_unique<OneStepSecant>(objective);
    case TrainAlgorithm::ConjugateGradientFletcherReeves:
      return std::make_unique<CgFletcherReeves>(objective);
    case TrainAlgorithm::GdMomentum:
      return std::make_unique<GdMomentum>(objective, cfg.learning_rate, cfg.momentum);
    case TrainAlgorithm::GradientDescent:
      return std::make_unique<GradientDescent>(objective, cfg.learning_rate);
  }
  throw Error(ErrorCode::ConfigError, "unknown training algorithm");
}

}  // namespace sevnet::mlp::detail
