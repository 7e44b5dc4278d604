#pragma once

#include <memory>

#include "sevnet/mlp.hpp"

namespace sevnet::mlp::detail {

/// Training-set MSE as a function of the flattened parameter vector.
class Objective {
 public:
  Objective(MlpNetwork prototype, Matrix inputs, Matrix targets);

  double loss(const Vector& theta);
  double loss_and_gradient(const Vector& theta, Vector& gradient);
  JacobianResult jacobian_at(const Vector& theta);

 private:
  MlpNetwork net_;
  Matrix inputs_;
  Matrix targets_;
};

enum class StepOutcome {
  Accepted,
  /// The epoch ran but left the parameters unchanged (scaled CG rejection, gdx rollback).
  Rejected,
  MuOverflow,
  NoProgress,
};

/// One call = one epoch. Optimizers may cache loss/gradient at `theta`
/// between calls, so `theta` must only be modified through `step`.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual StepOutcome step(Vector& theta) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg, Objective& objective);

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double loss = 0.0;
};

/// Backtracking search with quadratic then cubic interpolation on
/// phi(alpha) = loss(theta + alpha * dir). Accepts on sufficient decrease
/// (c1 = 1e-4); expands by doubling while the first trial keeps improving.
/// At most 20 loss evaluations.
LineSearchResult line_search(Objective& objective, const Vector& theta, double loss0,
                             double slope, const Vector& dir, double alpha0);

}  // namespace sevnet::mlp::detail
