#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sevnet/error.hpp"
#include "sevnet/mlp.hpp"

using namespace sevnet;
using namespace sevnet::mlp;
using sevnet::testing::finite_difference_gradient;
using sevnet::testing::max_relative_error;
using sevnet::testing::random_dataset;
using sevnet::testing::random_matrix;

namespace {

MlpNetwork one_one_one() {
  MlpNetwork n = make_network(Shape{1, 1, 1}, TransferFn::LogSigmoid, TransferFn::Linear);
  n.w1(0, 0) = 1.0;
  n.w2(0, 0) = 1.0;
  return n;
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

data::SplitIndices contiguous_split(std::size_t n_train, std::size_t n_val, std::size_t n_test) {
  data::SplitIndices s;
  std::size_t i = 0;
  for (; i < n_train; ++i) s.train.push_back(i);
  for (; i < n_train + n_val; ++i) s.val.push_back(i);
  for (; i < n_train + n_val + n_test; ++i) s.test.push_back(i);
  return s;
}

/// Targets from a fixed smooth function so training has something to learn.
data::Dataset smooth_dataset(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  data::Dataset ds = random_dataset(rng, n);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    const auto x = ds.features.row(i);
    ds.targets(i, 0) = std::tanh(x(0) + 0.5 * x(1));
    ds.targets(i, 1) = 0.3 * x(2) * x(3);
    ds.targets(i, 2) = std::sin(x(4)) - 0.2 * x(5);
  }
  return ds;
}

}  // namespace

TEST_SUITE("mlp") {
  TEST_CASE("transfer functions: hand values") {
    CHECK(transfer(TransferFn::LogSigmoid, 0.0) == 0.5);
    CHECK(transfer(TransferFn::HyperbolicTangentSigmoid, 0.0) == 0.0);
    CHECK(transfer(TransferFn::Linear, 3.7) == 3.7);
    CHECK(transfer_deriv(TransferFn::LogSigmoid, 0.0) == 0.25);
    CHECK(transfer_deriv(TransferFn::HyperbolicTangentSigmoid, 0.0) == 1.0);
    CHECK(transfer(TransferFn::HyperbolicTangentSigmoid, 0.7) == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
  }

  TEST_CASE("transfer derivatives match central differences") {
    for (TransferFn f : kAllTransferFns) {
      for (double n = -4.0; n <= 4.0; n += 0.25) {
        const double h = 1e-6;
        const double fd = (transfer(f, n + h) - transfer(f, n - h)) / (2 * h);
        CHECK(std::abs(fd - transfer_deriv(f, n)) < 1e-6);
      }
    }
  }

  TEST_CASE("toolbox names") {
    CHECK(alias(TransferFn::HyperbolicTangentSigmoid) == "tansig");
    CHECK(parse_transfer("LOGSIG") == TransferFn::LogSigmoid);
    CHECK(parse_transfer("purelin") == TransferFn::Linear);
    CHECK_FALSE(parse_transfer("relu").has_value());
    CHECK(alias(TrainAlgorithm::ScaledConjugateGradient) == "trainscg");
    for (TrainAlgorithm a : kAllAlgorithms) CHECK(parse_algorithm(alias(a)) == a);
    CHECK(parse_algorithm("Trainseg") == TrainAlgorithm::ScaledConjugateGradient);
    CHECK(parse_algorithm("lm") == TrainAlgorithm::LevenbergMarquardt);
    CHECK_FALSE(parse_algorithm("traingda").has_value());
  }

  TEST_CASE("init_network: counting, bounds, determinism") {
    SeededRng a(5);
    SeededRng b(5);
    const Shape shape{6, 8, 3};
    const auto n1 = init_network(shape, TransferFn::LogSigmoid, TransferFn::Linear, a);
    const auto n2 = init_network(shape, TransferFn::LogSigmoid, TransferFn::Linear, b);
    CHECK(n1 == n2);
    CHECK(n1.param_count() == 83);
    CHECK(n1.params().allFinite());
    CHECK(n1.w1.cwiseAbs().maxCoeff() <= 0.5 / std::sqrt(6.0));
    CHECK(n1.w2.cwiseAbs().maxCoeff() <= 0.5 / std::sqrt(8.0));
    CHECK(n1.w1.cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("params round trip in documented order") {
    SeededRng rng(1);
    auto net = init_network(Shape{2, 3, 2}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    const Vector theta = net.params();
    CHECK(theta[1] == net.w1(0, 1));  // row-major W1
    CHECK(theta[6] == net.b1[0]);
    CHECK(theta[9] == net.w2(0, 0));
    CHECK(theta[15] == net.b2[0]);
    net.set_params(Vector::Zero(theta.size()));
    net.set_params(theta);
    CHECK(net.params() == theta);
    CHECK_THROWS_AS(net.set_params(Vector::Zero(3)), Error);
  }

  TEST_CASE("forward: hand values") {
    const auto zero_lin = make_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear);
    CHECK(forward(zero_lin, Vector::Ones(6)).output == Vector::Zero(3));
    const auto zero_log = make_network(Shape{}, TransferFn::LogSigmoid, TransferFn::LogSigmoid);
    CHECK(forward(zero_log, Vector::Ones(6)).output == Vector::Constant(3, 0.5));
    const auto r = forward(one_one_one(), Vector::Zero(1));
    CHECK(r.output[0] == 0.5);
    CHECK(r.hidden[0] == 0.5);
  }

  TEST_CASE("predict_batch agrees with forward row by row") {
    SeededRng rng(2);
    const auto net = init_network(Shape{}, TransferFn::HyperbolicTangentSigmoid, TransferFn::LogSigmoid, rng);
    const Matrix x = random_matrix(rng, 10, 6);
    const Matrix y = predict_batch(net, x);
    for (Eigen::Index i = 0; i < 10; ++i) {
      CHECK((y.row(i).transpose() - forward(net, x.row(i).transpose()).output).norm() < 1e-15);
    }
  }

  TEST_CASE("backprop: 1-1-1 hand gradient") {
    const Vector g = backprop_gradient(one_one_one(), scalar(0.0), scalar(0.0));
    // Order: w1, b1, w2, b2.
    CHECK(g[0] == 0.0);
    CHECK(g[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(g[2] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g[3] == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("backprop: zero at an exact fit") {
    SeededRng rng(3);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    const Matrix x = random_matrix(rng, 5, 6);
    CHECK(backprop_gradient(net, x, predict_batch(net, x)).norm() == 0.0);
  }

  TEST_CASE("backprop: errors") {
    const auto net = make_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear);
    try {
      backprop_gradient(net, Matrix(0, 6), Matrix(0, 3));
      FAIL("expected EmptyBatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyBatch);
    }
    CHECK_THROWS_AS(backprop_gradient(net, Matrix::Zero(2, 5), Matrix::Zero(2, 3)), Error);
    CHECK_THROWS_AS(backprop_gradient(net, Matrix::Zero(2, 6), Matrix::Zero(3, 3)), Error);
  }

  TEST_CASE("backprop matches central differences on random networks") {
    SeededRng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t hidden = 3 + rng.below(11);
      const TransferFn fh = kAllTransferFns[rng.below(3)];
      const TransferFn fo = kAllTransferFns[rng.below(3)];
      const auto net = init_network(Shape{6, hidden, 3}, fh, fo, rng);
      const Matrix x = random_matrix(rng, 20, 6);
      const Matrix t = random_matrix(rng, 20, 3, 0.0, 1.0);
      const Vector g = backprop_gradient(net, x, t);
      const Vector fd = finite_difference_gradient(net, x, t);
      CHECK(max_relative_error(g, fd, 1e-3 * g.cwiseAbs().maxCoeff()) < 1e-6);
    }
  }

  TEST_CASE("jacobian: shape and consistency with backprop") {
    SeededRng rng(6);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    const auto one = jacobian(net, random_matrix(rng, 1, 6), random_matrix(rng, 1, 3));
    CHECK(one.jacobian.rows() == 3);
    CHECK(one.jacobian.cols() == 83);
    const Matrix x = random_matrix(rng, 15, 6);
    const Matrix t = random_matrix(rng, 15, 3);
    const auto jr = jacobian(net, x, t);
    CHECK(jr.errors.size() == 45);
    CHECK(jr.errors[4] == doctest::Approx(t(1, 1) - predict_batch(net, x)(1, 1)).epsilon(1e-15));
    const Vector via_j = 2.0 * jr.jacobian.transpose() * jr.errors / 45.0;
    CHECK((via_j - backprop_gradient(net, x, t)).norm() < 1e-10);
  }

  TEST_CASE("jacobian of a linear network is linear in each layer") {
    // For Linear/Linear the output-layer columns do not depend on (W2, b2)
    // and the hidden-layer columns do not depend on (W1, b1).
    SeededRng rng(7);
    auto a = init_network(Shape{}, TransferFn::Linear, TransferFn::Linear, rng);
    auto b = a;
    const Matrix x = random_matrix(rng, 8, 6);
    const Matrix t = random_matrix(rng, 8, 3);
    b.w2 = random_matrix(rng, 3, 8);
    b.b2 = random_matrix(rng, 3, 1).col(0);
    const Eigen::Index first_layer = 6 * 8 + 8;
    CHECK(jacobian(a, x, t).jacobian.rightCols(83 - first_layer) ==
          jacobian(b, x, t).jacobian.rightCols(83 - first_layer));
    auto c = a;
    c.w1 = random_matrix(rng, 8, 6);
    c.b1 = random_matrix(rng, 8, 1).col(0);
    CHECK(jacobian(a, x, t).jacobian.leftCols(first_layer) == jacobian(c, x, t).jacobian.leftCols(first_layer));
  }

  TEST_CASE("train: huge goal stops immediately") {
    const auto ds = smooth_dataset(40, 1);
    SeededRng rng(1);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    TrainConfig cfg;
    cfg.goal_mse = 1e300;
    const auto res = train(net, ds, contiguous_split(28, 6, 6), cfg);
    CHECK(res.record.stop_reason == StopReason::GoalMet);
    CHECK(res.record.epochs.size() == 1);
    CHECK(res.network == net);
  }

  TEST_CASE("train: rising validation curve triggers a validation stop at the best epoch") {
    const auto ds = smooth_dataset(40, 2);
    SeededRng rng(2);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    TrainConfig cfg;
    cfg.algorithm = TrainAlgorithm::GradientDescent;
    cfg.patience = 4;
    // Improves until epoch 3, then rises.
    const std::vector<double> curve{1.0, 0.8, 0.6, 0.5, 0.55, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1};
    Vector theta_at_3;
    auto hook = [&](const MlpNetwork& n, std::size_t epoch) {
      if (epoch == 3) theta_at_3 = n.params();
      return curve.at(epoch);
    };
    const auto res = train(net, ds, contiguous_split(28, 6, 6), cfg, hook);
    CHECK(res.record.stop_reason == StopReason::ValidationStop);
    CHECK(res.record.best_epoch == 3);
    CHECK(res.record.epochs.size() == 3 + 4 + 1);
    CHECK(res.network.params() == theta_at_3);
  }

  TEST_CASE("train: returned weights reproduce the best validation MSE") {
    const auto ds = smooth_dataset(80, 3);
    const auto split = contiguous_split(56, 12, 12);
    for (TrainAlgorithm alg : kAllAlgorithms) {
      CAPTURE(alias(alg));
      SeededRng rng(3);
      const auto net = init_network(Shape{6, 5, 3}, TransferFn::HyperbolicTangentSigmoid, TransferFn::Linear, rng);
      TrainConfig cfg;
      cfg.algorithm = alg;
      cfg.max_epochs = 60;
      const auto res = train(net, ds, split, cfg);
      const auto& rec = res.record;
      double min_val = 1e300;
      for (const auto& e : rec.epochs) min_val = std::min(min_val, e.val_mse);
      CHECK(rec.epochs[rec.best_epoch].val_mse == min_val);
      const auto [xv, tv] = sevnet::testing::rows(ds, split.val);
      CHECK(batch_mse(res.network, xv, tv) == rec.epochs[rec.best_epoch].val_mse);
      CHECK(rec.epochs.back().train_mse <= rec.epochs.front().train_mse * 1.5);
      CHECK(res.network.params().allFinite());
    }
  }

  TEST_CASE("train: every algorithm lowers the training error") {
    const auto ds = smooth_dataset(80, 4);
    const auto split = contiguous_split(56, 12, 12);
    for (TrainAlgorithm alg : kAllAlgorithms) {
      CAPTURE(alias(alg));
      SeededRng rng(4);
      const auto net = init_network(Shape{6, 5, 3}, TransferFn::HyperbolicTangentSigmoid, TransferFn::Linear, rng);
      TrainConfig cfg;
      cfg.algorithm = alg;
      cfg.max_epochs = 200;
      cfg.patience = 1000;
      cfg.learning_rate = 0.1;
      const auto res = train(net, ds, split, cfg);
      double min_train = 1e300;
      for (const auto& e : res.record.epochs) min_train = std::min(min_train, e.train_mse);
      CHECK(min_train < 0.8 * res.record.epochs.front().train_mse);
    }
  }

  TEST_CASE("train: Levenberg-Marquardt reaches the least-squares optimum on a linear task") {
    SeededRng rng(5);
    const std::size_t n = 200;
    data::Dataset ds = random_dataset(rng, n);
    const Matrix w = random_matrix(rng, 6, 3);
    ds.targets = ds.features * w + 0.1 * random_matrix(rng, static_cast<Eigen::Index>(n), 3);
    ds.targets.rowwise() += Eigen::RowVector3d(0.3, -0.2, 0.1);
    data::SplitIndices split;
    for (std::size_t i = 0; i < n; ++i) split.train.push_back(i);
    split.val = {0};
    Matrix a(static_cast<Eigen::Index>(n), 7);
    a << ds.features, Matrix::Ones(static_cast<Eigen::Index>(n), 1);
    const Matrix coef = linalg::solve_least_squares(a, ds.targets);
    const double optimum = (a * coef - ds.targets).squaredNorm() / static_cast<double>(n * 3);

    const auto net = init_network(Shape{6, 8, 3}, TransferFn::Linear, TransferFn::Linear, rng);
    TrainConfig cfg;
    cfg.max_epochs = 5;
    cfg.patience = 100;
    auto hook = [](const MlpNetwork&, std::size_t epoch) { return -static_cast<double>(epoch); };
    const auto res = train(net, ds, split, cfg, hook);
    CHECK(res.record.epochs.size() <= 6);
    CHECK(res.record.epochs.back().train_mse - optimum < 1e-8);
    CHECK(res.record.epochs.back().train_mse >= optimum - 1e-12);
  }

  TEST_CASE("train: accepted Levenberg-Marquardt steps strictly decrease the training MSE") {
    const auto ds = smooth_dataset(80, 6);
    SeededRng rng(6);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    TrainConfig cfg;
    cfg.max_epochs = 100;
    cfg.patience = 1000;
    const auto res = train(net, ds, contiguous_split(56, 12, 12), cfg);
    for (std::size_t e = 1; e < res.record.epochs.size(); ++e) {
      CHECK(res.record.epochs[e].train_mse < res.record.epochs[e - 1].train_mse);
    }
  }

  TEST_CASE("train: GD with momentum 0 follows the GD trajectory exactly") {
    const auto ds = smooth_dataset(60, 7);
    SeededRng rng(7);
    const auto net = init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, rng);
    TrainConfig gd;
    gd.algorithm = TrainAlgorithm::GradientDescent;
    gd.max_epochs = 50;
    gd.patience = 1000;
    TrainConfig gdm = gd;
    gdm.algorithm = TrainAlgorithm::GdMomentum;
    gdm.momentum = 0.0;
    const auto split = contiguous_split(40, 10, 10);
    std::vector<Vector> path_gd;
    std::vector<Vector> path_gdm;
    train(net, ds, split, gd, [&](const MlpNetwork& n, std::size_t) {
      path_gd.push_back(n.params());
      return 1.0;
    });
    train(net, ds, split, gdm, [&](const MlpNetwork& n, std::size_t) {
      path_gdm.push_back(n.params());
      return 1.0;
    });
    REQUIRE(path_gd.size() == 51);
    CHECK(path_gd == path_gdm);
  }

  TEST_CASE("train: deterministic") {
    const auto ds = smooth_dataset(60, 8);
    const auto split = contiguous_split(40, 10, 10);
    for (TrainAlgorithm alg : kAllAlgorithms) {
      SeededRng a(8);
      SeededRng b(8);
      TrainConfig cfg;
      cfg.algorithm = alg;
      cfg.max_epochs = 30;
      const auto r1 = train(init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, a), ds, split, cfg);
      const auto r2 = train(init_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear, b), ds, split, cfg);
      CHECK(r1.record == r2.record);
      CHECK(r1.network == r2.network);
    }
  }

  TEST_CASE("train: configuration and divergence errors") {
    const auto ds = smooth_dataset(40, 9);
    const auto split = contiguous_split(28, 6, 6);
    const auto net = make_network(Shape{}, TransferFn::LogSigmoid, TransferFn::Linear);
    auto code = [&](TrainConfig cfg, const data::SplitIndices& s) {
      try {
        train(net, ds, s, cfg);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    TrainConfig bad;
    bad.momentum = 1.0;
    CHECK(code(bad, split) == ErrorCode::ConfigError);
    bad = {};
    bad.lm_mu_inc = 1.0;
    CHECK(code(bad, split) == ErrorCode::ConfigError);
    bad = {};
    bad.learning_rate = 0.0;
    CHECK(code(bad, split) == ErrorCode::ConfigError);
    CHECK(code(TrainConfig{}, contiguous_split(28, 0, 6)) == ErrorCode::ConfigError);

    SeededRng rng(9);
    const auto live = init_network(Shape{}, TransferFn::Linear, TransferFn::Linear, rng);
    TrainConfig wild;
    wild.algorithm = TrainAlgorithm::GradientDescent;
    wild.learning_rate = 1e6;
    wild.patience = 1000;
    try {
      train(live, ds, split, wild);
      FAIL("expected divergence");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonFiniteLoss);
    }
  }

  TEST_CASE("predict_class: argmax with ties toward higher severity") {
    CHECK(predict_class(Vector((Vector(3) << 0.9, 0.2, 0.1).finished())) == data::Severity::High);
    CHECK(predict_class(Vector((Vector(3) << 0.1, 0.1, 0.8).finished())) == data::Severity::Low);
    CHECK(predict_class(Vector((Vector(3) << 0.5, 0.5, 0.2).finished())) == data::Severity::High);
    CHECK(predict_class(Vector((Vector(3) << 0.1, 0.5, 0.5).finished())) == data::Severity::Medium);
  }
}
