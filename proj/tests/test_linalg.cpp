#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "sevnet/error.hpp"
#include "sevnet/linalg.hpp"

using namespace sevnet;
using sevnet::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("least squares: hand-solved systems") {
    CHECK(linalg::solve_least_squares(Matrix::Identity(2, 2), mat({{3}, {4}})).isApprox(mat({{3}, {4}}), 1e-14));
    // The mean minimizes squared error.
    CHECK(linalg::solve_least_squares(mat({{1}, {1}}), mat({{1}, {3}}))(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    const Matrix x = linalg::solve_least_squares(mat({{1, 0}, {0, 1}, {1, 1}}), mat({{1}, {1}, {2}}));
    CHECK(x(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x(1, 0) == doctest::Approx(1.0).epsilon(1e-13));
  }

  TEST_CASE("least squares: scanning x confirms the mean is optimal") {
    const Matrix a = mat({{1}, {1}});
    const Matrix b = mat({{1}, {3}});
    const double x = linalg::solve_least_squares(a, b)(0, 0);
    const double best = (a * x - b).squaredNorm();
    for (double probe = -5.0; probe <= 5.0; probe += 0.01) {
      CHECK((a * probe - b).squaredNorm() >= best - 1e-12);
    }
  }

  TEST_CASE("least squares: errors") {
    CHECK_THROWS_AS(linalg::solve_least_squares(Matrix::Identity(2, 2), Matrix::Zero(3, 1)), Error);
    try {
      linalg::solve_least_squares(Matrix::Identity(2, 2), Matrix::Zero(3, 1));
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    try {
      linalg::solve_least_squares(Matrix::Zero(3, 2), Matrix::Ones(3, 1));
      FAIL("zero matrix must not be solvable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SingularSystem);
    }
  }

  TEST_CASE("least squares: rank-deficient systems fall back to a small ridge") {
    // Duplicate columns: any split of the weight works; the residual must still be minimal.
    const Matrix a = mat({{1, 1}, {2, 2}, {3, 3}});
    const Matrix b = mat({{1}, {2}, {3.5}});
    const Matrix x = linalg::solve_least_squares(a, b);
    const Matrix a1 = a.leftCols(1);
    const Matrix x1 = linalg::solve_least_squares(a1, b);
    CHECK((a * x - b).norm() == doctest::Approx((a1 * x1 - b).norm()).epsilon(1e-6));
  }

  TEST_CASE("least squares: residual orthogonality and local optimality") {
    SeededRng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix a = random_matrix(rng, 30, 5);
      const Matrix b = random_matrix(rng, 30, 2);
      const Matrix x = linalg::solve_least_squares(a, b);
      CHECK((a.transpose() * (a * x - b)).norm() <= 1e-8 * (a.transpose() * b).norm());
      const double base = (a * x - b).norm();
      for (int p = 0; p < 100; ++p) {
        const Matrix xp = x + random_matrix(rng, 5, 2, -1e-3, 1e-3);
        CHECK(base <= (a * xp - b).norm() + 1e-9);
      }
    }
  }

  TEST_CASE("damped normal equations: hand-solved systems") {
    const Vector e = (Vector(2) << 2, 4).finished();
    CHECK(linalg::solve_damped_normal(Matrix::Identity(2, 2), e, 1.0).isApprox((Vector(2) << 1, 2).finished(), 1e-14));
    CHECK(linalg::solve_damped_normal(Matrix::Identity(2, 2), e, 1e-12).isApprox(e, 1e-10));
    const Vector d = linalg::solve_damped_normal(mat({{1}, {1}}), (Vector(2) << 1, 3).finished(), 2.0);
    CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("damped normal equations: errors") {
    try {
      linalg::solve_damped_normal(Matrix::Identity(2, 2), Vector::Ones(3), 1.0);
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DimensionMismatch);
    }
    try {
      linalg::solve_damped_normal(Matrix::Identity(2, 2), Vector::Ones(2), 0.0);
      FAIL("expected InvalidArgument");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidArgument);
    }
  }

  TEST_CASE("damped normal equations approach least squares as mu vanishes") {
    SeededRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix j = random_matrix(rng, 40, 6);
      const Vector e = random_matrix(rng, 40, 1).col(0);
      const Vector d = linalg::solve_damped_normal(j, e, 1e-12);
      const Vector ls = linalg::solve_least_squares(j, Matrix(e)).col(0);
      CHECK((d - ls).norm() <= 1e-6 * ls.norm());
    }
  }

  TEST_CASE("rand_permutation: small cases and determinism") {
    SeededRng a(42);
    CHECK(linalg::rand_permutation(a, 0).empty());
    CHECK(linalg::rand_permutation(a, 1) == IndexList{0});
    SeededRng r1(42);
    SeededRng r2(42);
    CHECK(linalg::rand_permutation(r1, 5) == linalg::rand_permutation(r2, 5));
  }

  TEST_CASE("rand_permutation contains each index once for n <= 1000") {
    SeededRng rng(9);
    for (std::size_t n = 0; n <= 1000; ++n) {
      IndexList p = linalg::rand_permutation(rng, n);
      std::sort(p.begin(), p.end());
      IndexList expected(n);
      std::iota(expected.begin(), expected.end(), std::size_t{0});
      REQUIRE(p == expected);
    }
  }

  TEST_CASE("SeededRng is the standard 64-bit Mersenne Twister") {
    // The C++ standard fixes the 10000th draw of mt19937_64 seeded with 5489.
    SeededRng rng(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next_u64();
    CHECK(v == 9981545732273789042ull);
  }

  TEST_CASE("SeededRng conversions stay in range") {
    SeededRng rng(1);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      CHECK((u >= 0.0 && u < 1.0));
      CHECK(rng.below(7) < 7u);
      const double z = rng.normal();
      sum += z;
      sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.05);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
  }
}
