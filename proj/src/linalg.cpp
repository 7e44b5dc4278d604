#include "sevnet/linalg.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace sevnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::OverlapError: return "OverlapError";
    case ErrorCode::CoverageError: return "CoverageError";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPositiveSpread: return "NonPositiveSpread";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateTargets: return "DegenerateTargets";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::VocabularyError: return "VocabularyError";
    case ErrorCode::VersionError: return "VersionError";
  }
  return "Unknown";
}

namespace {
std::string format_error(ErrorCode code, const std::string& message,
                         std::optional<std::size_t> row) {
  std::ostringstream os;
  os << to_string(code);
  if (row) os << " (row " << *row << ")";
  os << ": " << message;
  return os.str();
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> row)
    : std::runtime_error(format_error(code, message, row)), code_(code), row_(row) {}

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::InvalidArgument, "SeededRng::below: bound must be positive");
  // Reject the top partial bucket so every residue is equally likely.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

double SeededRng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace linalg {

Matrix solve_least_squares(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_least_squares: A has " +
                                                  std::to_string(a.rows()) + " rows, B has " +
                                                  std::to_string(b.rows()));
  }
  if (a.rows() < 1 || a.cols() < 1) {
    throw Error(ErrorCode::DimensionMismatch, "solve_least_squares: empty system");
  }
  const Eigen::MatrixXd a_col = a;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_col);
  if (qr.rank() == a.cols()) {
    return qr.solve(Eigen::MatrixXd(b));
  }

  const Eigen::MatrixXd ata = a_col.transpose() * a_col;
  const double n = static_cast<double>(a.cols());
  const double ridge = 1e-10 * ata.trace() / n;
  if (!(ridge > 0.0) || !std::isfinite(ridge)) {
    throw Error(ErrorCode::SingularSystem, "solve_least_squares: A is zero or non-finite");
  }
  Eigen::MatrixXd reg = ata;
  reg.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorCode::SingularSystem, "solve_least_squares: ridge-regularized system failed");
  }
  Matrix x = ldlt.solve(a_col.transpose() * Eigen::MatrixXd(b));
  if (!x.allFinite()) {
    throw Error(ErrorCode::SingularSystem, "solve_least_squares: non-finite solution");
  }
  return x;
}

Vector solve_damped_normal(const Matrix& j, const Vector& e, double mu) {
  if (j.rows() != e.size()) {
    throw Error(ErrorCode::DimensionMismatch, "solve_damped_normal: J has " +
                                                  std::to_string(j.rows()) + " rows, e has " +
                                                  std::to_string(e.size()));
  }
  if (!(mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "solve_damped_normal: mu must be > 0");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(j.cols(), j.cols());
  h.selfadjointView<Eigen::Lower>().rankUpdate(j.transpose());
  h.diagonal().array() += mu;
  const Vector g = j.transpose() * e;
  // LLT reads only the lower triangle filled by rankUpdate.
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "solve_damped_normal: damped system not positive definite");
  }
  return llt.solve(g);
}

IndexList rand_permutation(SeededRng& rng, std::size_t n) {
  IndexList perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto k = static_cast<std::size_t>(rng.below(i));
    std::swap(perm[i - 1], perm[k]);
  }
  return perm;
}

}  // namespace linalg
}  // namespace sevnet
