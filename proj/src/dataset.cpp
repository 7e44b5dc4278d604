#include "sevnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sevnet/text.hpp"

namespace sevnet::data {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Low: return "low";
    case Severity::Medium: return "medium";
    case Severity::High: return "high";
  }
  return "low";
}

std::optional<Severity> parse_severity(std::string_view text) {
  const std::string lower = text::to_lower(text::trim(text));
  if (lower == "low") return Severity::Low;
  if (lower == "medium") return Severity::Medium;
  if (lower == "high") return Severity::High;
  return std::nullopt;
}

std::size_t one_hot_position(Severity s) {
  switch (s) {
    case Severity::High: return 0;
    case Severity::Medium: return 1;
    case Severity::Low: return 2;
  }
  return 2;
}

Severity severity_at_position(std::size_t position) {
  switch (position) {
    case 0: return Severity::High;
    case 1: return Severity::Medium;
    case 2: return Severity::Low;
    default: throw Error(ErrorCode::InvalidArgument, "severity position out of range");
  }
}

void validate(const RawRecord& r, std::optional<std::size_t> row) {
  auto fail = [&](const std::string& what) { throw Error(ErrorCode::RangeError, what, row); };
  for (double v : {r.rainfall, r.tmax, r.tmin, r.tavg, r.rel_humidity}) {
    if (!std::isfinite(v)) fail("non-finite value");
  }
  if (r.rainfall < 0.0) fail("rainfall must be >= 0, got " + text::format_double(r.rainfall));
  if (r.rel_humidity < 0.0 || r.rel_humidity > 100.0) {
    fail("relative humidity must be in [0,100], got " + text::format_double(r.rel_humidity));
  }
  if (!(r.tmin <= r.tavg && r.tavg <= r.tmax)) {
    fail("temperatures must satisfy tmin <= tavg <= tmax");
  }
  if (r.variety.empty()) fail("empty variety label");
}

namespace {

// Reads the dataset schema; with `severity_optional` the trailing severity
// column may be absent (records then carry Severity::Low as a placeholder).
std::vector<RawRecord> read_table(std::istream& in, bool severity_optional) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Tolerate a UTF-8 byte-order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

  auto expected = text::split(kCsvHeader, ',');
  const auto header = text::split(line, ',');
  if (severity_optional && header.size() + 1 == expected.size()) expected.pop_back();
  const bool has_severity = expected.size() == kNumFeatures + 2;
  if (header.size() != expected.size()) {
    throw Error(ErrorCode::SchemaError, "expected " + std::to_string(expected.size()) +
                                            " columns (" + std::string(kCsvHeader) + "), got " +
                                            std::to_string(header.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (text::to_lower(text::trim(header[i])) != expected[i]) {
      throw Error(ErrorCode::SchemaError, "column " + std::to_string(i + 1) + " should be '" +
                                              std::string(expected[i]) + "', got '" +
                                              std::string(text::trim(header[i])) + "'");
    }
  }

  std::vector<RawRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    ++row;
    const auto f = text::split(line, ',');
    if (f.size() != expected.size()) {
      throw Error(ErrorCode::ParseError, "expected " + std::to_string(expected.size()) +
                                             " fields, got " + std::to_string(f.size()), row);
    }
    auto num = [&](std::size_t i) {
      auto v = text::parse_double(f[i]);
      if (!v) {
        throw Error(ErrorCode::ParseError, "bad number '" + std::string(f[i]) + "' in column " +
                                               std::string(expected[i]), row);
      }
      return *v;
    };
    RawRecord r;
    const auto year = text::parse_int(f[0]);
    if (!year) throw Error(ErrorCode::ParseError, "bad year '" + std::string(f[0]) + "'", row);
    r.year = static_cast<int>(*year);
    r.rainfall = num(1);
    r.tmax = num(2);
    r.tmin = num(3);
    r.tavg = num(4);
    r.rel_humidity = num(5);
    r.variety = std::string(text::trim(f[6]));
    if (has_severity) {
      const auto sev = parse_severity(f[7]);
      if (!sev) {
        throw Error(ErrorCode::ParseError, "unknown severity '" + std::string(f[7]) + "'", row);
      }
      r.severity = *sev;
    }
    validate(r, row);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

std::vector<RawRecord> read_csv(std::istream& in) { return read_table(in, false); }

std::vector<RawRecord> read_feature_csv(std::istream& in) { return read_table(in, true); }

std::vector<RawRecord> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_csv(in);
}

void write_csv(std::ostream& out, const std::vector<RawRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.year << ',' << text::format_double(r.rainfall) << ',' << text::format_double(r.tmax)
        << ',' << text::format_double(r.tmin) << ',' << text::format_double(r.tavg) << ','
        << text::format_double(r.rel_humidity) << ',' << r.variety << ',' << to_string(r.severity)
        << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const std::vector<RawRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_csv(out, records);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::vector<std::string> build_vocab(const std::vector<RawRecord>& records) {
  std::vector<std::string> vocab;
  for (const auto& r : records) {
    if (std::find(vocab.begin(), vocab.end(), r.variety) == vocab.end()) vocab.push_back(r.variety);
  }
  return vocab;
}

}  // namespace

FeatureRow feature_row(const RawRecord& r, const std::vector<std::string>& vocab) {
  const auto it = std::find(vocab.begin(), vocab.end(), r.variety);
  if (it == vocab.end()) {
    throw Error(ErrorCode::VocabularyError, "unknown variety '" + r.variety + "'");
  }
  return {r.rainfall, r.tmax, r.tmin, r.tavg, r.rel_humidity,
          static_cast<double>(std::distance(vocab.begin(), it))};
}

Dataset encode(const std::vector<RawRecord>& records, const std::vector<std::string>& vocab) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "encode: no records");
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(records.size());
  ds.features = Matrix::Zero(n, kNumFeatures);
  ds.targets = Matrix::Zero(n, kNumClasses);
  ds.variety_vocab = vocab;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const FeatureRow x = feature_row(r, vocab);
    for (std::size_t j = 0; j < kNumFeatures; ++j) ds.features(i, static_cast<Eigen::Index>(j)) = x[j];
    ds.targets(i, static_cast<Eigen::Index>(one_hot_position(r.severity))) = 1.0;
  }
  return ds;
}

Dataset encode(const std::vector<RawRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "encode: no records");
  return encode(records, build_vocab(records));
}

NormalizationParams fit_normalizer(const Dataset& ds, const IndexList& train_idx) {
  if (train_idx.empty()) throw Error(ErrorCode::EmptyInput, "fit_normalizer: empty training set");
  NormalizationParams p;
  p.min.fill(std::numeric_limits<double>::infinity());
  p.max.fill(-std::numeric_limits<double>::infinity());
  for (std::size_t idx : train_idx) {
    if (idx >= ds.size()) throw Error(ErrorCode::InvalidArgument, "fit_normalizer: index out of range");
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      const double v = ds.features(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(j));
      p.min[j] = std::min(p.min[j], v);
      p.max[j] = std::max(p.max[j], v);
    }
  }
  return p;
}

FeatureRow normalize(const FeatureRow& x, const NormalizationParams& p) {
  FeatureRow y{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    y[j] = p.is_constant(j) ? 0.0 : 2.0 * (x[j] - p.min[j]) / (p.max[j] - p.min[j]) - 1.0;
  }
  return y;
}

FeatureRow denormalize(const FeatureRow& y, const NormalizationParams& p) {
  FeatureRow x{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    x[j] = p.is_constant(j) ? p.min[j] : p.min[j] + (y[j] + 1.0) * 0.5 * (p.max[j] - p.min[j]);
  }
  return x;
}

Dataset apply_normalizer(const Dataset& ds, const NormalizationParams& p) {
  Dataset out = ds;
  for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
    FeatureRow x{};
    for (std::size_t j = 0; j < kNumFeatures; ++j) x[j] = ds.features(i, static_cast<Eigen::Index>(j));
    const FeatureRow y = normalize(x, p);
    for (std::size_t j = 0; j < kNumFeatures; ++j) out.features(i, static_cast<Eigen::Index>(j)) = y[j];
  }
  out.normalizer = p;
  return out;
}

Dataset subset(const Dataset& ds, const IndexList& rows) {
  Dataset out;
  out.variety_vocab = ds.variety_vocab;
  out.normalizer = ds.normalizer;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.features.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()), ds.targets.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= ds.size()) throw Error(ErrorCode::InvalidArgument, "subset: index out of range");
    out.features.row(static_cast<Eigen::Index>(k)) = ds.features.row(static_cast<Eigen::Index>(rows[k]));
    out.targets.row(static_cast<Eigen::Index>(k)) = ds.targets.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

namespace {

struct PartitionSizes {
  std::size_t train, val, test;
};

PartitionSizes partition_sizes(std::size_t n, const DivideRatios& r) {
  if (!(r.train > 0.0 && r.val > 0.0 && r.test > 0.0) ||
      std::abs(r.train + r.val + r.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "divide ratios must be positive and sum to 1");
  }
  // The small epsilon keeps products such as 0.15 * 20 from flooring to 2.
  const auto val = static_cast<std::size_t>(std::floor(r.val * static_cast<double>(n) + 1e-9));
  const auto test = static_cast<std::size_t>(std::floor(r.test * static_cast<double>(n) + 1e-9));
  if (n < 3 || val == 0 || test == 0 || val + test >= n) {
    throw Error(ErrorCode::TooFewRows, "cannot split " + std::to_string(n) +
                                           " rows into three non-empty partitions");
  }
  return {n - val - test, val, test};
}

}  // namespace

SplitIndices split_random(std::size_t n, const DivideRatios& ratios, SeededRng& rng) {
  const auto sizes = partition_sizes(n, ratios);
  const IndexList perm = linalg::rand_permutation(rng, n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes.train),
               perm.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

SplitIndices split_blocks(std::size_t n, const DivideRatios& ratios) {
  const auto sizes = partition_sizes(n, ratios);
  SplitIndices s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < sizes.train) s.train.push_back(i);
    else if (i < sizes.train + sizes.val) s.val.push_back(i);
    else s.test.push_back(i);
  }
  return s;
}

SplitIndices split_by_index(IndexList train, IndexList val, IndexList test, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const IndexList* part : {&train, &val, &test}) {
    for (std::size_t idx : *part) {
      if (idx >= n) {
        throw Error(ErrorCode::CoverageError, "index " + std::to_string(idx) + " outside 0.." +
                                                  std::to_string(n == 0 ? 0 : n - 1));
      }
      if (seen[idx]++ > 0) {
        throw Error(ErrorCode::OverlapError, "index " + std::to_string(idx) + " appears twice");
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (seen[i] == 0) throw Error(ErrorCode::CoverageError, "index " + std::to_string(i) + " unassigned");
  }
  return {std::move(train), std::move(val), std::move(test)};
}

std::string_view to_string(DivideFn d) {
  return d == DivideFn::Random ? "dividerand" : "divideind";
}

std::optional<DivideFn> parse_divide(std::string_view name) {
  const std::string n = text::to_lower(name);
  if (n == "dividerand" || n == "rand" || n == "random") return DivideFn::Random;
  if (n == "divideind" || n == "ind" || n == "index") return DivideFn::Index;
  return std::nullopt;
}

SplitIndices divide(DivideFn fn, std::size_t n, const DivideRatios& ratios, SeededRng& rng) {
  return fn == DivideFn::Random ? split_random(n, ratios, rng) : split_blocks(n, ratios);
}

Dataset normalize_for_split(const Dataset& ds, const SplitIndices& split) {
  if (ds.normalizer) return ds;
  return apply_normalizer(ds, fit_normalizer(ds, split.train));
}

std::pair<std::vector<RawRecord>, std::vector<RawRecord>> chronological_holdout(
    const std::vector<RawRecord>& records, int cutoff_year) {
  std::vector<RawRecord> dev;
  std::vector<RawRecord> test;
  for (const auto& r : records) (r.year <= cutoff_year ? dev : test).push_back(r);
  if (dev.empty() || test.empty()) {
    throw Error(ErrorCode::EmptyPartition,
                "cutoff year " + std::to_string(cutoff_year) + " leaves the " +
                    (dev.empty() ? std::string("development") : std::string("test")) +
                    " partition empty");
  }
  return {std::move(dev), std::move(test)};
}

}  // namespace sevnet::data
