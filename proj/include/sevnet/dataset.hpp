#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sevnet/linalg.hpp"

namespace sevnet::data {

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::size_t kNumClasses = 3;
using FeatureRow = std::array<double, kNumFeatures>;

/// Header of the dataset CSV, in column order.
inline constexpr std::string_view kCsvHeader =
    "year,rainfall_mm,tmax_c,tmin_c,tavg_c,rh_pct,variety,severity";

/// Severity classes. One-hot position: High -> 0, Medium -> 1, Low -> 2.
enum class Severity { Low, Medium, High };

std::string_view to_string(Severity s);
/// Case-insensitive parse of "low" / "medium" / "high".
std::optional<Severity> parse_severity(std::string_view text);
std::size_t one_hot_position(Severity s);
Severity severity_at_position(std::size_t position);

struct RawRecord {
  int year = 0;
  double rainfall = 0.0;      // mm
  double tmax = 0.0;          // deg C
  double tmin = 0.0;          // deg C
  double tavg = 0.0;          // deg C
  double rel_humidity = 0.0;  // percent
  std::string variety;
  Severity severity = Severity::Low;

  bool operator==(const RawRecord&) const = default;
};

/// Throws RangeError (with `row` if given) when a record breaks the physical invariants.
void validate(const RawRecord& r, std::optional<std::size_t> row = std::nullopt);

struct NormalizationParams {
  FeatureRow min{};
  FeatureRow max{};

  bool is_constant(std::size_t feature) const { return max[feature] == min[feature]; }
};

/// Encoded table. Feature columns: rainfall, tmax, tmin, tavg, rh, variety code.
/// `normalizer` is set once the features have been mapped to [-1, 1].
struct Dataset {
  Matrix features;
  Matrix targets;
  std::vector<std::string> variety_vocab;
  std::optional<NormalizationParams> normalizer;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

struct SplitIndices {
  IndexList train;
  IndexList val;
  IndexList test;

  bool operator==(const SplitIndices&) const = default;
};

struct DivideRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

/// Dataset division rule: random permutation or contiguous index blocks.
enum class DivideFn { Random, Index };

std::string_view to_string(DivideFn d);
/// Accepts "dividerand"/"rand" and "divideind"/"ind".
std::optional<DivideFn> parse_divide(std::string_view name);

std::vector<RawRecord> load_csv(const std::filesystem::path& path);
std::vector<RawRecord> read_csv(std::istream& in);
/// Like read_csv, but the severity column may be omitted (severity is then
/// left at its default and must not be used).
std::vector<RawRecord> read_feature_csv(std::istream& in);
void write_csv(std::ostream& out, const std::vector<RawRecord>& records);
void save_csv(const std::filesystem::path& path, const std::vector<RawRecord>& records);

/// Builds the variety vocabulary by first appearance and one-hot encodes severity.
Dataset encode(const std::vector<RawRecord>& records);
/// Encodes against a fixed vocabulary; an unknown variety is a VocabularyError.
Dataset encode(const std::vector<RawRecord>& records, const std::vector<std::string>& vocab);
/// Unnormalized feature row for one record under `vocab`.
FeatureRow feature_row(const RawRecord& r, const std::vector<std::string>& vocab);

NormalizationParams fit_normalizer(const Dataset& ds, const IndexList& train_idx);
FeatureRow normalize(const FeatureRow& x, const NormalizationParams& p);
FeatureRow denormalize(const FeatureRow& y, const NormalizationParams& p);
/// Copy of `ds` with every feature row normalized by `p`.
Dataset apply_normalizer(const Dataset& ds, const NormalizationParams& p);

/// Row subset, keeping vocabulary and normalizer.
Dataset subset(const Dataset& ds, const IndexList& rows);

SplitIndices split_random(std::size_t n, const DivideRatios& ratios, SeededRng& rng);
SplitIndices split_by_index(IndexList train, IndexList val, IndexList test, std::size_t n);
/// Contiguous blocks in row order using the same sizes as split_random.
SplitIndices split_blocks(std::size_t n, const DivideRatios& ratios);

SplitIndices divide(DivideFn fn, std::size_t n, const DivideRatios& ratios, SeededRng& rng);

/// Returns `ds` unchanged if it already carries a normalizer; otherwise fits
/// one on `split.train` and applies it to every row.
Dataset normalize_for_split(const Dataset& ds, const SplitIndices& split);

std::pair<std::vector<RawRecord>, std::vector<RawRecord>> chronological_holdout(
    const std::vector<RawRecord>& records, int cutoff_year);

}  // namespace sevnet::data
