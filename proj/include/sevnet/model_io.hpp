#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sevnet/dataset.hpp"
#include "sevnet/grnn.hpp"
#include "sevnet/metrics.hpp"
#include "sevnet/mlp.hpp"
#include "sevnet/rbfnn.hpp"

namespace sevnet::io {

inline constexpr int kFormatVersion = 1;

enum class ModelFamily { Mlp, Rbf, Grnn };

/// "MLP", "RBFNN", "GRNN".
std::string_view to_string(ModelFamily f);
std::optional<ModelFamily> parse_family(std::string_view name);

using Model = std::variant<mlp::MlpNetwork, rbf::RbfNetwork, grnn::GrnnModel>;

ModelFamily family_of(const Model& m);

struct PartitionMetrics {
  std::string partition;  // "train", "val", "test"
  metrics::MetricsReport report;
};

/// How the model was trained, enough to replay its evaluation.
struct TrainingMeta {
  std::uint64_t seed = 0;
  std::optional<int> cutoff_year;
  data::DivideFn divide = data::DivideFn::Random;
  data::DivideRatios ratios;
  /// Row indices into the (post-holdout) training table.
  data::SplitIndices split;
  std::size_t n_rows = 0;
  /// FNV-1a over the encoded feature and target values of that table.
  std::uint64_t data_fingerprint = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<PartitionMetrics> metrics;
  std::optional<mlp::TrainRecord> train_record;
};

struct ModelFile {
  int format_version = kFormatVersion;
  Model model;
  data::NormalizationParams normalizer;
  std::vector<std::string> variety_vocab;
  TrainingMeta meta;
};

std::uint64_t fingerprint(const data::Dataset& ds);

nlohmann::json to_json(const ModelFile& m);
/// SchemaError for missing or ill-shaped fields, VersionError for an unknown format_version.
ModelFile from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const ModelFile& m);
/// Adds IoError (unreadable) and ParseError (not JSON) to from_json's errors.
ModelFile load_model(const std::filesystem::path& path);

/// Raw outputs for rows that are already normalized with the model's normalizer.
Matrix predict(const Model& m, const Matrix& normalized_inputs);

/// Encodes with the stored vocabulary (VocabularyError on unknown varieties),
/// normalizes with the stored parameters and predicts.
Matrix predict_records(const ModelFile& m, const std::vector<data::RawRecord>& records);

/// Encoded, normalized table under the model's vocabulary and normalizer.
data::Dataset prepare(const ModelFile& m, const std::vector<data::RawRecord>& records);

}  // namespace sevnet::io
