#include "sevnet/model_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "sevnet/error.hpp"
#include "sevnet/text.hpp"

namespace sevnet::io {

using nlohmann::json;

namespace {

// JSON has no NaN; non-finite values are written as null and read back as NaN.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

[[noreturn]] void schema(const std::string& what) {
  throw Error(ErrorCode::SchemaError, "model file: " + what);
}

const json& field(const json& j, const char* key) {
  if (!j.is_object()) schema(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end()) schema(std::string("missing field '") + key + "'");
  return *it;
}

double get_double(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) schema("expected a number");
  return j.get<double>();
}

double get_double(const json& j, const char* key) { return get_double(field(j, key)); }

std::size_t get_size(const json& j) {
  if (!j.is_number_unsigned()) schema("expected a non-negative integer");
  return j.get<std::size_t>();
}

std::string get_string(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) schema(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json mat_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    a.push_back(std::move(row));
  }
  return a;
}

Vector vec_from(const json& j, std::size_t expected) {
  if (!j.is_array() || j.size() != expected) schema("vector has the wrong length");
  Vector v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) v[static_cast<Eigen::Index>(i)] = get_double(j[i]);
  return v;
}

Matrix mat_from(const json& j, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) schema("matrix has the wrong number of rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    m.row(static_cast<Eigen::Index>(r)) = vec_from(j[r], cols).transpose();
  }
  return m;
}

std::size_t rows_of(const json& j) {
  if (!j.is_array()) schema("expected a matrix");
  return j.size();
}

mlp::TransferFn transfer_from(const json& j, const char* key) {
  const auto f = mlp::parse_transfer(get_string(j, key));
  if (!f) schema(std::string("unknown transfer function in '") + key + "'");
  return *f;
}

json index_json(const IndexList& idx) { return json(idx); }

IndexList index_from(const json& j) {
  if (!j.is_array()) schema("expected an index list");
  IndexList out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(get_size(v));
  return out;
}

json metrics_json(const metrics::MetricsReport& r) {
  json rpo = json::array();
  for (double v : r.r_per_output) rpo.push_back(num(v));
  return {{"mse", num(r.mse)},   {"rmse", num(r.rmse)}, {"mae", num(r.mae)},
          {"r", num(r.r)},       {"r2", num(r.r2)},     {"n", r.n},
          {"degenerate_targets", r.degenerate_targets},
          {"r_per_output", rpo}, {"mbe", num(r.mbe)},   {"mape", num(r.mape)}};
}

metrics::MetricsReport metrics_from(const json& j) {
  metrics::MetricsReport r;
  r.mse = get_double(j, "mse");
  r.rmse = get_double(j, "rmse");
  r.mae = get_double(j, "mae");
  r.r = get_double(j, "r");
  r.r2 = get_double(j, "r2");
  r.n = get_size(field(j, "n"));
  const json& deg = field(j, "degenerate_targets");
  if (!deg.is_boolean()) schema("degenerate_targets must be a boolean");
  r.degenerate_targets = deg.get<bool>();
  const Vector rpo = vec_from(field(j, "r_per_output"), data::kNumClasses);
  for (std::size_t k = 0; k < data::kNumClasses; ++k) r.r_per_output[k] = rpo[static_cast<Eigen::Index>(k)];
  r.mbe = get_double(j, "mbe");
  r.mape = get_double(j, "mape");
  return r;
}

json record_json(const mlp::TrainRecord& rec) {
  json epochs = json::array();
  for (const auto& e : rec.epochs) {
    epochs.push_back({{"train_mse", num(e.train_mse)},
                      {"val_mse", num(e.val_mse)},
                      {"test_mse", num(e.test_mse)},
                      {"gradient_norm", num(e.gradient_norm)}});
  }
  return {{"epochs", epochs},
          {"best_epoch", rec.best_epoch},
          {"stop_reason", std::string(mlp::to_string(rec.stop_reason))}};
}

mlp::TrainRecord record_from(const json& j) {
  mlp::TrainRecord rec;
  const json& epochs = field(j, "epochs");
  if (!epochs.is_array() || epochs.empty()) schema("train record needs at least one epoch");
  for (const auto& e : epochs) {
    rec.epochs.push_back({get_double(e, "train_mse"), get_double(e, "val_mse"),
                          get_double(e, "test_mse"), get_double(e, "gradient_norm")});
  }
  rec.best_epoch = get_size(field(j, "best_epoch"));
  if (rec.best_epoch >= rec.epochs.size()) schema("best_epoch is out of range");
  const std::string reason = get_string(j, "stop_reason");
  bool found = false;
  for (auto s : {mlp::StopReason::GoalMet, mlp::StopReason::MaxEpochs, mlp::StopReason::ValidationStop,
                 mlp::StopReason::MuOverflow, mlp::StopReason::NoProgress}) {
    if (mlp::to_string(s) == reason) {
      rec.stop_reason = s;
      found = true;
    }
  }
  if (!found) schema("unknown stop_reason '" + reason + "'");
  return rec;
}

json payload_json(const Model& model) {
  if (const auto* n = std::get_if<mlp::MlpNetwork>(&model)) {
    return {{"n_in", n->n_in()},
            {"n_hidden", n->n_hidden()},
            {"n_out", n->n_out()},
            {"f_hidden", std::string(mlp::alias(n->f_hidden))},
            {"f_out", std::string(mlp::alias(n->f_out))},
            {"w1", mat_json(n->w1)},
            {"b1", vec_json(n->b1)},
            {"w2", mat_json(n->w2)},
            {"b2", vec_json(n->b2)}};
  }
  if (const auto* r = std::get_if<rbf::RbfNetwork>(&model)) {
    return {{"spread", r->spread}, {"beta", r->beta},   {"neurons", r->neurons()},
            {"centers", mat_json(r->centers)}, {"w", mat_json(r->w)}, {"b", vec_json(r->b)}};
  }
  const auto& g = std::get<grnn::GrnnModel>(model);
  return {{"sigma", g.sigma}, {"patterns", mat_json(g.patterns)}, {"targets", mat_json(g.targets)}};
}

Model payload_from(ModelFamily family, const json& p) {
  constexpr std::size_t kIn = data::kNumFeatures;
  constexpr std::size_t kOut = data::kNumClasses;
  switch (family) {
    case ModelFamily::Mlp: {
      if (get_size(field(p, "n_in")) != kIn || get_size(field(p, "n_out")) != kOut) {
        schema("MLP must have 6 inputs and 3 outputs");
      }
      const std::size_t h = get_size(field(p, "n_hidden"));
      if (h == 0) schema("MLP needs at least one hidden neuron");
      mlp::MlpNetwork n;
      n.f_hidden = transfer_from(p, "f_hidden");
      n.f_out = transfer_from(p, "f_out");
      n.w1 = mat_from(field(p, "w1"), h, kIn);
      n.b1 = vec_from(field(p, "b1"), h);
      n.w2 = mat_from(field(p, "w2"), kOut, h);
      n.b2 = vec_from(field(p, "b2"), kOut);
      return n;
    }
    case ModelFamily::Rbf: {
      rbf::RbfNetwork r;
      r.spread = get_double(p, "spread");
      if (!(r.spread > 0.0)) throw Error(ErrorCode::NonPositiveSpread, "model file: spread must be positive");
      r.beta = get_double(p, "beta");
      const std::size_t k = rows_of(field(p, "centers"));
      r.centers = mat_from(field(p, "centers"), k, kIn);
      r.w = mat_from(field(p, "w"), kOut, k);
      r.b = vec_from(field(p, "b"), kOut);
      return r;
    }
    case ModelFamily::Grnn: {
      grnn::GrnnModel g;
      g.sigma = get_double(p, "sigma");
      if (!(g.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "model file: sigma must be positive");
      const std::size_t n = rows_of(field(p, "patterns"));
      if (n == 0) schema("GRNN needs at least one stored pattern");
      g.patterns = mat_from(field(p, "patterns"), n, kIn);
      g.targets = mat_from(field(p, "targets"), n, kOut);
      return g;
    }
  }
  schema("unknown family");
}

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ull;
  }
}

}  // namespace

std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::Mlp: return "MLP";
    case ModelFamily::Rbf: return "RBFNN";
    case ModelFamily::Grnn: return "GRNN";
  }
  return "?";
}

std::optional<ModelFamily> parse_family(std::string_view name) {
  const std::string n = text::to_lower(text::trim(name));
  if (n == "mlp") return ModelFamily::Mlp;
  if (n == "rbf" || n == "rbfnn") return ModelFamily::Rbf;
  if (n == "grnn") return ModelFamily::Grnn;
  return std::nullopt;
}

ModelFamily family_of(const Model& m) { return static_cast<ModelFamily>(m.index()); }

std::uint64_t fingerprint(const data::Dataset& ds) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  fnv_mix(h, ds.size());
  for (Eigen::Index r = 0; r < ds.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) fnv_mix(h, std::bit_cast<std::uint64_t>(ds.features(r, c)));
    for (Eigen::Index c = 0; c < ds.targets.cols(); ++c) fnv_mix(h, std::bit_cast<std::uint64_t>(ds.targets(r, c)));
  }
  return h;
}

json to_json(const ModelFile& m) {
  json mins = json::array();
  json maxs = json::array();
  for (std::size_t i = 0; i < data::kNumFeatures; ++i) {
    mins.push_back(m.normalizer.min[i]);
    maxs.push_back(m.normalizer.max[i]);
  }
  json metrics_arr = json::array();
  for (const auto& pm : m.meta.metrics) {
    json e = metrics_json(pm.report);
    e["partition"] = pm.partition;
    metrics_arr.push_back(std::move(e));
  }
  json training = {
      {"seed", m.meta.seed},
      {"cutoff_year", m.meta.cutoff_year ? json(*m.meta.cutoff_year) : json(nullptr)},
      {"divide", std::string(data::to_string(m.meta.divide))},
      {"ratios", {m.meta.ratios.train, m.meta.ratios.val, m.meta.ratios.test}},
      {"n_rows", m.meta.n_rows},
      // Hex string: JSON readers in other languages may not hold 64-bit integers exactly.
      {"data_fingerprint", text::format_hex(m.meta.data_fingerprint)},
      {"split",
       {{"train", index_json(m.meta.split.train)},
        {"val", index_json(m.meta.split.val)},
        {"test", index_json(m.meta.split.test)}}},
      {"config", m.meta.config},
      {"metrics", metrics_arr},
      {"train_record", m.meta.train_record ? record_json(*m.meta.train_record) : json(nullptr)}};
  return {{"format_version", m.format_version},
          {"family", std::string(to_string(family_of(m.model)))},
          {"normalizer", {{"min", mins}, {"max", maxs}}},
          {"variety_vocab", m.variety_vocab},
          {"payload", payload_json(m.model)},
          {"training", training}};
}

ModelFile from_json(const json& j) {
  ModelFile m;
  const json& ver = field(j, "format_version");
  if (!ver.is_number_integer()) schema("format_version must be an integer");
  m.format_version = ver.get<int>();
  if (m.format_version != kFormatVersion) {
    throw Error(ErrorCode::VersionError,
                "unsupported model format_version " + std::to_string(m.format_version) +
                    " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const auto family = parse_family(get_string(j, "family"));
  if (!family) schema("unknown family '" + get_string(j, "family") + "'");

  const json& norm = field(j, "normalizer");
  const Vector mins = vec_from(field(norm, "min"), data::kNumFeatures);
  const Vector maxs = vec_from(field(norm, "max"), data::kNumFeatures);
  for (std::size_t i = 0; i < data::kNumFeatures; ++i) {
    m.normalizer.min[i] = mins[static_cast<Eigen::Index>(i)];
    m.normalizer.max[i] = maxs[static_cast<Eigen::Index>(i)];
    if (!(m.normalizer.min[i] <= m.normalizer.max[i])) schema("normalizer min exceeds max");
  }

  const json& vocab = field(j, "variety_vocab");
  if (!vocab.is_array()) schema("variety_vocab must be an array");
  for (const auto& v : vocab) {
    if (!v.is_string()) schema("variety_vocab entries must be strings");
    m.variety_vocab.push_back(v.get<std::string>());
  }

  m.model = payload_from(*family, field(j, "payload"));

  const json& t = field(j, "training");
  m.meta.seed = field(t, "seed").get<std::uint64_t>();
  const json& cutoff = field(t, "cutoff_year");
  if (!cutoff.is_null()) {
    if (!cutoff.is_number_integer()) schema("cutoff_year must be an integer or null");
    m.meta.cutoff_year = cutoff.get<int>();
  }
  const auto divide = data::parse_divide(get_string(t, "divide"));
  if (!divide) schema("unknown divide function");
  m.meta.divide = *divide;
  const Vector ratios = vec_from(field(t, "ratios"), 3);
  m.meta.ratios = {ratios[0], ratios[1], ratios[2]};
  m.meta.n_rows = get_size(field(t, "n_rows"));
  const auto fp = text::parse_hex(get_string(t, "data_fingerprint"));
  if (!fp) schema("data_fingerprint must be a hex string");
  m.meta.data_fingerprint = *fp;
  const json& split = field(t, "split");
  m.meta.split = {index_from(field(split, "train")), index_from(field(split, "val")),
                  index_from(field(split, "test"))};
  m.meta.config = field(t, "config");
  const json& mets = field(t, "metrics");
  if (!mets.is_array()) schema("metrics must be an array");
  for (const auto& e : mets) m.meta.metrics.push_back({get_string(e, "partition"), metrics_from(e)});
  const json& rec = field(t, "train_record");
  if (!rec.is_null()) m.meta.train_record = record_from(rec);
  return m;
}

void save_model(const std::filesystem::path& path, const ModelFile& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(m).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    schema(e.what());
  }
}

Matrix predict(const Model& m, const Matrix& x) {
  if (x.cols() != static_cast<Eigen::Index>(data::kNumFeatures)) {
    throw Error(ErrorCode::DimensionMismatch, "inputs must have 6 columns");
  }
  return std::visit(
      [&](const auto& model) -> Matrix {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, mlp::MlpNetwork>) return mlp::predict_batch(model, x);
        else if constexpr (std::is_same_v<T, rbf::RbfNetwork>) return rbf::predict_rbf_batch(model, x);
        else return grnn::predict_grnn_batch(model, x);
      },
      m);
}

data::Dataset prepare(const ModelFile& m, const std::vector<data::RawRecord>& records) {
  return data::apply_normalizer(data::encode(records, m.variety_vocab), m.normalizer);
}

Matrix predict_records(const ModelFile& m, const std::vector<data::RawRecord>& records) {
  return predict(m.model, prepare(m, records).features);
}

}  // namespace sevnet::io
