#include "sevnet/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <locale>
#include <map>
#include <optional>
#include <sstream>

#include "sevnet/error.hpp"
#include "sevnet/grnn.hpp"
#include "sevnet/metrics.hpp"
#include "sevnet/model_io.hpp"
#include "sevnet/sweep.hpp"
#include "sevnet/synthgen.hpp"
#include "sevnet/text.hpp"

namespace sevnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- helpers

std::ostringstream make_stream() {
  std::ostringstream s;
  s.imbue(std::locale::classic());
  return s;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

// "table.csv" -> "table.timing.csv"
fs::path sibling(const fs::path& path, const std::string& tag) {
  fs::path p = path;
  const std::string ext = p.extension().string();
  p.replace_extension();
  return p.string() + "." + tag + (ext.empty() ? ".csv" : ext);
}

double parse_number(const std::string& s, const std::string& what) {
  const auto v = text::parse_double(s);
  if (!v) throw Error(ErrorCode::ParseError, "bad " + what + " value '" + s + "'");
  return *v;
}

std::string num(double v) { return text::format_double(v); }

template <class T, class Parse>
T parse_enum(const std::string& s, Parse parse, const std::string& what) {
  const auto v = parse(s);
  if (!v) throw Error(ErrorCode::ConfigError, "unknown " + what + " '" + s + "'");
  return *v;
}

// ---------------------------------------------------------------- data

struct LoadedData {
  std::vector<data::RawRecord> dev;
  std::vector<data::RawRecord> holdout;
  data::Dataset ds;  // encoded dev rows, not normalized
};

LoadedData load_data(const std::string& path, std::optional<int> cutoff) {
  LoadedData out;
  auto records = data::load_csv(path);
  if (records.empty()) throw Error(ErrorCode::EmptyInput, path + " has no data rows");
  // Vocabulary in first-appearance order over the whole file so later years
  // can still be encoded.
  const auto vocab = data::encode(records).variety_vocab;
  if (cutoff) {
    std::tie(out.dev, out.holdout) = data::chronological_holdout(records, *cutoff);
  } else {
    out.dev = std::move(records);
  }
  out.ds = data::encode(out.dev, vocab);
  return out;
}

Matrix rows_of(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// ---------------------------------------------------------------- shared flags

struct MlpFlags {
  std::optional<std::size_t> hidden;
  std::optional<std::string> f_hidden, f_out, algo, divide, learning;
  std::size_t epochs = 1000;
  std::size_t patience = 6;
  double lr = 0.01;
  double momentum = 0.9;
  double goal = 0.0;
  double mu = 0.001;

  void add(CLI::App& app) {
    app.add_option("--hidden", hidden, "Hidden neurons");
    app.add_option("--f-hidden", f_hidden, "Hidden transfer function (tansig|logsig|purelin)");
    app.add_option("--f-out", f_out, "Output transfer function (tansig|logsig|purelin)");
    app.add_option("--algo", algo, "Training algorithm (lm, bfg, rp, gdx, scg, cgb, oss, cgf, gdm, gd)");
    app.add_option("--divide", divide, "Divide function (dividerand|divideind)");
    app.add_option("--learning", learning, "Learning function (learngdm|learngd)");
    app.add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    app.add_option("--patience", patience, "Validation failures before stopping")->capture_default_str();
    app.add_option("--lr", lr, "Learning rate (gradient-descent family)")->capture_default_str();
    app.add_option("--momentum", momentum, "Momentum constant")->capture_default_str();
    app.add_option("--goal", goal, "Training MSE goal")->capture_default_str();
    app.add_option("--mu", mu, "Initial Levenberg-Marquardt damping")->capture_default_str();
  }

  sweep::MlpSetup setup(sweep::MlpSetup s) const {
    if (hidden) s.hidden = *hidden;
    if (f_hidden) s.f_hidden = parse_enum<mlp::TransferFn>(*f_hidden, mlp::parse_transfer, "transfer function");
    if (f_out) s.f_out = parse_enum<mlp::TransferFn>(*f_out, mlp::parse_transfer, "transfer function");
    if (algo) s.train.algorithm = parse_enum<mlp::TrainAlgorithm>(*algo, mlp::parse_algorithm, "algorithm");
    if (divide) s.divide = parse_enum<data::DivideFn>(*divide, data::parse_divide, "divide function");
    if (learning) {
      const std::string l = text::to_lower(*learning);
      if (l == "learngdm" || l == "gdm") s.learning = sweep::LearningFn::GdMomentum;
      else if (l == "learngd" || l == "gd") s.learning = sweep::LearningFn::Gd;
      else throw Error(ErrorCode::ConfigError, "unknown learning function '" + *learning + "'");
    }
    if (s.hidden == 0) throw Error(ErrorCode::ConfigError, "--hidden must be at least 1");
    s.train.max_epochs = epochs;
    s.train.patience = patience;
    s.train.learning_rate = lr;
    s.train.momentum = momentum;
    s.train.goal_mse = goal;
    s.train.lm_mu0 = mu;
    mlp::validate(sweep::effective_config(s));
    return s;
  }
};

struct RbfFlags {
  double spread = 0.2;
  std::optional<std::size_t> max_neurons;
  double goal = 0.0;

  void add(CLI::App& app) {
    app.add_option("--spread", spread, "RBF spread")->capture_default_str();
    app.add_option("--max-neurons", max_neurons, "RBF neuron limit (default: training rows, at most 2000)");
    app.add_option("--rbf-goal", goal, "RBF training MSE goal")->capture_default_str();
  }

  rbf::RbfTrainConfig config() const {
    rbf::RbfTrainConfig c;
    c.spread = spread;
    c.max_neurons = max_neurons;
    c.goal_mse = goal;
    rbf::spread_to_beta(spread);  // validates
    return c;
  }
};

json mlp_config_json(const sweep::MlpSetup& s) {
  const auto cfg = sweep::effective_config(s);
  return {{"hidden", s.hidden},
          {"f_hidden", std::string(mlp::alias(s.f_hidden))},
          {"f_out", std::string(mlp::alias(s.f_out))},
          {"algorithm", std::string(mlp::alias(cfg.algorithm))},
          {"divide", std::string(data::to_string(s.divide))},
          {"learning", std::string(sweep::alias(s.learning))},
          {"max_epochs", cfg.max_epochs},
          {"patience", cfg.patience},
          {"learning_rate", cfg.learning_rate},
          {"momentum", cfg.momentum},
          {"goal_mse", cfg.goal_mse},
          {"lm_mu0", cfg.lm_mu0}};
}

// ---------------------------------------------------------------- metrics output

const char* const kMetricsHeader = "partition,n,mse,rmse,mae,r,r2";

std::string metrics_csv_row(const std::string& name, const metrics::MetricsReport& r) {
  return name + "," + std::to_string(r.n) + "," + num(r.mse) + "," + num(r.rmse) + "," + num(r.mae) +
         "," + num(r.r) + "," + num(r.r2) + "\n";
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

void print_metrics_table(std::ostream& out, const std::vector<io::PartitionMetrics>& rows) {
  out << "partition" << pad("n", 7) << pad("mse", 12) << pad("rmse", 12) << pad("mae", 12)
      << pad("r", 12) << pad("r2", 12) << '\n';
  for (const auto& pm : rows) {
    const auto& r = pm.report;
    std::string name = pm.partition;
    name.resize(9, ' ');
    out << name << pad(std::to_string(r.n), 7) << pad(text::format_fixed(r.mse, 6), 12)
        << pad(text::format_fixed(r.rmse, 6), 12) << pad(text::format_fixed(r.mae, 6), 12)
        << pad(text::format_fixed(r.r, 6), 12) << pad(text::format_fixed(r.r2, 6), 12) << '\n';
  }
}

// Metrics for every partition with at least two rows.
std::vector<io::PartitionMetrics> partition_metrics(const io::Model& model, const data::Dataset& ds,
                                                    const data::SplitIndices& split) {
  std::vector<io::PartitionMetrics> out;
  const std::pair<const char*, const IndexList*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, idx] : parts) {
    if (idx->size() < 2) continue;
    out.push_back({name, metrics::compute_metrics(io::predict(model, rows_of(ds.features, *idx)),
                                                  rows_of(ds.targets, *idx))});
  }
  return out;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const synth::SynthConfig& cfg, const std::string& out_path, std::ostream& out) {
  synth::validate(cfg);
  const auto records = synth::generate(cfg);
  std::ostringstream csv = make_stream();
  data::write_csv(csv, records);
  write_file(out_path, csv.str());
  std::array<std::size_t, data::kNumClasses> counts{};
  for (const auto& r : records) ++counts[data::one_hot_position(r.severity)];
  out << "wrote " << records.size() << " rows to " << out_path << " (high " << counts[0]
      << ", medium " << counts[1] << ", low " << counts[2] << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data_path;
  std::string family = "mlp";
  std::string out_path;
  std::uint64_t seed = 1;
  std::optional<int> cutoff;
  MlpFlags mlp;
  RbfFlags rbf;
  double sigma = 0.1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const io::ModelFamily family = parse_enum<io::ModelFamily>(a.family, io::parse_family, "family");
  const sweep::MlpSetup setup = a.mlp.setup(sweep::MlpSetup{});
  const rbf::RbfTrainConfig rcfg = a.rbf.config();
  if (family == io::ModelFamily::Grnn && !(a.sigma > 0.0)) {
    throw Error(ErrorCode::NonPositiveSigma, "--sigma must be positive");
  }

  const LoadedData loaded = load_data(a.data_path, a.cutoff);
  const data::DivideFn divide = family == io::ModelFamily::Mlp ? setup.divide : data::DivideFn::Random;
  const data::DivideRatios ratios;
  SeededRng split_rng(a.seed);
  const data::SplitIndices split = data::divide(divide, loaded.ds.size(), ratios, split_rng);
  const data::Dataset ds = data::normalize_for_split(loaded.ds, split);

  io::ModelFile file;
  file.normalizer = *ds.normalizer;
  file.variety_vocab = ds.variety_vocab;
  file.meta.seed = a.seed;
  file.meta.cutoff_year = a.cutoff;
  file.meta.divide = divide;
  file.meta.ratios = ratios;
  file.meta.split = split;
  file.meta.n_rows = loaded.ds.size();
  file.meta.data_fingerprint = io::fingerprint(loaded.ds);

  switch (family) {
    case io::ModelFamily::Mlp: {
      sweep::MlpSetup s = setup;
      s.divide = data::DivideFn::Random;  // split already chosen above
      auto res = sweep::train_mlp(s, ds, split, a.seed);
      file.model = std::move(res.network);
      file.meta.train_record = std::move(res.record);
      file.meta.config = mlp_config_json(setup);
      break;
    }
    case io::ModelFamily::Rbf: {
      auto res = rbf::train_rbf(ds, split.train, split.val, rcfg);
      file.meta.config = {{"spread", rcfg.spread},
                          {"max_neurons", rcfg.max_neurons ? json(*rcfg.max_neurons) : json(nullptr)},
                          {"goal_mse", rcfg.goal_mse},
                          {"neurons", res.network.neurons()}};
      file.model = std::move(res.network);
      break;
    }
    case io::ModelFamily::Grnn:
      file.model = grnn::train_grnn(ds, split.train, a.sigma);
      file.meta.config = {{"sigma", a.sigma}};
      break;
  }

  file.meta.metrics = partition_metrics(file.model, ds, split);
  if (!loaded.holdout.empty() && loaded.holdout.size() >= 2) {
    const data::Dataset hold = io::prepare(file, loaded.holdout);
    file.meta.metrics.push_back(
        {"holdout", metrics::compute_metrics(io::predict(file.model, hold.features), hold.targets)});
  }
  io::save_model(a.out_path, file);

  out << "family " << io::to_string(family) << ", rows " << loaded.ds.size() << " (train "
      << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size()
      << ")";
  if (file.meta.train_record) {
    const auto& rec = *file.meta.train_record;
    out << ", best epoch " << rec.best_epoch << ", stop " << mlp::to_string(rec.stop_reason);
  } else if (const auto* r = std::get_if<rbf::RbfNetwork>(&file.model)) {
    out << ", neurons " << r->neurons();
  }
  out << '\n';
  print_metrics_table(out, file.meta.metrics);
  out << "model written to " << a.out_path << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& out_dir,
             std::ostream& out) {
  const io::ModelFile file = io::load_model(model_path);
  const LoadedData loaded = load_data(data_path, file.meta.cutoff_year);
  const data::Dataset ds = io::prepare(file, loaded.dev);

  std::vector<io::PartitionMetrics> rows;
  // Same table the model was trained on: replay its split.
  const data::Dataset encoded = data::encode(loaded.dev, file.variety_vocab);
  const bool replay = encoded.size() == file.meta.n_rows &&
                      io::fingerprint(encoded) == file.meta.data_fingerprint;
  if (replay) rows = partition_metrics(file.model, ds, file.meta.split);

  Matrix x_all = ds.features;
  Matrix t_all = ds.targets;
  if (!loaded.holdout.empty()) {
    const data::Dataset hold = io::prepare(file, loaded.holdout);
    if (hold.size() >= 2) {
      rows.push_back({"holdout", metrics::compute_metrics(io::predict(file.model, hold.features), hold.targets)});
    }
    Matrix xa(x_all.rows() + hold.features.rows(), x_all.cols());
    Matrix ta(t_all.rows() + hold.targets.rows(), t_all.cols());
    xa << x_all, hold.features;
    ta << t_all, hold.targets;
    x_all = std::move(xa);
    t_all = std::move(ta);
  }
  const Matrix y_all = io::predict(file.model, x_all);
  rows.push_back({"all", metrics::compute_metrics(y_all, t_all)});

  const fs::path dir(out_dir);
  {
    std::ostringstream s = make_stream();
    s << kMetricsHeader << '\n';
    for (const auto& pm : rows) s << metrics_csv_row(pm.partition, pm.report);
    write_file(dir / "metrics.csv", s.str());
  }
  {
    const auto plot = metrics::regression_plot(y_all, t_all);
    std::ostringstream s = make_stream();
    s << "target,output\n";
    for (const auto& [t, y] : plot.points) s << num(t) << ',' << num(y) << '\n';
    write_file(dir / "regression.csv", s.str());
    std::ostringstream f = make_stream();
    f << "slope,intercept,r\n" << num(plot.fit_slope) << ',' << num(plot.fit_intercept) << ','
      << num(plot.r) << '\n';
    write_file(dir / "regression_fit.csv", f.str());
  }
  {
    const auto h = metrics::error_histogram(y_all, t_all);
    std::ostringstream s = make_stream();
    s << "bin,lower,upper,count\n";
    for (std::size_t b = 0; b < metrics::kHistogramBins; ++b) {
      s << b + 1 << ',' << num(h.bin_edges[b]) << ',' << num(h.bin_edges[b + 1]) << ',' << h.counts[b]
        << '\n';
    }
    write_file(dir / "histogram.csv", s.str());
  }
  {
    std::vector<data::Severity> pred;
    std::vector<data::Severity> truth;
    for (Eigen::Index i = 0; i < y_all.rows(); ++i) {
      pred.push_back(mlp::predict_class(Vector(y_all.row(i).transpose())));
      truth.push_back(mlp::predict_class(Vector(t_all.row(i).transpose())));
    }
    const auto cm = metrics::confusion(pred, truth);
    std::ostringstream s = make_stream();
    s << "true_class,pred_high,pred_medium,pred_low\n";
    for (std::size_t r = 0; r < data::kNumClasses; ++r) {
      s << data::to_string(data::severity_at_position(r));
      for (std::size_t c = 0; c < data::kNumClasses; ++c) s << ',' << cm.counts[r][c];
      s << '\n';
    }
    write_file(dir / "confusion.csv", s.str());
    out << "accuracy " << text::format_fixed(cm.accuracy, 4) << " over " << cm.total << " rows\n";
  }
  if (file.meta.train_record) {
    std::ostringstream s = make_stream();
    s << "epoch,train_mse,val_mse,test_mse,gradient_norm\n";
    const auto& ep = file.meta.train_record->epochs;
    for (std::size_t e = 0; e < ep.size(); ++e) {
      s << e << ',' << num(ep[e].train_mse) << ',' << num(ep[e].val_mse) << ',' << num(ep[e].test_mse)
        << ',' << num(ep[e].gradient_norm) << '\n';
    }
    write_file(dir / "train_record.csv", s.str());
  }
  print_metrics_table(out, rows);
  out << "outputs written to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string model_path;
  std::optional<std::string> input;
  std::optional<std::string> out_path;
  std::optional<std::string> rainfall, tmax, tmin, tavg, rh, variety;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  std::vector<data::RawRecord> records;
  const bool any_flag = a.rainfall || a.tmax || a.tmin || a.tavg || a.rh || a.variety;
  if (a.input && any_flag) throw CLI::ValidationError("give either --input or feature flags, not both");
  if (a.input) {
    std::ifstream in(*a.input, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + *a.input);
    records = data::read_feature_csv(in);
  } else {
    if (!(a.rainfall && a.tmax && a.tmin && a.tavg && a.rh && a.variety)) {
      throw CLI::ValidationError(
          "need --input or all of --rainfall --tmax --tmin --tavg --rh --variety");
    }
    data::RawRecord r;
    r.rainfall = parse_number(*a.rainfall, "rainfall");
    r.tmax = parse_number(*a.tmax, "tmax");
    r.tmin = parse_number(*a.tmin, "tmin");
    r.tavg = parse_number(*a.tavg, "tavg");
    r.rel_humidity = parse_number(*a.rh, "rh");
    r.variety = std::string(text::trim(*a.variety));
    data::validate(r);
    records.push_back(r);
  }
  const io::ModelFile file = io::load_model(a.model_path);
  const Matrix y = io::predict_records(file, records);
  std::ostringstream lines = make_stream();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    lines << data::to_string(mlp::predict_class(Vector(y.row(i).transpose())));
    for (Eigen::Index k = 0; k < y.cols(); ++k) lines << ',' << num(y(i, k));
    lines << '\n';
  }
  out << lines.str();
  if (a.out_path) write_file(*a.out_path, "label,out_high,out_medium,out_low\n" + lines.str());
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string data_path;
  std::string family;
  std::string out_path;
  std::optional<std::string> selected_path;
  std::uint64_t seed = 1;
  std::optional<int> cutoff;
  std::size_t reps = 7;
  std::size_t jobs = 0;
  std::optional<std::string> grid;
  MlpFlags mlp;
  RbfFlags rbf;
};

std::vector<double> parse_grid(sweep::Family f, const std::string& spec) {
  std::vector<double> out;
  const auto defaults = sweep::default_grid(f);
  for (auto item : text::split(spec, ',')) {
    item = text::trim(item);
    if (item.empty()) continue;
    if (const auto v = text::parse_double(item)) {
      out.push_back(*v);
      continue;
    }
    // Categorical grids also accept their labels, e.g. "trainlm" or "logsig/purelin".
    bool found = false;
    for (double d : defaults) {
      if (text::to_lower(sweep::grid_label(f, d)) == text::to_lower(item)) {
        out.push_back(d);
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorCode::ParseError, "bad grid value '" + std::string(item) + "'");
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "--grid is empty");
  return out;
}

const char* const kSweepHeader =
    "stage,family,grid_value,label,model_size,train_mse,best_val_mse,epoch,seed,selected,error";

void append_sweep_rows(std::ostringstream& table, std::ostringstream& timing, std::size_t stage,
                       const sweep::SweepResult& res) {
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    std::string err = r.error.value_or("");
    for (char& c : err) {
      if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    table << stage << ',' << sweep::cli_name(res.family) << ',' << num(r.grid_value) << ',' << r.label
          << ',' << r.model_size << ',' << num(r.train_mse) << ',' << num(r.best_val_mse) << ','
          << r.epoch << ',' << r.seed << ',' << (res.selected == i ? 1 : 0) << ',' << err << '\n';
    timing << stage << ',' << sweep::cli_name(res.family) << ',' << num(r.grid_value) << ','
           << text::format_fixed(r.wall_seconds, 6) << '\n';
  }
}

void print_sweep(std::ostream& out, std::size_t stage, const sweep::SweepResult& res) {
  out << "stage " << stage << ": " << sweep::cli_name(res.family) << '\n';
  out << pad("value", 16) << pad("size", 6) << pad("train_mse", 12) << pad("best_val_mse", 14)
      << pad("epoch", 7) << '\n';
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    out << pad(r.label, 16) << pad(std::to_string(r.model_size), 6);
    if (r.error) {
      out << "  failed: " << *r.error;
    } else {
      out << pad(text::format_fixed(r.train_mse, 6), 12) << pad(text::format_fixed(r.best_val_mse, 6), 14)
          << pad(std::to_string(r.epoch), 7) << (res.selected == i ? "  *" : "");
    }
    out << '\n';
  }
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const bool staged = text::to_lower(a.family) == "mlp-staged";
  std::optional<sweep::Family> family;
  if (!staged) family = parse_enum<sweep::Family>(a.family, sweep::parse_family, "sweep family");
  if (a.reps == 0) throw Error(ErrorCode::ConfigError, "--reps must be at least 1");
  if (staged && a.grid) throw Error(ErrorCode::ConfigError, "--grid does not apply to mlp-staged");
  const sweep::MlpSetup base = a.mlp.setup(staged ? sweep::initial_setup() : sweep::MlpSetup{});
  const rbf::RbfTrainConfig rcfg = a.rbf.config();

  const LoadedData loaded = load_data(a.data_path, a.cutoff);
  SeededRng split_rng(a.seed);
  const data::SplitIndices split = data::split_random(loaded.ds.size(), data::DivideRatios{}, split_rng);

  std::ostringstream table = make_stream();
  std::ostringstream timing = make_stream();
  table << kSweepHeader << '\n';
  timing << "stage,family,grid_value,wall_seconds\n";
  json selected;

  if (staged) {
    const auto res = sweep::staged_mlp_search(loaded.ds, split, a.seed, a.reps, a.jobs, base);
    for (std::size_t s = 0; s < res.stages.size(); ++s) {
      append_sweep_rows(table, timing, s + 1, res.stages[s]);
      print_sweep(out, s + 1, res.stages[s]);
    }
    selected = {{"family", "mlp-staged"}, {"winner", mlp_config_json(res.winner)}};
    out << "winner: " << res.winner.hidden << " hidden, " << mlp::alias(res.winner.f_hidden) << '/'
        << mlp::alias(res.winner.f_out) << ", " << data::to_string(res.winner.divide) << ", "
        << sweep::alias(res.winner.learning) << ", " << mlp::alias(res.winner.train.algorithm) << '\n';
  } else {
    sweep::SweepSpec spec;
    spec.family = *family;
    spec.grid = a.grid ? parse_grid(*family, *a.grid) : sweep::default_grid(*family);
    spec.mlp = base;
    spec.rbf = rcfg;
    spec.repetitions = a.reps;
    spec.base_seed = a.seed;
    spec.jobs = a.jobs;
    const auto res = sweep::run_sweep(spec, loaded.ds, split);
    append_sweep_rows(table, timing, 1, res);
    print_sweep(out, 1, res);
    selected = {{"family", std::string(sweep::cli_name(res.family))}};
    if (res.selected) {
      const auto& r = res.rows[*res.selected];
      selected["grid_value"] = r.grid_value;
      selected["label"] = r.label;
      selected["best_val_mse"] = r.best_val_mse;
      selected["seed"] = r.seed;
      if (sweep::is_mlp(res.family)) {
        selected["config"] = mlp_config_json(sweep::apply_grid_point(base, res.family, r.grid_value));
      }
    } else {
      selected["grid_value"] = nullptr;
    }
  }

  write_file(a.out_path, table.str());
  write_file(sibling(a.out_path, "timing"), timing.str());
  fs::path sel;
  if (a.selected_path) {
    sel = *a.selected_path;
  } else {
    sel = a.out_path;
    sel.replace_extension(".selected.json");
  }
  write_file(sel, selected.dump(1) + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- compare

struct CompareArgs {
  std::string data_path;
  std::string out_path;
  std::uint64_t seed = 1;
  std::optional<int> cutoff;
  MlpFlags mlp;
  RbfFlags rbf;
  double sigma = 0.1;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  sweep::ComparisonConfig cfg;
  cfg.mlp = a.mlp.setup(sweep::MlpSetup{});
  cfg.mlp_seed = a.seed;
  cfg.rbf = a.rbf.config();
  cfg.grnn_sigma = a.sigma;
  if (!(a.sigma > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "--sigma must be positive");

  const LoadedData loaded = load_data(a.data_path, a.cutoff);
  SeededRng split_rng(a.seed);
  const data::SplitIndices split = data::split_random(loaded.ds.size(), data::DivideRatios{}, split_rng);
  const auto rep = sweep::compare_models(loaded.ds, split, cfg);

  std::ostringstream table = make_stream();
  std::ostringstream timing = make_stream();
  table << "family,train_rmse,train_r,train_r2,train_mae,test_rmse,test_r,test_r2,test_mae\n";
  timing << "family,train_seconds\n";
  out << "family" << pad("train_rmse", 12) << pad("train_r", 10) << pad("train_r2", 10)
      << pad("train_mae", 11) << pad("test_rmse", 11) << pad("test_r", 10) << pad("test_r2", 10)
      << pad("test_mae", 10) << pad("seconds", 11) << '\n';
  for (const auto& f : rep.rows) {
    table << f.family << ',' << num(f.train.rmse) << ',' << num(f.train.r) << ',' << num(f.train.r2) << ','
          << num(f.train.mae) << ',' << num(f.test.rmse) << ',' << num(f.test.r) << ',' << num(f.test.r2)
          << ',' << num(f.test.mae) << '\n';
    timing << f.family << ',' << text::format_fixed(f.train_seconds, 6) << '\n';
    std::string name = f.family;
    name.resize(6, ' ');
    out << name << pad(text::format_fixed(f.train.rmse, 4), 12) << pad(text::format_fixed(f.train.r, 4), 10)
        << pad(text::format_fixed(f.train.r2, 4), 10) << pad(text::format_fixed(f.train.mae, 4), 11)
        << pad(text::format_fixed(f.test.rmse, 4), 11) << pad(text::format_fixed(f.test.r, 4), 10)
        << pad(text::format_fixed(f.test.r2, 4), 10) << pad(text::format_fixed(f.test.mae, 4), 10)
        << pad(text::format_fixed(f.train_seconds, 4), 11) << '\n';
  }
  write_file(a.out_path, table.str());
  write_file(sibling(a.out_path, "timing"), timing.str());
  return kExitOk;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::SchemaError:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wheat stem rust severity forecasting with MLP, RBF and GRNN models", "sevnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  synth::SynthConfig gen_cfg;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  gen->add_option("--out", gen_out, "Output CSV")->required();
  gen->add_option("--rows", gen_cfg.n_rows, "Number of rows")->capture_default_str();
  gen->add_option("--seed", gen_cfg.seed, "Random seed")->capture_default_str();
  gen->add_option("--year-start", gen_cfg.year_start, "First year")->capture_default_str();
  gen->add_option("--year-end", gen_cfg.year_end, "Last year")->capture_default_str();
  gen->add_option("--varieties", gen_cfg.n_varieties, "Number of varieties")->capture_default_str();
  gen->add_option("--noise", gen_cfg.noise_sd, "Latent score noise standard deviation")->capture_default_str();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one model and save it as JSON");
  train->add_option("--data", train_args.data_path, "Dataset CSV")->required();
  train->add_option("--out", train_args.out_path, "Model file")->required();
  train->add_option("--family", train_args.family, "mlp|rbf|grnn")->capture_default_str();
  train->add_option("--seed", train_args.seed, "Seed for the split and initial weights")->capture_default_str();
  train->add_option("--cutoff-year", train_args.cutoff, "Keep only years <= cutoff for development");
  train->add_option("--sigma", train_args.sigma, "GRNN smoothing factor")->capture_default_str();
  train_args.mlp.add(*train);
  train_args.rbf.add(*train);

  SweepArgs sweep_args;
  auto* sw = app.add_subcommand("sweep", "Run a hyperparameter sweep");
  sw->add_option("--data", sweep_args.data_path, "Dataset CSV")->required();
  sw->add_option("--family", sweep_args.family,
                 "mlp-hidden|mlp-divide|mlp-transfer|mlp-learning|mlp-algo|mlp-staged|rbf-spread|grnn-sigma")
      ->required();
  sw->add_option("--out", sweep_args.out_path, "Sweep table CSV")->required();
  sw->add_option("--selected", sweep_args.selected_path, "Selected-configuration JSON (default: <out>.selected.json)");
  sw->add_option("--seed", sweep_args.seed, "Split seed and base seed")->capture_default_str();
  sw->add_option("--cutoff-year", sweep_args.cutoff, "Keep only years <= cutoff");
  sw->add_option("--reps", sweep_args.reps, "Repetitions per MLP grid point")->capture_default_str();
  sw->add_option("--jobs", sweep_args.jobs, "Worker threads (0 = all cores)")->capture_default_str();
  sw->add_option("--grid", sweep_args.grid, "Comma-separated grid values");
  sweep_args.mlp.add(*sw);
  sweep_args.rbf.add(*sw);

  std::string eval_model, eval_data, eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate a saved model and write plot data");
  ev->add_option("--model", eval_model, "Model file")->required();
  ev->add_option("--data", eval_data, "Dataset CSV")->required();
  ev->add_option("--out-dir", eval_out, "Output directory")->required();

  PredictArgs pred_args;
  auto* pr = app.add_subcommand("predict", "Predict severity classes");
  pr->add_option("--model", pred_args.model_path, "Model file")->required();
  pr->add_option("--input", pred_args.input, "CSV of feature rows (severity column optional)");
  pr->add_option("--out", pred_args.out_path, "Also write predictions to this CSV");
  pr->add_option("--rainfall", pred_args.rainfall, "Seasonal rainfall (mm)");
  pr->add_option("--tmax", pred_args.tmax, "Maximum temperature (C)");
  pr->add_option("--tmin", pred_args.tmin, "Minimum temperature (C)");
  pr->add_option("--tavg", pred_args.tavg, "Average temperature (C)");
  pr->add_option("--rh", pred_args.rh, "Relative humidity (%)");
  pr->add_option("--variety", pred_args.variety, "Wheat variety");

  CompareArgs cmp_args;
  auto* cmp = app.add_subcommand("compare", "Train MLP, RBF and GRNN on one split and compare");
  cmp->add_option("--data", cmp_args.data_path, "Dataset CSV")->required();
  cmp->add_option("--out", cmp_args.out_path, "Comparison CSV")->required();
  cmp->add_option("--seed", cmp_args.seed, "Seed for the split and MLP weights")->capture_default_str();
  cmp->add_option("--cutoff-year", cmp_args.cutoff, "Keep only years <= cutoff");
  cmp->add_option("--sigma", cmp_args.sigma, "GRNN smoothing factor")->capture_default_str();
  cmp_args.mlp.add(*cmp);
  cmp_args.rbf.add(*cmp);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (gen->parsed()) return cmd_generate(gen_cfg, gen_out, out);
    if (train->parsed()) return cmd_train(train_args, out);
    if (sw->parsed()) return cmd_sweep(sweep_args, out);
    if (ev->parsed()) return cmd_eval(eval_model, eval_data, eval_out, out);
    if (pr->parsed()) return cmd_predict(pred_args, out);
    if (cmp->parsed()) return cmd_compare(cmp_args, out);
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace sevnet::cli
