#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "sevnet/cli.hpp"
#include "sevnet/model_io.hpp"

using namespace sevnet;
using sevnet::testing::scratch_dir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> v;
  for (std::string line; std::getline(in, line);) v.push_back(line);
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Scratch directory with a 200-row synthetic dataset.
fs::path with_data(const std::string& name) {
  const auto dir = scratch_dir(name);
  const auto r = run_cli({"generate", "--out", (dir / "data.csv").string(), "--rows", "200", "--seed", "7"});
  REQUIRE(r.code == cli::kExitOk);
  return dir;
}

std::string p(const fs::path& x) { return x.string(); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(run_cli({"--help"}).code == cli::kExitOk);
    CHECK(run_cli({"train", "--help"}).code == cli::kExitOk);
    CHECK(run_cli({}).code == cli::kExitUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kExitUsage);
    CHECK(run_cli({"train", "--data", "x.csv"}).code == cli::kExitUsage);
  }

  TEST_CASE("generate writes header plus rows") {
    const auto dir = scratch_dir("cli_generate");
    const auto r = run_cli({"generate", "--out", p(dir / "d.csv"), "--rows", "300"});
    REQUIRE(r.code == cli::kExitOk);
    const auto lines = lines_of(dir / "d.csv");
    CHECK(lines.size() == 301);
    CHECK(lines.front() == data::kCsvHeader);
    CHECK(run_cli({"generate", "--out", p(dir / "e.csv"), "--rows", "2"}).code == cli::kExitFailure);
    CHECK(run_cli({"generate", "--out", p(dir / "e.csv"), "--rows", "many"}).code == cli::kExitUsage);
  }

  TEST_CASE("train, eval and predict for each family") {
    const auto dir = with_data("cli_train");
    for (std::string family : {"mlp", "rbf", "grnn"}) {
      CAPTURE(family);
      const auto model = dir / (family + ".json");
      const auto t = run_cli({"train", "--data", p(dir / "data.csv"), "--out", p(model), "--family", family,
                          "--seed", "3", "--epochs", "40", "--max-neurons", "30", "--sigma", "0.3"});
      REQUIRE(t.code == cli::kExitOk);
      CHECK(fs::exists(model));
      CHECK(t.out.find("partition") != std::string::npos);

      const auto out_dir = dir / ("eval_" + family);
      const auto e = run_cli({"eval", "--model", p(model), "--data", p(dir / "data.csv"), "--out-dir", p(out_dir)});
      REQUIRE(e.code == cli::kExitOk);
      CHECK(lines_of(out_dir / "histogram.csv").size() == 21);
      CHECK(lines_of(out_dir / "regression.csv").size() == 1 + 3 * 200);
      CHECK(fs::exists(out_dir / "confusion.csv"));
      CHECK(fs::exists(out_dir / "metrics.csv"));
      CHECK(fs::exists(out_dir / "train_record.csv") == (family == "mlp"));

      // The replayed training metrics equal the stored ones.
      const auto file = io::load_model(model);
      const auto metrics_lines = lines_of(out_dir / "metrics.csv");
      const auto& stored = file.meta.metrics.front();
      REQUIRE(stored.partition == "train");
      bool found = false;
      for (const auto& line : metrics_lines) {
        if (line.rfind("train,", 0) == 0) {
          found = true;
          std::istringstream fields(line.substr(6));
          std::string n;
          std::string mse;
          std::getline(fields, n, ',');
          std::getline(fields, mse, ',');
          CHECK(std::stod(mse) == doctest::Approx(stored.report.mse).epsilon(1e-12));
        }
      }
      CHECK(found);

      const auto pr = run_cli({"predict", "--model", p(model), "--input", p(dir / "data.csv")});
      REQUIRE(pr.code == cli::kExitOk);
      std::istringstream pl(pr.out);
      std::size_t count = 0;
      for (std::string line; std::getline(pl, line);) ++count;
      CHECK(count == 200);
    }
  }

  TEST_CASE("predict from flags and its failure modes") {
    const auto dir = with_data("cli_predict");
    const auto model = p(dir / "g.json");
    REQUIRE(run_cli({"train", "--data", p(dir / "data.csv"), "--out", model, "--family", "grnn"}).code == 0);
    const std::vector<std::string> base{"predict", "--model", model,  "--rainfall", "250", "--tmax", "26",
                                        "--tmin",  "9",       "--tavg", "17.5",     "--rh", "70"};
    auto ok = base;
    ok.insert(ok.end(), {"--variety", "Kubsa", "--out", p(dir / "pred.csv")});
    const auto r = run_cli(ok);
    REQUIRE(r.code == cli::kExitOk);
    const std::string label = r.out.substr(0, r.out.find(','));
    CHECK(data::parse_severity(label).has_value());
    CHECK(lines_of(dir / "pred.csv").size() == 2);
    CHECK(run_cli(ok).out == r.out);

    auto unknown = base;
    unknown.insert(unknown.end(), {"--variety", "NoSuchWheat"});
    CHECK(run_cli(unknown).code == cli::kExitFailure);
    auto bad = base;
    bad[4] = "lots";
    bad.insert(bad.end(), {"--variety", "Kubsa"});
    CHECK(run_cli(bad).code == cli::kExitUsage);
    CHECK(run_cli(base).code == cli::kExitUsage);
    CHECK(run_cli({"predict", "--model", p(dir / "missing.json"), "--input", p(dir / "data.csv")}).code ==
          cli::kExitFailure);
  }

  TEST_CASE("training is byte-for-byte reproducible") {
    const auto dir = with_data("cli_repro");
    const std::vector<std::string> args{"train", "--data", p(dir / "data.csv"), "--family", "mlp",
                                        "--seed", "5",     "--epochs", "25"};
    auto a = args;
    a.insert(a.end(), {"--out", p(dir / "a.json")});
    auto b = args;
    b.insert(b.end(), {"--out", p(dir / "b.json")});
    REQUIRE(run_cli(a).code == 0);
    REQUIRE(run_cli(b).code == 0);
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  }

  TEST_CASE("sweeps write one row per grid point") {
    const auto dir = with_data("cli_sweep");
    const auto grnn = run_cli({"sweep", "--data", p(dir / "data.csv"), "--family", "grnn-sigma", "--out",
                           p(dir / "grnn.csv")});
    REQUIRE(grnn.code == cli::kExitOk);
    CHECK(lines_of(dir / "grnn.csv").size() == 11);
    CHECK(fs::exists(dir / "grnn.selected.json"));
    CHECK(fs::exists(dir / "grnn.timing.csv"));

    const auto rbf = run_cli({"sweep", "--data", p(dir / "data.csv"), "--family", "rbf-spread", "--out",
                          p(dir / "rbf.csv"), "--max-neurons", "20"});
    REQUIRE(rbf.code == cli::kExitOk);
    CHECK(lines_of(dir / "rbf.csv").size() == 21);

    const auto algo = run_cli({"sweep", "--data", p(dir / "data.csv"), "--family", "mlp-algo", "--out",
                           p(dir / "algo.csv"), "--reps", "1", "--epochs", "10", "--grid", "trainlm,trainrp"});
    REQUIRE(algo.code == cli::kExitOk);
    CHECK(lines_of(dir / "algo.csv").size() == 3);

    const auto staged = run_cli({"sweep", "--data", p(dir / "data.csv"), "--family", "mlp-staged", "--out",
                             p(dir / "staged.csv"), "--reps", "1", "--epochs", "10"});
    REQUIRE(staged.code == cli::kExitOk);
    const auto rows = lines_of(dir / "staged.csv");
    CHECK(rows.size() == 1 + 11 + 2 + 9 + 2 + 10);
    std::set<char> stages;
    for (std::size_t i = 1; i < rows.size(); ++i) stages.insert(rows[i].front());
    CHECK(stages == std::set<char>{'1', '2', '3', '4', '5'});

    CHECK(run_cli({"sweep", "--data", p(dir / "data.csv"), "--family", "nope", "--out", p(dir / "x.csv")}).code !=
          cli::kExitOk);
  }

  TEST_CASE("compare writes three families") {
    const auto dir = with_data("cli_compare");
    const auto r = run_cli({"compare", "--data", p(dir / "data.csv"), "--out", p(dir / "cmp.csv"), "--epochs",
                        "20", "--max-neurons", "20"});
    REQUIRE(r.code == cli::kExitOk);
    const auto rows = lines_of(dir / "cmp.csv");
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].rfind("MLP,", 0) == 0);
    CHECK(rows[2].rfind("RBFNN,", 0) == 0);
    CHECK(rows[3].rfind("GRNN,", 0) == 0);
  }

  TEST_CASE("missing data file") {
    const auto dir = scratch_dir("cli_missing");
    CHECK(run_cli({"train", "--data", p(dir / "none.csv"), "--out", p(dir / "m.json")}).code == cli::kExitFailure);
  }
}
