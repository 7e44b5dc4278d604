#include <doctest.h>

#include <algorithm>
#include <map>

#include "helpers.hpp"
#include "sevnet/synthgen.hpp"

using namespace sevnet;
using namespace sevnet::synth;
using data::Severity;
using sevnet::testing::code_of;

TEST_SUITE("synthgen") {
  TEST_CASE("tertile classes are balanced") {
    for (std::size_t n : {3u, 10u, 300u, 301u, 1000u}) {
      SynthConfig cfg;
      cfg.n_rows = n;
      const auto records = generate(cfg);
      REQUIRE(records.size() == n);
      std::map<Severity, std::size_t> counts;
      for (const auto& r : records) ++counts[r.severity];
      for (auto s : {Severity::Low, Severity::Medium, Severity::High}) {
        const double share = static_cast<double>(n) / 3.0;
        CHECK(static_cast<double>(counts[s]) >= share - 1.0);
        CHECK(static_cast<double>(counts[s]) <= share + 1.0);
      }
    }
  }

  TEST_CASE("classes follow score order") {
    const auto batch = generate_batch({});
    double max_low = -1e300;
    double min_high = 1e300;
    for (std::size_t i = 0; i < batch.records.size(); ++i) {
      if (batch.records[i].severity == Severity::Low) max_low = std::max(max_low, batch.scores[i]);
      if (batch.records[i].severity == Severity::High) min_high = std::min(min_high, batch.scores[i]);
    }
    CHECK(max_low < min_high);
  }

  TEST_CASE("latent score rises with rainfall") {
    SeededRng rng(3);
    for (int i = 0; i < 100; ++i) {
      const double rh = rng.uniform01();
      const double t = rng.uniform01();
      const double s = rng.uniform01();
      const double a = rng.uniform01();
      const double b = a + rng.uniform(1e-6, 1.0 - a + 1e-6);
      CHECK(latent_score(b, rh, t, s) > latent_score(a, rh, t, s));
    }
  }

  TEST_CASE("records are valid and deterministic") {
    SynthConfig cfg;
    cfg.n_rows = 400;
    cfg.n_varieties = 12;
    cfg.seed = 99;
    const auto a = generate(cfg);
    const auto b = generate(cfg);
    CHECK(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK_NOTHROW(data::validate(a[i], i));
      CHECK(a[i].year >= cfg.year_start);
      CHECK(a[i].year <= cfg.year_end);
      CHECK(a[i].rainfall >= 0.0);
      CHECK(a[i].rainfall <= 400.0);
      CHECK(a[i].rel_humidity >= 30.0);
      CHECK(a[i].rel_humidity <= 95.0);
      if (i > 0) CHECK(a[i].year >= a[i - 1].year);
    }
    CHECK(a.front().year == cfg.year_start);
    CHECK(a.back().year == cfg.year_end);
    cfg.seed = 100;
    CHECK(generate(cfg) != a);
  }

  TEST_CASE("noise-free batches are reproducible from the scores") {
    SynthConfig cfg;
    cfg.noise_sd = 0.0;
    const auto batch = generate_batch(cfg);
    std::vector<std::size_t> order(batch.scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](auto x, auto y) { return batch.scores[x] < batch.scores[y]; });
    const std::size_t n = order.size();
    for (std::size_t rank = 0; rank < n; ++rank) {
      const std::size_t tier = 3 * rank / n;
      const Severity want = tier == 0 ? Severity::Low : tier == 1 ? Severity::Medium : Severity::High;
      CHECK(batch.records[order[rank]].severity == want);
    }
    CHECK(batch.varieties.size() == cfg.n_varieties);
    CHECK(batch.susceptibility.size() == cfg.n_varieties);
  }

  TEST_CASE("invalid configurations") {
    SynthConfig cfg;
    cfg.n_rows = 2;
    CHECK(code_of([&] { generate(cfg); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.year_end = cfg.year_start - 1;
    CHECK(code_of([&] { generate(cfg); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.n_varieties = 0;
    CHECK(code_of([&] { generate(cfg); }) == ErrorCode::ConfigError);
    cfg = {};
    cfg.noise_sd = -1.0;
    CHECK(code_of([&] { generate(cfg); }) == ErrorCode::ConfigError);
  }
}
