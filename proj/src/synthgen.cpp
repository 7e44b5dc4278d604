#include "sevnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sevnet/linalg.hpp"

namespace sevnet::synth {

namespace {

constexpr const char* kVarietyNames[] = {"Kubsa",  "Digalu",  "Dandaa",   "Kakaba", "Ogolcho",
                                         "Hidase", "Kingbird", "Wane",    "Lemu",   "Sofumar"};

std::string variety_name(std::size_t i) {
  constexpr std::size_t known = std::size(kVarietyNames);
  if (i < known) return kVarietyNames[i];
  return "Variety-" + std::to_string(i + 1);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

/// Min-max scaling to [0, 1] within the batch; a constant column maps to 0.
std::vector<double> unit_scale(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (*hi > *lo) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  }
  return out;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.n_rows < 3) throw Error(ErrorCode::ConfigError, "n_rows must be >= 3");
  if (cfg.year_end < cfg.year_start) throw Error(ErrorCode::ConfigError, "year range is empty");
  if (cfg.n_varieties < 1) throw Error(ErrorCode::ConfigError, "n_varieties must be >= 1");
  if (!(cfg.noise_sd >= 0.0) || !std::isfinite(cfg.noise_sd)) {
    throw Error(ErrorCode::ConfigError, "noise_sd must be >= 0");
  }
}

double latent_score(double rain01, double rh01, double tavg01, double susceptibility) {
  const double z = (tavg01 - 0.6) / 0.25;
  return 2.0 * rain01 + 1.0 * rh01 + 0.8 * std::exp(-z * z) + 0.6 * susceptibility;
}

SynthBatch generate_batch(const SynthConfig& cfg) {
  validate(cfg);
  SeededRng rng(cfg.seed);
  SynthBatch batch;
  for (std::size_t v = 0; v < cfg.n_varieties; ++v) {
    batch.varieties.push_back(variety_name(v));
    batch.susceptibility.push_back(rng.uniform01());
  }

  const std::size_t n = cfg.n_rows;
  const auto span_years = static_cast<std::size_t>(cfg.year_end - cfg.year_start) + 1;
  std::vector<std::size_t> variety_of(n);
  std::vector<double> noise(n);
  batch.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data::RawRecord& r = batch.records[i];
    r.year = cfg.year_start + static_cast<int>(i * span_years / n);
    r.rainfall = round_to(rng.uniform(0.0, 400.0), 0.1);
    r.tmin = round_to(rng.uniform(2.0, 15.0), 0.01);
    r.tmax = round_to(rng.uniform(15.0, 32.0), 0.01);
    const double jitter = rng.uniform(-1.0, 1.0) * (r.tmax - r.tmin) / 4.0;
    r.tavg = std::clamp(round_to(0.5 * (r.tmin + r.tmax) + jitter, 0.01), r.tmin, r.tmax);
    r.rel_humidity = round_to(rng.uniform(30.0, 95.0), 0.1);
    variety_of[i] = static_cast<std::size_t>(rng.below(cfg.n_varieties));
    r.variety = batch.varieties[variety_of[i]];
    noise[i] = cfg.noise_sd * rng.normal();
  }

  std::vector<double> rain(n), rh(n), tavg(n);
  for (std::size_t i = 0; i < n; ++i) {
    rain[i] = batch.records[i].rainfall;
    rh[i] = batch.records[i].rel_humidity;
    tavg[i] = batch.records[i].tavg;
  }
  const auto rain01 = unit_scale(rain);
  const auto rh01 = unit_scale(rh);
  const auto tavg01 = unit_scale(tavg);
  batch.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    batch.scores[i] = latent_score(rain01[i], rh01[i], tavg01[i],
                                   batch.susceptibility[variety_of[i]]) + noise[i];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return batch.scores[a] < batch.scores[b]; });
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t tier = 3 * rank / n;
    batch.records[order[rank]].severity =
        tier == 0 ? data::Severity::Low : (tier == 1 ? data::Severity::Medium : data::Severity::High);
  }
  return batch;
}

std::vector<data::RawRecord> generate(const SynthConfig& cfg) { return generate_batch(cfg).records; }

}  // namespace sevnet::synth
