#pragma once

#include <cstdint>
#include <vector>

#include "sevnet/dataset.hpp"

namespace sevnet::synth {

/// Synthetic stand-in for the field data. Feature ranges:
///   rainfall 0-400 mm, tmin 2-15 C, tmax 15-32 C,
///   tavg = (tmin + tmax) / 2 + U(-1, 1) * (tmax - tmin) / 4, RH 30-95 %.
/// Years are spread evenly over [year_start, year_end] in row order.
struct SynthConfig {
  std::size_t n_rows = 500;
  int year_start = 2000;
  int year_end = 2018;
  std::size_t n_varieties = 4;
  double noise_sd = 0.1;
  std::uint64_t seed = 7;
};

void validate(const SynthConfig& cfg);

/// Noise-free latent severity score on batch-scaled inputs in [0, 1]:
///   2.0 * rain + 1.0 * rh + 0.8 * exp(-((tavg - 0.6) / 0.25)^2) + 0.6 * susceptibility
double latent_score(double rain01, double rh01, double tavg01, double susceptibility);

struct SynthBatch {
  std::vector<data::RawRecord> records;
  std::vector<double> scores;          // latent score incl. noise, per row
  std::vector<double> susceptibility;  // per variety, vocabulary order
  std::vector<std::string> varieties;
};

/// Classes are score tertiles: rank r (ties by row) maps to Low/Medium/High
/// by floor(3 r / n).
SynthBatch generate_batch(const SynthConfig& cfg);
std::vector<data::RawRecord> generate(const SynthConfig& cfg);

}  // namespace sevnet::synth
