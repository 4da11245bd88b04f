#include "gridarb/synth.hpp"

#include <cmath>
#include <random>

#include "gridarb/errors.hpp"

namespace gridarb {

namespace {

constexpr double kTau = 6.283185307179586;

// Base price at an offset (in seconds) from the series start: daily cycle
// with the trough at local midnight.
double base_price(const SynthConfig& cfg, std::int64_t offset_seconds) {
  const double day_fraction =
      static_cast<double>((cfg.start + offset_seconds) % 86400) / 86400.0;
  return cfg.mean - cfg.amplitude * std::cos(kTau * day_fraction);
}

}  // namespace

SeriesFragment synth_realtime(const SynthConfig& cfg) {
  if (cfg.days <= 0 || cfg.resolution_minutes <= 0 || 60 % cfg.resolution_minutes != 0)
    throw ConfigError("synth: bad config");
  const long steps_per_day = 24L * 60 / cfg.resolution_minutes;
  const long steps = steps_per_day * cfg.days;

  SeriesFragment rt;
  rt.zone = cfg.zone;
  rt.resolution_minutes = cfg.resolution_minutes;
  rt.start = cfg.start;
  rt.prices.resize(static_cast<std::size_t>(steps));

  std::mt19937 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double spike_prob = cfg.spikes_per_day / static_cast<double>(steps_per_day);

  for (long i = 0; i < steps; ++i) {
    double price = base_price(cfg, i * rt.spacing_seconds());
    if (uniform(rng) < spike_prob)
      price += std::exp(cfg.spike_log_mean + cfg.spike_log_sigma * normal(rng));
    rt.prices[static_cast<std::size_t>(i)] = price;
  }
  return rt;
}

SeriesFragment synth_dayahead(const SynthConfig& cfg) {
  const long hours = 24L * cfg.days;
  SeriesFragment da;
  da.zone = cfg.zone;
  da.resolution_minutes = 60;
  da.start = cfg.start;
  da.prices.resize(static_cast<std::size_t>(hours));
  const int spm = 60 / cfg.resolution_minutes;
  for (long h = 0; h < hours; ++h) {
    double sum = 0.0;
    for (int k = 0; k < spm; ++k)
      sum += base_price(cfg, h * 3600 + static_cast<std::int64_t>(k) * cfg.resolution_minutes * 60);
    da.prices[static_cast<std::size_t>(h)] = sum / spm;
  }
  return da;
}

PriceSeries synth_series(const SynthConfig& cfg) {
  return align_series(synth_realtime(cfg), synth_dayahead(cfg));
}

}  // namespace gridarb
