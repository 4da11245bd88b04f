#pragma once

#include <cstdint>

#include "gridarb/market_data.hpp"

namespace gridarb {

// Synthetic price generator for demos and end-to-end tests: a daily sinusoid
// plus rare lognormal spikes on the real-time stream, with the day-ahead
// stream carrying the hourly mean of the spike-free base.
struct SynthConfig {
  std::int64_t start = 1546300800;  // 2019-01-01T00:00:00Z
  int days = 90;
  int resolution_minutes = 5;
  double mean = 40.0;       // $/MWh
  double amplitude = 25.0;  // daily swing
  double spikes_per_day = 1.0;
  double spike_log_mean = 4.4;   // lognormal magnitude, median ~$81
  double spike_log_sigma = 0.6;
  std::uint32_t seed = 1;
  std::string zone = "SYN";
};

SeriesFragment synth_realtime(const SynthConfig& config);
SeriesFragment synth_dayahead(const SynthConfig& config);
PriceSeries synth_series(const SynthConfig& config);

}  // namespace gridarb
