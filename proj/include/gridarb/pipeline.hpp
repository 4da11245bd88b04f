#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gridarb/dispatch.hpp"

namespace gridarb {

struct ZoneConfig {
  std::string id;
  std::string rt_csv;
  std::string da_csv;  // empty: synthesize the day-ahead proxy stream
};

struct TimeRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;  // exclusive
};

struct PredictorConfig {
  std::string type = "mlp";  // mlp | exact | zero
  std::vector<int> hidden{256, 128};
  long epochs = 100;
  double learning_rate = 1e-3;
  int batch = 128;
  double momentum = 0.9;
  std::vector<std::uint32_t> seeds{1, 2, 3};
  long stride = 1;
  int da_hours = 24;
  int rt_steps = 36;
  std::string transfer_from;  // model file: fine-tune its output block instead
  long transfer_epochs = 25;
};

struct RunConfig {
  std::vector<ZoneConfig> zones;
  int resolution_minutes = 5;
  TimeRange train_range;
  TimeRange validate_range;
  TimeRange test_range;
  double power_mw = 1.0;
  std::vector<double> durations_hours{2, 4, 12};
  double efficiency = 0.9;
  double discharge_cost = 10.0;
  std::vector<Mode> modes{Mode::pr10};
  int value_segments = 1000;
  PredictorConfig predictor;
  double initial_soc_frac = 0.5;
  std::string out_dir = "runs/out";
  std::string cache_dir;  // empty: $GRIDARB_CACHE_DIR, else out_dir/cache
  int workers = 1;

  StorageSpec storage_spec(double duration_hours) const;
  std::string resolved_cache_dir() const;
  void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& source_name);

struct LegResult {
  std::string zone;
  double duration_hours = 0.0;
  Mode mode = Mode::pr10;
  double profit = 0.0;
  double pf_profit = 0.0;
  std::optional<double> ratio_pct;
  std::vector<std::pair<std::string, double>> monthly;
  bool model_cached = false;
  bool sim_cached = false;
};

struct ProfitReport {
  std::vector<LegResult> legs;

  bool fully_cached() const;
  std::string table() const;  // zone-by-(mode, duration) ratio pivot
  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
};

// 100 * profit / pf_profit; undefined (not NaN) when pf_profit <= 0.
std::optional<double> profit_ratio(double profit, double pf_profit);

// ingest -> value -> features -> train/transfer -> simulate -> report for the
// cross product of zones, durations and modes. Artifacts are cached in the
// cache dir keyed by content hash, so re-running an unchanged config only
// replays cached results. Any stage failure carries the stage name and leg.
ProfitReport run_pipeline(const RunConfig& config, std::ostream& log);

// 64-bit FNV-1a, the cache key primitive.
std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed = 1469598103934665603ULL);
std::uint64_t hash_file(const std::string& path);

}  // namespace gridarb
