#include "gridarb/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "gridarb/errors.hpp"
#include "gridarb/model_source.hpp"
#include "gridarb/predictor.hpp"
#include "gridarb/synth.hpp"
#include "gridarb/timeparse.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace gridarb {

std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file for hashing");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Streaming key builder: every ingredient is appended with a separator so
// adjacent fields cannot alias.
class KeyHasher {
 public:
  KeyHasher& add(const std::string& s) {
    h_ = fnv1a64(s + '\x1f', h_);
    return *this;
  }
  KeyHasher& add(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return add(buf);
  }
  KeyHasher& add(long long v) { return add(std::to_string(v)); }
  KeyHasher& add(std::uint64_t v) { return add(hex64(v)); }
  std::string hex() const { return hex64(h_); }

 private:
  std::uint64_t h_ = 1469598103934665603ULL;
};

std::int64_t parse_time_field(const json& j, const std::string& what) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) {
    auto t = parse_iso8601_utc(j.get<std::string>());
    if (t) return *t;
  }
  throw ConfigError(what + ": expected ISO-8601 UTC timestamp or epoch seconds");
}

TimeRange parse_time_range(const json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("begin") || !j.contains("end"))
    throw ConfigError(what + ": expected {\"begin\": ..., \"end\": ...}");
  TimeRange r;
  r.begin = parse_time_field(j.at("begin"), what + ".begin");
  r.end = parse_time_field(j.at("end"), what + ".end");
  if (r.end <= r.begin) throw ConfigError(what + ": end must be after begin");
  return r;
}

bool overlaps(const TimeRange& a, const TimeRange& b) {
  return a.begin < b.end && b.begin < a.end;
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  for (const auto& item : j.items())
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      throw ConfigError("unknown config key '" + item.key() + "' in " + where);
}

}  // namespace

StorageSpec RunConfig::storage_spec(double duration_hours) const {
  StorageSpec spec;
  spec.power_mw = power_mw;
  spec.energy_mwh = power_mw * duration_hours;
  spec.efficiency = efficiency;
  spec.discharge_cost = discharge_cost;
  spec.step_hours = resolution_minutes / 60.0;
  return spec;
}

std::string RunConfig::resolved_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  if (const char* env = std::getenv("GRIDARB_CACHE_DIR"); env && *env) return env;
  return out_dir + "/cache";
}

void RunConfig::validate() const {
  if (zones.empty()) throw ConfigError("config: at least one zone required");
  for (std::size_t i = 0; i < zones.size(); ++i) {
    if (zones[i].id.empty()) throw ConfigError("config: zone id must not be empty");
    if (zones[i].rt_csv.empty()) throw ConfigError("config: zone '" + zones[i].id + "' needs rt_csv");
    for (std::size_t k = i + 1; k < zones.size(); ++k)
      if (zones[i].id == zones[k].id)
        throw ConfigError("config: duplicate zone id '" + zones[i].id + "'");
  }
  if (resolution_minutes <= 0 || 60 % resolution_minutes != 0)
    throw ConfigError("config: resolution_minutes must divide 60");
  if (overlaps(test_range, train_range) || overlaps(test_range, validate_range))
    throw ConfigError("config: test range must be disjoint from train and validate ranges");
  if (durations_hours.empty()) throw ConfigError("config: durations_hours must not be empty");
  for (double d : durations_hours)
    if (!(d > 0)) throw ConfigError("config: durations must be positive");
  if (modes.empty()) throw ConfigError("config: modes must not be empty");
  if (!(power_mw > 0)) throw ConfigError("config: power_mw must be positive");
  if (!(efficiency > 0 && efficiency <= 1)) throw ConfigError("config: efficiency in (0, 1]");
  if (discharge_cost < 0) throw ConfigError("config: discharge_cost must be >= 0");
  if (value_segments <= 0 || value_segments % 10 != 0)
    throw ConfigError("config: value_segments must be a positive multiple of 10");
  if (!(initial_soc_frac >= 0 && initial_soc_frac <= 1))
    throw ConfigError("config: initial_soc_frac in [0, 1]");
  if (predictor.type != "mlp" && predictor.type != "exact" && predictor.type != "zero")
    throw ConfigError("config: predictor.type must be mlp, exact or zero");
  if (predictor.epochs < 0 || predictor.transfer_epochs < 0)
    throw ConfigError("config: epochs must be >= 0");
  if (predictor.batch <= 0) throw ConfigError("config: batch must be positive");
  if (predictor.stride < 1) throw ConfigError("config: stride must be >= 1");
  if (predictor.seeds.empty()) throw ConfigError("config: at least one seed required");
  if (!(predictor.learning_rate > 0)) throw ConfigError("config: learning_rate must be positive");
  if (workers < 1) throw ConfigError("config: workers must be >= 1");
  for (double d : durations_hours) storage_spec(d).validate();
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  check_keys(j,
             {"zones", "resolution_minutes", "train_range", "validate_range", "test_range",
              "storage", "modes", "value_segments", "predictor", "initial_soc_frac", "out_dir",
              "cache_dir", "workers"},
             source);

  RunConfig cfg;
  try {
    if (!j.contains("zones") || !j.at("zones").is_array())
      throw ConfigError(source + ": zones array required");
    for (const auto& zj : j.at("zones")) {
      check_keys(zj, {"id", "rt_csv", "da_csv"}, source + " zone entry");
      ZoneConfig z;
      z.id = get_or<std::string>(zj, "id", "");
      z.rt_csv = get_or<std::string>(zj, "rt_csv", "");
      z.da_csv = get_or<std::string>(zj, "da_csv", "");
      cfg.zones.push_back(std::move(z));
    }
    cfg.resolution_minutes = get_or(j, "resolution_minutes", cfg.resolution_minutes);
    cfg.train_range = parse_time_range(j.at("train_range"), "train_range");
    cfg.validate_range = parse_time_range(j.at("validate_range"), "validate_range");
    cfg.test_range = parse_time_range(j.at("test_range"), "test_range");

    if (j.contains("storage")) {
      const json& s = j.at("storage");
      check_keys(s, {"power_mw", "durations_hours", "efficiency", "discharge_cost"},
                 source + " storage");
      cfg.power_mw = get_or(s, "power_mw", cfg.power_mw);
      cfg.durations_hours = get_or(s, "durations_hours", cfg.durations_hours);
      cfg.efficiency = get_or(s, "efficiency", cfg.efficiency);
      cfg.discharge_cost = get_or(s, "discharge_cost", cfg.discharge_cost);
    }
    if (j.contains("modes")) {
      cfg.modes.clear();
      for (const auto& mj : j.at("modes")) cfg.modes.push_back(parse_mode(mj.get<std::string>()));
    }
    cfg.value_segments = get_or(j, "value_segments", cfg.value_segments);
    if (j.contains("predictor")) {
      const json& p = j.at("predictor");
      check_keys(p,
                 {"type", "hidden", "epochs", "learning_rate", "batch", "momentum", "seeds",
                  "stride", "da_lookback_hours", "rt_lookback_steps", "transfer_from",
                  "transfer_epochs"},
                 source + " predictor");
      cfg.predictor.type = get_or<std::string>(p, "type", cfg.predictor.type);
      cfg.predictor.hidden = get_or(p, "hidden", cfg.predictor.hidden);
      cfg.predictor.epochs = get_or(p, "epochs", cfg.predictor.epochs);
      cfg.predictor.learning_rate = get_or(p, "learning_rate", cfg.predictor.learning_rate);
      cfg.predictor.batch = get_or(p, "batch", cfg.predictor.batch);
      cfg.predictor.momentum = get_or(p, "momentum", cfg.predictor.momentum);
      cfg.predictor.seeds = get_or(p, "seeds", cfg.predictor.seeds);
      cfg.predictor.stride = get_or(p, "stride", cfg.predictor.stride);
      cfg.predictor.da_hours = get_or(p, "da_lookback_hours", cfg.predictor.da_hours);
      cfg.predictor.rt_steps = get_or(p, "rt_lookback_steps", cfg.predictor.rt_steps);
      cfg.predictor.transfer_from = get_or<std::string>(p, "transfer_from", "");
      cfg.predictor.transfer_epochs = get_or(p, "transfer_epochs", cfg.predictor.transfer_epochs);
    }
    cfg.initial_soc_frac = get_or(j, "initial_soc_frac", cfg.initial_soc_frac);
    cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
    cfg.cache_dir = get_or<std::string>(j, "cache_dir", cfg.cache_dir);
    cfg.workers = get_or(j, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::optional<double> profit_ratio(double profit, double pf_profit) {
  if (!(pf_profit > 0)) return std::nullopt;
  return 100.0 * profit / pf_profit;
}

bool ProfitReport::fully_cached() const {
  for (const LegResult& leg : legs)
    if (!leg.sim_cached) return false;
  return !legs.empty();
}

void ProfitReport::write_csv(std::ostream& out) const {
  out << "zone,duration_hr,mode,profit,pf_profit,ratio_pct\n";
  char buf[192];
  for (const LegResult& leg : legs) {
    if (leg.ratio_pct)
      std::snprintf(buf, sizeof buf, "%s,%g,%s,%.2f,%.2f,%.2f\n", leg.zone.c_str(),
                    leg.duration_hours, mode_name(leg.mode).c_str(), leg.profit, leg.pf_profit,
                    *leg.ratio_pct);
    else
      std::snprintf(buf, sizeof buf, "%s,%g,%s,%.2f,%.2f,undefined\n", leg.zone.c_str(),
                    leg.duration_hours, mode_name(leg.mode).c_str(), leg.profit, leg.pf_profit);
    out << buf;
  }
}

void ProfitReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_csv(out);
}

std::string ProfitReport::table() const {
  // Pivot: one row per zone, one column per (mode, duration).
  std::vector<std::pair<Mode, double>> columns;
  std::vector<std::string> zones;
  for (const LegResult& leg : legs) {
    const auto col = std::make_pair(leg.mode, leg.duration_hours);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    if (std::find(zones.begin(), zones.end(), leg.zone) == zones.end()) zones.push_back(leg.zone);
  }
  std::ostringstream out;
  out << "Captured profit ratio, % of perfect foresight\n";
  out << "zone        ";
  char buf[64];
  for (const auto& [mode, dur] : columns) {
    std::snprintf(buf, sizeof buf, "%s-%ghr", mode_name(mode).c_str(), dur);
    out << ' ';
    out.width(11);
    out << buf;
  }
  out << '\n';
  for (const std::string& zone : zones) {
    out << zone;
    for (std::size_t pad = zone.size(); pad < 12; ++pad) out << ' ';
    for (const auto& [mode, dur] : columns) {
      const auto it = std::find_if(legs.begin(), legs.end(), [&](const LegResult& leg) {
        return leg.zone == zone && leg.mode == mode && leg.duration_hours == dur;
      });
      out << ' ';
      out.width(11);
      if (it == legs.end())
        out << "-";
      else if (it->ratio_pct) {
        std::snprintf(buf, sizeof buf, "%.2f", *it->ratio_pct);
        out << buf;
      } else {
        out << "undefined";
      }
    }
    out << '\n';
  }
  return out.str();
}

namespace {

// Rethrow stage failures with context, preserving the error class (and so the
// CLI exit code).
template <typename Fn>
auto stage(const std::string& name, const std::string& leg, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + name + "' (" + leg + "): " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage '" + name + "' (" + leg + "): " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage '" + name + "' (" + leg + "): " + e.what());
  } catch (const std::exception& e) {
    throw NumericError("stage '" + name + "' (" + leg + "): " + e.what());
  }
}

struct ZoneData {
  ZoneConfig config;
  std::string bundle_key;
  std::shared_ptr<const PriceSeries> series;
};

std::string zone_bundle_key(const RunConfig& cfg, const ZoneConfig& zone) {
  KeyHasher key;
  key.add("bundle-v1").add(zone.id).add(static_cast<long long>(cfg.resolution_minutes));
  key.add(hash_file(zone.rt_csv));
  if (zone.da_csv.empty())
    key.add("synth-da");
  else
    key.add(hash_file(zone.da_csv));
  return key.hex();
}

ZoneData prepare_zone(const RunConfig& cfg, const ZoneConfig& zone, std::ostream& log) {
  ZoneData data;
  data.config = zone;
  data.bundle_key = zone_bundle_key(cfg, zone);
  const fs::path cache_path =
      fs::path(cfg.resolved_cache_dir()) / (data.bundle_key + ".bundle.json");
  if (fs::exists(cache_path)) {
    data.series = std::make_shared<PriceSeries>(load_bundle(cache_path.string()));
    log << "[ingest] " << zone.id << ": bundle cache hit (" << data.series->size() << " steps)\n";
    return data;
  }
  SeriesFragment rt = load_price_csv(zone.rt_csv, PriceKind::realtime, zone.id,
                                     cfg.resolution_minutes);
  SeriesFragment da = zone.da_csv.empty()
                          ? synthesize_dayahead(rt)
                          : load_price_csv(zone.da_csv, PriceKind::dayahead, zone.id, 60);
  PriceSeries series = align_series(rt, da);
  series.da_synthesized = zone.da_csv.empty();
  save_bundle(series, cache_path.string());
  data.series = std::make_shared<PriceSeries>(std::move(series));
  const PriceStats stats = price_stats(*data.series);
  char line[256];
  std::snprintf(line, sizeof line,
                "[ingest] %s: %ld steps, %ld negative, mean %.2f, std %.2f, gaps rt=%ld da=%ld%s\n",
                zone.id.c_str(), stats.count, stats.negative_count, stats.mean, stats.std_dev,
                data.series->rt_gaps_filled, data.series->da_gaps_filled,
                data.series->da_synthesized ? ", day-ahead synthesized" : "");
  log << line;
  return data;
}

struct LegOutcome {
  std::vector<LegResult> results;  // one per mode
  std::string log;
};

std::string model_cache_key(const RunConfig& cfg, const ZoneData& zone, double duration, int S,
                            int shift) {
  KeyHasher key;
  key.add("model-v1").add(zone.bundle_key);
  key.add(cfg.power_mw).add(duration).add(cfg.efficiency).add(cfg.discharge_cost);
  key.add(static_cast<long long>(cfg.value_segments));
  key.add(static_cast<long long>(cfg.predictor.da_hours))
      .add(static_cast<long long>(cfg.predictor.rt_steps));
  key.add(static_cast<long long>(S)).add(static_cast<long long>(shift));
  key.add(static_cast<long long>(cfg.predictor.stride));
  key.add(static_cast<long long>(cfg.predictor.batch));
  key.add(cfg.predictor.learning_rate).add(cfg.predictor.momentum);
  for (int h : cfg.predictor.hidden) key.add(static_cast<long long>(h));
  for (std::uint32_t s : cfg.predictor.seeds) key.add(static_cast<long long>(s));
  key.add(static_cast<long long>(cfg.train_range.begin))
      .add(static_cast<long long>(cfg.train_range.end));
  key.add(static_cast<long long>(cfg.validate_range.begin))
      .add(static_cast<long long>(cfg.validate_range.end));
  if (cfg.predictor.transfer_from.empty()) {
    key.add("scratch").add(static_cast<long long>(cfg.predictor.epochs));
  } else {
    key.add("transfer").add(hash_file(cfg.predictor.transfer_from));
    key.add(static_cast<long long>(cfg.predictor.transfer_epochs));
  }
  return key.hex();
}

std::string duration_label(double duration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%ghr", duration);
  return buf;
}

LegOutcome run_leg(const RunConfig& cfg, const ZoneData& zone, double duration) {
  LegOutcome outcome;
  std::ostringstream log;
  const std::string leg = zone.config.id + " " + duration_label(duration);
  const StorageSpec spec = cfg.storage_spec(duration);
  const PriceSeries& series = *zone.series;
  const int spm = series.steps_per_hour();
  const fs::path cache(cfg.resolved_cache_dir());
  const double e0 = cfg.initial_soc_frac * spec.energy_mwh;

  const IndexRange test_r = stage("ranges", leg, [&] {
    return index_range(series, cfg.test_range.begin, cfg.test_range.end);
  });

  // The exact surface over the test window backs both the perfect-foresight
  // benchmark and the oracle-predictor runs; built lazily, never cached (it
  // is cheap relative to its size on disk).
  ValueSurface test_surface;
  bool have_surface = false;
  const auto ensure_surface = [&]() -> const ValueSurface& {
    if (!have_surface) {
      test_surface = stage("value", leg, [&] {
        return backward_induction(series, test_r, spec, cfg.value_segments);
      });
      have_surface = true;
      char line[128];
      std::snprintf(line, sizeof line, "[value] %s: %ld curves x %d segments in %.2fs\n",
                    leg.c_str(), test_surface.steps() + 1, test_surface.segments(),
                    test_surface.build_seconds);
      log << line;
    }
    return test_surface;
  };

  // Perfect foresight profit, cached as a tiny JSON.
  KeyHasher pf_key;
  pf_key.add("pf-v1").add(zone.bundle_key);
  pf_key.add(cfg.power_mw).add(duration).add(cfg.efficiency).add(cfg.discharge_cost);
  pf_key.add(static_cast<long long>(cfg.value_segments));
  pf_key.add(static_cast<long long>(cfg.test_range.begin))
      .add(static_cast<long long>(cfg.test_range.end));
  pf_key.add(cfg.initial_soc_frac);
  const fs::path pf_path = cache / (pf_key.hex() + ".pf.json");
  double pf_profit = 0.0;
  if (fs::exists(pf_path)) {
    std::ifstream in(pf_path);
    json j;
    in >> j;
    pf_profit = j.at("pf_profit").get<double>();
  } else {
    pf_profit = stage("value", leg, [&] {
      SurfaceCurveSource source(&ensure_surface(), test_r.begin, 0);
      SimOptions opt;
      opt.mode = Mode::pr10;
      opt.bid_segments = 10;
      opt.range = test_r;
      opt.initial_soc = e0;
      return simulate(series, spec, source, opt).total_profit;
    });
    std::ofstream out(pf_path);
    out << json{{"pf_profit", pf_profit}}.dump() << '\n';
  }

  // One trained model per distinct (segments, shift) the mode list needs.
  std::map<std::pair<int, int>, PredictorModel> models;
  std::map<std::pair<int, int>, std::pair<std::string, bool>> model_keys;  // key, cache hit
  if (cfg.predictor.type == "mlp") {
    for (Mode mode : cfg.modes) {
      const int S = mode_segments(mode);
      const int shift = is_hour_ahead(mode) ? spm : 0;
      const auto id = std::make_pair(S, shift);
      if (models.count(id)) continue;
      const std::string key = model_cache_key(cfg, zone, duration, S, shift);
      const fs::path model_path = cache / (key + ".model.bin");
      if (fs::exists(model_path)) {
        models.emplace(id, load_model(model_path.string()));
        model_keys.emplace(id, std::make_pair(key, true));
        log << "[train] " << leg << " S=" << S << " shift=" << shift << ": model cache hit\n";
        continue;
      }
      const IndexRange train_r = stage("features", leg, [&] {
        return index_range(series, cfg.train_range.begin, cfg.train_range.end);
      });
      const IndexRange val_r = stage("features", leg, [&] {
        return index_range(series, cfg.validate_range.begin, cfg.validate_range.end);
      });
      FeatureParams params;
      params.da_hours = cfg.predictor.da_hours;
      params.rt_steps = cfg.predictor.rt_steps;
      params.target_segments = S;
      params.hour_shift_steps = shift;

      const long horizon = std::max(train_r.end, val_r.end);
      const ValueSurface train_surface = stage("value", leg, [&] {
        return backward_induction(series, IndexRange{0, horizon}, spec, cfg.value_segments);
      });
      const TrainingSet train_set = stage("features", leg, [&] {
        return build_training_set(zone.series, train_surface, {train_r}, params,
                                  cfg.predictor.stride);
      });
      const TrainingSet val_set = stage("features", leg, [&] {
        return build_training_set(zone.series, train_surface, {val_r}, params,
                                  cfg.predictor.stride, &train_set.norm);
      });

      TrainOptions options;
      options.learning_rate = cfg.predictor.learning_rate;
      options.batch = cfg.predictor.batch;
      options.momentum = cfg.predictor.momentum;

      std::pair<PredictorModel, TrainReport> trained = stage("train", leg, [&] {
        if (!cfg.predictor.transfer_from.empty()) {
          options.epochs = cfg.predictor.transfer_epochs;
          PredictorModel base = load_model(cfg.predictor.transfer_from);
          return transfer(base, train_set, val_set, options);
        }
        options.epochs = cfg.predictor.epochs;
        return train_best_of(cfg.predictor.seeds, cfg.predictor.hidden, train_set, val_set,
                             options);
      });
      trained.first.meta.zone = zone.config.id;
      save_model(trained.first, model_path.string());
      char line[256];
      std::snprintf(line, sizeof line,
                    "[train] %s S=%d shift=%d: %ld windows, val mse %.4f at %s, %.1fs\n",
                    leg.c_str(), S, shift, train_set.count(),
                    trained.second.best_validation_mse, trained.second.checkpoint.c_str(),
                    trained.second.wall_seconds);
      log << line;
      models.emplace(id, std::move(trained.first));
      model_keys.emplace(id, std::make_pair(key, false));
    }
  }

  for (Mode mode : cfg.modes) {
    const int J = mode_segments(mode);
    const int shift = is_hour_ahead(mode) ? spm : 0;
    const auto id = std::make_pair(J, shift);

    std::string predictor_id = cfg.predictor.type;
    bool model_cached = false;
    if (cfg.predictor.type == "mlp") {
      predictor_id = model_keys.at(id).first;
      model_cached = model_keys.at(id).second;
    }

    KeyHasher sim_key;
    sim_key.add("sim-v1").add(zone.bundle_key).add(predictor_id).add(mode_name(mode));
    sim_key.add(cfg.power_mw).add(duration).add(cfg.efficiency).add(cfg.discharge_cost);
    sim_key.add(static_cast<long long>(cfg.value_segments));
    sim_key.add(static_cast<long long>(cfg.test_range.begin))
        .add(static_cast<long long>(cfg.test_range.end));
    sim_key.add(cfg.initial_soc_frac);
    const fs::path meta_path = cache / (sim_key.hex() + ".sim.json");
    const fs::path records_path = cache / (sim_key.hex() + ".sim.csv");
    const fs::path monthly_path = cache / (sim_key.hex() + ".sim.monthly.csv");

    LegResult result;
    result.zone = zone.config.id;
    result.duration_hours = duration;
    result.mode = mode;
    result.pf_profit = pf_profit;
    result.model_cached = model_cached;

    if (fs::exists(meta_path) && fs::exists(records_path) && fs::exists(monthly_path)) {
      std::ifstream in(meta_path);
      json j;
      in >> j;
      result.profit = j.at("profit").get<double>();
      for (const auto& entry : j.at("monthly"))
        result.monthly.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<double>());
      result.sim_cached = true;
      log << "[simulate] " << leg << " " << mode_name(mode) << ": cache hit\n";
    } else {
      const SimulationResult sim = stage("simulate", leg + " " + mode_name(mode), [&] {
        SimOptions opt;
        opt.mode = mode;
        opt.bid_segments = J;
        opt.range = test_r;
        opt.initial_soc = e0;
        if (cfg.predictor.type == "mlp") {
          ModelCurveSource source(&models.at(id), zone.series, spec.energy_mwh);
          return simulate(series, spec, source, opt);
        }
        if (cfg.predictor.type == "zero") {
          ZeroCurveSource source(spec.energy_mwh, J, shift);
          return simulate(series, spec, source, opt);
        }
        SurfaceCurveSource source(&ensure_surface(), test_r.begin, shift);
        return simulate(series, spec, source, opt);
      });
      result.profit = sim.total_profit;
      result.monthly = sim.monthly;
      write_result_csv(sim, records_path.string());
      write_monthly_csv(sim, monthly_path.string());
      json monthly = json::array();
      for (const auto& [month, profit] : sim.monthly) monthly.push_back({month, profit});
      std::ofstream out(meta_path);
      out << json{{"profit", sim.total_profit}, {"monthly", monthly}}.dump() << '\n';
      char line[160];
      std::snprintf(line, sizeof line, "[simulate] %s %s: profit %.2f (pf %.2f)\n", leg.c_str(),
                    mode_name(mode).c_str(), result.profit, pf_profit);
      log << line;
    }

    result.ratio_pct = profit_ratio(result.profit, result.pf_profit);
    if (result.ratio_pct && *result.ratio_pct > 100.5)
      throw NumericError("stage 'report' (" + leg + " " + mode_name(mode) + "): profit ratio " +
                         std::to_string(*result.ratio_pct) +
                         "% exceeds perfect foresight beyond grid tolerance");

    // Publish per-leg artifacts next to the report.
    const std::string base = zone.config.id + "_" + duration_label(duration) + "_" +
                             mode_name(mode);
    fs::copy_file(records_path, fs::path(cfg.out_dir) / (base + ".csv"),
                  fs::copy_options::overwrite_existing);
    fs::copy_file(monthly_path, fs::path(cfg.out_dir) / (base + "_monthly.csv"),
                  fs::copy_options::overwrite_existing);
    outcome.results.push_back(std::move(result));
  }
  outcome.log = log.str();
  return outcome;
}

}  // namespace

ProfitReport run_pipeline(const RunConfig& config, std::ostream& log) {
  config.validate();
  fs::create_directories(config.out_dir);
  fs::create_directories(config.resolved_cache_dir());

  // Zones load sequentially (bundles are shared); legs fan out over workers.
  std::vector<ZoneData> zones;
  for (const ZoneConfig& zone : config.zones)
    zones.push_back(stage("ingest", zone.id, [&] { return prepare_zone(config, zone, log); }));

  struct Leg {
    std::size_t zone_idx;
    double duration;
  };
  std::vector<Leg> legs;
  for (std::size_t z = 0; z < zones.size(); ++z)
    for (double d : config.durations_hours) legs.push_back({z, d});

  std::vector<LegOutcome> outcomes(legs.size());
  std::vector<std::exception_ptr> failures(legs.size());

  if (config.workers <= 1 || legs.size() <= 1) {
    for (std::size_t i = 0; i < legs.size(); ++i) {
      try {
        outcomes[i] = run_leg(config, zones[legs[i].zone_idx], legs[i].duration);
      } catch (...) {
        failures[i] = std::current_exception();
      }
      if (!failures[i]) log << outcomes[i].log;
    }
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t n_workers = std::min<std::size_t>(
        static_cast<std::size_t>(config.workers), legs.size());
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= legs.size()) return;
          try {
            outcomes[i] = run_leg(config, zones[legs[i].zone_idx], legs[i].duration);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < legs.size(); ++i)
      if (!failures[i]) log << outcomes[i].log;
  }
  for (std::size_t i = 0; i < legs.size(); ++i)
    if (failures[i]) std::rethrow_exception(failures[i]);

  ProfitReport report;
  for (const LegOutcome& outcome : outcomes)
    for (const LegResult& result : outcome.results) report.legs.push_back(result);

  report.write_csv(config.out_dir + "/report.csv");
  log << report.table();
  if (report.fully_cached()) log << "[report] all stages cache hits; report reproduced\n";
  return report;
}

}  // namespace gridarb
