// Command-line front end: ingest, value, train, transfer, simulate, report,
// pipeline. Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <memory>

#include "gridarb/dispatch.hpp"
#include "gridarb/errors.hpp"
#include "gridarb/market_data.hpp"
#include "gridarb/model_source.hpp"
#include "gridarb/pipeline.hpp"
#include "gridarb/predictor.hpp"
#include "gridarb/timeparse.hpp"
#include "gridarb/valuation.hpp"

namespace {

using namespace gridarb;

struct SpecFlags {
  double power = 1.0;
  double energy = 2.0;
  double eta = 0.9;
  double cost = 10.0;
};

void add_spec_flags(CLI::App* cmd, SpecFlags& flags) {
  cmd->add_option("--power", flags.power, "Power rating, MW");
  cmd->add_option("--energy", flags.energy, "Energy capacity, MWh");
  cmd->add_option("--eta", flags.eta, "One-way efficiency in (0, 1]");
  cmd->add_option("--cost", flags.cost, "Discharge cost, $/MWh");
}

StorageSpec make_spec(const SpecFlags& flags, int resolution_minutes) {
  StorageSpec spec;
  spec.power_mw = flags.power;
  spec.energy_mwh = flags.energy;
  spec.efficiency = flags.eta;
  spec.discharge_cost = flags.cost;
  spec.step_hours = resolution_minutes / 60.0;
  spec.validate();
  return spec;
}

std::int64_t parse_time_arg(const std::string& value, const char* what) {
  auto t = parse_iso8601_utc(value);
  if (!t) throw ConfigError(std::string(what) + ": bad timestamp '" + value + "'");
  return *t;
}

int cmd_ingest(const std::string& rt, const std::string& da, const std::string& zone,
               int resolution, const std::string& out) {
  SeriesFragment rt_frag = load_price_csv(rt, PriceKind::realtime, zone, resolution);
  SeriesFragment da_frag =
      da.empty() ? synthesize_dayahead(rt_frag) : load_price_csv(da, PriceKind::dayahead, zone, 60);
  PriceSeries series = align_series(rt_frag, da_frag);
  series.da_synthesized = da.empty();
  save_bundle(series, out);

  const PriceStats stats = price_stats(series);
  std::printf("zone         steps  negative      mean       std       min       max  gaps\n");
  std::printf("%-10s %7ld %9ld %9.2f %9.2f %9.2f %9.2f %5ld\n", series.zone.c_str(), stats.count,
              stats.negative_count, stats.mean, stats.std_dev, stats.min, stats.max,
              series.rt_gaps_filled + series.da_gaps_filled);
  if (series.da_synthesized)
    std::printf("note: no day-ahead file; synthesized trailing 24h mean proxy\n");
  std::printf("bundle written to %s\n", out.c_str());
  return 0;
}

int cmd_value(const std::string& bundle_path, const SpecFlags& flags, int segments,
              const std::string& out, const std::string& csv, const std::string& begin,
              const std::string& end) {
  PriceSeries series = load_bundle(bundle_path);
  StorageSpec spec = make_spec(flags, series.resolution_minutes);
  IndexRange range{0, series.size()};
  if (!begin.empty() || !end.empty()) {
    const std::int64_t b = begin.empty() ? series.rt_start : parse_time_arg(begin, "--begin");
    const std::int64_t e =
        end.empty() ? series.timestamp(series.size() - 1) + series.spacing_seconds()
                    : parse_time_arg(end, "--end");
    range = index_range(series, b, e);
  }
  const ValueSurface surface = backward_induction(series, range, spec, segments);
  std::printf("surface: %ld curves x %d segments in %.3fs\n", surface.steps() + 1,
              surface.segments(), surface.build_seconds);
  if (!out.empty()) {
    save_surface(surface, out);
    std::printf("surface written to %s\n", out.c_str());
  }
  if (!csv.empty()) {
    write_surface_csv(surface, csv);
    std::printf("surface csv written to %s\n", csv.c_str());
  }
  return 0;
}

struct FeatureFlags {
  std::string bundle;
  std::string surface;
  std::string train_begin, train_end, val_begin, val_end;
  int da_hours = 24;
  int rt_steps = 36;
  int target_segments = 10;
  int shift_hours = 0;
  long stride = 1;
};

void add_feature_flags(CLI::App* cmd, FeatureFlags& flags) {
  cmd->add_option("--bundle", flags.bundle, "Price bundle (alternative to --set)");
  cmd->add_option("--surface", flags.surface, "Value surface file for targets");
  cmd->add_option("--train-begin", flags.train_begin, "Training range start (ISO-8601)");
  cmd->add_option("--train-end", flags.train_end, "Training range end");
  cmd->add_option("--val-begin", flags.val_begin, "Validation range start");
  cmd->add_option("--val-end", flags.val_end, "Validation range end");
  cmd->add_option("--da-hours", flags.da_hours, "Day-ahead lookback, hours");
  cmd->add_option("--rt-steps", flags.rt_steps, "Real-time lookback, steps");
  cmd->add_option("--target-segments", flags.target_segments, "Curve segments to predict");
  cmd->add_option("--shift-hours", flags.shift_hours, "Target shift (1 for hour-ahead)");
  cmd->add_option("--stride", flags.stride, "Anchor stride");
}

std::pair<TrainingSet, TrainingSet> build_sets_from_flags(const FeatureFlags& flags) {
  if (flags.bundle.empty() || flags.surface.empty())
    throw ConfigError("need either --set or both --bundle and --surface");
  auto series = std::make_shared<PriceSeries>(load_bundle(flags.bundle));
  const ValueSurface surface = load_surface(flags.surface);
  FeatureParams params;
  params.da_hours = flags.da_hours;
  params.rt_steps = flags.rt_steps;
  params.target_segments = flags.target_segments;
  params.hour_shift_steps = flags.shift_hours * series->steps_per_hour();
  if (flags.train_begin.empty() || flags.train_end.empty())
    throw ConfigError("--train-begin/--train-end required with --bundle");
  const IndexRange train_r = index_range(*series, parse_time_arg(flags.train_begin, "--train-begin"),
                                         parse_time_arg(flags.train_end, "--train-end"));
  TrainingSet train_set = build_training_set(series, surface, {train_r}, params, flags.stride);
  TrainingSet val_set;
  if (!flags.val_begin.empty() && !flags.val_end.empty()) {
    const IndexRange val_r = index_range(*series, parse_time_arg(flags.val_begin, "--val-begin"),
                                         parse_time_arg(flags.val_end, "--val-end"));
    val_set = build_training_set(series, surface, {val_r}, params, flags.stride, &train_set.norm);
  } else {
    throw ConfigError("--val-begin/--val-end required with --bundle");
  }
  return {std::move(train_set), std::move(val_set)};
}

// Split a materialized dump: last fifth becomes validation when no --val-set.
std::pair<TrainingSet, TrainingSet> split_materialized(TrainingSet whole) {
  const long n = whole.count();
  const long cut = std::max(1L, n - n / 5);
  if (cut >= n) throw DataError("training set too small to split validation from");
  TrainingSet train = whole, val = whole;
  train.anchors.assign(whole.anchors.begin(), whole.anchors.begin() + cut);
  train.materialized = whole.materialized.topRows(cut);
  train.targets = whole.targets.topRows(cut);
  val.anchors.assign(whole.anchors.begin() + cut, whole.anchors.end());
  val.materialized = whole.materialized.bottomRows(n - cut);
  val.targets = whole.targets.bottomRows(n - cut);
  return {std::move(train), std::move(val)};
}

int cmd_train(const std::string& set_path, const std::string& val_path, const FeatureFlags& flags,
              long epochs, double lr, int batch, double momentum, int seeds,
              const std::vector<int>& hidden, const std::string& out,
              const std::string& dump_set) {
  TrainingSet train_set, val_set;
  if (!set_path.empty()) {
    if (!val_path.empty()) {
      train_set = load_training_set(set_path);
      val_set = load_training_set(val_path);
    } else {
      std::tie(train_set, val_set) = split_materialized(load_training_set(set_path));
    }
  } else {
    std::tie(train_set, val_set) = build_sets_from_flags(flags);
  }
  if (!dump_set.empty()) {
    save_training_set(train_set, dump_set);
    std::printf("training set dumped to %s\n", dump_set.c_str());
  }

  TrainOptions options;
  options.epochs = epochs;
  options.learning_rate = lr;
  options.batch = batch;
  options.momentum = momentum;
  std::vector<std::uint32_t> seed_list;
  for (int s = 1; s <= seeds; ++s) seed_list.push_back(static_cast<std::uint32_t>(s));

  auto [model, report] = train_best_of(seed_list, hidden, train_set, val_set, options);
  save_model(model, out);
  std::printf("trained %ld windows, %ld parameters; best val mse %.6f at %s (%.1fs)\n",
              train_set.count(), model.parameter_count(), report.best_validation_mse,
              report.checkpoint.c_str(), report.wall_seconds);
  std::printf("model written to %s\n", out.c_str());
  return 0;
}

int cmd_transfer(const std::string& model_path, const std::string& set_path,
                 const std::string& val_path, const FeatureFlags& flags, long epochs, double lr,
                 const std::string& out) {
  PredictorModel base = load_model(model_path);
  TrainingSet train_set, val_set;
  if (!set_path.empty()) {
    if (!val_path.empty()) {
      train_set = load_training_set(set_path);
      val_set = load_training_set(val_path);
    } else {
      std::tie(train_set, val_set) = split_materialized(load_training_set(set_path));
    }
  } else {
    std::tie(train_set, val_set) = build_sets_from_flags(flags);
  }
  TrainOptions options;
  options.epochs = epochs;
  options.learning_rate = lr;
  auto [model, report] = transfer(base, train_set, val_set, options);
  save_model(model, out);
  std::printf("transfer on %ld windows; best val mse %.6f at %s (%.1fs)\n", train_set.count(),
              report.best_validation_mse, report.checkpoint.c_str(), report.wall_seconds);
  std::printf("model written to %s\n", out.c_str());
  return 0;
}

int cmd_simulate(const std::string& mode_name_arg, const std::string& model_path,
                 const std::string& surface_path, const std::string& bundle_path,
                 const SpecFlags& flags, int segments, const std::string& begin,
                 const std::string& end, double soc_frac, const std::string& out,
                 const std::string& monthly_out, bool with_pf) {
  PriceSeries series = load_bundle(bundle_path);
  auto series_ptr = std::make_shared<PriceSeries>(series);
  const StorageSpec spec = make_spec(flags, series.resolution_minutes);
  const Mode mode = parse_mode(mode_name_arg);
  const int spm = series.steps_per_hour();
  const int shift = is_hour_ahead(mode) ? spm : 0;

  IndexRange range{0, series.size()};
  if (!begin.empty()) range.begin = index_range(series, parse_time_arg(begin, "--begin"),
                                                series.timestamp(series.size() - 1) + 1)
                                        .begin;
  if (!end.empty())
    range.end = index_range(series, series.rt_start, parse_time_arg(end, "--end")).end;

  std::unique_ptr<CurveSource> source;
  PredictorModel model;
  ValueSurface surface;
  if (!model_path.empty()) {
    model = load_model(model_path);
    if (model.meta.hour_shift_steps != shift)
      throw ConfigError("model hour shift does not match mode " + mode_name_arg);
    if (model.meta.target_segments != mode_segments(mode))
      throw ConfigError("model outputs " + std::to_string(model.meta.target_segments) +
                        " segments; mode " + mode_name_arg + " needs " +
                        std::to_string(mode_segments(mode)));
    source = std::make_unique<ModelCurveSource>(&model, series_ptr, spec.energy_mwh);
    if (range.begin == 0) {
      // Default start: first step with full warm-up history.
      range.begin = first_valid_anchor(series, model.meta.feature_params()) + shift;
      if (is_hour_ahead(mode)) {
        while ((series.timestamp(range.begin) % 3600) != 0) ++range.begin;
      }
    }
  } else if (!surface_path.empty()) {
    surface = load_surface(surface_path);
    source = std::make_unique<SurfaceCurveSource>(&surface, 0, shift);
    if (range.begin == 0 && shift > 0) range.begin = shift;
  } else {
    throw ConfigError("simulate needs --model or --surface");
  }

  SimOptions opt;
  opt.mode = mode;
  opt.bid_segments = mode_segments(mode);
  opt.range = range;
  opt.initial_soc = soc_frac < 0 ? -1.0 : soc_frac * spec.energy_mwh;
  const SimulationResult result = simulate(series, spec, *source, opt);

  std::printf("%s over steps [%ld, %ld): profit %.2f over %zu steps\n", mode_name_arg.c_str(),
              range.begin, range.end, result.total_profit, result.records.size());
  if (with_pf) {
    const double pf = perfect_foresight_profit(series, range, spec, segments,
                                               opt.initial_soc);
    const auto ratio = profit_ratio(result.total_profit, pf);
    if (ratio)
      std::printf("perfect foresight %.2f, profit ratio %.2f%%\n", pf, *ratio);
    else
      std::printf("perfect foresight %.2f, profit ratio undefined\n", pf);
  }
  if (!out.empty()) {
    write_result_csv(result, out);
    std::printf("records written to %s\n", out.c_str());
  }
  if (!monthly_out.empty()) {
    write_monthly_csv(result, monthly_out);
    std::printf("monthly totals written to %s\n", monthly_out.c_str());
  }
  return 0;
}

int cmd_pipeline(const std::string& config_path, bool report_only) {
  const RunConfig config = load_run_config(config_path);
  const ProfitReport report = run_pipeline(config, std::cout);
  if (report_only && !report.fully_cached())
    std::printf("note: some stages were recomputed (cache was cold)\n");
  std::printf("report written to %s/report.csv\n", config.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy storage arbitrage: valuation, bidding and dispatch"};
  app.require_subcommand(1);

  // ingest
  std::string in_rt, in_da, in_zone = "ZONE", in_out = "bundle.json";
  int in_res = 5;
  auto* ingest = app.add_subcommand("ingest", "Validate and align price CSVs into a bundle");
  ingest->add_option("--rt", in_rt, "Real-time price CSV")->required();
  ingest->add_option("--da", in_da, "Day-ahead price CSV (omit to synthesize a proxy)");
  ingest->add_option("--zone", in_zone, "Zone id");
  ingest->add_option("--resolution", in_res, "Real-time resolution, minutes");
  ingest->add_option("--out", in_out, "Bundle output path");

  // value
  std::string v_bundle, v_out, v_csv, v_begin, v_end;
  SpecFlags v_spec;
  int v_segments = 1000;
  auto* value = app.add_subcommand("value", "Backward-induce marginal value curves");
  value->add_option("--bundle", v_bundle, "Price bundle")->required();
  add_spec_flags(value, v_spec);
  value->add_option("--segments", v_segments, "SoC grid segments");
  value->add_option("--out", v_out, "Binary surface output");
  value->add_option("--csv", v_csv, "CSV surface output (t,segment_index,q_value)");
  value->add_option("--begin", v_begin, "Range start (ISO-8601, default series start)");
  value->add_option("--end", v_end, "Range end (exclusive)");

  // train
  std::string t_set, t_val_set, t_out = "model.bin", t_dump;
  FeatureFlags t_flags;
  long t_epochs = 100;
  double t_lr = 1e-3, t_momentum = 0.9;
  int t_batch = 128, t_seeds = 3;
  std::vector<int> t_hidden{256, 128};
  auto* train_cmd = app.add_subcommand("train", "Train the value-curve predictor");
  train_cmd->add_option("--set", t_set, "Training-set dump file");
  train_cmd->add_option("--val-set", t_val_set, "Validation-set dump file");
  add_feature_flags(train_cmd, t_flags);
  train_cmd->add_option("--epochs", t_epochs, "Training epochs");
  train_cmd->add_option("--lr", t_lr, "Learning rate");
  train_cmd->add_option("--batch", t_batch, "Mini-batch size");
  train_cmd->add_option("--momentum", t_momentum, "Momentum");
  train_cmd->add_option("--seeds", t_seeds, "Seeds to multi-start (best validation wins)");
  train_cmd->add_option("--hidden", t_hidden, "Hidden layer sizes");
  train_cmd->add_option("--out", t_out, "Model output path");
  train_cmd->add_option("--dump-set", t_dump, "Also dump the training set");

  // transfer
  std::string x_model, x_set, x_val_set, x_out = "model_transfer.bin";
  FeatureFlags x_flags;
  long x_epochs = 25;
  double x_lr = 1e-3;
  auto* transfer_cmd =
      app.add_subcommand("transfer", "Fine-tune the output block on a new market");
  transfer_cmd->add_option("--model", x_model, "Pre-trained model")->required();
  transfer_cmd->add_option("--set", x_set, "Training-set dump file");
  transfer_cmd->add_option("--val-set", x_val_set, "Validation-set dump file");
  add_feature_flags(transfer_cmd, x_flags);
  transfer_cmd->add_option("--epochs", x_epochs, "Fine-tune epochs");
  transfer_cmd->add_option("--lr", x_lr, "Learning rate");
  transfer_cmd->add_option("--out", x_out, "Model output path");

  // simulate
  std::string s_mode = "pr10", s_model, s_surface, s_bundle, s_begin, s_end, s_out, s_monthly;
  SpecFlags s_spec;
  int s_segments = 1000;
  double s_soc = 0.5;
  bool s_pf = false;
  auto* sim = app.add_subcommand("simulate", "Simulate arbitrage over a price bundle");
  sim->add_option("--mode", s_mode, "pr1, pr10, ha1 or ha10")->required();
  sim->add_option("--model", s_model, "Trained predictor model");
  sim->add_option("--surface", s_surface, "Exact value surface (oracle predictor)");
  sim->add_option("--bundle", s_bundle, "Price bundle")->required();
  add_spec_flags(sim, s_spec);
  sim->add_option("--segments", s_segments, "Grid segments for --pf benchmark");
  sim->add_option("--begin", s_begin, "Simulation start (ISO-8601)");
  sim->add_option("--end", s_end, "Simulation end (exclusive)");
  sim->add_option("--soc", s_soc, "Initial SoC fraction of capacity");
  sim->add_option("--out", s_out, "Dispatch records CSV");
  sim->add_option("--monthly", s_monthly, "Monthly profit CSV");
  sim->add_flag("--pf", s_pf, "Also compute perfect foresight and the profit ratio");

  // report / pipeline
  std::string p_config;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the full configured experiment");
  pipeline_cmd->add_option("--config", p_config, "Run configuration JSON")->required();
  std::string r_config;
  auto* report_cmd =
      app.add_subcommand("report", "Recompute the report for a configured run (cache hits)");
  report_cmd->add_option("--config", r_config, "Run configuration JSON")->required();

  try {
    app.parse(argc, argv);
    if (ingest->parsed()) return cmd_ingest(in_rt, in_da, in_zone, in_res, in_out);
    if (value->parsed())
      return cmd_value(v_bundle, v_spec, v_segments, v_out, v_csv, v_begin, v_end);
    if (train_cmd->parsed())
      return cmd_train(t_set, t_val_set, t_flags, t_epochs, t_lr, t_batch, t_momentum, t_seeds,
                       t_hidden, t_out, t_dump);
    if (transfer_cmd->parsed())
      return cmd_transfer(x_model, x_set, x_val_set, x_flags, x_epochs, x_lr, x_out);
    if (sim->parsed())
      return cmd_simulate(s_mode, s_model, s_surface, s_bundle, s_spec, s_segments, s_begin, s_end,
                          s_soc, s_out, s_monthly, s_pf);
    if (pipeline_cmd->parsed()) return cmd_pipeline(p_config, false);
    if (report_cmd->parsed()) return cmd_pipeline(r_config, true);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const gridarb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const gridarb::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const gridarb::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
