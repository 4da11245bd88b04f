// Synthetic price generator: daily sinusoid with lognormal spikes, written as
// canonical real-time and day-ahead CSVs for demos and end-to-end tests.

#include <CLI11.hpp>
#include <cstdio>

#include "gridarb/errors.hpp"
#include "gridarb/synth.hpp"
#include "gridarb/timeparse.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic price CSVs"};
  gridarb::SynthConfig config;
  std::string start = "2019-01-01T00:00:00Z";
  std::string rt_out = "synthetic_rt.csv";
  std::string da_out = "synthetic_da.csv";
  app.add_option("--start", start, "First timestamp (ISO-8601 UTC)");
  app.add_option("--days", config.days, "Days to generate");
  app.add_option("--resolution", config.resolution_minutes, "Real-time resolution, minutes");
  app.add_option("--mean", config.mean, "Daily mean price, $/MWh");
  app.add_option("--amplitude", config.amplitude, "Daily swing amplitude, $/MWh");
  app.add_option("--spikes-per-day", config.spikes_per_day, "Expected spikes per day");
  app.add_option("--seed", config.seed, "RNG seed");
  app.add_option("--zone", config.zone, "Zone id");
  app.add_option("--rt-out", rt_out, "Real-time CSV path");
  app.add_option("--da-out", da_out, "Day-ahead CSV path");

  try {
    app.parse(argc, argv);
    const auto t = gridarb::parse_iso8601_utc(start);
    if (!t) throw gridarb::ConfigError("--start: bad timestamp '" + start + "'");
    config.start = *t;
    gridarb::write_price_csv(gridarb::synth_realtime(config), rt_out);
    gridarb::write_price_csv(gridarb::synth_dayahead(config), da_out);
    std::printf("wrote %s and %s (%d days at %d min, zone %s)\n", rt_out.c_str(), da_out.c_str(),
                config.days, config.resolution_minutes, config.zone.c_str());
    return 0;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const gridarb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
