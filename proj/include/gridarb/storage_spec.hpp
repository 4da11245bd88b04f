#pragma once

#include <string>

#include "gridarb/errors.hpp"

namespace gridarb {

// Physical storage parameters. `efficiency` is one-way: charging b MWh from
// the grid stores b*eta; discharging p MWh to the grid drains p/eta.
struct StorageSpec {
  double power_mw = 0.0;       // P
  double energy_mwh = 0.0;     // E
  double efficiency = 1.0;     // eta in (0, 1]
  double discharge_cost = 0.0; // c, $/MWh discharged
  double step_hours = 0.0;     // market interval length in hours

  // Per-step energy bound on either charge or discharge, MWh at the meter.
  double step_energy() const { return power_mw * step_hours; }

  void validate() const {
    if (!(power_mw > 0)) throw ConfigError("storage power must be positive");
    if (!(energy_mwh > 0)) throw ConfigError("storage energy must be positive");
    if (!(efficiency > 0 && efficiency <= 1)) throw ConfigError("efficiency must be in (0, 1]");
    if (!(discharge_cost >= 0)) throw ConfigError("discharge cost must be non-negative");
    if (!(step_hours > 0)) throw ConfigError("step length must be positive");
    if (step_energy() > energy_mwh)
      throw ConfigError("per-step energy bound " + std::to_string(step_energy()) +
                        " MWh exceeds capacity " + std::to_string(energy_mwh) + " MWh");
  }
};

}  // namespace gridarb
