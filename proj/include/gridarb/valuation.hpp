#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridarb/market_data.hpp"
#include "gridarb/storage_spec.hpp"
#include "gridarb/value_curve.hpp"

namespace gridarb {

// Family of marginal value curves produced by backward induction.
// curves[k] is the post-decision value of SoC after price step k-1 has been
// dispatched (equivalently: the value-to-go facing step k). curves.back() is
// the terminal curve.
struct ValueSurface {
  StorageSpec spec;
  std::vector<ValueCurve> curves;
  double build_seconds = 0.0;

  long steps() const { return static_cast<long>(curves.size()) - 1; }
  int segments() const { return curves.empty() ? 0 : curves.front().segments(); }
  // Curve paired with price step k: the value of SoC once step k is done.
  const ValueCurve& post_step(long k) const { return curves[static_cast<std::size_t>(k + 1)]; }
};

// One step of the analytical backward recursion: given the next period's
// marginal value curve and the realized price, produce the current period's
// curve on the same grid. Case selection compares the price against the
// charge/discharge thresholds of the shifted and unshifted lookups; SoC
// lookups past either end of the grid clamp to the boundary segments.
ValueCurve value_update(const ValueCurve& q_next, double price, const StorageSpec& spec);

// Full backward sweep over prices[first..last]; q_terminal seeds the
// recursion. Output covers steps() == last-first+1 price steps.
ValueSurface backward_induction(const std::vector<double>& prices, const StorageSpec& spec,
                                const ValueCurve& q_terminal);

// Convenience: run over an index range of an aligned series with a constant
// terminal value (0 by default: no salvage value at the horizon).
ValueSurface backward_induction(const PriceSeries& series, IndexRange range,
                                const StorageSpec& spec, int segments,
                                double terminal_value = 0.0);

// Binary surface file (header + row-major float64 curve values).
void save_surface(const ValueSurface& surface, const std::string& path);
ValueSurface load_surface(const std::string& path);

// CSV dump, rows "t,segment_index,q_value". Intended for small surfaces.
void write_surface_csv(const ValueSurface& surface, const std::string& path);

}  // namespace gridarb
