#pragma once

#include <vector>

namespace gridarb {

// Marginal opportunity value of stored energy over a uniform SoC grid:
// values[i] is the $/MWh value of the marginal MWh anywhere in SoC segment
// [i*de, (i+1)*de) with de = energy / values.size(). Curves are non-increasing
// in the segment index once projected.
struct ValueCurve {
  long t = 0;              // timestep the curve belongs to
  double energy = 0.0;     // E, MWh spanned by the grid
  std::vector<double> values;

  int segments() const { return static_cast<int>(values.size()); }
  double segment_width() const { return energy / segments(); }
  bool non_increasing() const;
  double min_value() const;
  double max_value() const;
};

ValueCurve constant_curve(double energy, int segments, double value, long t = 0);

// Index of the segment containing `soc`; soc == energy maps to the last
// segment. Out-of-range soc throws.
int segment_of(const ValueCurve& curve, double soc);

// Piecewise-constant lookup with the boundary rule above.
double query_marginal_value(const ValueCurve& curve, double soc);

// Segment-average reduction onto a coarser grid; `segments` must divide the
// current segment count. Averaging preserves non-increase.
ValueCurve downsample_curve(const ValueCurve& curve, int segments);

// Mean of the curve over [0, E]: equal-width segments make this the plain
// average of segment values.
double average_marginal_value(const ValueCurve& curve);

// In-place non-increasing projection by adjacent pooling from the top.
// Idempotent and mean-preserving.
void project_non_increasing(std::vector<double>& values);

// Segment boundaries 0 = E_0 < E_1 < ... < E_n = energy of the uniform grid.
// Shared by bid generation and dispatch so both sides see identical doubles.
std::vector<double> segment_breakpoints(double energy, int segments);

}  // namespace gridarb
