#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridarb/storage_spec.hpp"
#include "gridarb/value_curve.hpp"

namespace gridarb {

// SoC-dependent charge/discharge bid pairs. Segment j covers SoC range
// [breakpoints[j], breakpoints[j+1]); discharge_bids and charge_bids are
// non-increasing in j for curves that passed monotone projection.
struct BidCurve {
  long t = 0;
  std::vector<double> breakpoints;    // size J+1, 0 = first, E = last
  std::vector<double> discharge_bids; // C_j = c + q_j / eta
  std::vector<double> charge_bids;    // B_j = q_j * eta

  int segments() const { return static_cast<int>(discharge_bids.size()); }
  bool monotone() const;
};

// Turns a segment-average value curve into bids. The curve must already be
// non-increasing; projection is the predictor's job.
BidCurve make_bids(const ValueCurve& curve, const StorageSpec& spec);

// Bid file rows "t,segment,charge_bid,discharge_bid,E_lo,E_hi"; bids are
// quantized to $0.01/MWh on export only.
void write_bids_csv(const std::vector<BidCurve>& bids, std::ostream& out);
void write_bids_csv(const std::vector<BidCurve>& bids, const std::string& path);

}  // namespace gridarb
