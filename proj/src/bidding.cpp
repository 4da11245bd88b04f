#include "gridarb/bidding.hpp"

#include <cmath>
#include <fstream>

#include "gridarb/errors.hpp"

namespace gridarb {

bool BidCurve::monotone() const {
  for (std::size_t j = 1; j < discharge_bids.size(); ++j) {
    if (discharge_bids[j] > discharge_bids[j - 1]) return false;
    if (charge_bids[j] > charge_bids[j - 1]) return false;
  }
  return true;
}

BidCurve make_bids(const ValueCurve& curve, const StorageSpec& spec) {
  if (!curve.non_increasing())
    throw NumericError("make_bids: value curve is not non-increasing");
  const int J = curve.segments();
  BidCurve b;
  b.t = curve.t;
  b.breakpoints = segment_breakpoints(curve.energy, J);
  b.discharge_bids.resize(static_cast<std::size_t>(J));
  b.charge_bids.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    const double q = curve.values[static_cast<std::size_t>(j)];
    b.discharge_bids[static_cast<std::size_t>(j)] = spec.discharge_cost + q / spec.efficiency;
    b.charge_bids[static_cast<std::size_t>(j)] = q * spec.efficiency;
  }
  return b;
}

namespace {
double quantize_cents(double v) { return std::round(v * 100.0) / 100.0; }
}

void write_bids_csv(const std::vector<BidCurve>& bids, std::ostream& out) {
  out << "t,segment,charge_bid,discharge_bid,E_lo,E_hi\n";
  char buf[160];
  for (const BidCurve& b : bids) {
    for (int j = 0; j < b.segments(); ++j) {
      std::snprintf(buf, sizeof buf, "%ld,%d,%.2f,%.2f,%g,%g\n", b.t, j,
                    quantize_cents(b.charge_bids[static_cast<std::size_t>(j)]),
                    quantize_cents(b.discharge_bids[static_cast<std::size_t>(j)]),
                    b.breakpoints[static_cast<std::size_t>(j)],
                    b.breakpoints[static_cast<std::size_t>(j) + 1]);
      out << buf;
    }
  }
}

void write_bids_csv(const std::vector<BidCurve>& bids, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  write_bids_csv(bids, out);
}

}  // namespace gridarb
