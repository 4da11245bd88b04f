#include "gridarb/valuation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gridarb/errors.hpp"

namespace gridarb {

namespace {

// Case-boundary comparisons use a small absolute tolerance; the lower case
// index wins ties.
constexpr double kCaseTol = 1e-9;

}  // namespace

ValueCurve value_update(const ValueCurve& q_next, double price, const StorageSpec& spec) {
  if (!std::isfinite(price)) throw NumericError("value_update: price is not finite");
  if (q_next.values.empty() || !(q_next.energy > 0))
    throw NumericError("value_update: empty value curve");
  if (std::abs(q_next.energy - spec.energy_mwh) > 1e-9 * std::max(1.0, spec.energy_mwh))
    throw NumericError("value_update: curve grid does not match storage capacity");
  if (!q_next.non_increasing())
    throw NumericError("value_update: next-period curve is not non-increasing");

  const int n = q_next.segments();
  const double de = q_next.segment_width();
  const double eta = spec.efficiency;
  const double cost = spec.discharge_cost;
  // SoC displacement of a full-power charge / discharge, in segment units.
  // Segments are evaluated at their centers; a lookup that would leave the
  // grid means the full-power move is infeasible from that SoC, so the
  // corresponding case is skipped and the energy-capped case applies instead.
  const double up = spec.step_energy() * eta / de;
  const double dn = spec.step_energy() / eta / de;

  ValueCurve out;
  out.t = q_next.t - 1;
  out.energy = q_next.energy;
  out.values.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const double pos_up = i + 0.5 + up;
    const double pos_dn = i + 0.5 - dn;
    const bool can_full_charge = pos_up <= static_cast<double>(n);
    const bool can_full_discharge = pos_dn >= 0.0;
    const double q_mid = q_next.values[static_cast<std::size_t>(i)];

    const double idle_charge = q_mid * eta;  // marginal charge break-even
    const double idle_discharge = std::max(q_mid / eta + cost, 0.0);

    double v;
    if (can_full_charge) {
      const int j = std::min(static_cast<int>(std::floor(pos_up)), n - 1);
      const double q_up = q_next.values[static_cast<std::size_t>(j)];
      if (price <= q_up * eta + kCaseTol) {
        out.values[static_cast<std::size_t>(i)] = q_up;
        continue;
      }
    }
    if (price <= idle_charge + kCaseTol) {
      v = price / eta;
    } else if (price <= idle_discharge + kCaseTol) {
      v = q_mid;
    } else {
      bool full = false;
      if (can_full_discharge) {
        const int j = std::max(static_cast<int>(std::floor(pos_dn)), 0);
        const double q_dn = q_next.values[static_cast<std::size_t>(j)];
        if (price > std::max(q_dn / eta + cost, 0.0) + kCaseTol) {
          v = q_dn;
          full = true;
        }
      }
      if (!full) v = (price - cost) * eta;
    }
    out.values[static_cast<std::size_t>(i)] = v;
  }

  // The tolerance can leave eps-scale wiggles right at case boundaries;
  // restore exact non-increase.
  for (int i = 1; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] =
        std::min(out.values[static_cast<std::size_t>(i)], out.values[static_cast<std::size_t>(i - 1)]);
  return out;
}

ValueSurface backward_induction(const std::vector<double>& prices, const StorageSpec& spec,
                                const ValueCurve& q_terminal) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const long T = static_cast<long>(prices.size());

  ValueSurface s;
  s.spec = spec;
  s.curves.resize(static_cast<std::size_t>(T) + 1);
  s.curves[static_cast<std::size_t>(T)] = q_terminal;
  s.curves[static_cast<std::size_t>(T)].t = T;
  for (long k = T; k >= 1; --k) {
    s.curves[static_cast<std::size_t>(k - 1)] =
        value_update(s.curves[static_cast<std::size_t>(k)], prices[static_cast<std::size_t>(k - 1)], spec);
    s.curves[static_cast<std::size_t>(k - 1)].t = k - 1;
  }
  s.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

ValueSurface backward_induction(const PriceSeries& series, IndexRange range,
                                const StorageSpec& spec, int segments, double terminal_value) {
  if (range.begin < 0 || range.end > series.size() || range.size() < 0)
    throw DataError("backward_induction: index range outside series");
  std::vector<double> prices(series.rt_prices.begin() + range.begin,
                             series.rt_prices.begin() + range.end);
  return backward_induction(prices, spec, constant_curve(spec.energy_mwh, segments, terminal_value));
}

namespace {
constexpr char kSurfaceMagic[4] = {'G', 'A', 'V', 'S'};
}

void save_surface(const ValueSurface& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out.write(kSurfaceMagic, 4);
  const std::uint8_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  const std::int64_t T = s.steps();
  const std::int32_t n = s.segments();
  out.write(reinterpret_cast<const char*>(&T), sizeof T);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&s.spec), sizeof s.spec);
  for (const ValueCurve& c : s.curves)
    out.write(reinterpret_cast<const char*>(c.values.data()),
              static_cast<std::streamsize>(c.values.size() * sizeof(double)));
  if (!out) throw DataError(path + ": write failed");
}

ValueSurface load_surface(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[4];
  std::uint8_t version = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 1);
  if (!in || std::memcmp(magic, kSurfaceMagic, 4) != 0 || version != 1)
    throw DataError(path + ": not a surface file");
  std::int64_t T = 0;
  std::int32_t n = 0;
  ValueSurface s;
  in.read(reinterpret_cast<char*>(&T), sizeof T);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&s.spec), sizeof s.spec);
  if (!in || T < 0 || n <= 0) throw DataError(path + ": corrupt surface header");
  s.curves.resize(static_cast<std::size_t>(T) + 1);
  for (long k = 0; k <= T; ++k) {
    ValueCurve& c = s.curves[static_cast<std::size_t>(k)];
    c.t = k;
    c.energy = s.spec.energy_mwh;
    c.values.resize(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(c.values.data()),
            static_cast<std::streamsize>(c.values.size() * sizeof(double)));
  }
  if (!in) throw DataError(path + ": truncated surface file");
  return s;
}

void write_surface_csv(const ValueSurface& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << "t,segment_index,q_value\n";
  for (const ValueCurve& c : s.curves)
    for (int i = 0; i < c.segments(); ++i)
      out << c.t << ',' << i << ',' << c.values[static_cast<std::size_t>(i)] << '\n';
  if (!out) throw DataError(path + ": write failed");
}

}  // namespace gridarb
