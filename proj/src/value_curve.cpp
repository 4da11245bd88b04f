#include "gridarb/value_curve.hpp"

#include <algorithm>
#include <cmath>

#include "gridarb/errors.hpp"

namespace gridarb {

bool ValueCurve::non_increasing() const {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[i - 1]) return false;
  return true;
}

double ValueCurve::min_value() const { return *std::min_element(values.begin(), values.end()); }
double ValueCurve::max_value() const { return *std::max_element(values.begin(), values.end()); }

ValueCurve constant_curve(double energy, int segments, double value, long t) {
  if (!(energy > 0) || segments <= 0) throw ConfigError("constant_curve: bad grid");
  ValueCurve c;
  c.t = t;
  c.energy = energy;
  c.values.assign(static_cast<std::size_t>(segments), value);
  return c;
}

int segment_of(const ValueCurve& curve, double soc) {
  if (!(soc >= 0.0) || !(soc <= curve.energy))
    throw NumericError("soc " + std::to_string(soc) + " outside [0, " +
                       std::to_string(curve.energy) + "]");
  const int n = curve.segments();
  int idx = static_cast<int>(std::floor(soc / curve.segment_width()));
  if (idx >= n) idx = n - 1;  // soc == energy
  return idx;
}

double query_marginal_value(const ValueCurve& curve, double soc) {
  return curve.values[static_cast<std::size_t>(segment_of(curve, soc))];
}

ValueCurve downsample_curve(const ValueCurve& curve, int segments) {
  const int n = curve.segments();
  if (segments <= 0 || n % segments != 0)
    throw NumericError("downsample: " + std::to_string(segments) + " segments do not divide " +
                       std::to_string(n));
  const int block = n / segments;
  ValueCurve out;
  out.t = curve.t;
  out.energy = curve.energy;
  out.values.resize(static_cast<std::size_t>(segments));
  for (int j = 0; j < segments; ++j) {
    double sum = 0;
    for (int k = 0; k < block; ++k) sum += curve.values[static_cast<std::size_t>(j * block + k)];
    out.values[static_cast<std::size_t>(j)] = sum / block;
  }
  return out;
}

double average_marginal_value(const ValueCurve& curve) {
  if (curve.values.empty()) throw NumericError("average_marginal_value: empty curve");
  double sum = 0;
  for (double v : curve.values) sum += v;
  return sum / static_cast<double>(curve.values.size());
}

std::vector<double> segment_breakpoints(double energy, int segments) {
  const double de = energy / segments;
  std::vector<double> bp(static_cast<std::size_t>(segments) + 1);
  for (int j = 0; j <= segments; ++j) bp[static_cast<std::size_t>(j)] = j * de;
  bp[static_cast<std::size_t>(segments)] = energy;
  return bp;
}

void project_non_increasing(std::vector<double>& v) {
  // Pool adjacent violators: merge runs until the sequence of run means is
  // non-increasing, then expand. Runs are tracked as (mean, length).
  const std::size_t n = v.size();
  if (n < 2) return;
  std::vector<double> mean;
  std::vector<std::size_t> len;
  mean.reserve(n);
  len.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = v[i];
    std::size_t l = 1;
    while (!mean.empty() && mean.back() < m) {
      m = (m * l + mean.back() * len.back()) / (l + len.back());
      l += len.back();
      mean.pop_back();
      len.pop_back();
    }
    mean.push_back(m);
    len.push_back(l);
  }
  std::size_t pos = 0;
  for (std::size_t r = 0; r < mean.size(); ++r)
    for (std::size_t k = 0; k < len[r]; ++k) v[pos++] = mean[r];
}

}  // namespace gridarb
