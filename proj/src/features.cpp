#include "gridarb/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gridarb/errors.hpp"

#include <json.hpp>

namespace gridarb {

long first_valid_anchor(const PriceSeries& prices, const FeatureParams& params) {
  const long rows = window_rows(prices);
  const long spm = prices.steps_per_hour();
  return rows - 1 + std::max<long>(params.rt_steps, static_cast<long>(params.da_hours) * spm);
}

long last_valid_anchor(long surface_steps, const FeatureParams& params) {
  return surface_steps - 1 - params.hour_shift_steps;
}

FeatureWindow build_window(const PriceSeries& prices, const ValueSurface* surface, long t,
                           const FeatureParams& params) {
  const int rows = window_rows(prices);
  const int spm = prices.steps_per_hour();
  const long lo = first_valid_anchor(prices, params);
  if (t < lo)
    throw DataError("build_window: anchor t=" + std::to_string(t) +
                    " lacks lookback history; first valid t is " + std::to_string(lo));
  if (t >= prices.size())
    throw DataError("build_window: anchor t=" + std::to_string(t) + " beyond series end");
  if (surface) {
    const long hi = last_valid_anchor(surface->steps(), params);
    if (t > hi)
      throw DataError("build_window: anchor t=" + std::to_string(t) +
                      " has no target curve; last valid t is " + std::to_string(hi));
    if (surface->segments() % params.target_segments != 0)
      throw NumericError("build_window: target segments do not divide surface grid");
  }

  FeatureWindow w;
  w.t = t;
  w.hour_shift = params.hour_shift_steps;
  w.x.resize(rows, params.columns());
  const int m = params.da_hours;
  const int n = params.rt_steps;
  for (int r = 0; r < rows; ++r) {
    const long base = t - r;
    // Day-ahead block: one column per hour; entries repeat across the rows of
    // an hour because the product itself is hourly.
    for (int k = 0; k <= m; ++k)
      w.x(r, k) = prices.da_expanded[static_cast<std::size_t>(base - static_cast<long>(m - k) * spm)];
    for (int c = 0; c <= n; ++c)
      w.x(r, m + 1 + c) = prices.rt_prices[static_cast<std::size_t>(base - n + c)];
  }

  if (surface) {
    w.y.resize(rows, params.target_segments);
    for (int r = 0; r < rows; ++r) {
      const ValueCurve target = downsample_curve(
          surface->post_step(t - r + params.hour_shift_steps), params.target_segments);
      for (int s = 0; s < params.target_segments; ++s)
        w.y(r, s) = target.values[static_cast<std::size_t>(s)];
    }
  }
  return w;
}

void TrainingSet::fill_row(long i, Eigen::Ref<Eigen::RowVectorXd> dst) const {
  if (i < 0 || i >= count()) throw NumericError("fill_row: sample index out of range");
  if (is_materialized()) {
    dst = materialized.row(i);
    return;
  }
  const long anchor = anchors[static_cast<std::size_t>(i)];
  const int m = params.da_hours;
  const int n = params.rt_steps;
  const int spm = prices->steps_per_hour();
  int out = 0;
  for (int r = 0; r < rows; ++r) {
    const long base = anchor - r;
    for (int k = 0; k <= m; ++k) {
      const double v = prices->da_expanded[static_cast<std::size_t>(base - static_cast<long>(m - k) * spm)];
      dst(out) = (v - norm.mean[static_cast<std::size_t>(k)]) / norm.scale[static_cast<std::size_t>(k)];
      ++out;
    }
    for (int c = 0; c <= n; ++c) {
      const double v = prices->rt_prices[static_cast<std::size_t>(base - n + c)];
      const int col = m + 1 + c;
      dst(out) = (v - norm.mean[static_cast<std::size_t>(col)]) / norm.scale[static_cast<std::size_t>(col)];
      ++out;
    }
  }
}

void apply_normalization(const Normalization& norm, Eigen::Ref<Eigen::MatrixXd> x) {
  if (static_cast<std::size_t>(x.cols()) != norm.mean.size())
    throw NumericError("apply_normalization: column count mismatch");
  for (int c = 0; c < x.cols(); ++c)
    x.col(c) = (x.col(c).array() - norm.mean[static_cast<std::size_t>(c)]) /
               norm.scale[static_cast<std::size_t>(c)];
}

TrainingSet build_training_set(std::shared_ptr<const PriceSeries> prices,
                               const ValueSurface& surface, const std::vector<IndexRange>& ranges,
                               const FeatureParams& params, long stride,
                               const Normalization* reuse) {
  if (!prices) throw ConfigError("build_training_set: null series");
  if (stride < 1) throw ConfigError("build_training_set: stride must be >= 1");
  if (surface.segments() % params.target_segments != 0)
    throw NumericError("build_training_set: target segments do not divide surface grid");

  TrainingSet set;
  set.prices = prices;
  set.params = params;
  set.rows = window_rows(*prices);
  set.cols = params.columns();

  const long lo = first_valid_anchor(*prices, params);
  const long hi = last_valid_anchor(surface.steps(), params);
  for (const IndexRange& range : ranges) {
    const long b = std::max(range.begin, lo);
    const long e = std::min(range.end, hi + 1);
    for (long a = b; a < e; a += stride) set.anchors.push_back(a);
  }
  if (set.anchors.empty())
    throw DataError("build_training_set: no valid anchors in range (first valid t is " +
                    std::to_string(lo) + ")");

  // Anchor-row targets.
  set.targets.resize(set.count(), params.target_segments);
  for (long i = 0; i < set.count(); ++i) {
    const ValueCurve target = downsample_curve(
        surface.post_step(set.anchors[static_cast<std::size_t>(i)] + params.hour_shift_steps),
        params.target_segments);
    for (int s = 0; s < params.target_segments; ++s)
      set.targets(i, s) = target.values[static_cast<std::size_t>(s)];
  }

  if (reuse) {
    if (static_cast<int>(reuse->mean.size()) != set.cols)
      throw NumericError("build_training_set: reused normalization has wrong width");
    set.norm = *reuse;
    return set;
  }

  // Column-wise z-score over every row of every training window.
  const int m = params.da_hours;
  const int n = params.rt_steps;
  const int spm = prices->steps_per_hour();
  std::vector<double> sum(static_cast<std::size_t>(set.cols), 0.0);
  std::vector<double> sumsq(static_cast<std::size_t>(set.cols), 0.0);
  for (long a : set.anchors) {
    for (int r = 0; r < set.rows; ++r) {
      const long base = a - r;
      for (int k = 0; k <= m; ++k) {
        const double v = prices->da_expanded[static_cast<std::size_t>(base - static_cast<long>(m - k) * spm)];
        sum[static_cast<std::size_t>(k)] += v;
        sumsq[static_cast<std::size_t>(k)] += v * v;
      }
      for (int c = 0; c <= n; ++c) {
        const double v = prices->rt_prices[static_cast<std::size_t>(base - n + c)];
        sum[static_cast<std::size_t>(m + 1 + c)] += v;
        sumsq[static_cast<std::size_t>(m + 1 + c)] += v * v;
      }
    }
  }
  const double count = static_cast<double>(set.count()) * set.rows;
  set.norm.mean.resize(static_cast<std::size_t>(set.cols));
  set.norm.scale.resize(static_cast<std::size_t>(set.cols));
  for (int c = 0; c < set.cols; ++c) {
    const double mu = sum[static_cast<std::size_t>(c)] / count;
    const double var = std::max(sumsq[static_cast<std::size_t>(c)] / count - mu * mu, 0.0);
    set.norm.mean[static_cast<std::size_t>(c)] = mu;
    set.norm.scale[static_cast<std::size_t>(c)] = std::max(std::sqrt(var), 1e-12);
  }
  return set;
}

void save_training_set(const TrainingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  nlohmann::json header;
  header["schema"] = 1;
  header["rows"] = set.rows;
  header["cols"] = set.cols;
  header["count"] = set.count();
  header["target_segments"] = set.params.target_segments;
  header["hour_shift_steps"] = set.params.hour_shift_steps;
  header["da_hours"] = set.params.da_hours;
  header["rt_steps"] = set.params.rt_steps;
  header["mean"] = set.norm.mean;
  header["scale"] = set.norm.scale;
  header["anchors"] = set.anchors;
  const std::string h = header.dump();
  const std::uint64_t hlen = h.size();
  out.write("GAFS", 4);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  // Row-major records: normalized inputs then the anchor-row target.
  Eigen::RowVectorXd input(set.input_size());
  for (long i = 0; i < set.count(); ++i) {
    set.fill_row(i, input);
    out.write(reinterpret_cast<const char*>(input.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(input.size())));
    Eigen::RowVectorXd target = set.targets.row(i);
    out.write(reinterpret_cast<const char*>(target.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(target.size())));
  }
  if (!out) throw DataError(path + ": write failed");
}

TrainingSet load_training_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[4];
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || std::string(magic, 4) != "GAFS" || hlen > (1u << 24))
    throw DataError(path + ": not a training-set file");
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad training-set header: " + std::string(e.what()));
  }
  TrainingSet set;
  try {
    set.rows = j.at("rows").get<int>();
    set.cols = j.at("cols").get<int>();
    set.params.target_segments = j.at("target_segments").get<int>();
    set.params.hour_shift_steps = j.at("hour_shift_steps").get<int>();
    set.params.da_hours = j.at("da_hours").get<int>();
    set.params.rt_steps = j.at("rt_steps").get<int>();
    set.norm.mean = j.at("mean").get<std::vector<double>>();
    set.norm.scale = j.at("scale").get<std::vector<double>>();
    set.anchors = j.at("anchors").get<std::vector<long>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad training-set header: " + std::string(e.what()));
  }
  const long count = set.count();
  set.materialized.resize(count, set.input_size());
  set.targets.resize(count, set.params.target_segments);
  for (long i = 0; i < count; ++i) {
    Eigen::RowVectorXd input(set.input_size());
    in.read(reinterpret_cast<char*>(input.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(input.size())));
    set.materialized.row(i) = input;
    Eigen::RowVectorXd target(set.params.target_segments);
    in.read(reinterpret_cast<char*>(target.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(target.size())));
    set.targets.row(i) = target;
  }
  if (!in) throw DataError(path + ": truncated training-set file");
  return set;
}

}  // namespace gridarb
