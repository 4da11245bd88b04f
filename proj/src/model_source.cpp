#include "gridarb/model_source.hpp"

#include <algorithm>

#include "gridarb/errors.hpp"

namespace gridarb {

ModelCurveSource::ModelCurveSource(const PredictorModel* model,
                                   std::shared_ptr<const PriceSeries> prices, double energy)
    : model_(model), prices_(std::move(prices)), energy_(energy) {
  if (!model_ || !prices_) throw ConfigError("ModelCurveSource: null model or series");
  const int rows = window_rows(*prices_);
  if (rows != model_->meta.rows || model_->meta.feature_params().columns() != model_->meta.cols)
    throw ConfigError("ModelCurveSource: model window shape does not match series resolution");
  min_anchor_ = first_valid_anchor(*prices_, model_->meta.feature_params());
}

ValueCurve ModelCurveSource::to_curve(long anchor, const std::vector<double>& values) const {
  ValueCurve curve;
  curve.t = anchor + model_->meta.hour_shift_steps;
  curve.energy = energy_;
  curve.values = values;
  return curve;
}

void ModelCurveSource::prefetch(const std::vector<long>& anchors) {
  std::vector<long> missing;
  missing.reserve(anchors.size());
  for (long a : anchors)
    if (!cache_.count(a)) missing.push_back(a);
  if (missing.empty()) return;

  const FeatureParams params = model_->meta.feature_params();
  const int S = model_->meta.target_segments;
  constexpr std::size_t kChunk = 512;
  Eigen::MatrixXd x;
  for (std::size_t begin = 0; begin < missing.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, missing.size());
    x.resize(static_cast<long>(end - begin), model_->meta.input_size());
    for (std::size_t i = begin; i < end; ++i) {
      const FeatureWindow w = build_window(*prices_, nullptr, missing[i], params);
      int out = 0;
      auto row = x.row(static_cast<long>(i - begin));
      for (int r = 0; r < model_->meta.rows; ++r)
        for (int c = 0; c < model_->meta.cols; ++c)
          row(out++) = (w.x(r, c) - model_->meta.norm.mean[static_cast<std::size_t>(c)]) /
                       model_->meta.norm.scale[static_cast<std::size_t>(c)];
    }
    const Eigen::MatrixXd y = predict_batch(*model_, x);
    for (std::size_t i = begin; i < end; ++i) {
      std::vector<double> values(static_cast<std::size_t>(S));
      for (int s = 0; s < S; ++s)
        values[static_cast<std::size_t>(s)] = y(static_cast<long>(i - begin), s);
      cache_.emplace(missing[i], std::move(values));
    }
  }
}

ValueCurve ModelCurveSource::curve_at(long anchor) {
  auto it = cache_.find(anchor);
  if (it != cache_.end()) return to_curve(anchor, it->second);
  const FeatureWindow w = build_window(*prices_, nullptr, anchor, model_->meta.feature_params());
  ValueCurve curve = predict_curve(*model_, w, energy_);
  cache_.emplace(anchor, curve.values);
  return curve;
}

}  // namespace gridarb
