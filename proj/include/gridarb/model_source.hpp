#pragma once

#include <limits>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gridarb/dispatch.hpp"
#include "gridarb/predictor.hpp"

namespace gridarb {

// Curve source backed by a trained predictor: windows are built from the
// series at each anchor and pushed through the regressor. prefetch() predicts
// whole batches at once, which is how simulation runs stay fast.
class ModelCurveSource final : public CurveSource {
 public:
  ModelCurveSource(const PredictorModel* model, std::shared_ptr<const PriceSeries> prices,
                   double energy);

  int hour_shift_steps() const override { return model_->meta.hour_shift_steps; }
  long min_anchor() const override { return min_anchor_; }
  long max_anchor() const override { return prices_->size() - 1; }
  ValueCurve curve_at(long anchor) override;
  void prefetch(const std::vector<long>& anchors) override;

 private:
  ValueCurve to_curve(long anchor, const std::vector<double>& values) const;

  const PredictorModel* model_;
  std::shared_ptr<const PriceSeries> prices_;
  double energy_;
  long min_anchor_;
  std::unordered_map<long, std::vector<double>> cache_;
};

// Degenerate source predicting a flat zero-value curve; used as a baseline.
class ZeroCurveSource final : public CurveSource {
 public:
  ZeroCurveSource(double energy, int segments, int hour_shift_steps)
      : energy_(energy), segments_(segments), shift_(hour_shift_steps) {}
  int hour_shift_steps() const override { return shift_; }
  long min_anchor() const override { return -shift_; }
  long max_anchor() const override { return std::numeric_limits<long>::max(); }
  ValueCurve curve_at(long anchor) override {
    return constant_curve(energy_, segments_, 0.0, anchor + shift_);
  }

 private:
  double energy_;
  int segments_;
  int shift_;
};

}  // namespace gridarb
