#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridarb/features.hpp"
#include "gridarb/value_curve.hpp"

namespace gridarb {

struct PredictorMeta {
  int target_segments = 0;  // S, width of the output block
  int rows = 0;             // window shape
  int cols = 0;
  int da_hours = 0;         // lookbacks the window was built with
  int rt_steps = 0;
  int hour_shift_steps = 0;
  std::uint32_t seed = 0;
  std::string zone;
  Normalization norm;  // input normalization fitted on the training split

  int input_size() const { return rows * cols; }
  FeatureParams feature_params() const {
    return FeatureParams{da_hours, rt_steps, target_segments, hour_shift_steps};
  }
};

// Fully-connected regressor: rectifier hidden blocks, linear output block of
// width S. The output block is always the last (weights, bias) pair; transfer
// learning retrains it alone.
struct PredictorModel {
  PredictorMeta meta;
  std::vector<Eigen::MatrixXd> weights;    // block l maps in_l -> out_l
  std::vector<Eigen::RowVectorXd> biases;

  int blocks() const { return static_cast<int>(weights.size()); }
  std::vector<int> layer_sizes() const;
  long parameter_count() const;

  // Batch forward pass over normalized flattened windows (rows are samples).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

// Deterministic uniform fan-in-scaled initialization; biases start at zero.
PredictorModel init_model(std::uint32_t seed, int target_segments, int rows, int cols,
                          const std::vector<int>& hidden);

struct TrainOptions {
  long epochs = 100;
  double learning_rate = 1e-3;
  int batch = 128;
  double momentum = 0.9;
};

struct TrainReport {
  long epochs_run = 0;
  double best_validation_mse = 0.0;  // ($/MWh)^2 per curve entry
  double wall_seconds = 0.0;
  std::string checkpoint;
};

// Mini-batch gradient descent with momentum on the mean squared curve error.
// The returned model carries the parameters of the best validation epoch
// (the untrained input model counts as the baseline). NaN loss aborts.
std::pair<PredictorModel, TrainReport> train(const PredictorModel& model,
                                             const TrainingSet& train_set,
                                             const TrainingSet& val_set,
                                             const TrainOptions& options);

// Fine-tuning with every block frozen except the output block; all other
// parameters come back bit-identical.
std::pair<PredictorModel, TrainReport> transfer(const PredictorModel& model,
                                                const TrainingSet& new_train,
                                                const TrainingSet& new_val,
                                                const TrainOptions& options);

// Trains one model per seed and keeps the lowest validation error.
std::pair<PredictorModel, TrainReport> train_best_of(const std::vector<std::uint32_t>& seeds,
                                                     const std::vector<int>& hidden,
                                                     const TrainingSet& train_set,
                                                     const TrainingSet& val_set,
                                                     const TrainOptions& options);

double validation_mse(const PredictorModel& model, const TrainingSet& set);

// Predicted marginal value curve for one raw window: normalize, run the
// regressor, then project the outputs non-increasing (adjacent pooling).
ValueCurve predict_curve(const PredictorModel& model, const FeatureWindow& window, double energy);

// Batch prediction with the monotone projection applied per row.
Eigen::MatrixXd predict_batch(const PredictorModel& model, const Eigen::MatrixXd& normalized_x);

void save_model(const PredictorModel& model, const std::string& path);
PredictorModel load_model(const std::string& path);

}  // namespace gridarb
