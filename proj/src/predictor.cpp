#include "gridarb/predictor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "gridarb/errors.hpp"

#include <json.hpp>

namespace gridarb {

std::vector<int> PredictorModel::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(static_cast<int>(weights.front().rows()));
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.cols()));
  return sizes;
}

long PredictorModel::parameter_count() const {
  long count = 0;
  for (int l = 0; l < blocks(); ++l)
    count += static_cast<long>(weights[static_cast<std::size_t>(l)].size()) +
             static_cast<long>(biases[static_cast<std::size_t>(l)].size());
  return count;
}

Eigen::MatrixXd PredictorModel::forward(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights.front().rows())
    throw NumericError("predictor: input width " + std::to_string(x.cols()) +
                       " does not match model input " + std::to_string(weights.front().rows()));
  Eigen::MatrixXd a = x;
  for (int l = 0; l < blocks(); ++l) {
    Eigen::MatrixXd z = (a * weights[static_cast<std::size_t>(l)]).rowwise() +
                        biases[static_cast<std::size_t>(l)];
    if (l + 1 < blocks()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

PredictorModel init_model(std::uint32_t seed, int target_segments, int rows, int cols,
                          const std::vector<int>& hidden) {
  if (target_segments <= 0 || rows <= 0 || cols <= 0)
    throw ConfigError("init_model: shapes must be positive");
  for (int h : hidden)
    if (h <= 0) throw ConfigError("init_model: hidden sizes must be positive");

  PredictorModel model;
  model.meta.target_segments = target_segments;
  model.meta.rows = rows;
  model.meta.cols = cols;
  model.meta.seed = seed;

  std::vector<int> sizes;
  sizes.push_back(rows * cols);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(target_segments);

  std::mt19937 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(fan_in, fan_out);
    for (int i = 0; i < fan_in; ++i)
      for (int j = 0; j < fan_out; ++j) w(i, j) = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::RowVectorXd::Zero(fan_out));
  }
  return model;
}

namespace {

void check_set_shapes(const PredictorModel& model, const TrainingSet& set, const char* what) {
  if (set.rows != model.meta.rows || set.cols != model.meta.cols)
    throw NumericError(std::string("train: ") + what + " window shape (" +
                       std::to_string(set.rows) + ", " + std::to_string(set.cols) +
                       ") does not match model (" + std::to_string(model.meta.rows) + ", " +
                       std::to_string(model.meta.cols) + ")");
  if (static_cast<int>(set.targets.cols()) != model.meta.target_segments)
    throw NumericError(std::string("train: ") + what + " target width mismatch");
}

Eigen::MatrixXd assemble_inputs(const TrainingSet& set, const std::vector<long>& order,
                                std::size_t begin, std::size_t end) {
  Eigen::MatrixXd x(static_cast<long>(end - begin), set.input_size());
  for (std::size_t i = begin; i < end; ++i)
    set.fill_row(order[i], x.row(static_cast<long>(i - begin)));
  return x;
}

double mse_over(const PredictorModel& model, const TrainingSet& set) {
  constexpr std::size_t kChunk = 512;
  std::vector<long> order(static_cast<std::size_t>(set.count()));
  std::iota(order.begin(), order.end(), 0L);
  double sum = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, order.size());
    const Eigen::MatrixXd x = assemble_inputs(set, order, begin, end);
    Eigen::MatrixXd out = model.forward(x);
    for (std::size_t i = begin; i < end; ++i)
      out.row(static_cast<long>(i - begin)) -= set.targets.row(order[i]);
    sum += out.squaredNorm();
  }
  return sum / (static_cast<double>(set.count()) * set.targets.cols());
}

std::pair<PredictorModel, TrainReport> run_training(const PredictorModel& initial,
                                                    const TrainingSet& train_set,
                                                    const TrainingSet& val_set,
                                                    const TrainOptions& options,
                                                    bool output_block_only) {
  check_set_shapes(initial, train_set, "training set");
  check_set_shapes(initial, val_set, "validation set");
  if (options.batch <= 0 || options.epochs < 0 || !(options.learning_rate > 0))
    throw ConfigError("train: bad options");

  const auto t0 = std::chrono::steady_clock::now();

  PredictorModel model = initial;
  model.meta.norm = train_set.norm;
  model.meta.hour_shift_steps = train_set.params.hour_shift_steps;
  model.meta.da_hours = train_set.params.da_hours;
  model.meta.rt_steps = train_set.params.rt_steps;

  PredictorModel best = model;
  TrainReport report;
  report.best_validation_mse = mse_over(model, val_set);
  report.checkpoint = "initial";

  const int L = model.blocks();
  const int first_trained = output_block_only ? L - 1 : 0;

  std::vector<Eigen::MatrixXd> vel_w;
  std::vector<Eigen::RowVectorXd> vel_b;
  for (int l = 0; l < L; ++l) {
    vel_w.push_back(Eigen::MatrixXd::Zero(model.weights[static_cast<std::size_t>(l)].rows(),
                                          model.weights[static_cast<std::size_t>(l)].cols()));
    vel_b.push_back(Eigen::RowVectorXd::Zero(model.biases[static_cast<std::size_t>(l)].size()));
  }

  std::mt19937 rng(model.meta.seed ^ 0x9e3779b9u);
  std::vector<long> order(static_cast<std::size_t>(train_set.count()));
  std::iota(order.begin(), order.end(), 0L);

  std::vector<Eigen::MatrixXd> activations(static_cast<std::size_t>(L) + 1);
  std::vector<Eigen::MatrixXd> pre(static_cast<std::size_t>(L));

  for (long epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(options.batch)) {
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(options.batch), order.size());
      const long bs = static_cast<long>(end - begin);

      activations[0] = assemble_inputs(train_set, order, begin, end);
      for (int l = 0; l < L; ++l) {
        pre[static_cast<std::size_t>(l)] =
            (activations[static_cast<std::size_t>(l)] * model.weights[static_cast<std::size_t>(l)])
                .rowwise() +
            model.biases[static_cast<std::size_t>(l)];
        activations[static_cast<std::size_t>(l) + 1] =
            (l + 1 < L) ? pre[static_cast<std::size_t>(l)].cwiseMax(0.0)
                        : pre[static_cast<std::size_t>(l)];
      }

      Eigen::MatrixXd delta = activations[static_cast<std::size_t>(L)];
      for (std::size_t i = begin; i < end; ++i)
        delta.row(static_cast<long>(i - begin)) -= train_set.targets.row(order[i]);
      const double batch_loss = delta.squaredNorm() / (static_cast<double>(bs) * delta.cols());
      if (!std::isfinite(batch_loss))
        throw NumericError("train: loss diverged (epoch " + std::to_string(epoch) + ", batch at " +
                           std::to_string(begin) + ", lr " +
                           std::to_string(options.learning_rate) + ")");
      delta *= 2.0 / (static_cast<double>(bs) * delta.cols());

      for (int l = L - 1; l >= first_trained; --l) {
        const Eigen::MatrixXd grad_w =
            activations[static_cast<std::size_t>(l)].transpose() * delta;
        const Eigen::RowVectorXd grad_b = delta.colwise().sum();
        if (l > first_trained)
          delta = (delta * model.weights[static_cast<std::size_t>(l)].transpose())
                      .cwiseProduct((pre[static_cast<std::size_t>(l) - 1].array() > 0.0)
                                        .cast<double>()
                                        .matrix());
        auto& vw = vel_w[static_cast<std::size_t>(l)];
        auto& vb = vel_b[static_cast<std::size_t>(l)];
        vw = options.momentum * vw - options.learning_rate * grad_w;
        vb = options.momentum * vb - options.learning_rate * grad_b;
        model.weights[static_cast<std::size_t>(l)] += vw;
        model.biases[static_cast<std::size_t>(l)] += vb;
      }
    }

    const double val = mse_over(model, val_set);
    if (!std::isfinite(val))
      throw NumericError("train: validation loss diverged at epoch " + std::to_string(epoch));
    if (val < report.best_validation_mse) {
      report.best_validation_mse = val;
      best = model;
      report.checkpoint = "epoch" + std::to_string(epoch);
    }
    report.epochs_run = epoch;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), report};
}

}  // namespace

std::pair<PredictorModel, TrainReport> train(const PredictorModel& model,
                                             const TrainingSet& train_set,
                                             const TrainingSet& val_set,
                                             const TrainOptions& options) {
  return run_training(model, train_set, val_set, options, false);
}

std::pair<PredictorModel, TrainReport> transfer(const PredictorModel& model,
                                                const TrainingSet& new_train,
                                                const TrainingSet& new_val,
                                                const TrainOptions& options) {
  return run_training(model, new_train, new_val, options, true);
}

std::pair<PredictorModel, TrainReport> train_best_of(const std::vector<std::uint32_t>& seeds,
                                                     const std::vector<int>& hidden,
                                                     const TrainingSet& train_set,
                                                     const TrainingSet& val_set,
                                                     const TrainOptions& options) {
  if (seeds.empty()) throw ConfigError("train_best_of: need at least one seed");
  std::pair<PredictorModel, TrainReport> winner;
  bool have = false;
  for (std::uint32_t seed : seeds) {
    PredictorModel model = init_model(seed, static_cast<int>(train_set.targets.cols()),
                                      train_set.rows, train_set.cols, hidden);
    auto candidate = train(model, train_set, val_set, options);
    if (!have || candidate.second.best_validation_mse < winner.second.best_validation_mse) {
      winner = std::move(candidate);
      have = true;
    }
  }
  return winner;
}

double validation_mse(const PredictorModel& model, const TrainingSet& set) {
  check_set_shapes(model, set, "evaluation set");
  return mse_over(model, set);
}

Eigen::MatrixXd predict_batch(const PredictorModel& model, const Eigen::MatrixXd& normalized_x) {
  Eigen::MatrixXd out = model.forward(normalized_x);
  std::vector<double> row(static_cast<std::size_t>(out.cols()));
  for (long r = 0; r < out.rows(); ++r) {
    for (long c = 0; c < out.cols(); ++c) row[static_cast<std::size_t>(c)] = out(r, c);
    project_non_increasing(row);
    for (long c = 0; c < out.cols(); ++c) out(r, c) = row[static_cast<std::size_t>(c)];
  }
  return out;
}

ValueCurve predict_curve(const PredictorModel& model, const FeatureWindow& window, double energy) {
  if (window.x.rows() != model.meta.rows || window.x.cols() != model.meta.cols)
    throw NumericError("predict_curve: window shape mismatch");
  Eigen::RowVectorXd input(model.meta.input_size());
  int out = 0;
  for (int r = 0; r < model.meta.rows; ++r)
    for (int c = 0; c < model.meta.cols; ++c) {
      input(out++) = (window.x(r, c) - model.meta.norm.mean[static_cast<std::size_t>(c)]) /
                     model.meta.norm.scale[static_cast<std::size_t>(c)];
    }
  Eigen::MatrixXd y = model.forward(input);
  ValueCurve curve;
  curve.t = window.t + window.hour_shift;
  curve.energy = energy;
  curve.values.resize(static_cast<std::size_t>(model.meta.target_segments));
  for (int s = 0; s < model.meta.target_segments; ++s)
    curve.values[static_cast<std::size_t>(s)] = y(0, s);
  if (!std::all_of(curve.values.begin(), curve.values.end(),
                   [](double v) { return std::isfinite(v); }))
    throw NumericError("predict_curve: non-finite prediction");
  project_non_increasing(curve.values);
  return curve;
}

namespace {
constexpr char kModelMagic[4] = {'G', 'A', 'V', 'P'};
}

void save_model(const PredictorModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  nlohmann::json meta;
  meta["schema"] = 1;
  meta["target_segments"] = model.meta.target_segments;
  meta["rows"] = model.meta.rows;
  meta["cols"] = model.meta.cols;
  meta["da_hours"] = model.meta.da_hours;
  meta["rt_steps"] = model.meta.rt_steps;
  meta["hour_shift_steps"] = model.meta.hour_shift_steps;
  meta["seed"] = model.meta.seed;
  meta["zone"] = model.meta.zone;
  meta["mean"] = model.meta.norm.mean;
  meta["scale"] = model.meta.norm.scale;
  meta["layout"] = "col-major";
  nlohmann::json blocks = nlohmann::json::array();
  for (int l = 0; l < model.blocks(); ++l)
    blocks.push_back({{"in", model.weights[static_cast<std::size_t>(l)].rows()},
                      {"out", model.weights[static_cast<std::size_t>(l)].cols()}});
  meta["blocks"] = blocks;

  const std::string header = meta.dump();
  out.write(kModelMagic, 4);
  const std::uint8_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  const std::uint64_t hlen = header.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (int l = 0; l < model.blocks(); ++l) {
    const auto& w = model.weights[static_cast<std::size_t>(l)];
    const auto& b = model.biases[static_cast<std::size_t>(l)];
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(w.size())));
    out.write(reinterpret_cast<const char*>(b.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.size())));
  }
  if (!out) throw DataError(path + ": write failed");
}

PredictorModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open file");
  char magic[4];
  std::uint8_t version = 0;
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0 || version != 1 || hlen > (1u << 20))
    throw DataError(path + ": not a predictor model file");
  std::string header(hlen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad model header: " + e.what());
  }

  PredictorModel model;
  try {
    model.meta.target_segments = meta.at("target_segments").get<int>();
    model.meta.rows = meta.at("rows").get<int>();
    model.meta.cols = meta.at("cols").get<int>();
    model.meta.da_hours = meta.at("da_hours").get<int>();
    model.meta.rt_steps = meta.at("rt_steps").get<int>();
    model.meta.hour_shift_steps = meta.at("hour_shift_steps").get<int>();
    model.meta.seed = meta.at("seed").get<std::uint32_t>();
    model.meta.zone = meta.at("zone").get<std::string>();
    model.meta.norm.mean = meta.at("mean").get<std::vector<double>>();
    model.meta.norm.scale = meta.at("scale").get<std::vector<double>>();
    for (const auto& block : meta.at("blocks")) {
      const long in_size = block.at("in").get<long>();
      const long out_size = block.at("out").get<long>();
      model.weights.emplace_back(in_size, out_size);
      model.biases.emplace_back(out_size);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad model header: " + e.what());
  }
  for (int l = 0; l < model.blocks(); ++l) {
    auto& w = model.weights[static_cast<std::size_t>(l)];
    auto& b = model.biases[static_cast<std::size_t>(l)];
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(w.size())));
    in.read(reinterpret_cast<char*>(b.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(b.size())));
  }
  if (!in) throw DataError(path + ": truncated model file");
  return model;
}

}  // namespace gridarb
