#include "fbipose/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fbipose/error.hpp"
#include "fbipose/losses.hpp"

namespace fbipose {

namespace {

constexpr int kEvalChunk = 256;

template <typename T>
Mat<T> batch_inputs(const RegressorParams<T>& params, const std::vector<const TrainingSample*>& batch) {
  Mat<T> x(kInputWidth, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = batch[i]->input.cast<T>();
  }
  if (!params.fbi_inputs) x.bottomRows(2 * kProbWidth).setConstant(T(1) / T(3));
  return x;
}

template <typename T>
Mat<T> batch_targets(const RegressorParams<T>& params, const std::vector<const TrainingSample*>& batch) {
  Mat<T> y(kPoseWidth, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i]->target) {
      fail(ErrorCode::kInvalidArgument, "sample '" + batch[i]->id + "' has no 3D target");
    }
    y.col(static_cast<Eigen::Index>(i)) = (*batch[i]->target / params.output_scale_mm).template cast<T>();
  }
  return y;
}

// Mean over samples of the weighted FBI losses on head probabilities; fills
// d_probs (already divided by the batch size).
template <typename T>
double fbi_terms(const Mat<T>& probs, const std::vector<const TrainingSample*>& batch, double w_focal,
                 double w_fixed, const TrainConfig& config, Mat<T>* d_probs) {
  const auto n = static_cast<T>(batch.size());
  if (d_probs != nullptr) d_probs->setZero(probs.rows(), probs.cols());
  double total = 0.0;
  T grad[kProbWidth];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const T* p = probs.col(c).data();
    if (w_focal != 0.0) {
      total += w_focal * static_cast<double>(focal_fbi_loss_flat<T>(
                             p, batch[i]->labels, static_cast<T>(config.gamma), d_probs ? grad : nullptr));
      if (d_probs != nullptr) {
        for (int k = 0; k < kProbWidth; ++k) (*d_probs)(k, c) += static_cast<T>(w_focal) * grad[k] / n;
      }
    }
    if (w_fixed != 0.0) {
      total += w_fixed * static_cast<double>(fixed_weight_fbi_loss_flat<T>(
                             p, batch[i]->labels, static_cast<T>(config.w_clear),
                             static_cast<T>(config.w_uncertain), d_probs ? grad : nullptr));
      if (d_probs != nullptr) {
        for (int k = 0; k < kProbWidth; ++k) (*d_probs)(k, c) += static_cast<T>(w_fixed) * grad[k] / n;
      }
    }
  }
  return total / static_cast<double>(batch.size());
}

LossWeights weak_weights(const TrainConfig& config) {
  LossWeights w{0.0, 0.0, 0.0, 0.0};
  if (config.weak_loss == FbiLossKind::kFocal) {
    w.focal = config.weak_fbi_weight;
  } else {
    w.fixed = config.weak_fbi_weight;
  }
  return w;
}

template <typename T>
void require_finite_grads(const RegressorParams<T>& grads, long iteration) {
  grads.visit([iteration](const std::string& name, const Mat<T>& m, TensorRole, bool) {
    if (!std::isfinite(static_cast<double>(m.sum()))) {
      fail(ErrorCode::kNumericFailure,
           "non-finite gradient in " + name + " at iteration " + std::to_string(iteration));
    }
  });
}

// Index stream over consecutive seeded permutations.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed, bool shuffle) : n_(n), rng_(seed), shuffle_(shuffle) {
    order_.resize(n);
    refill();
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == n_) refill();
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  void refill() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (shuffle_) std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::size_t n_;
  std::mt19937_64 rng_;
  bool shuffle_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<const TrainingSample*> pointers(const std::vector<TrainingSample>& data,
                                            const std::vector<std::size_t>& idx) {
  std::vector<const TrainingSample*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&data[i]);
  return out;
}

template <typename T>
double eval_objective(const RegressorParams<T>& params, const std::vector<const TrainingSample*>& data,
                      const LossWeights& weights, const TrainConfig& config) {
  if (data.empty()) return 0.0;
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::size_t end = std::min(data.size(), start + kEvalChunk);
    std::vector<const TrainingSample*> chunk(data.begin() + static_cast<std::ptrdiff_t>(start),
                                             data.begin() + static_cast<std::ptrdiff_t>(end));
    total += supervised_objective(const_cast<RegressorParams<T>&>(params), chunk, weights, config, opt,
                                  static_cast<RegressorParams<T>*>(nullptr)) *
             static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(data.size());
}

RegressorParams<float> fresh_params(const TrainConfig& config) {
  auto params = RegressorParams<float>::initialised(config.shape, config.seed);
  params.dropout = static_cast<float>(config.dropout);
  params.bn_momentum = static_cast<float>(config.bn_momentum);
  params.output_scale_mm = config.output_scale_mm;
  params.fbi_inputs = config.fbi_inputs;
  return params;
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.decay_steps = j.value("decay_steps", c.decay_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.iterations = j.value("iterations", c.iterations);
    c.dropout = j.value("dropout", c.dropout);
    c.seed = j.value("seed", c.seed);
    c.gamma = j.value("gamma", c.gamma);
    c.w_clear = j.value("w_clear", c.w_clear);
    c.w_uncertain = j.value("w_uncertain", c.w_uncertain);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.pose = w.value("pose", c.weights.pose);
      c.weights.coarse = w.value("coarse", c.weights.coarse);
      c.weights.focal = w.value("focal", c.weights.focal);
      c.weights.fixed = w.value("fixed", c.weights.fixed);
    }
    c.shape.hidden = j.value("hidden", c.shape.hidden);
    c.shape.head_hidden = j.value("head_hidden", c.shape.head_hidden);
    c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
    c.output_scale_mm = j.value("output_scale_mm", c.output_scale_mm);
    c.fbi_inputs = j.value("fbi_inputs", c.fbi_inputs);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.weak_fbi_weight = j.value("weak_fbi_weight", c.weak_fbi_weight);
    c.weak_pose_weight = j.value("weak_pose_weight", c.weak_pose_weight);
    if (j.contains("weak_loss")) {
      const auto kind = j.at("weak_loss").get<std::string>();
      if (kind == "focal") {
        c.weak_loss = FbiLossKind::kFocal;
      } else if (kind == "fixed") {
        c.weak_loss = FbiLossKind::kFixedWeight;
      } else {
        fail(ErrorCode::kInvalidArgument, "weak_loss must be 'focal' or 'fixed'");
      }
    }
    c.freeze_head = j.value("freeze_head", c.freeze_head);
    c.head_iterations = j.value("head_iterations", c.head_iterations);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"decay_rate", decay_rate},
          {"decay_steps", decay_steps},
          {"batch_size", batch_size},
          {"iterations", iterations},
          {"dropout", dropout},
          {"seed", seed},
          {"gamma", gamma},
          {"w_clear", w_clear},
          {"w_uncertain", w_uncertain},
          {"weights", {{"pose", weights.pose}, {"coarse", weights.coarse}, {"focal", weights.focal},
                       {"fixed", weights.fixed}}},
          {"hidden", shape.hidden},
          {"head_hidden", shape.head_hidden},
          {"bn_momentum", bn_momentum},
          {"output_scale_mm", output_scale_mm},
          {"fbi_inputs", fbi_inputs},
          {"validation_fraction", validation_fraction},
          {"weak_fbi_weight", weak_fbi_weight},
          {"weak_pose_weight", weak_pose_weight},
          {"weak_loss", weak_loss == FbiLossKind::kFocal ? "focal" : "fixed"},
          {"freeze_head", freeze_head},
          {"head_iterations", head_iterations}};
}

void TrainConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::kInvalidArgument, std::string("invalid training config: ") + what);
  };
  check(learning_rate > 0.0, "learning_rate must be > 0");
  check(decay_rate > 0.0 && decay_rate <= 1.0, "decay_rate must lie in (0, 1]");
  check(decay_steps >= 1, "decay_steps must be >= 1");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(iterations >= 0, "iterations must be >= 0");
  check(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  check(gamma >= 0.0, "gamma must be >= 0");
  check(w_clear >= 0.0 && w_uncertain >= 0.0, "FBI weights must be >= 0");
  check(weights.pose >= 0.0 && weights.coarse >= 0.0 && weights.focal >= 0.0 && weights.fixed >= 0.0,
        "loss weights must be >= 0");
  check(shape.hidden >= 1 && shape.head_hidden >= 1, "layer widths must be >= 1");
  check(bn_momentum >= 0.0 && bn_momentum < 1.0, "bn_momentum must lie in [0, 1)");
  check(output_scale_mm > 0.0, "output_scale_mm must be > 0");
  check(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must lie in [0, 1)");
  check(weak_fbi_weight >= 0.0 && weak_pose_weight >= 0.0, "weak weights must be >= 0");
  check(head_iterations >= 0, "head_iterations must be >= 0");
}

template <typename T>
AdamOptimizer<T>::AdamOptimizer(const RegressorParams<T>& like, double learning_rate, double decay_rate,
                                int decay_steps)
    : m_(zeros_like(like)), v_(zeros_like(like)), lr_(learning_rate), decay_rate_(decay_rate),
      decay_steps_(decay_steps) {}

template <typename T>
void AdamOptimizer<T>::step(RegressorParams<T>& params, const RegressorParams<T>& grads, bool skip_head) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++step_;
  const double lr = lr_ * std::pow(decay_rate_, static_cast<double>(step_ - 1) / decay_steps_);
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  const T step_size = static_cast<T>(lr / c1);
  const T root_c2 = static_cast<T>(std::sqrt(c2));

  std::vector<const Mat<T>*> g;
  grads.visit([&g](const std::string&, const Mat<T>& m, TensorRole, bool) { g.push_back(&m); });
  std::vector<Mat<T>*> m;
  m_.visit([&m](const std::string&, Mat<T>& t, TensorRole, bool) { m.push_back(&t); });
  std::vector<Mat<T>*> v;
  v_.visit([&v](const std::string&, Mat<T>& t, TensorRole, bool) { v.push_back(&t); });
  std::size_t i = 0;
  params.visit([&](const std::string&, Mat<T>& p, TensorRole role, bool head) {
    const std::size_t k = i++;
    if (!is_trainable(role) || (skip_head && head)) return;
    auto ga = g[k]->array();
    m[k]->array() = T(kBeta1) * m[k]->array() + T(1.0 - kBeta1) * ga;
    v[k]->array() = T(kBeta2) * v[k]->array() + T(1.0 - kBeta2) * ga.square();
    p.array() -= step_size * m[k]->array() / (v[k]->array().sqrt() / root_c2 + T(kEps));
  });
}

template <typename T>
double supervised_objective(RegressorParams<T>& params, const std::vector<const TrainingSample*>& batch,
                            const LossWeights& weights, const TrainConfig& config, const ForwardOptions& options,
                            RegressorParams<T>* grads) {
  if (batch.empty()) fail(ErrorCode::kEmptyDataset, "empty batch");
  const Mat<T> x = batch_inputs(params, batch);
  ForwardCache<T> cache;
  const ForwardResult<T> out = forward(params, x, options, grads != nullptr ? &cache : nullptr);
  const auto n = static_cast<double>(batch.size());
  const double denom = n * kPoseWidth;

  double total = 0.0;
  Mat<T> d_final = Mat<T>::Zero(kPoseWidth, x.cols());
  Mat<T> d_coarse = Mat<T>::Zero(kPoseWidth, x.cols());
  if (weights.pose != 0.0 || weights.coarse != 0.0) {
    const Mat<T> y = batch_targets(params, batch);
    const Mat<T> ef = out.final - y;
    const Mat<T> ec = out.coarse - y;
    total += weights.pose * static_cast<double>(ef.squaredNorm()) / denom;
    total += weights.coarse * static_cast<double>(ec.squaredNorm()) / denom;
    d_final = static_cast<T>(2.0 * weights.pose / denom) * ef;
    d_coarse = static_cast<T>(2.0 * weights.coarse / denom) * ec;
  }
  Mat<T> d_probs;
  const bool fbi = weights.focal != 0.0 || weights.fixed != 0.0;
  if (fbi) {
    total += fbi_terms(out.probs, batch, weights.focal, weights.fixed, config,
                       grads != nullptr ? &d_probs : nullptr);
  }
  if (grads != nullptr) backward(params, cache, d_coarse, d_final, fbi ? &d_probs : nullptr, *grads);
  return total;
}

TrainResult train_supervised(const std::vector<TrainingSample>& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) fail(ErrorCode::kEmptyDataset, "training dataset is empty");
  for (const auto& s : dataset) {
    if (!s.target) fail(ErrorCode::kInvalidArgument, "sample '" + s.id + "' has no 3D ground truth");
  }

  // Full-batch training sees the data in canonical (id) order, which makes
  // the result independent of the input order.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool full_batch = static_cast<std::size_t>(config.batch_size) >= dataset.size();
  if (full_batch) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dataset[a].id < dataset[b].id; });
  }
  std::size_t n_val = static_cast<std::size_t>(config.validation_fraction * static_cast<double>(dataset.size()));
  if (n_val >= dataset.size()) n_val = 0;
  if (n_val > 0) {
    std::mt19937_64 split_rng(config.seed ^ 0x5eedULL);
    std::shuffle(order.begin(), order.end(), split_rng);
  }
  std::vector<TrainingSample> train_set;
  std::vector<const TrainingSample*> val_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < n_val) {
      val_set.push_back(&dataset[order[i]]);
    } else {
      train_set.push_back(dataset[order[i]]);
    }
  }
  if (full_batch && n_val > 0) {
    std::stable_sort(train_set.begin(), train_set.end(),
                     [](const TrainingSample& a, const TrainingSample& b) { return a.id < b.id; });
  }

  TrainResult result{fresh_params(config), {}};
  auto& params = result.params;
  const std::size_t batch = std::min(static_cast<std::size_t>(config.batch_size), train_set.size());
  BatchSampler sampler(train_set.size(), config.seed + 1, !full_batch);
  std::mt19937_64 dropout_rng(config.seed + 2);
  AdamOptimizer<float> adam(params, config.learning_rate, config.decay_rate, config.decay_steps);
  ForwardOptions opt;
  opt.mode = Mode::kTrain;
  opt.dropout_rng = &dropout_rng;
  opt.update_running_stats = true;

  const int steps_per_epoch = std::max(1, static_cast<int>(train_set.size() / batch));
  result.history.steps_per_epoch = steps_per_epoch;
  RegressorParams<float> grads = zeros_like(params);
  double epoch_sum = 0.0;
  int epoch_count = 0;
  for (int it = 0; it < config.iterations; ++it) {
    grads.visit([](const std::string&, Mat<float>& m, TensorRole, bool) { m.setZero(); });
    const auto b = pointers(train_set, sampler.next(batch));
    const double loss = supervised_objective(params, b, config.weights, config, opt, &grads);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kDivergence, "training loss became non-finite at iteration " + std::to_string(it));
    }
    require_finite_grads(grads, it);
    adam.step(params, grads, false);
    epoch_sum += loss;
    if (++epoch_count == steps_per_epoch) {
      result.history.train.push_back(epoch_sum / epoch_count);
      if (!val_set.empty()) {
        result.history.validation.push_back(eval_objective(params, val_set, config.weights, config));
      }
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  return result;
}

LossHistory pretrain_fbi_head(RegressorParams<float>& params, const std::vector<TrainingSample>& dataset,
                              const TrainConfig& config) {
  config.validate();
  std::vector<const TrainingSample*> usable;
  for (const auto& s : dataset) {
    if (s.target) usable.push_back(&s);
  }
  if (usable.empty()) fail(ErrorCode::kEmptyDataset, "head pretraining needs samples with 3D ground truth");

  constexpr std::size_t kHeadBatch = 64;
  const std::size_t batch = std::min(kHeadBatch, usable.size());
  BatchSampler sampler(usable.size(), config.seed + 3, true);
  AdamOptimizer<float> adam(params, config.learning_rate, config.decay_rate, config.decay_steps);
  RegressorParams<float> grads = zeros_like(params);
  LossHistory history;
  history.steps_per_epoch = std::max(1, static_cast<int>(usable.size() / batch));
  double epoch_sum = 0.0;
  int epoch_count = 0;
  for (int it = 0; it < config.head_iterations; ++it) {
    grads.visit([](const std::string&, Mat<float>& m, TensorRole, bool) { m.setZero(); });
    std::vector<const TrainingSample*> b;
    for (std::size_t i : sampler.next(batch)) b.push_back(usable[i]);
    Mat<float> poses(kPoseWidth, static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) {
      poses.col(static_cast<Eigen::Index>(i)) = (*b[i]->target / params.output_scale_mm).cast<float>();
    }
    HeadCache<float> cache;
    const Mat<float> probs = head_forward(params, root_force<float>(poses), &cache);
    Mat<float> d_probs;
    TrainConfig ce = config;
    ce.w_clear = 1.0;
    ce.w_uncertain = 1.0;
    const double loss = fbi_terms(probs, b, 0.0, 1.0, ce, &d_probs);
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kDivergence, "head loss became non-finite at iteration " + std::to_string(it));
    }
    head_backward(params, cache, d_probs, grads);
    // Only head tensors carry gradient here.
    adam.step(params, grads, false);
    epoch_sum += loss;
    if (++epoch_count == history.steps_per_epoch) {
      history.train.push_back(epoch_sum / epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  return history;
}

TrainResult finetune_weak(const RegressorParams<float>& initial, const std::vector<TrainingSample>& fbi_only,
                          const std::vector<TrainingSample>& supervised, const TrainConfig& config) {
  config.validate();
  TrainResult result{initial, {}};
  if (fbi_only.empty()) fail(ErrorCode::kEmptyDataset, "weak finetuning needs FBI-labelled records");
  if (config.weak_fbi_weight == 0.0) return result;

  auto& params = result.params;
  const std::size_t weak_batch = std::min(static_cast<std::size_t>(config.batch_size), fbi_only.size());
  BatchSampler weak_sampler(fbi_only.size(), config.seed + 4, true);
  std::optional<BatchSampler> sup_sampler;
  std::size_t sup_batch = 0;
  const bool mix = !supervised.empty() && config.weak_pose_weight > 0.0;
  if (mix) {
    sup_batch = std::min(static_cast<std::size_t>(config.batch_size), supervised.size());
    sup_sampler.emplace(supervised.size(), config.seed + 5, true);
  }
  std::mt19937_64 dropout_rng(config.seed + 6);
  AdamOptimizer<float> adam(params, config.learning_rate, config.decay_rate, config.decay_steps);
  ForwardOptions opt;
  opt.mode = Mode::kTrain;
  opt.dropout_rng = &dropout_rng;
  opt.update_running_stats = false;

  const LossWeights weak = weak_weights(config);
  const LossWeights sup{config.weak_pose_weight, config.weak_pose_weight, 0.0, 0.0};
  const int steps_per_epoch = std::max(1, static_cast<int>(fbi_only.size() / weak_batch));
  result.history.steps_per_epoch = steps_per_epoch;
  RegressorParams<float> grads = zeros_like(params);
  double epoch_sum = 0.0;
  int epoch_count = 0;
  for (int it = 0; it < config.iterations; ++it) {
    grads.visit([](const std::string&, Mat<float>& m, TensorRole, bool) { m.setZero(); });
    double loss = supervised_objective(params, pointers(fbi_only, weak_sampler.next(weak_batch)), weak, config,
                                       opt, &grads);
    if (mix) {
      loss += supervised_objective(params, pointers(supervised, sup_sampler->next(sup_batch)), sup, config, opt,
                                   &grads);
    }
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kDivergence, "weak finetuning loss became non-finite at iteration " + std::to_string(it));
    }
    require_finite_grads(grads, it);
    adam.step(params, grads, config.freeze_head);
    epoch_sum += loss;
    if (++epoch_count == steps_per_epoch) {
      result.history.train.push_back(epoch_sum / epoch_count);
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }
  return result;
}

std::vector<Eigen::VectorXd> predict(const RegressorParams<float>& params, const std::vector<TrainingSample>& data) {
  if (!params.all_finite()) fail(ErrorCode::kNumericFailure, "non-finite regressor parameters");
  std::vector<Eigen::VectorXd> out;
  out.reserve(data.size());
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::size_t end = std::min(data.size(), start + kEvalChunk);
    std::vector<const TrainingSample*> chunk;
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&data[i]);
    const auto result = forward_eval(params, batch_inputs(params, chunk));
    for (Eigen::Index c = 0; c < result.final.cols(); ++c) {
      out.push_back(result.final.col(c).cast<double>() * params.output_scale_mm);
    }
  }
  return out;
}

double weak_fbi_loss(const RegressorParams<float>& params, const std::vector<TrainingSample>& data,
                     const TrainConfig& config) {
  if (data.empty()) fail(ErrorCode::kEmptyDataset, "no records");
  TrainConfig c = config;
  c.weak_fbi_weight = 1.0;
  std::vector<const TrainingSample*> all;
  for (const auto& s : data) all.push_back(&s);
  return eval_objective(params, all, weak_weights(c), c);
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;
template double supervised_objective<float>(RegressorParams<float>&, const std::vector<const TrainingSample*>&,
                                            const LossWeights&, const TrainConfig&, const ForwardOptions&,
                                            RegressorParams<float>*);
template double supervised_objective<double>(RegressorParams<double>&, const std::vector<const TrainingSample*>&,
                                             const LossWeights&, const TrainConfig&, const ForwardOptions&,
                                             RegressorParams<double>*);

}  // namespace fbipose
