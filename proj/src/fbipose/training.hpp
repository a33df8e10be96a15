#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fbipose/network.hpp"

namespace fbipose {

enum class FbiLossKind { kFocal, kFixedWeight };

// Weights of the composed objective
//   pose * mse(final, gt) + coarse * mse(coarse, gt)
//     + focal * focal_loss(head) + fixed * fixed_weight_loss(head)
// with the pose terms in model units and the FBI terms averaged over samples.
struct LossWeights {
  double pose = 1.0;
  double coarse = 1.0;
  double focal = 0.0;
  double fixed = 0.0;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double decay_rate = 0.96;
  int decay_steps = 10000;
  int batch_size = 8;
  int iterations = 20000;
  double dropout = 0.5;
  std::uint64_t seed = 1;
  double gamma = 2.0;
  double w_clear = 1.0;
  double w_uncertain = 0.05;
  LossWeights weights;
  NetShape shape;
  double bn_momentum = 0.99;
  double output_scale_mm = 1000.0;
  bool fbi_inputs = true;
  double validation_fraction = 0.1;

  // Weak finetuning: weight of the FBI loss on FBI-only data and of the 3D
  // loss on interleaved supervised batches.
  double weak_fbi_weight = 0.001;
  double weak_pose_weight = 1.0;
  FbiLossKind weak_loss = FbiLossKind::kFixedWeight;
  bool freeze_head = true;
  int head_iterations = 4000;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// One record prepared for the regressor.
struct TrainingSample {
  std::string id;
  Eigen::VectorXd input;                  // 116
  std::optional<Eigen::VectorXd> target;  // 48, root-relative millimetres
  FbiMatrix labels{};
};

struct LossHistory {
  std::vector<double> train;       // mean training objective per epoch
  std::vector<double> validation;  // eval-mode objective per epoch, empty without a validation split
  int steps_per_epoch = 0;
};

struct TrainResult {
  RegressorParams<float> params;
  LossHistory history;
};

// Adam with exponentially decayed learning rate; moments kept per tensor.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(const RegressorParams<T>& like, double learning_rate, double decay_rate, int decay_steps);

  // Applies one step; head tensors are skipped when `skip_head` is set.
  void step(RegressorParams<T>& params, const RegressorParams<T>& grads, bool skip_head);
  long steps() const noexcept { return step_; }

 private:
  RegressorParams<T> m_;
  RegressorParams<T> v_;
  double lr_;
  double decay_rate_;
  int decay_steps_;
  long step_ = 0;
};

// One supervised objective evaluation (and gradient when `grads` is set) on
// a batch. Returns the objective value.
template <typename T>
double supervised_objective(RegressorParams<T>& params, const std::vector<const TrainingSample*>& batch,
                            const LossWeights& weights, const TrainConfig& config, const ForwardOptions& options,
                            RegressorParams<T>* grads);

TrainResult train_supervised(const std::vector<TrainingSample>& dataset, const TrainConfig& config);

// Trains only the FBI head to map ground-truth poses to their FBI labels.
LossHistory pretrain_fbi_head(RegressorParams<float>& params, const std::vector<TrainingSample>& dataset,
                              const TrainConfig& config);

// Weak finetuning on records without 3D ground truth: the FBI loss flows
// through the (frozen) head into the regressor, interleaved with supervised
// batches. Running batch-norm statistics are not updated.
TrainResult finetune_weak(const RegressorParams<float>& params, const std::vector<TrainingSample>& fbi_only,
                          const std::vector<TrainingSample>& supervised, const TrainConfig& config);

// Eval-mode predictions in millimetres, one 48-vector per sample.
std::vector<Eigen::VectorXd> predict(const RegressorParams<float>& params, const std::vector<TrainingSample>& data);

// Mean eval-mode FBI-head loss (the weak objective) over a dataset.
double weak_fbi_loss(const RegressorParams<float>& params, const std::vector<TrainingSample>& data,
                     const TrainConfig& config);

}  // namespace fbipose
