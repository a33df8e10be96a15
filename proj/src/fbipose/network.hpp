#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Core>

#include "fbipose/skeleton.hpp"
#include "fbipose/synthetic.hpp"

namespace fbipose {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kPose2DWidth = 2 * kNumJoints;                   // 32
inline constexpr int kProbWidth = kNumFbiBones * kNumFbiStates;        // 42
inline constexpr int kInputWidth = kPose2DWidth + 2 * kProbWidth;      // 116
inline constexpr int kPoseWidth = 3 * kNumJoints;                      // 48

struct NetShape {
  int hidden = 1024;
  int head_hidden = 256;
};

// Affine layer followed by batch normalisation, ReLU and dropout.
template <typename T>
struct DenseBn {
  Mat<T> w, b, gamma, beta, running_mean, running_var;
};

template <typename T>
struct Dense {
  Mat<T> w, b;
};

enum class TensorRole { kWeight, kBias, kGamma, kBeta, kRunningMean, kRunningVar };

inline bool is_trainable(TensorRole role) {
  return role != TensorRole::kRunningMean && role != TensorRole::kRunningVar;
}

// Cascaded-block 3D pose regressor with its FBI-consistency head.
//
//   h0     = input(x)
//   h1     = h0 + block1_b(block1_a(h0))
//   coarse = root(coarse(h1))
//   h1'    = h1 + reproject(coarse)
//   h2     = h1' + block2_b(block2_a(h1'))
//   final  = root(final(h2))
//   probs  = softmax_per_bone(head_out(relu(head_hidden(final))))
//
// root() translates every joint so that the pelvis sits at the origin. Poses
// inside the network are in model units (millimetres / output_scale_mm).
template <typename T>
struct RegressorParams {
  NetShape shape;
  T dropout = T(0.5);
  T bn_momentum = T(0.99);
  T bn_eps = T(1e-5);
  double output_scale_mm = 1000.0;
  // When false the probability inputs are replaced by the uniform 1/3 rows
  // (a 2D-only regressor with the same architecture).
  bool fbi_inputs = true;

  DenseBn<T> input, block1_a, block1_b, block2_a, block2_b;
  Dense<T> coarse, reproject, final_layer, head_hidden, head_out;

  static RegressorParams zeros(const NetShape& shape);
  static RegressorParams initialised(const NetShape& shape, std::uint64_t seed);

  // Calls f(name, tensor, role, is_head) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  bool all_finite() const;
  std::size_t parameter_count() const;
};

template <typename T>
struct ForwardResult {
  Mat<T> coarse;  // 48 x B
  Mat<T> final;   // 48 x B
  Mat<T> probs;   // 42 x B, bone-major rows (3*bone + state)
};

template <typename T>
struct DenseBnCache {
  Mat<T> x, xhat, inv_std, act_mask, drop_mask;
  bool batch_stats = false;
  bool dropped = false;
};

template <typename T>
struct HeadCache {
  Mat<T> x, hidden_pre, probs;
};

template <typename T>
struct ForwardCache {
  DenseBnCache<T> input, block1_a, block1_b, block2_a, block2_b;
  Mat<T> h1, coarse, h2, final;
  HeadCache<T> head;
};

enum class Mode { kTrain, kEval };

struct ForwardOptions {
  Mode mode = Mode::kEval;
  std::mt19937_64* dropout_rng = nullptr;  // required for train mode with dropout > 0
  bool update_running_stats = false;
};

// Throws ErrorCode::kNumericFailure when parameters or inputs are not finite.
template <typename T>
ForwardResult<T> forward(RegressorParams<T>& params, const Mat<T>& input, const ForwardOptions& options,
                         ForwardCache<T>* cache = nullptr);

template <typename T>
ForwardResult<T> forward_eval(const RegressorParams<T>& params, const Mat<T>& input);

// Back-propagates d loss / d outputs through a cached forward pass and
// accumulates into `grads` (same layout as params). d_probs may be null when
// no FBI-head loss is active.
template <typename T>
void backward(const RegressorParams<T>& params, const ForwardCache<T>& cache, const Mat<T>& d_coarse,
              const Mat<T>& d_final, const Mat<T>* d_probs, RegressorParams<T>& grads);

// The FBI head on its own, applied to poses in model units (48 x B).
template <typename T>
Mat<T> head_forward(const RegressorParams<T>& params, const Mat<T>& poses, HeadCache<T>* cache = nullptr);

// Returns d loss / d poses and accumulates head gradients.
template <typename T>
Mat<T> head_backward(const RegressorParams<T>& params, const HeadCache<T>& cache, const Mat<T>& d_probs,
                     RegressorParams<T>& grads);

// Network input: 2D joints centred on their mean and divided by their RMS
// radius (32), then p_fws and p_aws flattened bone-major (42 + 42).
Eigen::VectorXd make_input(const Pose2D& pose2d, const FbiProbabilities& probs, bool fbi_inputs);

// Subtracts the pelvis from every joint of each 48-row column.
template <typename T>
Mat<T> root_force(const Mat<T>& poses);

template <typename T>
RegressorParams<T> zeros_like(const RegressorParams<T>& params);

template <typename To, typename From>
RegressorParams<To> cast_params(const RegressorParams<From>& params);

// ---------------------------------------------------------------------------

template <typename T>
template <typename F>
void RegressorParams<T>::visit(F&& f) {
  auto dense_bn = [&f](const std::string& n, DenseBn<T>& l) {
    f(n + ".w", l.w, TensorRole::kWeight, false);
    f(n + ".b", l.b, TensorRole::kBias, false);
    f(n + ".gamma", l.gamma, TensorRole::kGamma, false);
    f(n + ".beta", l.beta, TensorRole::kBeta, false);
    f(n + ".running_mean", l.running_mean, TensorRole::kRunningMean, false);
    f(n + ".running_var", l.running_var, TensorRole::kRunningVar, false);
  };
  auto dense = [&f](const std::string& n, Dense<T>& l, bool head) {
    f(n + ".w", l.w, TensorRole::kWeight, head);
    f(n + ".b", l.b, TensorRole::kBias, head);
  };
  dense_bn("input", input);
  dense_bn("block1_a", block1_a);
  dense_bn("block1_b", block1_b);
  dense("coarse", coarse, false);
  dense("reproject", reproject, false);
  dense_bn("block2_a", block2_a);
  dense_bn("block2_b", block2_b);
  dense("final", final_layer, false);
  dense("head_hidden", head_hidden, true);
  dense("head_out", head_out, true);
}

template <typename T>
template <typename F>
void RegressorParams<T>::visit(F&& f) const {
  const_cast<RegressorParams<T>*>(this)->visit(
      [&f](const std::string& name, Mat<T>& m, TensorRole role, bool head) {
        f(name, static_cast<const Mat<T>&>(m), role, head);
      });
}

}  // namespace fbipose
