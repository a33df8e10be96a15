#include "fbipose/network.hpp"

#include <cmath>

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

constexpr int kPelvis = 6;

template <typename T>
DenseBn<T> dense_bn_zeros(int out, int in) {
  DenseBn<T> l;
  l.w = Mat<T>::Zero(out, in);
  l.b = Mat<T>::Zero(out, 1);
  l.gamma = Mat<T>::Zero(out, 1);
  l.beta = Mat<T>::Zero(out, 1);
  l.running_mean = Mat<T>::Zero(out, 1);
  l.running_var = Mat<T>::Ones(out, 1);
  return l;
}

template <typename T>
Dense<T> dense_zeros(int out, int in) {
  return Dense<T>{Mat<T>::Zero(out, in), Mat<T>::Zero(out, 1)};
}

constexpr double kOutputInitGain = 0.05;

template <typename T>
void he_init(Mat<T>& w, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<T>(d(rng));
  }
}

template <typename T>
void require_finite(const Mat<T>& m, const char* what) {
  if (!m.allFinite()) {
    fail(ErrorCode::kNumericFailure, std::string("non-finite values in ") + what);
  }
}

template <typename T>
Mat<T> dense_bn_forward(DenseBn<T>& layer, const Mat<T>& x, T dropout, T momentum, T eps,
                        const ForwardOptions& opt, DenseBnCache<T>* cache) {
  Mat<T> z = layer.w * x;
  z.colwise() += layer.b.col(0);
  const auto batch = static_cast<T>(x.cols());
  // A single column has no batch statistics; it is normalised like eval.
  const bool batch_stats = opt.mode == Mode::kTrain && x.cols() > 1;
  Mat<T> xhat;
  Mat<T> inv_std;
  if (batch_stats) {
    const Mat<T> mean = z.rowwise().mean();
    z.colwise() -= mean.col(0);
    const Mat<T> var = z.array().square().rowwise().mean();
    inv_std = (var.array() + eps).rsqrt();
    xhat = z.array().colwise() * inv_std.col(0).array();
    if (opt.update_running_stats) {
      const T unbias = x.cols() > 1 ? batch / (batch - T(1)) : T(1);
      layer.running_mean = momentum * layer.running_mean + (T(1) - momentum) * mean;
      layer.running_var = momentum * layer.running_var + (T(1) - momentum) * unbias * var;
    }
  } else {
    inv_std = (layer.running_var.array() + eps).rsqrt();
    z.colwise() -= layer.running_mean.col(0);
    xhat = z.array().colwise() * inv_std.col(0).array();
  }
  Mat<T> y = xhat.array().colwise() * layer.gamma.col(0).array();
  y.colwise() += layer.beta.col(0);
  Mat<T> mask = (y.array() > T(0)).template cast<T>();
  Mat<T> out = y.array() * mask.array();

  const bool drop = opt.mode == Mode::kTrain && dropout > T(0);
  Mat<T> drop_mask;
  if (drop) {
    if (opt.dropout_rng == nullptr) fail(ErrorCode::kInvalidArgument, "train-mode dropout needs an RNG");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const T keep_scale = T(1) / (T(1) - dropout);
    drop_mask.resize(out.rows(), out.cols());
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        drop_mask(r, c) = u(*opt.dropout_rng) < static_cast<double>(dropout) ? T(0) : keep_scale;
      }
    }
    out.array() *= drop_mask.array();
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->act_mask = std::move(mask);
    cache->drop_mask = std::move(drop_mask);
    cache->batch_stats = batch_stats;
    cache->dropped = drop;
  }
  return out;
}

template <typename T>
Mat<T> dense_bn_backward(const DenseBn<T>& layer, const DenseBnCache<T>& cache, const Mat<T>& d_out,
                         DenseBn<T>& grad) {
  Mat<T> dy = d_out.array() * cache.act_mask.array();
  if (cache.dropped) dy.array() *= cache.drop_mask.array();
  grad.gamma += (dy.array() * cache.xhat.array()).rowwise().sum().matrix();
  grad.beta += dy.rowwise().sum();
  const Mat<T> dxhat = dy.array().colwise() * layer.gamma.col(0).array();
  Mat<T> dz;
  if (cache.batch_stats) {
    const auto n = static_cast<T>(dxhat.cols());
    const Mat<T> sum_d = dxhat.rowwise().sum();
    const Mat<T> sum_dx = (dxhat.array() * cache.xhat.array()).rowwise().sum();
    dz = (n * dxhat.array()).matrix();
    dz.colwise() -= sum_d.col(0);
    dz.array() -= cache.xhat.array().colwise() * sum_dx.col(0).array();
    dz.array().colwise() *= cache.inv_std.col(0).array() / n;
  } else {
    dz = dxhat.array().colwise() * cache.inv_std.col(0).array();
  }
  grad.w.noalias() += dz * cache.x.transpose();
  grad.b += dz.rowwise().sum();
  return layer.w.transpose() * dz;
}

template <typename T>
Mat<T> dense_forward(const Dense<T>& layer, const Mat<T>& x) {
  Mat<T> z = layer.w * x;
  z.colwise() += layer.b.col(0);
  return z;
}

template <typename T>
Mat<T> dense_backward(const Dense<T>& layer, const Mat<T>& x, const Mat<T>& dz, Dense<T>& grad) {
  grad.w.noalias() += dz * x.transpose();
  grad.b += dz.rowwise().sum();
  return layer.w.transpose() * dz;
}

template <typename T>
Mat<T> root_force_transpose(const Mat<T>& d_out) {
  Mat<T> d_in = d_out;
  for (Eigen::Index c = 0; c < d_out.cols(); ++c) {
    for (int k = 0; k < 3; ++k) {
      T total = T(0);
      for (int j = 0; j < kNumJoints; ++j) total += d_out(3 * j + k, c);
      d_in(3 * kPelvis + k, c) -= total;
    }
  }
  return d_in;
}

}  // namespace

template <typename T>
RegressorParams<T> RegressorParams<T>::zeros(const NetShape& shape) {
  if (shape.hidden < 1 || shape.head_hidden < 1) fail(ErrorCode::kInvalidArgument, "layer widths must be >= 1");
  RegressorParams p;
  p.shape = shape;
  const int h = shape.hidden;
  p.input = dense_bn_zeros<T>(h, kInputWidth);
  p.block1_a = dense_bn_zeros<T>(h, h);
  p.block1_b = dense_bn_zeros<T>(h, h);
  p.coarse = dense_zeros<T>(kPoseWidth, h);
  p.reproject = dense_zeros<T>(h, kPoseWidth);
  p.block2_a = dense_bn_zeros<T>(h, h);
  p.block2_b = dense_bn_zeros<T>(h, h);
  p.final_layer = dense_zeros<T>(kPoseWidth, h);
  p.head_hidden = dense_zeros<T>(shape.head_hidden, kPoseWidth);
  p.head_out = dense_zeros<T>(kProbWidth, shape.head_hidden);
  return p;
}

template <typename T>
RegressorParams<T> RegressorParams<T>::initialised(const NetShape& shape, std::uint64_t seed) {
  RegressorParams p = zeros(shape);
  std::mt19937_64 rng(seed);
  p.visit([&rng](const std::string& name, Mat<T>& m, TensorRole role, bool) {
    if (role == TensorRole::kWeight) he_init(m, rng);
    // Pose outputs start near zero (targets are ~0.2 in model units).
    if (name == "coarse.w" || name == "final.w") m *= T(kOutputInitGain);
    if (role == TensorRole::kGamma) m.setOnes();
  });
  return p;
}

template <typename T>
bool RegressorParams<T>::all_finite() const {
  bool ok = true;
  visit([&ok](const std::string&, const Mat<T>& m, TensorRole, bool) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
std::size_t RegressorParams<T>::parameter_count() const {
  std::size_t n = 0;
  visit([&n](const std::string&, const Mat<T>& m, TensorRole role, bool) {
    if (is_trainable(role)) n += static_cast<std::size_t>(m.size());
  });
  return n;
}

template <typename T>
Mat<T> root_force(const Mat<T>& poses) {
  Mat<T> out = poses;
  for (Eigen::Index c = 0; c < poses.cols(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const T root = poses(3 * kPelvis + k, c);
      for (int j = 0; j < kNumJoints; ++j) out(3 * j + k, c) -= root;
    }
  }
  return out;
}

template <typename T>
Mat<T> head_forward(const RegressorParams<T>& params, const Mat<T>& poses, HeadCache<T>* cache) {
  const Mat<T> pre = dense_forward(params.head_hidden, poses);
  const Mat<T> hidden = pre.array().max(T(0));
  const Mat<T> logits = dense_forward(params.head_out, hidden);
  Mat<T> probs(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    for (int b = 0; b < kNumFbiBones; ++b) {
      const auto row = logits.col(c).segment(3 * b, 3);
      const Eigen::Array<T, 3, 1> e = (row.array() - row.maxCoeff()).exp();
      probs.col(c).segment(3 * b, 3) = e / e.sum();
    }
  }
  if (cache != nullptr) {
    cache->x = poses;
    cache->hidden_pre = pre;
    cache->probs = probs;
  }
  return probs;
}

template <typename T>
Mat<T> head_backward(const RegressorParams<T>& params, const HeadCache<T>& cache, const Mat<T>& d_probs,
                     RegressorParams<T>& grads) {
  Mat<T> d_logits(d_probs.rows(), d_probs.cols());
  for (Eigen::Index c = 0; c < d_probs.cols(); ++c) {
    for (int b = 0; b < kNumFbiBones; ++b) {
      const auto p = cache.probs.col(c).segment(3 * b, 3).array();
      const auto dp = d_probs.col(c).segment(3 * b, 3).array();
      const T dot = (p * dp).sum();
      d_logits.col(c).segment(3 * b, 3) = (p * (dp - dot)).matrix();
    }
  }
  const Mat<T> hidden = cache.hidden_pre.array().max(T(0));
  Mat<T> d_hidden = dense_backward(params.head_out, hidden, d_logits, grads.head_out);
  d_hidden.array() *= (cache.hidden_pre.array() > T(0)).template cast<T>();
  return dense_backward(params.head_hidden, cache.x, d_hidden, grads.head_hidden);
}

template <typename T>
ForwardResult<T> forward(RegressorParams<T>& params, const Mat<T>& input, const ForwardOptions& opt,
                         ForwardCache<T>* cache) {
  if (input.rows() != kInputWidth) fail(ErrorCode::kInvalidArgument, "network input must have 116 rows");
  require_finite(input, "network input");

  const T drop = params.dropout;
  const T mom = params.bn_momentum;
  const T eps = params.bn_eps;
  auto layer = [&](DenseBn<T>& l, const Mat<T>& x, DenseBnCache<T>* c) {
    return dense_bn_forward(l, x, drop, mom, eps, opt, c);
  };
  const Mat<T> h0 = layer(params.input, input, cache ? &cache->input : nullptr);
  Mat<T> h1 = h0 + layer(params.block1_b, layer(params.block1_a, h0, cache ? &cache->block1_a : nullptr),
                         cache ? &cache->block1_b : nullptr);
  ForwardResult<T> out;
  out.coarse = root_force<T>(dense_forward(params.coarse, h1));
  Mat<T> h1r = h1 + dense_forward(params.reproject, out.coarse);
  Mat<T> h2 = h1r + layer(params.block2_b, layer(params.block2_a, h1r, cache ? &cache->block2_a : nullptr),
                          cache ? &cache->block2_b : nullptr);
  out.final = root_force<T>(dense_forward(params.final_layer, h2));
  if (!out.final.allFinite()) {
    std::string offending;
    params.visit([&offending](const std::string& name, const Mat<T>& m, TensorRole, bool) {
      if (offending.empty() && !m.allFinite()) offending = name;
    });
    fail(ErrorCode::kNumericFailure, offending.empty() ? "non-finite regressor output"
                                                       : "non-finite regressor parameter " + offending);
  }
  out.probs = head_forward(params, out.final, cache ? &cache->head : nullptr);
  if (cache != nullptr) {
    cache->h1 = std::move(h1);
    cache->coarse = out.coarse;
    cache->h2 = std::move(h2);
    cache->final = out.final;
  }
  return out;
}

template <typename T>
ForwardResult<T> forward_eval(const RegressorParams<T>& params, const Mat<T>& input) {
  if (!params.all_finite()) fail(ErrorCode::kNumericFailure, "non-finite regressor parameters");
  ForwardOptions opt;
  opt.mode = Mode::kEval;
  return forward(const_cast<RegressorParams<T>&>(params), input, opt, static_cast<ForwardCache<T>*>(nullptr));
}

template <typename T>
void backward(const RegressorParams<T>& params, const ForwardCache<T>& cache, const Mat<T>& d_coarse,
              const Mat<T>& d_final, const Mat<T>* d_probs, RegressorParams<T>& grads) {
  Mat<T> d_final_total = d_final;
  if (d_probs != nullptr) d_final_total += head_backward(params, cache.head, *d_probs, grads);
  const Mat<T> d_final_raw = root_force_transpose(d_final_total);

  Mat<T> d_h2 = dense_backward(params.final_layer, cache.h2, d_final_raw, grads.final_layer);
  Mat<T> d_h1r = d_h2;
  {
    const Mat<T> d_a = dense_bn_backward(params.block2_b, cache.block2_b, d_h2, grads.block2_b);
    d_h1r += dense_bn_backward(params.block2_a, cache.block2_a, d_a, grads.block2_a);
  }
  Mat<T> d_coarse_total = d_coarse + dense_backward(params.reproject, cache.coarse, d_h1r, grads.reproject);
  const Mat<T> d_coarse_raw = root_force_transpose(d_coarse_total);
  Mat<T> d_h1 = d_h1r + dense_backward(params.coarse, cache.h1, d_coarse_raw, grads.coarse);
  Mat<T> d_h0 = d_h1;
  {
    const Mat<T> d_a = dense_bn_backward(params.block1_b, cache.block1_b, d_h1, grads.block1_b);
    d_h0 += dense_bn_backward(params.block1_a, cache.block1_a, d_a, grads.block1_a);
  }
  dense_bn_backward(params.input, cache.input, d_h0, grads.input);
}

Eigen::VectorXd make_input(const Pose2D& pose2d, const FbiProbabilities& probs, bool fbi_inputs) {
  require_valid(pose2d);
  Eigen::VectorXd x(kInputWidth);
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pose2d.joints) mean += p;
  mean /= static_cast<double>(kNumJoints);
  double sq = 0.0;
  for (const auto& p : pose2d.joints) sq += (p - mean).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(kNumJoints));
  if (!(rms > 0.0)) fail(ErrorCode::kZeroScale, "2D pose has zero extent; cannot normalise");
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec2 n = (pose2d.joints[static_cast<std::size_t>(j)] - mean) / rms;
    x[2 * j] = n.x();
    x[2 * j + 1] = n.y();
  }
  if (fbi_inputs) {
    probs.validate();
    for (int i = 0; i < kProbWidth; ++i) {
      x[kPose2DWidth + i] = probs.p_fws.data()[i];
      x[kPose2DWidth + kProbWidth + i] = probs.p_aws.data()[i];
    }
  } else {
    x.tail(2 * kProbWidth).setConstant(1.0 / 3.0);
  }
  return x;
}

template <typename T>
RegressorParams<T> zeros_like(const RegressorParams<T>& params) {
  RegressorParams<T> z = params;
  z.visit([](const std::string&, Mat<T>& m, TensorRole, bool) { m.setZero(); });
  return z;
}

template <typename To, typename From>
RegressorParams<To> cast_params(const RegressorParams<From>& params) {
  RegressorParams<To> out = RegressorParams<To>::zeros(params.shape);
  out.dropout = static_cast<To>(params.dropout);
  out.bn_momentum = static_cast<To>(params.bn_momentum);
  out.bn_eps = static_cast<To>(params.bn_eps);
  out.output_scale_mm = params.output_scale_mm;
  out.fbi_inputs = params.fbi_inputs;
  std::vector<const Mat<From>*> src;
  params.visit([&src](const std::string&, const Mat<From>& m, TensorRole, bool) { src.push_back(&m); });
  std::size_t i = 0;
  out.visit([&](const std::string&, Mat<To>& m, TensorRole, bool) { m = src[i++]->template cast<To>(); });
  return out;
}

#define FBIPOSE_INSTANTIATE(T)                                                                            \
  template struct RegressorParams<T>;                                                                     \
  template ForwardResult<T> forward<T>(RegressorParams<T>&, const Mat<T>&, const ForwardOptions&,         \
                                       ForwardCache<T>*);                                                 \
  template ForwardResult<T> forward_eval<T>(const RegressorParams<T>&, const Mat<T>&);                    \
  template void backward<T>(const RegressorParams<T>&, const ForwardCache<T>&, const Mat<T>&,             \
                            const Mat<T>&, const Mat<T>*, RegressorParams<T>&);                           \
  template Mat<T> head_forward<T>(const RegressorParams<T>&, const Mat<T>&, HeadCache<T>*);               \
  template Mat<T> head_backward<T>(const RegressorParams<T>&, const HeadCache<T>&, const Mat<T>&,         \
                                   RegressorParams<T>&);                                                  \
  template Mat<T> root_force<T>(const Mat<T>&);                                                           \
  template RegressorParams<T> zeros_like<T>(const RegressorParams<T>&);

FBIPOSE_INSTANTIATE(float)
FBIPOSE_INSTANTIATE(double)

template RegressorParams<float> cast_params<float, double>(const RegressorParams<double>&);
template RegressorParams<double> cast_params<double, float>(const RegressorParams<float>&);
template RegressorParams<float> cast_params<float, float>(const RegressorParams<float>&);
template RegressorParams<double> cast_params<double, double>(const RegressorParams<double>&);

}  // namespace fbipose
