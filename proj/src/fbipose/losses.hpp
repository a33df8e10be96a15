#pragma once

#include <cmath>

#include <Eigen/Core>

#include "fbipose/skeleton.hpp"
#include "fbipose/synthetic.hpp"

namespace fbipose {

// Probabilities are clamped to [kProbEpsilon, 1] before any logarithm.
inline constexpr double kProbEpsilon = 1e-12;

namespace detail {

// Per-bone focal term -(1 - p)^gamma * log(p) for the probability p of the
// labelled class, with its derivative with respect to p.
template <typename T>
T focal_term(T p, T gamma, T* d_dp) {
  const T eps = static_cast<T>(kProbEpsilon);
  const bool clamped = p < eps;
  if (clamped) p = eps;
  if (p > T(1)) p = T(1);
  const T one_minus = T(1) - p;
  const T weight = std::pow(one_minus, gamma);
  const T log_p = std::log(p);
  if (d_dp != nullptr) {
    if (clamped) {
      *d_dp = T(0);
    } else {
      const T first = one_minus > T(0) ? gamma * std::pow(one_minus, gamma - T(1)) * log_p : T(0);
      *d_dp = first - weight / p;
    }
  }
  return -weight * log_p;
}

template <typename T>
T cross_entropy_term(T p, T weight, T* d_dp) {
  const T eps = static_cast<T>(kProbEpsilon);
  const bool clamped = p < eps;
  if (clamped) p = eps;
  if (p > T(1)) p = T(1);
  if (d_dp != nullptr) *d_dp = clamped ? T(0) : -weight / p;
  return -weight * std::log(p);
}

}  // namespace detail

// Loss terms over one sample. `probs` holds 14 rows of 3 probabilities,
// flattened row-major (bone-major) into 42 entries. When `grad` is non-null
// it receives d loss / d probs with the same layout.
template <typename T>
T focal_fbi_loss_flat(const T* probs, const FbiMatrix& labels, T gamma, T* grad) {
  T total = T(0);
  for (int b = 0; b < kNumFbiBones; ++b) {
    const int c = static_cast<int>(labels[static_cast<std::size_t>(b)]);
    T d = T(0);
    total += detail::focal_term(probs[3 * b + c], gamma, grad != nullptr ? &d : nullptr);
    if (grad != nullptr) {
      for (int j = 0; j < 3; ++j) grad[3 * b + j] = j == c ? d : T(0);
    }
  }
  return total;
}

template <typename T>
T fixed_weight_fbi_loss_flat(const T* probs, const FbiMatrix& labels, T w_clear, T w_uncertain, T* grad) {
  T total = T(0);
  for (int b = 0; b < kNumFbiBones; ++b) {
    const FbiStatus s = labels[static_cast<std::size_t>(b)];
    const int c = static_cast<int>(s);
    const T w = s == FbiStatus::kUncertain ? w_uncertain : w_clear;
    T d = T(0);
    total += detail::cross_entropy_term(probs[3 * b + c], w, grad != nullptr ? &d : nullptr);
    if (grad != nullptr) {
      for (int j = 0; j < 3; ++j) grad[3 * b + j] = j == c ? d : T(0);
    }
  }
  return total;
}

// Sum over bones of -(1 - p_i(j))^gamma log p_i(j) g_i(j).
double focal_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels, double gamma);

// Sum over bones of w(label) * -log p_i(label), w = w_clear for Forward and
// Backward, w_uncertain for Uncertain.
double fixed_weight_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels, double w_clear,
                             double w_uncertain);

// Unweighted cross-entropy, the gamma = 0 case of the focal loss.
double cross_entropy_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels);

// Mean squared error over all components.
double pose_l2_loss(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& gt);

}  // namespace fbipose
