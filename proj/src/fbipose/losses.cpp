#include "fbipose/losses.hpp"

#include "fbipose/error.hpp"

namespace fbipose {

namespace {

void require_gamma(double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(ErrorCode::kInvalidArgument, "gamma must be >= 0");
}

void require_probabilities(const FbiProbRows& probs) {
  if (!probs.allFinite() || (probs.array() < 0.0).any() || (probs.array() > 1.0).any()) {
    fail(ErrorCode::kInvalidArgument, "probabilities must lie in [0, 1]");
  }
}

}  // namespace

double focal_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels, double gamma) {
  require_gamma(gamma);
  require_probabilities(probs);
  return focal_fbi_loss_flat<double>(probs.data(), labels, gamma, nullptr);
}

double fixed_weight_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels, double w_clear,
                             double w_uncertain) {
  if (!(w_clear >= 0.0) || !(w_uncertain >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "FBI loss weights must be non-negative");
  }
  require_probabilities(probs);
  return fixed_weight_fbi_loss_flat<double>(probs.data(), labels, w_clear, w_uncertain, nullptr);
}

double cross_entropy_fbi_loss(const FbiProbRows& probs, const FbiMatrix& labels) {
  require_probabilities(probs);
  return fixed_weight_fbi_loss_flat<double>(probs.data(), labels, 1.0, 1.0, nullptr);
}

double pose_l2_loss(const Eigen::Ref<const Eigen::VectorXd>& pred, const Eigen::Ref<const Eigen::VectorXd>& gt) {
  if (pred.size() != gt.size() || pred.size() == 0) {
    fail(ErrorCode::kInvalidArgument, "pose vectors must be non-empty and of equal length");
  }
  return (pred - gt).squaredNorm() / static_cast<double>(pred.size());
}

}  // namespace fbipose
