#include <doctest.h>

#include <cmath>
#include <random>

#include "fbipose/losses.hpp"

using namespace fbipose;

namespace {

FbiProbRows uniform_rows() { return FbiProbRows::Constant(1.0 / 3.0); }

// Puts probability p on `label` for bone 0 and certainty elsewhere.
FbiProbRows single_bone(double p, int label, const FbiMatrix& labels) {
  FbiProbRows r = FbiProbRows::Zero();
  for (int b = 0; b < kNumFbiBones; ++b) r(b, static_cast<int>(labels[static_cast<std::size_t>(b)])) = 1.0;
  r.row(0).setConstant((1.0 - p) / 2.0);
  r(0, label) = p;
  return r;
}

}  // namespace

TEST_CASE("focal loss reference values") {
  const FbiMatrix labels = uniform_fbi(FbiStatus::kForward);
  // -(1 - 0.5)^2 ln 0.5 and -(1 - 0.3)^2 ln 0.3
  CHECK(focal_fbi_loss(single_bone(0.5, 0, labels), labels, 2.0) == doctest::Approx(0.17328679513998632).epsilon(1e-12));
  CHECK(focal_fbi_loss(single_bone(0.3, 0, labels), labels, 2.0) == doctest::Approx(0.5899466741197086).epsilon(1e-12));
  // -(0.8) ln 0.2
  CHECK(focal_fbi_loss(single_bone(0.2, 0, labels), labels, 1.0) == doctest::Approx(1.2875503299472804).epsilon(1e-12));
  CHECK(focal_fbi_loss(uniform_rows(), labels, 0.0) == doctest::Approx(14.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("focal loss with gamma 0 is cross-entropy") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    FbiProbRows p;
    FbiMatrix g;
    for (int b = 0; b < kNumFbiBones; ++b) {
      for (int c = 0; c < 3; ++c) p(b, c) = u(rng);
      p.row(b) /= p.row(b).sum();
      g[static_cast<std::size_t>(b)] = static_cast<FbiStatus>(cls(rng));
    }
    CHECK(focal_fbi_loss(p, g, 0.0) == cross_entropy_fbi_loss(p, g));
  }
}

TEST_CASE("fixed-weight loss weights uncertain bones") {
  FbiMatrix labels = uniform_fbi(FbiStatus::kForward);
  labels[5] = FbiStatus::kUncertain;
  FbiProbRows p = FbiProbRows::Zero();
  for (int b = 0; b < kNumFbiBones; ++b) p(b, 0) = 1.0;
  p.row(5) << 0.0, 1.0 - std::exp(-1.0), std::exp(-1.0);
  // w_uncertain * -ln(e^-1)
  CHECK(fixed_weight_fbi_loss(p, labels, 1.0, 0.05) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(fixed_weight_fbi_loss(p, labels, 1.0, 1.0) == doctest::Approx(cross_entropy_fbi_loss(p, labels)).epsilon(1e-12));
  CHECK(fixed_weight_fbi_loss(uniform_rows(), uniform_fbi(FbiStatus::kBackward), 2.0, 0.05) ==
        doctest::Approx(28.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("zero probabilities are clamped, not infinite") {
  const FbiMatrix labels = uniform_fbi(FbiStatus::kForward);
  FbiProbRows p = FbiProbRows::Zero();
  p.col(1).setOnes();
  const double f = focal_fbi_loss(p, labels, 2.0);
  CHECK(std::isfinite(f));
  CHECK(f == doctest::Approx(-14.0 * std::log(kProbEpsilon) * std::pow(1.0 - kProbEpsilon, 2.0)));
  CHECK(std::isfinite(fixed_weight_fbi_loss(p, labels, 1.0, 0.05)));
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_int_distribution<int> cls(0, 2);
  double p[42];
  FbiMatrix g;
  for (double& x : p) x = u(rng);
  for (auto& s : g) s = static_cast<FbiStatus>(cls(rng));
  double grad_f[42], grad_w[42];
  focal_fbi_loss_flat(p, g, 2.0, grad_f);
  fixed_weight_fbi_loss_flat(p, g, 1.0, 0.05, grad_w);
  const double h = 1e-6;
  for (int i = 0; i < 42; ++i) {
    double plus[42], minus[42];
    std::copy(p, p + 42, plus);
    std::copy(p, p + 42, minus);
    plus[i] += h;
    minus[i] -= h;
    const double nf = (focal_fbi_loss_flat<double>(plus, g, 2.0, nullptr) -
                       focal_fbi_loss_flat<double>(minus, g, 2.0, nullptr)) / (2 * h);
    const double nw = (fixed_weight_fbi_loss_flat<double>(plus, g, 1.0, 0.05, nullptr) -
                       fixed_weight_fbi_loss_flat<double>(minus, g, 1.0, 0.05, nullptr)) / (2 * h);
    CHECK(grad_f[i] == doctest::Approx(nf).epsilon(1e-6));
    CHECK(grad_w[i] == doctest::Approx(nw).epsilon(1e-6));
  }
}

TEST_CASE("pose L2 loss") {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(48);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(48, 2.0);
  CHECK(pose_l2_loss(a, b) == doctest::Approx(4.0));
  CHECK(pose_l2_loss(b, b) == 0.0);
  CHECK_THROWS(pose_l2_loss(a, Eigen::VectorXd::Zero(47)));
}
