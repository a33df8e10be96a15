#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fbipose/pipeline.hpp"
#include "fbipose/training.hpp"

namespace fbitest {

struct GradReport {
  double worst_rel = 0.0;
  double worst_abs_small = 0.0;  // largest mismatch among near-zero gradients
  std::size_t checked = 0;
};

// Finite differences over every trainable scalar of a width-8 network in
// double precision, train mode, with a dropout mask that is identical for
// every evaluation. Gradients below 1e-7 in magnitude are compared in
// absolute terms.
inline GradReport check_gradients(const fbipose::LossWeights& w) {
  using namespace fbipose;
  TrainConfig config;
  config.shape = NetShape{8, 8};
  config.dropout = 0.5;
  auto params = RegressorParams<double>::initialised(config.shape, 17);
  params.dropout = 0.5;
  SynthOptions so;
  so.count = 5;
  so.seed = 3;
  const auto data = to_training_samples(make_synthetic(so));
  std::vector<const TrainingSample*> batch;
  for (const auto& s : data) batch.push_back(&s);

  auto objective = [&](RegressorParams<double>& p, RegressorParams<double>* grads) {
    std::mt19937_64 rng(99);
    ForwardOptions o{Mode::kTrain, &rng, false};
    return supervised_objective(p, batch, w, config, o, grads);
  };
  auto grads = zeros_like(params);
  objective(params, &grads);

  std::vector<Mat<double>*> ps, gs;
  params.visit([&](const std::string&, Mat<double>& m, TensorRole role, bool) {
    if (is_trainable(role)) ps.push_back(&m);
  });
  grads.visit([&](const std::string&, Mat<double>& m, TensorRole role, bool) {
    if (is_trainable(role)) gs.push_back(&m);
  });

  GradReport report;
  const double h = 1e-5;
  for (std::size_t t = 0; t < ps.size(); ++t) {
    for (Eigen::Index i = 0; i < ps[t]->size(); ++i) {
      double& x = ps[t]->data()[i];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        return objective(params, nullptr);
      };
      // Five-point stencil, O(h^4) truncation error.
      const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      x = saved;
      const double analytic = gs[t]->data()[i];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      if (scale > 1e-7) {
        report.worst_rel = std::max(report.worst_rel, std::abs(numeric - analytic) / scale);
      } else {
        report.worst_abs_small = std::max(report.worst_abs_small, std::abs(numeric - analytic));
      }
      ++report.checked;
    }
  }
  return report;
}

}  // namespace fbitest
