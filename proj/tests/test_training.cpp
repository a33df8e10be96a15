#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fbipose/error.hpp"
#include "fbipose/metrics.hpp"
#include "fbipose/pipeline.hpp"
#include "fbipose/training.hpp"

using namespace fbipose;

namespace {

std::vector<TrainingSample> samples(std::size_t n, std::uint64_t seed) {
  SynthOptions o;
  o.count = n;
  o.seed = seed;
  return to_training_samples(make_synthetic(o));
}

TrainConfig small_config() {
  TrainConfig c;
  c.shape = NetShape{16, 8};
  c.iterations = 30;
  c.batch_size = 4;
  c.validation_fraction = 0.0;
  return c;
}

bool same_params(const RegressorParams<float>& a, const RegressorParams<float>& b) {
  std::vector<const Mat<float>*> x, y;
  a.visit([&](const std::string&, const Mat<float>& m, TensorRole, bool) { x.push_back(&m); });
  b.visit([&](const std::string&, const Mat<float>& m, TensorRole, bool) { y.push_back(&m); });
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (*x[i] != *y[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("first Adam step moves each weight by about the learning rate") {
  auto p = RegressorParams<double>::initialised(NetShape{8, 8}, 1);
  const auto start = p;
  auto g = zeros_like(p);
  g.final_layer.w.setConstant(0.5);
  g.final_layer.w(0, 0) = -2.0;
  g.head_out.w.setConstant(1.0);
  AdamOptimizer<double> adam(p, 1e-3, 0.96, 10000);
  adam.step(p, g, true);
  // m = 0.1 g, v = 0.001 g^2; bias-corrected ratio g / (|g| + eps).
  const double expect = 1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(p.final_layer.w(1, 1) - start.final_layer.w(1, 1) == doctest::Approx(-expect).epsilon(1e-9));
  CHECK(p.final_layer.w(0, 0) - start.final_layer.w(0, 0) == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(p.head_out.w == start.head_out.w);
  CHECK(p.block1_a.w == start.block1_a.w);
  adam.step(p, g, false);
  CHECK(p.head_out.w != start.head_out.w);
  CHECK(adam.steps() == 2);
}

TEST_CASE("learning rate decays by 0.96 every 10K steps") {
  auto p = RegressorParams<double>::initialised(NetShape{8, 8}, 1);
  auto g = zeros_like(p);
  g.final_layer.b.setConstant(1.0);
  AdamOptimizer<double> adam(p, 1e-3, 0.96, 2);
  // Constant gradients keep the Adam ratio at 1, so each step moves by lr_t.
  double prev = p.final_layer.b(0, 0);
  std::vector<double> moves;
  for (int i = 0; i < 5; ++i) {
    adam.step(p, g, true);
    moves.push_back(prev - p.final_layer.b(0, 0));
    prev = p.final_layer.b(0, 0);
  }
  CHECK(moves[0] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(moves[2] == doctest::Approx(1e-3 * std::pow(0.96, 1.0)).epsilon(1e-6));
  CHECK(moves[4] == doctest::Approx(1e-3 * std::pow(0.96, 2.0)).epsilon(1e-6));
}

TEST_CASE("config JSON round trip and validation") {
  TrainConfig c = small_config();
  c.weak_loss = FbiLossKind::kFocal;
  c.weights.focal = 0.3;
  const TrainConfig d = TrainConfig::from_json(c.to_json());
  CHECK(d.to_json() == c.to_json());
  CHECK(TrainConfig::from_json(nlohmann::json::object()).batch_size == 8);

  auto bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.gamma = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.w_uncertain = -0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"batch_size", "eight"}}), Error);
}

TEST_CASE("training is reproducible for a fixed seed") {
  const auto data = samples(40, 1);
  const auto a = train_supervised(data, small_config());
  const auto b = train_supervised(data, small_config());
  CHECK(same_params(a.params, b.params));
  auto other = small_config();
  other.seed = 2;
  CHECK_FALSE(same_params(a.params, train_supervised(data, other).params));
}

TEST_CASE("full-batch training ignores dataset order; batch 1 does not") {
  const auto data = samples(24, 3);
  auto reversed = data;
  std::reverse(reversed.begin(), reversed.end());

  auto full = small_config();
  full.batch_size = 24;
  full.dropout = 0.0;
  full.iterations = 10;
  const auto a = train_supervised(data, full);
  const auto b = train_supervised(reversed, full);
  for (Eigen::Index i = 0; i < a.params.final_layer.w.size(); ++i) {
    CHECK(a.params.final_layer.w.data()[i] == doctest::Approx(b.params.final_layer.w.data()[i]).epsilon(1e-4));
  }

  auto single = full;
  single.batch_size = 1;
  CHECK_FALSE(same_params(train_supervised(data, single).params, train_supervised(reversed, single).params));
}

TEST_CASE("training reduces the objective") {
  auto c = small_config();
  c.iterations = 600;
  c.shape = NetShape{64, 16};
  c.batch_size = 16;
  c.validation_fraction = 0.2;
  const auto r = train_supervised(samples(400, 5), c);
  REQUIRE(r.history.train.size() >= 2);
  CHECK(r.history.train.back() < r.history.train.front());
  CHECK(r.history.validation.back() < r.history.validation.front());
}

TEST_CASE("empty datasets and samples without 3D are rejected") {
  CHECK_THROWS_AS(train_supervised({}, small_config()), Error);
  auto data = samples(4, 1);
  for (auto& s : data) s.target.reset();
  try {
    train_supervised(data, small_config());
    FAIL("expected kInvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("divergence is reported") {
  auto c = small_config();
  c.learning_rate = 1e30;
  c.iterations = 200;
  try {
    train_supervised(samples(40, 1), c);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::kDivergence || e.code() == ErrorCode::kNumericFailure));
  }
}

TEST_CASE("head pretraining lowers the head loss") {
  auto c = small_config();
  c.head_iterations = 300;
  const auto data = samples(200, 2);
  auto p = train_supervised(data, c).params;
  const auto h = pretrain_fbi_head(p, data, c);
  REQUIRE(!h.train.empty());
  CHECK(h.train.back() < h.train.front());
}

TEST_CASE("weak finetuning with zero weight is a no-op; otherwise the weak loss falls") {
  auto c = small_config();
  c.head_iterations = 300;
  const auto data = samples(200, 2);
  auto p = train_supervised(data, c).params;
  pretrain_fbi_head(p, data, c);
  auto weak = samples(100, 9);
  for (auto& s : weak) s.target.reset();

  auto zero = c;
  zero.weak_fbi_weight = 0.0;
  CHECK(same_params(finetune_weak(p, weak, data, zero).params, p));

  auto on = c;
  on.weak_fbi_weight = 1.0;
  on.iterations = 200;
  const double before = weak_fbi_loss(p, weak, on);
  const auto tuned = finetune_weak(p, weak, data, on).params;
  CHECK(weak_fbi_loss(tuned, weak, on) < before);
  CHECK(tuned.head_out.w == p.head_out.w);
  CHECK(tuned.input.running_mean == p.input.running_mean);
}

TEST_CASE("a single sample is fitted to below 1 mm") {
  auto c = small_config();
  c.shape = NetShape{32, 8};
  c.iterations = 2000;
  c.batch_size = 1;
  c.dropout = 0.0;
  const auto data = samples(1, 12);
  const auto r = train_supervised(data, c);
  const Pose3D pred = pose_from_vector(predict(r.params, data)[0]);
  CHECK(mpjpe_p1(pred, pose_from_vector(*data[0].target)) < 1.0);
}

TEST_CASE("the moving average of the training loss does not increase") {
  auto c = small_config();
  c.iterations = 3000;
  c.shape = NetShape{64, 16};
  c.batch_size = 16;
  const auto r = train_supervised(samples(1600, 5), c);
  const auto& h = r.history.train;
  REQUIRE(h.size() >= 20);
  constexpr std::size_t kWindow = 10;
  double previous = 1e300;
  for (std::size_t i = 0; i + kWindow <= h.size(); ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < kWindow; ++k) mean += h[i + k];
    mean /= kWindow;
    CHECK(mean <= previous);
    previous = mean;
  }
}

TEST_CASE("weak finetuning does not lower FBI correctness on the weak set") {
  auto c = small_config();
  c.shape = NetShape{64, 32};
  c.iterations = 1500;
  c.batch_size = 16;
  c.head_iterations = 1000;
  SynthOptions so;
  so.count = 600;
  so.seed = 21;
  const auto sup = to_training_samples(make_synthetic(so));
  auto p = train_supervised(sup, c).params;
  pretrain_fbi_head(p, sup, c);
  so.count = 300;
  so.seed = 22;
  so.id_prefix = "w";
  const auto weak_full = make_synthetic(so);
  auto weak = to_training_samples(weak_full);
  for (auto& s : weak) s.target.reset();

  auto f = c;
  f.iterations = 500;
  f.learning_rate = 2e-4;
  const auto tuned = finetune_weak(p, weak, sup, f).params;
  CHECK(*evaluate(tuned, weak_full).aggregate.fbi_correctness >= *evaluate(p, weak_full).aggregate.fbi_correctness);
}
