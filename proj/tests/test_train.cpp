#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "xvseg/train.hpp"

using namespace xvseg;

namespace {

DatasetSpec tiny_data() {
  DatasetSpec spec;
  spec.train_count = 6;
  spec.val_count = 2;
  spec.image_size = 24;
  spec.seed = 11;
  return spec;
}

TrainSettings tiny_settings() {
  TrainSettings s;
  s.d_model = 16;
  s.d = 8;
  s.optim.epochs = 2;
  s.optim.batch = 4;
  s.seed = 3;
  s.weights.warmup_epochs = 1;
  s.mvmc.refine.iterations = 1;  // keep the smoke test quick
  return s;
}

bool params_equal(const ToyNetParams& a, const ToyNetParams& b) {
  std::vector<Tensor> pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].size() != pb[i].size()) return false;
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      if (pa[i].data()[j] != pb[i].data()[j]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("Sgd: single step and momentum accumulation") {
  Tensor p = Tensor::from_data({2}, {1.0, -2.0});
  p.set_requires_grad(true);
  Sgd sgd({p}, 0.1, 0.5, 0.01);

  p.grad_buffer()[0] = 3.0;
  p.grad_buffer()[1] = -1.0;
  sgd.step();
  // v = g + wd*p; p -= lr*v
  const double v0 = 3.0 + 0.01 * 1.0, v1 = -1.0 + 0.01 * -2.0;
  CHECK(p.data()[0] == 1.0 - 0.1 * v0);
  CHECK(p.data()[1] == -2.0 - 0.1 * v1);

  const double p0 = p.data()[0], p1 = p.data()[1];
  sgd.zero_grad();
  p.grad_buffer()[0] = 1.0;
  p.grad_buffer()[1] = 1.0;
  sgd.step();
  CHECK(p.data()[0] == p0 - 0.1 * (0.5 * v0 + (1.0 + 0.01 * p0)));
  CHECK(p.data()[1] == p1 - 0.1 * (0.5 * v1 + (1.0 + 0.01 * p1)));

  CHECK_THROWS_AS(Sgd({p}, 0.0, 0.9, 0.0), ParamError);
  CHECK_THROWS_AS(Sgd({p}, 0.1, 1.0, 0.0), ParamError);
  CHECK_THROWS_AS(Sgd({p}, 0.1, 0.9, -1.0), ParamError);
  CHECK_THROWS_AS(Sgd({p}, 0.1, 0.9, 0.0, -0.5), ParamError);
}

TEST_CASE("Sgd: global-norm clipping rescales large gradients") {
  Tensor a = Tensor::from_data({2}, {0.0, 0.0});
  Tensor b = Tensor::from_data({1}, {0.0});
  a.set_requires_grad(true);
  b.set_requires_grad(true);

  // Gradient (3,0 | 4) has norm 5; a cap of 1 shrinks it by 5x.
  Sgd clipped({a, b}, 1.0, 0.0, 0.0, 1.0);
  a.grad_buffer()[0] = 3.0;
  b.grad_buffer()[0] = 4.0;
  clipped.step();
  CHECK(a.data()[0] == doctest::Approx(-3.0 / 5.0).epsilon(1e-15));
  CHECK(a.data()[1] == 0.0);
  CHECK(b.data()[0] == doctest::Approx(-4.0 / 5.0).epsilon(1e-15));

  // Below the cap nothing changes: same step as an unclipped optimizer.
  Tensor c = Tensor::from_data({1}, {1.0});
  c.set_requires_grad(true);
  Sgd loose({c}, 0.1, 0.0, 0.0, 10.0);
  c.grad_buffer()[0] = 2.0;
  loose.step();
  CHECK(c.data()[0] == 1.0 - 0.1 * 2.0);

  // Weight decay is applied to the clipped gradient, not the raw one.
  Tensor d = Tensor::from_data({1}, {2.0});
  d.set_requires_grad(true);
  Sgd decayed({d}, 1.0, 0.0, 0.5, 1.0);
  d.grad_buffer()[0] = 4.0;
  decayed.step();
  CHECK(d.data()[0] == doctest::Approx(2.0 - (1.0 + 0.5 * 2.0)).epsilon(1e-15));
}

TEST_CASE("train: smoke run produces finite logs and valid metrics") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings s = tiny_settings();
  // Fully permissive calibration: an untrained net is low-confidence
  // everywhere, and this test wants live pseudo-pixels after warmup.
  s.mvmc.gamma = 0.0;
  s.mvmc.tie_delta = 0.0;
  TrainResult result = train(ds, s);
  REQUIRE(result.log.size() == 2);
  for (const EpochStats& e : result.log) {
    CHECK(std::isfinite(e.loss_total));
    CHECK(e.loss_seg >= 0.0);
    CHECK(e.loss_cls >= 0.0);
    CHECK(e.loss_reg_mask >= 0.0);
    CHECK(e.loss_reg_fact >= 0.0);
    CHECK(e.val.miou >= 0.0);
    CHECK(e.val.miou <= 1.0);
    CHECK(e.val.mfdr >= 0.0);
    CHECK(e.val.mfdr <= 1.0);
  }
  // Warmup epoch: the segmentation term is excluded from the objective.
  CHECK(result.log[0].loss_seg == 0.0);
  CHECK(result.log[1].loss_seg > 0.0);
}

TEST_CASE("train: deterministic in dataset + settings") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings s = tiny_settings();
  TrainResult a = train(ds, s);
  TrainResult b = train(ds, s);
  CHECK(params_equal(a.net, b.net));
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].loss_total == b.log[i].loss_total);
    CHECK(a.log[i].val.miou == b.log[i].val.miou);
  }
}

TEST_CASE("train: a warmup epoch equals a seg-weight-zero epoch exactly") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings warm = tiny_settings();
  warm.optim.epochs = 1;
  warm.weights.warmup_epochs = 1;  // epoch 0 is warmup
  warm.weights.lambda_seg = 1.0;

  TrainSettings zeroed = tiny_settings();
  zeroed.optim.epochs = 1;
  zeroed.weights.warmup_epochs = 0;
  zeroed.weights.lambda_seg = 0.0;

  CHECK(params_equal(train(ds, warm).net, train(ds, zeroed).net));
}

TEST_CASE("train: unlabeled regime has a zero classification term") {
  DatasetSpec data = tiny_data();
  data.regime = Regime::kSemiPixelUnlabeled;
  data.pixel_fraction = 0.0;  // everything unlabeled
  Dataset ds = generate_dataset(data);
  TrainSettings s = tiny_settings();
  TrainResult result = train(ds, s);
  for (const EpochStats& e : result.log) {
    CHECK(e.loss_cls == 0.0);
  }
}

TEST_CASE("train: single view runs with both cross-view terms at zero") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings s = tiny_settings();
  s.views.scales = {1.0};
  TrainResult result = train(ds, s);
  for (const EpochStats& e : result.log) {
    CHECK(e.loss_reg_mask == 0.0);
    CHECK(e.loss_reg_fact == 0.0);
  }
}

TEST_CASE("train: divergence aborts through the hook") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings s = tiny_settings();
  // The normalized blocks shrug off huge weights, so the rate has to be
  // extreme enough that squaring an activation overflows a double.
  s.optim.lr = 1e250;
  s.optim.clip = 0.0;  // the cap exists to prevent exactly this
  s.optim.batch = 2;
  s.optim.epochs = 3;
  bool hook_ran = false;
  std::string where;
  CHECK_THROWS_AS(
      train(ds, s,
            [&](const ToyNetParams&, const std::string& msg) {
              hook_ran = true;
              where = msg;
            }),
      NumericError);
  CHECK(hook_ran);
  CHECK(where.find("epoch") != std::string::npos);
}

TEST_CASE("evaluate: guards and prediction shape") {
  Dataset ds = generate_dataset(tiny_data());
  Rng rng(5);
  ToyNetParams net = make_toynet(16, 8, 4, rng);
  CHECK_THROWS_AS(evaluate(net, {}, CvlrOptions{}, true), ContractError);
  std::vector<int> pred =
      predict_mask(net, ds.val[0].image, CvlrOptions{}, true);
  REQUIRE(pred.size() == 24 * 24);
  for (const int v : pred) {
    CHECK(v >= 0);
    CHECK(v < 4);
  }
  SegMetrics m = evaluate(net, ds.val, CvlrOptions{}, true);
  CHECK(m.miou >= 0.0);
  CHECK(m.miou <= 1.0);
}

TEST_CASE("train: config validation") {
  Dataset ds = generate_dataset(tiny_data());
  TrainSettings s = tiny_settings();
  s.optim.epochs = 0;
  CHECK_THROWS_AS(train(ds, s), ConfigError);
  s = tiny_settings();
  s.views.scales = {};
  CHECK_THROWS_AS(train(ds, s), ConfigError);
  s = tiny_settings();
  s.pixel_oversample = 0;
  CHECK_THROWS_AS(train(ds, s), ConfigError);
  Dataset empty;
  CHECK_THROWS_AS(train(empty, tiny_settings()), ConfigError);
}
