#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "testkit.hpp"
#include "xvseg/mvmc.hpp"
#include "xvseg/ops.hpp"

using namespace xvseg;
using testkit::close;
using testkit::fill_uniform;

namespace {

Tensor rand_t(const Shape& shape, std::uint64_t seed, double lo = -1.0,
              double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  fill_uniform(t, seed, lo, hi);
  return t;
}

Tensor rand_probs(int h, int w, int k, std::uint64_t seed) {
  return softmax(rand_t({h, w, k}, seed), 2);
}

CalibrateConfig permissive() {
  CalibrateConfig cfg;
  cfg.gamma = 0.0;
  cfg.tie_delta = 0.0;
  cfg.refine.iterations = 0;
  return cfg;
}

}  // namespace

TEST_CASE("refine: zero iterations is the identity") {
  Tensor probs = rand_probs(5, 6, 3, 1);
  Tensor img = rand_t({5, 6, 3}, 2, 0.0, 1.0);
  RefineConfig cfg;
  cfg.iterations = 0;
  Tensor out = refine(probs, img, cfg);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(out.data()[i] == probs.data()[i]);
  }
}

TEST_CASE("refine: constant image reduces to a clipped box filter") {
  Tensor probs = rand_probs(6, 6, 2, 3);
  Tensor img = Tensor::full({6, 6, 3}, 0.5);
  RefineConfig cfg;
  cfg.iterations = 1;
  cfg.kernel_size = 3;
  Tensor out = refine(probs, img, cfg);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) {
      for (int c = 0; c < 2; ++c) {
        double sum = 0.0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= 6 || xx < 0 || xx >= 6) continue;
            sum += probs.at(yy, xx, c);
            ++cnt;
          }
        }
        CHECK(close(out.at(y, x, c), sum / cnt, 1e-12));
      }
    }
  }
}

TEST_CASE("refine: denoises within regions without bleeding across a sharp edge") {
  // Left half black, right half white; probs noisy around per-region levels.
  const int n = 32;
  Tensor img = Tensor::zeros({n, n, 3});
  for (int y = 0; y < n; ++y)
    for (int x = n / 2; x < n; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0;

  Tensor noise = rand_t({n, n, 1}, 4, -0.15, 0.15);
  Tensor probs = Tensor::zeros({n, n, 2});
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double base = x < n / 2 ? 0.8 : 0.2;
      const double p = base + noise.at(y, x, 0);
      probs.at(y, x, 0) = p;
      probs.at(y, x, 1) = 1.0 - p;
    }
  }

  RefineConfig cfg;  // 3 iterations, 5x5, sigma 0.1
  Tensor out = refine(probs, img, cfg);

  auto region_stats = [&](const Tensor& t, bool left) {
    double mean = 0.0, var = 0.0, lo = 1e9, hi = -1e9;
    int cnt = 0;
    for (int y = 0; y < n; ++y) {
      for (int x = left ? 0 : n / 2; x < (left ? n / 2 : n); ++x) {
        const double v = t.at(y, x, 0);
        mean += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++cnt;
      }
    }
    mean /= cnt;
    for (int y = 0; y < n; ++y) {
      for (int x = left ? 0 : n / 2; x < (left ? n / 2 : n); ++x) {
        const double d = t.at(y, x, 0) - mean;
        var += d * d;
      }
    }
    return std::tuple<double, double, double, double>(mean, var / cnt, lo, hi);
  };

  for (bool left : {true, false}) {
    auto [mean0, var0, lo0, hi0] = region_stats(probs, left);
    auto [mean1, var1, lo1, hi1] = region_stats(out, left);
    CHECK(var1 < var0);  // strictly denoised
    // The black/white affinity is exp(-150): cross-edge mixing cannot push
    // values outside the region's original hull.
    CHECK(lo1 >= lo0 - 1e-9);
    CHECK(hi1 <= hi0 + 1e-9);
    CHECK(std::fabs(mean1 - mean0) < 0.02);
  }
}

TEST_CASE("refine: preserves distribution validity") {
  Tensor probs = rand_probs(8, 7, 4, 5);
  Tensor img = rand_t({8, 7, 3}, 6, 0.0, 1.0);
  RefineConfig cfg;
  cfg.iterations = 4;
  Tensor out = refine(probs, img, cfg);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 7; ++x) {
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) {
        CHECK(out.at(y, x, c) >= 0.0);
        sum += out.at(y, x, c);
      }
      CHECK(close(sum, 1.0, 1e-9));
    }
  }
}

TEST_CASE("refine: parameter guards") {
  Tensor probs = rand_probs(4, 4, 2, 7);
  Tensor img = rand_t({4, 4, 3}, 8, 0.0, 1.0);
  RefineConfig cfg;
  cfg.kernel_size = 4;
  CHECK_THROWS_AS(refine(probs, img, cfg), ParamError);
  cfg.kernel_size = 3;
  cfg.sigma_color = 0.0;
  CHECK_THROWS_AS(refine(probs, img, cfg), ParamError);
  cfg.sigma_color = 0.1;
  cfg.iterations = -1;
  CHECK_THROWS_AS(refine(probs, img, cfg), ParamError);
  CHECK_THROWS_AS(refine(probs, rand_t({5, 4, 3}, 9), RefineConfig{}),
                  ShapeError);
}

TEST_CASE("calibrate: single view, identity, no refine, gamma 0 collapses to argmax") {
  Tensor logits = rand_t({6, 5, 3}, 10);
  Tensor img = rand_t({6, 5, 3}, 11, 0.0, 1.0);
  PseudoMask pm = calibrate({logits}, {GeomTransform{}}, img, permissive());
  REQUIRE(pm.h == 6);
  REQUIRE(pm.w == 5);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 5; ++x) {
      int best = 0;
      for (int c = 1; c < 3; ++c) {
        if (logits.at(y, x, c) > logits.at(y, x, best)) best = c;
      }
      const std::size_t i = static_cast<std::size_t>(y) * 5 + x;
      CHECK(pm.labels[i] == best);
      CHECK(pm.ignore[i] == 0);
      CHECK(pm.labels[i] >= 0);
      CHECK(pm.labels[i] < 3);
    }
  }
}

TEST_CASE("calibrate: duplicated identical views change nothing") {
  Tensor logits = rand_t({5, 5, 4}, 12);
  Tensor img = rand_t({5, 5, 3}, 13, 0.0, 1.0);
  CalibrateConfig cfg = permissive();
  cfg.gamma = 0.3;
  cfg.tie_delta = 0.02;
  PseudoMask one = calibrate({logits}, {GeomTransform{}}, img, cfg);
  PseudoMask two =
      calibrate({logits, logits}, {GeomTransform{}, GeomTransform{}}, img, cfg);
  PseudoMask three = calibrate(
      {logits, logits, logits},
      {GeomTransform{}, GeomTransform{}, GeomTransform{}}, img, cfg);
  CHECK(one.labels == two.labels);
  CHECK(one.labels == three.labels);
  CHECK(one.ignore == two.ignore);
  CHECK(one.ignore == three.ignore);
  for (std::size_t i = 0; i < one.confidence.size(); ++i) {
    CHECK(close(one.confidence[i], two.confidence[i], 1e-12));
  }
}

TEST_CASE("calibrate: contradicting one-hot views ignore everything at gamma 0.9") {
  const int h = 4, w = 4;
  Tensor a = Tensor::zeros({h, w, 2});
  Tensor b = Tensor::zeros({h, w, 2});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      a.at(y, x, 0) = 1.0;  // class A everywhere
      b.at(y, x, 1) = 1.0;  // class B everywhere
    }
  }
  Tensor img = rand_t({h, w, 3}, 14, 0.0, 1.0);
  CalibrateConfig cfg;
  cfg.gamma = 0.9;
  cfg.refine.iterations = 0;
  PseudoMask pm = calibrate({a, b}, {GeomTransform{}, GeomTransform{}}, img, cfg);
  for (std::size_t i = 0; i < pm.ignore.size(); ++i) {
    CHECK(pm.ignore[i] == 1);
    CHECK(close(pm.confidence[i], 0.5, 1e-12));  // averaged logits tie
  }
}

TEST_CASE("calibrate: view order never changes the mask") {
  Tensor img = rand_t({8, 8, 3}, 15, 0.0, 1.0);
  std::vector<Tensor> logits = {rand_t({8, 8, 3}, 16), rand_t({4, 4, 3}, 17),
                                rand_t({8, 8, 3}, 18)};
  std::vector<GeomTransform> geoms = {GeomTransform{1.0, false},
                                      GeomTransform{0.5, true},
                                      GeomTransform{1.0, true}};
  CalibrateConfig cfg;
  cfg.gamma = 0.5;
  cfg.refine.iterations = 1;
  PseudoMask fwd = calibrate(logits, geoms, img, cfg);
  PseudoMask rev = calibrate({logits[2], logits[0], logits[1]},
                             {geoms[2], geoms[0], geoms[1]}, img, cfg);
  CHECK(fwd.labels == rev.labels);
  CHECK(fwd.ignore == rev.ignore);
  for (std::size_t i = 0; i < fwd.confidence.size(); ++i) {
    CHECK(std::fabs(fwd.confidence[i] - rev.confidence[i]) < 1e-12);
  }
}

TEST_CASE("calibrate: sits behind a stop-gradient") {
  Tensor logits = rand_t({4, 4, 2}, 19);
  logits.set_requires_grad(true);
  Tensor img = rand_t({4, 4, 3}, 20, 0.0, 1.0);
  Tape tape;
  Tape::Scope scope(tape);
  PseudoMask pm = calibrate({logits}, {GeomTransform{}}, img, permissive());
  CHECK(tape.size() == 0);  // nothing recorded across the boundary
  CHECK(pm.labels.size() == 16);
}

TEST_CASE("calibrate: parameter guards") {
  Tensor logits = rand_t({4, 4, 2}, 21);
  Tensor img = rand_t({4, 4, 3}, 22, 0.0, 1.0);
  CalibrateConfig cfg;
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(calibrate({logits}, {GeomTransform{}}, img, cfg), ParamError);
  cfg.gamma = -0.1;
  CHECK_THROWS_AS(calibrate({logits}, {GeomTransform{}}, img, cfg), ParamError);
  cfg.gamma = 0.5;
  CHECK_THROWS_AS(calibrate({}, {}, img, cfg), ShapeError);
  CHECK_THROWS_AS(calibrate({logits}, {}, img, cfg), ShapeError);
}

TEST_CASE("calibrate: tie band marks ambiguous pixels") {
  Tensor logits = Tensor::zeros({1, 2, 2});
  // Pixel 0: clear margin. Pixel 1: probabilities within 0.05 of each other.
  logits.at(0, 0, 0) = 5.0;
  logits.at(0, 1, 0) = 0.05;  // softmax -> ~0.512 vs 0.488
  Tensor img = Tensor::full({1, 2, 3}, 0.5);
  CalibrateConfig cfg;
  cfg.gamma = 0.0;
  cfg.tie_delta = 0.05;
  cfg.refine.iterations = 0;
  PseudoMask pm = calibrate({logits}, {GeomTransform{}}, img, cfg);
  CHECK(pm.ignore[0] == 0);
  CHECK(pm.ignore[1] == 1);
}

TEST_CASE("build_seg_targets: geometry and ignore propagation") {
  PseudoMask pm;
  pm.h = 2;
  pm.w = 3;
  pm.labels = {0, 1, 2, 1, 0, 2};
  pm.ignore = {0, 1, 0, 0, 0, 1};
  pm.confidence.assign(6, 1.0);

  auto targets = build_seg_targets(
      pm, {GeomTransform{1.0, false}, GeomTransform{1.0, true}});
  REQUIRE(targets.size() == 2);
  CHECK(targets[0] ==
        std::vector<int>({0, kIgnoreLabel, 2, 1, 0, kIgnoreLabel}));
  CHECK(targets[1] ==
        std::vector<int>({2, kIgnoreLabel, 0, kIgnoreLabel, 0, 1}));
}
