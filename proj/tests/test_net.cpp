#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <vector>

#include "testkit.hpp"
#include "xvseg/net.hpp"
#include "xvseg/ops.hpp"

using namespace xvseg;
using testkit::fill_uniform;

namespace {

Tensor rand_image(int h, int w, std::uint64_t seed) {
  Tensor t = Tensor::zeros({h, w, 3});
  fill_uniform(t, seed, 0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("net_forward: shapes, stride, and per-view outputs") {
  Rng rng(1);
  ToyNetParams net = make_toynet(16, 8, 4, rng);
  std::vector<Tensor> views = {rand_image(16, 16, 2), rand_image(8, 8, 3)};
  NetOutput out = net_forward(net, views, CvlrOptions{});

  REQUIRE(out.logits.size() == 2);
  CHECK(out.logits[0].shape() == Shape({16, 16, 4}));
  CHECK(out.logits[1].shape() == Shape({8, 8, 4}));
  CHECK(out.feat_shapes[0] == Shape({4, 4}));
  CHECK(out.feat_shapes[1] == Shape({2, 2}));
  REQUIRE(out.aux_logits.size() == 2);
  CHECK(out.aux_logits[0].shape() == Shape({16, 16, 4}));
  REQUIRE(out.codes.size() == 2);
  CHECK(out.codes[0].shape() == Shape({4, 16}));
  CHECK(out.codes[1].shape() == Shape({4, 4}));

  // Odd sizes still land on the ceil(h/4) grid.
  NetOutput odd = net_forward(net, {rand_image(20, 12, 4)}, CvlrOptions{});
  CHECK(odd.feat_shapes[0] == Shape({5, 3}));
  CHECK(odd.logits[0].shape() == Shape({20, 12, 4}));
}

TEST_CASE("net_forward: plain baseline skips the cross-view module") {
  Rng rng(5);
  ToyNetParams net = make_toynet(16, 8, 4, rng);
  NetOutput out =
      net_forward(net, {rand_image(12, 12, 6)}, CvlrOptions{}, false);
  CHECK(out.aux_logits.empty());
  CHECK(out.codes.empty());
  CHECK(out.logits[0].shape() == Shape({12, 12, 4}));
}

TEST_CASE("net: one parameter store serves every view") {
  Rng rng(7);
  ToyNetParams net = make_toynet(16, 8, 4, rng);
  std::vector<Tensor> params = net.parameters();
  auto contains = [&](const Tensor& t) {
    return std::any_of(params.begin(), params.end(), [&](const Tensor& p) {
      return p.data() == t.data();  // same storage, not same values
    });
  };
  CHECK(contains(net.enc1.kernel));
  CHECK(contains(net.enc4.bias));
  CHECK(contains(net.dec2.kernel));
  CHECK(contains(net.dec2.gamma));
  CHECK(contains(net.head_kernel));
  CHECK(contains(net.cvlr.in_projector));
  // 6 blocks x (kernel, bias, gamma, beta) + the 1x1 head pair.
  CHECK(params.size() == net.cvlr.parameters().size() + 26);

  // All trainable, no duplicates.
  for (const Tensor& p : params) CHECK(p.requires_grad());
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = i + 1; j < params.size(); ++j) {
      CHECK(params[i].data() != params[j].data());
    }
  }
}

TEST_CASE("make_toynet: deterministic in the rng and validated") {
  Rng a(9), b(9);
  ToyNetParams na = make_toynet(16, 8, 4, a);
  ToyNetParams nb = make_toynet(16, 8, 4, b);
  std::vector<Tensor> pa = na.parameters(), pb = nb.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].size() == pb[i].size());
    for (std::size_t j = 0; j < pa[i].size(); ++j) {
      CHECK(pa[i].data()[j] == pb[i].data()[j]);
    }
  }
  Rng c(1);
  CHECK_THROWS_AS(make_toynet(0, 8, 4, c), ConfigError);
  CHECK_THROWS_AS(make_toynet(16, 8, 1, c), ConfigError);
}

TEST_CASE("net_forward: invalid views rejected") {
  Rng rng(11);
  ToyNetParams net = make_toynet(16, 8, 4, rng);
  CHECK_THROWS_AS(net_forward(net, {}, CvlrOptions{}), ShapeError);
  Tensor gray = Tensor::zeros({8, 8, 1});
  CHECK_THROWS_AS(net_forward(net, {gray}, CvlrOptions{}), ShapeError);
}

TEST_CASE("net_forward: head gradients check out against finite differences") {
  Rng rng(13);
  ToyNetParams net = make_toynet(8, 4, 3, rng);
  Tensor image = rand_image(8, 8, 14);
  auto rep = testkit::fd_check(
      "net_head", {net.head_kernel, net.head_bias}, [&] {
        NetOutput out = net_forward(net, {image}, CvlrOptions{});
        return mean_all(mul(out.logits[0], out.logits[0]));
      });
  INFO(rep.detail);
  CHECK(rep.ok);
}

TEST_CASE("net_forward: gradients through the normalized blocks") {
  Rng rng(17);
  ToyNetParams net = make_toynet(8, 4, 3, rng);
  Tensor image = rand_image(8, 8, 15);
  auto rep = testkit::fd_check(
      "net_blocks",
      {net.dec2.gamma, net.dec2.beta, net.enc1.kernel, net.enc1.bias}, [&] {
        NetOutput out = net_forward(net, {image}, CvlrOptions{});
        return mean_all(mul(out.logits[0], out.logits[0]));
      });
  INFO(rep.detail);
  CHECK(rep.ok);
}
