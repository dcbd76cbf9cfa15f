#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "testkit.hpp"
#include "xvseg/ops.hpp"
#include "xvseg/tensor.hpp"

using namespace xvseg;
using testkit::close;
using testkit::fd_check;
using testkit::fill_uniform;

namespace {

Tensor rand_t(const Shape& shape, std::uint64_t seed, double lo = -1.0,
              double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  fill_uniform(t, seed, lo, hi);
  return t;
}

void check_fd(const testkit::FdReport& r) {
  CHECK_MESSAGE(r.ok, r.detail);
  CHECK(r.checked > 0);
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor z = Tensor::zeros({2, 3});
  CHECK(z.size() == 6);
  CHECK(z.dim(0) == 2);
  CHECK(z.at(1, 2) == 0.0);

  Tensor f = Tensor::full({4}, 2.5);
  for (int i = 0; i < 4; ++i) CHECK(f.at(i) == 2.5);

  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(rand_t({2, 2}, 1).item(), ShapeError);
  CHECK(Tensor::scalar(3.0).item() == 3.0);

  // Copies alias the same storage; detached_copy does not.
  Tensor a = Tensor::zeros({2});
  Tensor alias = a;
  alias.at(0) = 7.0;
  CHECK(a.at(0) == 7.0);
  Tensor deep = a.detached_copy();
  deep.at(0) = 9.0;
  CHECK(a.at(0) == 7.0);
}

TEST_CASE("matmul values") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor prod = matmul(eye, a);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(prod.at(i, j) == a.at(i, j));

  Tensor ones = Tensor::from_data({2, 1}, {1, 1});
  Tensor rowsum = matmul(a, ones);
  CHECK(rowsum.at(0, 0) == 3.0);
  CHECK(rowsum.at(1, 0) == 7.0);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros({3, 2})), ShapeError);
  CHECK_THROWS_AS(matmul(a, Tensor::zeros({4})), ShapeError);
}

TEST_CASE("elementwise values and shape guards") {
  Tensor a = Tensor::from_data({3}, {1.0, -2.0, 0.5});
  Tensor b = Tensor::from_data({3}, {4.0, 2.0, -1.0});
  CHECK(add(a, b).at(1) == 0.0);
  CHECK(sub(a, b).at(0) == -3.0);
  CHECK(mul(a, b).at(2) == -0.5);
  CHECK(div(a, b).at(0) == 0.25);
  CHECK(add_scalar(a, 1.5).at(1) == -0.5);
  CHECK(mul_scalar(a, -2.0).at(0) == -2.0);
  CHECK_THROWS_AS(add(a, Tensor::zeros({4})), ShapeError);

  CHECK(close(exp_op(a).at(0), std::exp(1.0)));
  CHECK(close(log_op(Tensor::from_data({1}, {std::exp(2.0)})).item(), 2.0));
  CHECK(close(sqrt_op(Tensor::from_data({1}, {9.0})).item(), 3.0));
  CHECK(abs_op(a).at(1) == 2.0);
  CHECK(relu(a).at(1) == 0.0);
  CHECK(relu(a).at(0) == 1.0);
  CHECK(close(softplus(Tensor::scalar(0.0)).item(), std::log(2.0)));
  // softplus stays finite and ~linear for large positive inputs
  CHECK(close(softplus(Tensor::scalar(800.0)).item(), 800.0));
  CHECK(close(reciprocal(Tensor::scalar(4.0)).item(), 0.25));
  Tensor c = clamp_min(a, 0.6);
  CHECK(c.at(0) == 1.0);
  CHECK(c.at(1) == 0.6);
  CHECK(c.at(2) == 0.6);
}

TEST_CASE("shape ops values") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = reshape(a, {3, 2});
  CHECK(r.at(2, 1) == 6.0);
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);

  Tensor v = Tensor::from_data({5}, {10, 11, 12, 13, 14});
  Tensor s = slice1d(v, 1, 3);
  CHECK(s.dim(0) == 3);
  CHECK(s.at(0) == 11.0);
  CHECK(s.at(2) == 13.0);
  CHECK_THROWS_AS(slice1d(v, 3, 4), ShapeError);

  Tensor t = transpose(a);
  CHECK(t.dim(0) == 3);
  CHECK(t.at(2, 0) == 3.0);
  CHECK(t.at(0, 1) == 4.0);

  Tensor sc = scale_columns(a, Tensor::from_data({3}, {1.0, 10.0, 100.0}));
  CHECK(sc.at(0, 1) == 20.0);
  CHECK(sc.at(1, 2) == 600.0);
  CHECK_THROWS_AS(scale_columns(a, Tensor::zeros({2})), ShapeError);

  Tensor img = Tensor::from_data({1, 3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor flipped = hflip(img);
  CHECK(flipped.at(0, 0, 0) == 5.0);
  CHECK(flipped.at(0, 2, 1) == 2.0);
  Tensor twice = hflip(flipped);
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(twice.data()[i] == img.data()[i]);

  Tensor other = Tensor::from_data({1, 3, 1}, {7, 8, 9});
  Tensor cat = concat_channels(img, other);
  CHECK(cat.dim(2) == 3);
  CHECK(cat.at(0, 1, 1) == 4.0);
  CHECK(cat.at(0, 1, 2) == 8.0);
  CHECK_THROWS_AS(concat_channels(img, Tensor::zeros({2, 3, 1})), ShapeError);
}

TEST_CASE("softmax analytic values") {
  Tensor x = Tensor::from_data({2}, {0.0, std::log(3.0)});
  Tensor y = softmax(x, 0);
  CHECK(close(y.at(0), 0.25));
  CHECK(close(y.at(1), 0.75));

  Tensor ls = log_softmax(x, 0);
  CHECK(close(ls.at(0), std::log(0.25)));
  CHECK(close(ls.at(1), std::log(0.75)));

  // Temperature sharpens towards one-hot as tau -> 0+.
  Tensor sharp = softmax(x, 0, 0.01);
  CHECK(sharp.at(1) > 0.999);
  CHECK(sharp.at(0) < 0.001);
  CHECK_THROWS_AS(softmax(x, 0, 0.0), ParamError);
  CHECK_THROWS_AS(softmax(x, 0, -1.0), ParamError);
  CHECK_THROWS_AS(softmax(x, 2), ShapeError);

  // Axis semantics on a matrix: axis 0 normalizes each column.
  Tensor m = rand_t({3, 4}, 11);
  Tensor cols = softmax(m, 0);
  for (int j = 0; j < 4; ++j) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += cols.at(i, j);
    CHECK(close(s, 1.0));
  }
  Tensor rows = softmax(m, 1);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += rows.at(i, j);
    CHECK(close(s, 1.0));
  }

  // Shift invariance via the max trick: huge logits stay finite.
  Tensor big = Tensor::from_data({2}, {1000.0, 1000.0 + std::log(3.0)});
  Tensor yb = softmax(big, 0);
  CHECK(close(yb.at(0), 0.25));
  CHECK(close(yb.at(1), 0.75));
}

TEST_CASE("reductions") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(sum_all(a).item() == 21.0);
  CHECK(close(mean_all(a).item(), 3.5));
  Tensor s0 = sum_axis(a, 0);
  CHECK(s0.dim(0) == 3);
  CHECK(s0.at(0) == 5.0);
  CHECK(s0.at(2) == 9.0);
  Tensor m1 = mean_axis(a, 1);
  CHECK(m1.dim(0) == 2);
  CHECK(close(m1.at(0), 2.0));
  CHECK(close(m1.at(1), 5.0));
  Tensor mx = max_axis(a, 1);
  CHECK(mx.at(0) == 3.0);
  CHECK(mx.at(1) == 6.0);
  Tensor mx0 = max_axis(a, 0);
  CHECK(mx0.at(1) == 5.0);
}

TEST_CASE("conv2d values") {
  // 1x1 kernel acts as a per-pixel channel mix.
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor k = Tensor::from_data({1, 1, 2, 1}, {10, 1});
  Tensor b = Tensor::from_data({1}, {0.5});
  Tensor y = conv2d(x, k, b, 1, 0);
  CHECK(y.dim(0) == 1);
  CHECK(y.dim(1) == 2);
  CHECK(y.dim(2) == 1);
  CHECK(y.at(0, 0, 0) == 12.5);
  CHECK(y.at(0, 1, 0) == 34.5);

  // 3x3 box filter with zero padding on a 3x3 impulse.
  Tensor imp = Tensor::zeros({3, 3, 1});
  imp.at(1, 1, 0) = 1.0;
  Tensor box = Tensor::full({3, 3, 1, 1}, 1.0);
  Tensor zb = Tensor::zeros({1});
  Tensor smoothed = conv2d(imp, box, zb, 1, 1);
  for (int yy = 0; yy < 3; ++yy)
    for (int xx = 0; xx < 3; ++xx) CHECK(smoothed.at(yy, xx, 0) == 1.0);

  // Stride-2 output geometry.
  Tensor big = rand_t({5, 6, 2}, 3);
  Tensor k2 = rand_t({3, 3, 2, 4}, 4);
  Tensor b2 = rand_t({4}, 5);
  Tensor ys = conv2d(big, k2, b2, 2, 1);
  CHECK(ys.dim(0) == 3);
  CHECK(ys.dim(1) == 3);
  CHECK(ys.dim(2) == 4);

  CHECK_THROWS_AS(conv2d(big, rand_t({3, 3, 3, 4}, 6), b2, 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(big, k2, Tensor::zeros({5}), 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(big, k2, b2, 0, 1), ParamError);
  CHECK_THROWS_AS(conv2d(big, k2, b2, 1, -1), ParamError);
}

TEST_CASE("bilinear resize values") {
  // Identity when sizes match.
  Tensor x = rand_t({3, 4, 2}, 7);
  Tensor same = bilinear_resize(x, 3, 4);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(close(same.data()[i], x.data()[i]));

  // 1x2 -> 1x4 with half-pixel centers and edge clamp:
  // [a, b] -> [a, 0.75a+0.25b, 0.25a+0.75b, b].
  Tensor ab = Tensor::from_data({1, 2, 1}, {1.0, 5.0});
  Tensor up = bilinear_resize(ab, 1, 4);
  CHECK(close(up.at(0, 0, 0), 1.0));
  CHECK(close(up.at(0, 1, 0), 2.0));
  CHECK(close(up.at(0, 2, 0), 4.0));
  CHECK(close(up.at(0, 3, 0), 5.0));

  // 2x downsample of a 2x2 averages all four samples at the tile center.
  Tensor four = Tensor::from_data({2, 2, 1}, {1.0, 2.0, 3.0, 4.0});
  Tensor down = bilinear_resize(four, 1, 1);
  CHECK(close(down.at(0, 0, 0), 2.5));

  CHECK_THROWS_AS(bilinear_resize(four, 0, 2), ShapeError);
}

TEST_CASE("finite difference: elementwise and scalar ops") {
  Tensor a = rand_t({2, 3}, 21);
  Tensor b = rand_t({2, 3}, 22, 0.5, 2.0);  // positive: safe divisor
  check_fd(fd_check("add", {a, b}, [&] { return sum_all(add(a, b)); }));
  check_fd(fd_check("sub", {a, b}, [&] { return sum_all(sub(a, b)); }));
  check_fd(fd_check("mul", {a, b}, [&] { return sum_all(mul(a, b)); }));
  check_fd(fd_check("div", {a, b}, [&] { return sum_all(div(a, b)); }));
  check_fd(fd_check("add_scalar", {a}, [&] { return sum_all(add_scalar(a, 1.7)); }));
  check_fd(fd_check("mul_scalar", {a}, [&] { return sum_all(mul_scalar(a, -0.6)); }));
  check_fd(fd_check("exp", {a}, [&] { return sum_all(exp_op(a)); }));
  // Domain-restricted ops run on inputs bounded away from the singularity.
  Tensor pos = rand_t({6}, 23, 0.5, 3.0);
  check_fd(fd_check("log", {pos}, [&] { return sum_all(log_op(pos)); }));
  check_fd(fd_check("sqrt", {pos}, [&] { return sum_all(sqrt_op(pos)); }));
  check_fd(fd_check("reciprocal", {pos}, [&] { return sum_all(reciprocal(pos)); }));
  Tensor off0 = rand_t({6}, 24, 0.2, 1.0);  // away from the |x| kink
  check_fd(fd_check("abs+", {off0}, [&] { return sum_all(abs_op(off0)); }));
  Tensor neg = rand_t({6}, 25, -1.0, -0.2);
  check_fd(fd_check("abs-", {neg}, [&] { return sum_all(abs_op(neg)); }));
  check_fd(fd_check("relu+", {off0}, [&] { return sum_all(relu(off0)); }));
  check_fd(fd_check("relu-", {neg}, [&] { return sum_all(relu(neg)); }));
  check_fd(fd_check("softplus", {a}, [&] { return sum_all(softplus(a)); }));
  // clamp_min with the floor outside (0.2, 1.0) so no element sits on the kink
  check_fd(fd_check("clamp_min.pass", {off0},
                    [&] { return sum_all(clamp_min(off0, 0.1)); }));
  check_fd(fd_check("clamp_min.floor", {off0},
                    [&] { return sum_all(clamp_min(off0, 1.5)); }));
}

TEST_CASE("finite difference: linear algebra and shape ops") {
  Tensor a = rand_t({3, 4}, 31);
  Tensor b = rand_t({4, 2}, 32);
  check_fd(fd_check("matmul", {a, b}, [&] {
    return sum_all(mul(matmul(a, b), matmul(a, b)));
  }));
  check_fd(fd_check("transpose", {a}, [&] {
    return sum_all(mul(transpose(a), transpose(a)));
  }));
  Tensor s = rand_t({4}, 33);
  check_fd(fd_check("scale_columns", {a, s}, [&] {
    return sum_all(mul(scale_columns(a, s), scale_columns(a, s)));
  }));
  check_fd(fd_check("reshape", {a}, [&] {
    Tensor r = reshape(a, {2, 6});
    return sum_all(mul(r, r));
  }));
  Tensor v = rand_t({7}, 34);
  check_fd(fd_check("slice1d", {v}, [&] {
    Tensor sl = slice1d(v, 2, 4);
    return sum_all(mul(sl, sl));
  }));
  Tensor i1 = rand_t({2, 3, 2}, 35);
  Tensor i2 = rand_t({2, 3, 1}, 36);
  check_fd(fd_check("concat_channels", {i1, i2}, [&] {
    Tensor c = concat_channels(i1, i2);
    return sum_all(mul(c, c));
  }));
  check_fd(fd_check("hflip", {i1}, [&] {
    Tensor f = hflip(i1);
    return sum_all(mul(f, mul(f, f)));
  }));
}

TEST_CASE("finite difference: softmax and reductions") {
  Tensor a = rand_t({3, 4}, 41);
  Tensor w = rand_t({3, 4}, 42);  // mixing weights to exercise off-diagonal terms
  check_fd(fd_check("softmax.ax0", {a}, [&] {
    return sum_all(mul(softmax(a, 0), w));
  }));
  check_fd(fd_check("softmax.ax1", {a}, [&] {
    return sum_all(mul(softmax(a, 1), w));
  }));
  check_fd(fd_check("softmax.tau", {a}, [&] {
    return sum_all(mul(softmax(a, 0, 0.7), w));
  }));
  check_fd(fd_check("log_softmax", {a}, [&] {
    return sum_all(mul(log_softmax(a, 1), w));
  }));
  check_fd(fd_check("sum_all", {a}, [&] { return sum_all(a); }));
  check_fd(fd_check("mean_all", {a}, [&] { return mean_all(mul(a, a)); }));
  check_fd(fd_check("sum_axis", {a}, [&] {
    Tensor r = sum_axis(a, 0);
    return sum_all(mul(r, r));
  }));
  check_fd(fd_check("mean_axis", {a}, [&] {
    Tensor r = mean_axis(a, 1);
    return sum_all(mul(r, r));
  }));
  // Distinct entries keep the argmax stable under the probe step.
  Tensor dist = Tensor::from_data({2, 3}, {0.1, 0.9, 0.4, 0.8, 0.2, 0.6});
  check_fd(fd_check("max_axis", {dist}, [&] {
    Tensor r = max_axis(dist, 1);
    return sum_all(mul(r, r));
  }));
}

TEST_CASE("finite difference: conv2d and resize") {
  Tensor x = rand_t({4, 5, 2}, 51);
  Tensor k = rand_t({3, 3, 2, 3}, 52, -0.5, 0.5);
  Tensor b = rand_t({3}, 53);
  check_fd(fd_check("conv2d.s1p1", {x, k, b}, [&] {
    Tensor y = conv2d(x, k, b, 1, 1);
    return sum_all(mul(y, y));
  }));
  check_fd(fd_check("conv2d.s2p0", {x, k, b}, [&] {
    Tensor y = conv2d(x, k, b, 2, 0);
    return sum_all(mul(y, y));
  }));
  Tensor k1 = rand_t({1, 1, 2, 4}, 54);
  Tensor b1 = rand_t({4}, 55);
  check_fd(fd_check("conv2d.1x1", {x, k1, b1}, [&] {
    Tensor y = conv2d(x, k1, b1, 1, 0);
    return sum_all(mul(y, y));
  }));
  check_fd(fd_check("bilinear.up", {x}, [&] {
    Tensor y = bilinear_resize(x, 7, 9);
    return sum_all(mul(y, y));
  }));
  check_fd(fd_check("bilinear.down", {x}, [&] {
    Tensor y = bilinear_resize(x, 2, 3);
    return sum_all(mul(y, y));
  }));
}

TEST_CASE("chain rule through composed ops") {
  // f(x) = sum((2x) * x) => df/dx = 4x, checked both ways.
  Tensor x = rand_t({5}, 61);
  Tensor xcopy = x.detached_copy();
  x.set_requires_grad(true);
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = sum_all(mul(add(x, x), x));
    tape.backward(loss);
  }
  REQUIRE(x.has_grad());
  for (int i = 0; i < 5; ++i) CHECK(close(x.grad()[i], 4.0 * xcopy.at(i)));

  check_fd(fd_check("chain3", {x}, [&] {
    return sum_all(mul(add(x, x), x));
  }));
}

TEST_CASE("gradient accumulation across branches") {
  Tensor x = Tensor::from_data({2}, {3.0, -1.0});
  x.set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  // loss = sum(x) + sum(x*x): dx = 1 + 2x
  Tensor loss = add(sum_all(x), sum_all(mul(x, x)));
  tape.backward(loss);
  CHECK(close(x.grad()[0], 7.0));
  CHECK(close(x.grad()[1], -1.0));
}

TEST_CASE("tape contract") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    loss = sum_all(mul(x, x));
  }
  CHECK(tape.size() == 2);
  tape.backward(loss);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), ContractError);

  // Non-scalar loss rejected.
  Tape tape2;
  Tape::Scope scope2(tape2);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(tape2.backward(y), ShapeError);
}

TEST_CASE("ops outside any tape do not record") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = mul(x, x);  // no active tape
  CHECK_FALSE(y.requires_grad());
  CHECK(Tape::current() == nullptr);

  // Inputs not requiring grad record nothing either.
  Tensor plain = Tensor::from_data({2}, {1.0, 2.0});
  Tape tape;
  Tape::Scope scope(tape);
  Tensor z = mul(plain, plain);
  CHECK(tape.size() == 0);
  CHECK_FALSE(z.requires_grad());
}

TEST_CASE("scope nesting restores the previous tape") {
  Tensor x = Tensor::from_data({1}, {2.0});
  x.set_requires_grad(true);
  Tape outer;
  Tape::Scope so(outer);
  Tensor a = mul(x, x);
  {
    Tape inner;
    Tape::Scope si(inner);
    Tensor b = mul(x, x);
    CHECK(inner.size() == 1);
  }
  CHECK(Tape::current() == &outer);
  Tensor c = mul(a, a);
  CHECK(outer.size() == 2);
}

TEST_CASE("non-finite values fail loudly") {
  Tensor neg = Tensor::from_data({1}, {-1.0});
  CHECK_THROWS_AS(log_op(neg), NumericError);       // NaN
  CHECK_THROWS_AS(sqrt_op(neg), NumericError);      // NaN
  Tensor zero = Tensor::from_data({1}, {0.0});
  CHECK_THROWS_AS(reciprocal(zero), NumericError);  // Inf
  Tensor one = Tensor::from_data({1}, {1.0});
  CHECK_THROWS_AS(div(one, zero), NumericError);    // Inf
  Tensor huge = Tensor::from_data({1}, {1e308});
  CHECK_THROWS_AS(mul(huge, huge), NumericError);   // overflow to Inf

  // Backward rejects Inf gradients: d/dx sqrt(x) at x=0 is unbounded.
  Tensor x = Tensor::from_data({1}, {0.0});
  x.set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor loss = sum_all(sqrt_op(x));
  CHECK_THROWS_AS(tape.backward(loss), NumericError);
}

TEST_CASE("detached copies break the graph") {
  Tensor x = Tensor::from_data({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  Tensor mid = mul(x, x);
  Tensor cut = mid.detached_copy();
  CHECK_FALSE(cut.requires_grad());
  Tensor loss = sum_all(cut);
  tape.backward(loss);
  CHECK_FALSE(x.has_grad());
}
