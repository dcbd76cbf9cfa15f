#pragma once

#include "xvseg/tensor.hpp"

namespace xvseg {

// All ops validate shapes, check outputs for NaN/Inf, and record a backward
// rule on the thread's active tape whenever any input requires a gradient.

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Tensor-scalar.
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

// Elementwise unary.
Tensor exp_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);     // log(1 + e^x), overflow-safe
Tensor reciprocal(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// Linear algebra (rank 2).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// out[i][j] = a[i][j] * s[j]; `s` is a rank-1 tensor of length a.dim(1).
Tensor scale_columns(const Tensor& a, const Tensor& s);
// out[i][j] = a[i][j] / s[j]. True division, not multiply-by-reciprocal:
// callers compare against oracles that divide, and the two differ in the
// last ulp.
Tensor div_columns(const Tensor& a, const Tensor& s);

// Shape manipulation.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor slice1d(const Tensor& a, int start, int len);
// Rank-3 concat along the channel (last) axis.
Tensor concat_channels(const Tensor& a, const Tensor& b);
// Rank-3 horizontal mirror (flips axis 1).
Tensor hflip(const Tensor& a);

// Softmax family along `axis`, with temperature for softmax.
Tensor softmax(const Tensor& a, int axis, double temperature = 1.0);
Tensor log_softmax(const Tensor& a, int axis);

// Reductions.
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);
Tensor max_axis(const Tensor& a, int axis);  // gradient routes to the argmax

// 2-D convolution on h*w*c_in with kernel kh*kw*c_in*c_out and bias c_out.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int pad);

// Bilinear resampling of h*w*c to out_h*out_w*c. Half-pixel centers
// (align-corners-false) with edge clamping; backward distributes gradients
// by the interpolation weights.
Tensor bilinear_resize(const Tensor& x, int out_h, int out_w);

}  // namespace xvseg
