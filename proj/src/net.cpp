#include "xvseg/net.hpp"

#include <cmath>

#include "xvseg/ops.hpp"

namespace xvseg {

namespace {

constexpr double kNormEps = 1e-5;

ConvBlock make_block(int kh, int kw, int cin, int cout, Rng& rng) {
  ConvBlock block;
  block.kernel = Tensor::zeros({kh, kw, cin, cout});
  const double std = std::sqrt(2.0 / (kh * kw * cin));
  for (std::size_t i = 0; i < block.kernel.size(); ++i) {
    block.kernel.data()[i] = std * rng.normal();
  }
  block.bias = Tensor::zeros({cout});
  block.gamma = Tensor::zeros({cout});
  for (std::size_t i = 0; i < block.gamma.size(); ++i) {
    block.gamma.data()[i] = 1.0;
  }
  block.beta = Tensor::zeros({cout});
  block.kernel.set_requires_grad(true);
  block.bias.set_requires_grad(true);
  block.gamma.set_requires_grad(true);
  block.beta.set_requires_grad(true);
  return block;
}

// Per-channel normalization over the spatial extent, then affine. Stateless:
// no running statistics, so training and inference share one code path.
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const int h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
  const int n = h * w;
  Tensor ones = Tensor::zeros({n, 1});
  for (int i = 0; i < n; ++i) ones.data()[i] = 1.0;

  Tensor flat = reshape(x, {n, c});
  Tensor mu = mean_axis(flat, 0);
  Tensor centered = sub(flat, matmul(ones, reshape(mu, {1, c})));
  Tensor var = mean_axis(mul(centered, centered), 0);
  Tensor normed = div_columns(centered, sqrt_op(add_scalar(var, kNormEps)));
  Tensor out = add(scale_columns(normed, gamma),
                   matmul(ones, reshape(beta, {1, c})));
  return reshape(out, {h, w, c});
}

Tensor run_block(const ConvBlock& block, const Tensor& x, int stride) {
  Tensor y = conv2d(x, block.kernel, block.bias, stride, 1);
  return relu(instance_norm(y, block.gamma, block.beta));
}

}  // namespace

std::vector<Tensor> ToyNetParams::parameters() const {
  std::vector<Tensor> out = cvlr.parameters();
  for (const ConvBlock* block : {&enc1, &enc2, &enc3, &enc4, &dec1, &dec2}) {
    out.push_back(block->kernel);
    out.push_back(block->bias);
    out.push_back(block->gamma);
    out.push_back(block->beta);
  }
  out.push_back(head_kernel);
  out.push_back(head_bias);
  return out;
}

ToyNetParams make_toynet(int d_model, int d, int k, Rng& rng) {
  if (d_model < 1 || k < 2) {
    throw ConfigError("make_toynet: need d_model >= 1 and k >= 2");
  }
  ToyNetParams net;
  net.d_model = d_model;
  net.k = k;
  net.enc1 = make_block(3, 3, 3, 16, rng);
  net.enc2 = make_block(3, 3, 16, 32, rng);
  net.enc3 = make_block(3, 3, 32, 64, rng);
  net.enc4 = make_block(3, 3, 64, d_model, rng);
  net.cvlr = make_cvlr_params(d_model, d, k, rng);
  net.dec1 = make_block(3, 3, d_model + 16, 32, rng);
  net.dec2 = make_block(3, 3, 32, 32, rng);
  net.head_kernel = Tensor::zeros({1, 1, 32, k});
  const double std = std::sqrt(2.0 / 32.0);
  for (std::size_t i = 0; i < net.head_kernel.size(); ++i) {
    net.head_kernel.data()[i] = std * rng.normal();
  }
  net.head_bias = Tensor::zeros({k});
  net.head_kernel.set_requires_grad(true);
  net.head_bias.set_requires_grad(true);
  return net;
}

NetOutput net_forward(const ToyNetParams& net,
                      const std::vector<Tensor>& images,
                      const CvlrOptions& opts, bool use_cvlr) {
  if (images.empty()) throw ShapeError("net_forward: no views");
  const std::size_t m = images.size();

  std::vector<Tensor> shallow(m), deep(m);
  for (std::size_t v = 0; v < m; ++v) {
    if (images[v].shape().size() != 3 || images[v].shape()[2] != 3) {
      throw ShapeError("net_forward: views must be h*w*3");
    }
    shallow[v] = run_block(net.enc1, images[v], 1);
    Tensor x = run_block(net.enc2, shallow[v], 2);
    x = run_block(net.enc3, x, 2);
    deep[v] = run_block(net.enc4, x, 1);
  }

  NetOutput out;
  std::vector<Tensor> refined(m);
  if (use_cvlr) {
    CvlrOutput cv = cvlr_forward(deep, net.cvlr, opts);
    refined = cv.refined;
    out.codes = cv.codes;
    out.aux_logits.resize(m);
    for (std::size_t v = 0; v < m; ++v) {
      out.aux_logits[v] = bilinear_resize(
          cv.aux_logits[v], images[v].shape()[0], images[v].shape()[1]);
    }
  } else {
    refined = deep;
  }

  out.logits.resize(m);
  out.feat_shapes.resize(m);
  for (std::size_t v = 0; v < m; ++v) {
    const int hf = refined[v].shape()[0];
    const int wf = refined[v].shape()[1];
    out.feat_shapes[v] = {hf, wf};
    Tensor skip = bilinear_resize(shallow[v], hf, wf);
    Tensor x = run_block(net.dec1, concat_channels(refined[v], skip), 1);
    x = run_block(net.dec2, x, 1);
    x = conv2d(x, net.head_kernel, net.head_bias, 1, 0);
    out.logits[v] =
        bilinear_resize(x, images[v].shape()[0], images[v].shape()[1]);
  }
  return out;
}

}  // namespace xvseg
