#include "xvseg/cvlr.hpp"

#include <cmath>
#include <string>

#include "xvseg/ops.hpp"

namespace xvseg {

CvlrParams make_cvlr_params(int d_model, int d, int k, Rng& rng) {
  if (d_model < 1 || d < 1 || k < 1) {
    throw ParamError("make_cvlr_params: dimensions must be positive");
  }
  CvlrParams p;
  p.d_model = d_model;
  p.d = d;
  p.k = k;
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(d_model));
  p.in_projector = Tensor::zeros({d_model, d}, true);
  for (std::size_t i = 0; i < p.in_projector.size(); ++i) {
    p.in_projector.data()[i] = rng.normal(0.0, proj_std);
  }
  // Zero back-projection makes the block start as the identity (skip only).
  p.out_projector = Tensor::zeros({d, d_model}, true);

  const double k1_std = std::sqrt(2.0 / (9.0 * d_model));
  p.aux_k1 = Tensor::zeros({3, 3, d_model, d_model}, true);
  for (std::size_t i = 0; i < p.aux_k1.size(); ++i) {
    p.aux_k1.data()[i] = rng.normal(0.0, k1_std);
  }
  p.aux_b1 = Tensor::zeros({d_model}, true);
  const double k2_std = std::sqrt(2.0 / d_model);
  p.aux_k2 = Tensor::zeros({1, 1, d_model, k}, true);
  for (std::size_t i = 0; i < p.aux_k2.size(); ++i) {
    p.aux_k2.data()[i] = rng.normal(0.0, k2_std);
  }
  p.aux_b2 = Tensor::zeros({k}, true);
  return p;
}

CvlrOutput cvlr_forward(const std::vector<Tensor>& features,
                        const CvlrParams& params, const CvlrOptions& opts) {
  if (features.empty()) throw ShapeError("cvlr_forward: no views");
  for (const Tensor& f : features) {
    if (f.ndim() != 3 || f.dim(2) != params.d_model) {
      throw ShapeError("cvlr_forward: expected h*w*" +
                       std::to_string(params.d_model) + " features, got " +
                       shape_str(f.shape()));
    }
  }
  const int m = static_cast<int>(features.size());

  CvlrOutput out;
  std::vector<Tensor> X;        // d*n per view
  std::vector<Tensor> init_C;   // k*n per view
  X.reserve(m);
  init_C.reserve(m);
  for (const Tensor& f : features) {
    const int h = f.dim(0), w = f.dim(1);
    const int n = h * w;
    // Aux head on pre-projector features; softmax over channels seeds C.
    Tensor z = conv2d(relu(conv2d(f, params.aux_k1, params.aux_b1, 1, 1)),
                      params.aux_k2, params.aux_b2, 1, 0);
    out.aux_logits.push_back(z);
    init_C.push_back(softmax(transpose(reshape(z, {n, params.k})), 0));

    Tensor flat = reshape(f, {n, params.d_model});
    X.push_back(transpose(matmul(flat, params.in_projector)));
  }

  std::vector<Tensor> recon(m);
  if (opts.shared_dictionary) {
    FactorResult r = factorize(X, init_C, opts.tau, opts.T);
    out.codes = r.codes;
    for (int v = 0; v < m; ++v) recon[v] = r.recon[v];
  } else {
    // Ablation: every view factorizes alone, severing cross-view coupling.
    for (int v = 0; v < m; ++v) {
      FactorResult r = factorize({X[v]}, {init_C[v]}, opts.tau, opts.T);
      out.codes.push_back(r.codes[0]);
      recon[v] = r.recon[0];
    }
  }

  for (int v = 0; v < m; ++v) {
    const int h = features[v].dim(0), w = features[v].dim(1);
    const int n = h * w;
    Tensor back = matmul(transpose(recon[v]), params.out_projector);
    out.refined.push_back(
        add(features[v], reshape(back, {h, w, params.d_model})));
  }
  return out;
}

Tensor code_consistency_loss(const std::vector<Tensor>& codes,
                             const std::vector<Shape>& spatial_shapes,
                             const std::vector<GeomTransform>& geoms,
                             int src_h, int src_w) {
  const std::size_t m = codes.size();
  if (spatial_shapes.size() != m || geoms.size() != m) {
    throw ShapeError("code_consistency_loss: per-view list sizes disagree");
  }
  if (m < 2) return Tensor::scalar(0.0);

  std::vector<Tensor> aligned;
  aligned.reserve(m);
  for (std::size_t v = 0; v < m; ++v) {
    if (spatial_shapes[v].size() != 2) {
      throw ShapeError("code_consistency_loss: spatial shape must be h,w");
    }
    const int h = spatial_shapes[v][0], w = spatial_shapes[v][1];
    const Tensor& c = codes[v];
    if (c.ndim() != 2 || c.dim(1) != h * w) {
      throw ShapeError("code_consistency_loss: code matrix " +
                       shape_str(c.shape()) + " does not cover " +
                       std::to_string(h) + "x" + std::to_string(w));
    }
    const int k = c.dim(0);
    Tensor map = reshape(transpose(c), {h, w, k});
    aligned.push_back(invert_geom(geoms[v], map, src_h, src_w));
  }

  Tensor acc = Tensor::scalar(0.0);
  int pairs = 0;
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = u + 1; v < m; ++v) {
      // per-pixel channel-sum L1, averaged over pixels
      Tensor diff = abs_op(sub(aligned[u], aligned[v]));
      acc = add(acc, mean_all(sum_axis(diff, 2)));
      ++pairs;
    }
  }
  return mul_scalar(acc, 1.0 / pairs);
}

}  // namespace xvseg
