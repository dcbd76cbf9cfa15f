#pragma once

#include <vector>

#include "xvseg/factorization.hpp"
#include "xvseg/rng.hpp"
#include "xvseg/tensor.hpp"
#include "xvseg/transforms.hpp"

namespace xvseg {

// Cross-view low-rank block: project features down to d, factorize all views
// against one shared dictionary, reconstruct, project back up, add the input
// (skip connection). An auxiliary two-conv head predicts k-channel logits Z
// from the pre-projector features; softmax(Z) over channels initializes the
// codes, and Z is also returned for auxiliary supervision.
struct CvlrParams {
  Tensor in_projector;   // d_model*d
  Tensor out_projector;  // d*d_model, zero-initialized => identity at start
  Tensor aux_k1;         // 3*3*d_model*d_model
  Tensor aux_b1;         // d_model
  Tensor aux_k2;         // 1*1*d_model*k
  Tensor aux_b2;         // k
  int d_model = 0;
  int d = 0;
  int k = 0;

  std::vector<Tensor> parameters() const {
    return {in_projector, out_projector, aux_k1, aux_b1, aux_k2, aux_b2};
  }
};

CvlrParams make_cvlr_params(int d_model, int d, int k, Rng& rng);

struct CvlrOptions {
  double tau = 1.0;
  int T = 1;
  bool shared_dictionary = true;  // false = per-view factorization (ablation)
};

struct CvlrOutput {
  std::vector<Tensor> refined;     // h*w*d_model, input + back-projection
  std::vector<Tensor> aux_logits;  // h*w*k (feature resolution)
  std::vector<Tensor> codes;       // k*(h*w), final C per view
};

// features: one h_v*w_v*d_model tensor per view.
CvlrOutput cvlr_forward(const std::vector<Tensor>& features,
                        const CvlrParams& params, const CvlrOptions& opts);

// Cross-view code consistency: each view's code matrix is reshaped to its
// spatial map, inverse-transformed to the shared feature grid (src_h*src_w),
// and compared pairwise with per-pixel channel-sum L1, averaged over pixels
// and over view pairs (s is symmetric, so the ordered and unordered pair
// means coincide). Single view -> scalar zero. Differentiable.
Tensor code_consistency_loss(const std::vector<Tensor>& codes,
                             const std::vector<Shape>& spatial_shapes,
                             const std::vector<GeomTransform>& geoms,
                             int src_h, int src_w);

}  // namespace xvseg
