#pragma once

#include <vector>

#include "xvseg/cvlr.hpp"
#include "xvseg/rng.hpp"
#include "xvseg/tensor.hpp"

namespace xvseg {

struct ConvBlock {
  Tensor kernel;  // kh*kw*cin*cout
  Tensor bias;    // cout
  Tensor gamma;   // cout, instance-norm scale
  Tensor beta;    // cout, instance-norm shift
};

// Siamese encoder-decoder. One parameter store serves every view, so weight
// sharing is identity, not synchronization. Encoder channel ladder
// 3 -> 16 -> 32 -> 64 -> d_model with two stride-2 stages (output stride 4);
// the decoder mixes the cross-view refined features with a shallow skip and
// predicts k channels, bilinearly upsampled to the view size. Each conv
// block normalizes per channel over its spatial extent (stateless, so train
// and eval behave identically); without it a from-scratch stack under the
// consistency penalty drifts into constant logits, the collapse mode that
// pixel supervision normally guards against.
struct ToyNetParams {
  ConvBlock enc1;  // stride 1, 3 -> 16
  ConvBlock enc2;  // stride 2, 16 -> 32
  ConvBlock enc3;  // stride 2, 32 -> 64
  ConvBlock enc4;  // stride 1, 64 -> d_model
  CvlrParams cvlr;
  ConvBlock dec1;  // stride 1, d_model + 16 -> 32
  ConvBlock dec2;  // stride 1, 32 -> 32
  Tensor head_kernel;  // 1x1, 32 -> k
  Tensor head_bias;
  int d_model = 64;
  int k = 4;

  std::vector<Tensor> parameters() const;
};

ToyNetParams make_toynet(int d_model, int d, int k, Rng& rng);

struct NetOutput {
  std::vector<Tensor> logits;      // per view, view resolution
  std::vector<Tensor> aux_logits;  // per view, view resolution (empty
                                   // when the cross-view module is off)
  std::vector<Tensor> codes;       // per view, k*(hf*wf)
  std::vector<Shape> feat_shapes;  // {hf, wf} per view
};

// Runs every view through the shared encoder, couples them through the
// cross-view module (unless use_cvlr is false, the plain-baseline ablation),
// and decodes each view to per-pixel class logits.
NetOutput net_forward(const ToyNetParams& net,
                      const std::vector<Tensor>& images,
                      const CvlrOptions& opts, bool use_cvlr = true);

}  // namespace xvseg
