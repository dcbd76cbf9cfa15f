#pragma once

#include <vector>

#include "xvseg/tensor.hpp"
#include "xvseg/transforms.hpp"

namespace xvseg {

// Pooling constants for image-level class scores (externally sourced
// defaults; see README).
inline constexpr double kPoolEps = 1e-4;
inline constexpr int kFocalPower = 3;
inline constexpr double kFocalLambda = 0.01;

// Term weights for the composite objective. During the first warmup_epochs
// the segmentation term is silenced so pseudo-masks are not consumed before
// the classifier has shaped the masks at all.
struct LossWeights {
  double lambda_seg = 1.0;
  double lambda_cls = 1.0;
  double lambda_reg = 4.0;
  int warmup_epochs = 5;

  double seg_weight_at(int epoch) const {
    return epoch < warmup_epochs ? 0.0 : lambda_seg;
  }
};

// The four scalar terms, kept separate so logs can report each one.
struct LossBundle {
  Tensor seg;       // pixel cross-entropy
  Tensor cls;       // image-level multi-label BCE
  Tensor reg_mask;  // cross-view mask consistency
  Tensor reg_fact;  // cross-view code consistency
};

// lambda_seg*seg + lambda_cls*cls + lambda_reg*(reg_mask + reg_fact),
// composed exactly in that association. Differentiable through every term.
Tensor total_loss(const LossBundle& terms, const LossWeights& weights,
                  int epoch);

// Mean cross-entropy over non-ignored pixels, summed over views. targets[i]
// holds h*w class indices for view i; ignore_label pixels are excluded.
// A fully-ignored view contributes 0.
Tensor seg_loss(const std::vector<Tensor>& logits,
                const std::vector<std::vector<int>>& targets,
                int ignore_label = 255);

// Image-level class scores from one view's h*w*k logits: for every channel,
// normalized global weighted pooling of the logits under the softmax mask
// plus a focal penalty on the mask's mean occupancy. Returns [k].
Tensor class_scores(const Tensor& logits);

// One-versus-all BCE between sigmoid(class_scores) and the multi-hot
// image labels (length k-1, foreground channels 1..k-1; the background
// channel gets no image-level supervision). Summed over classes and views.
Tensor cls_loss(const std::vector<Tensor>& logits,
                const std::vector<int>& labels);

// Cross-view mask consistency: inverse-transform each view's logits into
// the source frame, then average over ordered distinct view pairs the
// per-pixel L1 distance summed over the selected channels (mean over
// pixels). Fewer than two views, or an empty channel set, gives 0.
Tensor mask_consistency_loss(const std::vector<Tensor>& logits,
                             const std::vector<GeomTransform>& geoms,
                             const std::vector<int>& channels, int src_h,
                             int src_w);

// Channel set for the consistency losses: foreground channels named by the
// multi-hot image labels when available, every channel otherwise.
std::vector<int> consistency_channels(const std::vector<int>& labels,
                                      bool has_labels, int k);

}  // namespace xvseg
