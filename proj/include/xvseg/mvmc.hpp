#pragma once

#include <cstdint>
#include <vector>

#include "xvseg/tensor.hpp"
#include "xvseg/transforms.hpp"

namespace xvseg {

// Label value marking pixels excluded from supervision and evaluation.
inline constexpr int kIgnoreLabel = 255;

struct RefineConfig {
  int iterations = 3;
  int kernel_size = 5;      // odd
  double sigma_color = 0.1; // image values in [0,1]
};

// Hard per-pixel pseudo-labels with an ignore map. Detached from any tape.
struct PseudoMask {
  int h = 0, w = 0;
  std::vector<int> labels;          // class index, valid where !ignore
  std::vector<std::uint8_t> ignore; // 1 = excluded from supervision
  std::vector<double> confidence;   // max posterior per pixel

  // labels with kIgnoreLabel substituted at ignored pixels.
  std::vector<int> labels_with_ignore() const {
    std::vector<int> out = labels;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (ignore[i]) out[i] = kIgnoreLabel;
    }
    return out;
  }
};

struct CalibrateConfig {
  double gamma = 0.9;      // confidence threshold, in [0,1]
  double tie_delta = 0.05; // multi-category band below the max posterior
  RefineConfig refine;
};

// Edge-aware smoothing: each iteration replaces every pixel's distribution
// with the affinity-weighted average over its window, affinities
// exp(-||rgb_i - rgb_j||^2 / (2 sigma^2)) normalized per window. Operates on
// raw values (the pseudo-label path carries no gradients).
Tensor refine(const Tensor& probs, const Tensor& image,
              const RefineConfig& cfg);

// Full calibration: inverse-transform per-view logits to the source frame,
// average, softmax, refine, threshold. Pixels are ignored when the max
// posterior is below gamma or a second class lies within tie_delta of it.
// The result never participates in gradients (inputs are detached on entry).
PseudoMask calibrate(const std::vector<Tensor>& logits,
                     const std::vector<GeomTransform>& geoms,
                     const Tensor& image, const CalibrateConfig& cfg);

// Re-projects the pseudo-mask into each view's geometry (nearest neighbor;
// the ignore sentinel rides along). Entries are label maps with
// kIgnoreLabel at excluded pixels.
std::vector<std::vector<int>> build_seg_targets(
    const PseudoMask& pseudo, const std::vector<GeomTransform>& geoms);

}  // namespace xvseg
