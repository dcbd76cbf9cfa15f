#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xvseg/rng.hpp"
#include "xvseg/tensor.hpp"

namespace xvseg {

// What supervision the training split exposes. Every sample always carries
// full ground truth for evaluation; the regime only controls which labels
// the trainer may read.
enum class Regime {
  kWsss,               // image-level labels on every training sample
  kSemiPixelImage,     // a pixel-labeled slice, image labels on the rest
  kSemiPixelUnlabeled  // a pixel-labeled slice, nothing on the rest
};

Regime parse_regime(const std::string& name);  // ConfigError on junk
std::string regime_name(Regime regime);

// Synthetic scenes: colored geometric shapes on a textured background.
// Classes: 0 background, 1 circle, 2 square, 3 triangle.
inline constexpr int kNumClasses = 4;

struct DatasetSpec {
  Regime regime = Regime::kWsss;
  int train_count = 32;
  int val_count = 16;
  int image_size = 64;
  int min_shapes = 1;
  int max_shapes = 3;
  double noise = 0.05;           // per-pixel texture amplitude
  double pixel_fraction = 0.25;  // labeled-pixel slice of train (semi regimes)
  std::uint64_t seed = 1;
};

struct Sample {
  Tensor image;                   // s*s*3, values in [0,1]
  std::vector<int> gt_mask;       // s*s class indices
  std::vector<int> image_labels;  // multi-hot over the 3 foreground classes
  bool labeled_pixels = false;    // trainer may read gt_mask
  bool labeled_image = false;     // trainer may read image_labels
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  int k = kNumClasses;
};

// Deterministic in spec alone: the same spec yields bit-identical datasets.
Dataset generate_dataset(const DatasetSpec& spec);

// One rendered scene (used by generate_dataset and by tests directly).
Sample render_sample(int image_size, int min_shapes, int max_shapes,
                     double noise, Rng& rng);

}  // namespace xvseg
