#pragma once

#include <cstdint>
#include <vector>

#include "xvseg/rng.hpp"
#include "xvseg/tensor.hpp"

namespace xvseg {

// Invertible per-view geometry: resize by `scale`, then mirror horizontally
// if `hflip`. The inverse undoes the flip and resizes back.
struct GeomTransform {
  double scale = 1.0;
  bool hflip = false;
};

// Output spatial size of `geom` applied to an h*w input.
int scaled_size(int extent, double scale);

// Photometric jitter strengths. All zero = identity. Factors are drawn
// uniformly per component from the seeded stream, torchvision-style:
// brightness/contrast/saturation factor in [1-s, 1+s], hue shift in
// [-s, +s] (fraction of a full hue turn).
struct ColorDistortion {
  double brightness = 0.0;  // [0, 0.3]
  double contrast = 0.0;    // [0, 0.3]
  double saturation = 0.0;  // [0, 0.3]
  double hue = 0.0;         // [0, 0.1]
};

// One augmented view of a source image.
struct View {
  Tensor image;  // h*w*3 after geometry + color, values in [0,1]
  GeomTransform geom;
  std::uint64_t color_seed = 0;
};

// A source image with its augmented views and whatever labels the regime
// exposes. Label conventions: labels[c] over foreground classes (multi-hot);
// pixel_mask entries are class indices, or -1 where unknown.
struct ViewBatch {
  Tensor source;  // crop the views were generated from
  std::vector<View> views;
  std::vector<int> image_labels;          // multi-hot over k-1 foreground classes
  std::vector<int> pixel_mask;            // h*w class indices, may be empty
  bool has_image_labels = false;
  bool has_pixel_mask = false;
};

// Geometry only (differentiable; used on logits as well as images).
Tensor apply_geom(const GeomTransform& geom, const Tensor& image);

// Undo `geom`: logits of a view back into the source frame at
// target_h*target_w. Throws ContractError if the logits' size does not match
// what `geom` produces from the target size. Differentiable.
Tensor invert_geom(const GeomTransform& geom, const Tensor& logits,
                   int target_h, int target_w);

// Seeded photometric distortion: brightness -> contrast -> saturation -> hue,
// output clamped to [0,1]. Never applied to masks or logits.
Tensor apply_color(const ColorDistortion& dist, const Tensor& image,
                   std::uint64_t seed);

// Full view construction: geometry then photometric distortion.
Tensor apply_view(const GeomTransform& geom, const ColorDistortion& dist,
                  const Tensor& image, std::uint64_t color_seed);

// Square crop of side `size` at offset (top, left); bounds-checked.
Tensor crop(const Tensor& image, int top, int left, int size);

// Nearest-neighbor re-projection of integer labels into a view's frame
// (forward direction, same geometry as apply_geom). `labels` is h*w
// row-major; values are copied, so the ignore sentinel survives.
std::vector<int> project_labels(const GeomTransform& geom,
                                const std::vector<int>& labels, int h, int w);

}  // namespace xvseg
