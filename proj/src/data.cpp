#include "xvseg/data.hpp"

#include <algorithm>
#include <cmath>

namespace xvseg {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

struct Rgb {
  double r, g, b;
};

// One strongly separable base color per foreground class; the per-shape
// jitter keeps samples from being literal constants.
Rgb base_color(int cls) {
  switch (cls) {
    case 1: return {0.85, 0.25, 0.20};  // circle: red
    case 2: return {0.20, 0.75, 0.30};  // square: green
    default: return {0.25, 0.35, 0.85};  // triangle: blue
  }
}

bool inside_shape(int cls, int y, int x, int cy, int cx, int r) {
  const int dy = y - cy, dx = x - cx;
  switch (cls) {
    case 1:
      return dy * dy + dx * dx <= r * r;
    case 2:
      return std::abs(dy) <= r && std::abs(dx) <= r;
    default: {
      // Upward triangle: apex at (cy - r), base at (cy + r).
      if (dy < -r || dy > r) return false;
      const double half_width = (dy + r) * 0.5;
      return std::abs(dx) <= half_width;
    }
  }
}

}  // namespace

Regime parse_regime(const std::string& name) {
  if (name == "wsss") return Regime::kWsss;
  if (name == "semi_pixel_image") return Regime::kSemiPixelImage;
  if (name == "semi_pixel_unlabeled") return Regime::kSemiPixelUnlabeled;
  throw ConfigError("data.regime: unknown regime '" + name +
                    "' (expected wsss | semi_pixel_image | "
                    "semi_pixel_unlabeled)");
}

std::string regime_name(Regime regime) {
  switch (regime) {
    case Regime::kWsss: return "wsss";
    case Regime::kSemiPixelImage: return "semi_pixel_image";
    default: return "semi_pixel_unlabeled";
  }
}

Sample render_sample(int image_size, int min_shapes, int max_shapes,
                     double noise, Rng& rng) {
  const int s = image_size;
  Sample out;
  out.image = Tensor::zeros({s, s, 3});
  out.gt_mask.assign(static_cast<std::size_t>(s) * s, 0);

  // Textured background: a gray base with a vertical gradient and noise.
  const double base = 0.45 + 0.15 * rng.uniform();
  const double tilt = 0.12 * (rng.uniform() - 0.5);
  for (int y = 0; y < s; ++y) {
    const double row = base + tilt * (2.0 * y / (s - 1) - 1.0);
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.image.at(y, x, c) =
            clamp01(row + noise * (2.0 * rng.uniform() - 1.0));
      }
    }
  }

  // Distractor clutter, drawn first so real shapes occlude it: small blobs
  // whose color sits partway between the background gray and a class color.
  // They stay background in the ground truth; photometric jitter shifts
  // their apparent color enough to move them across the class/background
  // decision boundary from view to view.
  const int clutter = 1 + static_cast<int>(rng.uniform() * 3.0);
  for (int i = 0; i < clutter; ++i) {
    const int kind = 1 + static_cast<int>(rng.uniform() * 3.0);
    const int r_lo = std::max(2, s / 16);
    const int r_hi = std::max(r_lo + 1, s / 10);
    const int r = r_lo + static_cast<int>(rng.uniform() * (r_hi - r_lo + 1));
    const int cy = r + static_cast<int>(rng.uniform() * (s - 2 * r));
    const int cx = r + static_cast<int>(rng.uniform() * (s - 2 * r));
    const Rgb tint = base_color(std::min(kind, 3));
    const double w = 0.45 + 0.25 * rng.uniform();
    const Rgb mixed = {base * (1.0 - w) + tint.r * w,
                       base * (1.0 - w) + tint.g * w,
                       base * (1.0 - w) + tint.b * w};
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        if (!inside_shape(kind, y, x, cy, cx, r)) continue;
        out.image.at(y, x, 0) =
            clamp01(mixed.r + noise * (2.0 * rng.uniform() - 1.0));
        out.image.at(y, x, 1) =
            clamp01(mixed.g + noise * (2.0 * rng.uniform() - 1.0));
        out.image.at(y, x, 2) =
            clamp01(mixed.b + noise * (2.0 * rng.uniform() - 1.0));
      }
    }
  }

  const int span = max_shapes - min_shapes + 1;
  int count = min_shapes + static_cast<int>(rng.uniform() * span);
  count = std::min(count, max_shapes);
  for (int i = 0; i < count; ++i) {
    const int cls = 1 + static_cast<int>(rng.uniform() * 3.0);
    const int r_lo = std::max(2, s / 6);
    const int r_hi = std::max(r_lo + 1, s / 4);
    const int r = r_lo + static_cast<int>(rng.uniform() * (r_hi - r_lo + 1));
    const int cy = r + static_cast<int>(rng.uniform() * (s - 2 * r));
    const int cx = r + static_cast<int>(rng.uniform() * (s - 2 * r));
    Rgb color = base_color(std::min(cls, 3));
    color.r = clamp01(color.r + 0.16 * (rng.uniform() - 0.5));
    color.g = clamp01(color.g + 0.16 * (rng.uniform() - 0.5));
    color.b = clamp01(color.b + 0.16 * (rng.uniform() - 0.5));
    for (int y = 0; y < s; ++y) {
      for (int x = 0; x < s; ++x) {
        if (!inside_shape(cls, y, x, cy, cx, r)) continue;
        out.gt_mask[static_cast<std::size_t>(y) * s + x] = cls;
        out.image.at(y, x, 0) =
            clamp01(color.r + noise * (2.0 * rng.uniform() - 1.0));
        out.image.at(y, x, 1) =
            clamp01(color.g + noise * (2.0 * rng.uniform() - 1.0));
        out.image.at(y, x, 2) =
            clamp01(color.b + noise * (2.0 * rng.uniform() - 1.0));
      }
    }
  }

  // Image labels are derived from the rendered mask, not the draw list:
  // a shape fully covered by a later one is absent from both.
  out.image_labels.assign(kNumClasses - 1, 0);
  for (const int v : out.gt_mask) {
    if (v > 0) out.image_labels[v - 1] = 1;
  }
  return out;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.train_count < 0 || spec.val_count < 0) {
    throw ConfigError("data: negative sample count");
  }
  if (spec.image_size < 16) {
    throw ConfigError("data.image_size: must be >= 16");
  }
  if (spec.min_shapes < 0 || spec.max_shapes < spec.min_shapes) {
    throw ConfigError("data: need 0 <= min_shapes <= max_shapes");
  }
  if (spec.noise < 0.0) throw ConfigError("data.noise: must be >= 0");
  if (spec.pixel_fraction < 0.0 || spec.pixel_fraction > 1.0) {
    throw ConfigError("data.pixel_fraction: must be in [0,1]");
  }

  Rng root(spec.seed);
  Dataset out;
  const int pixel_labeled = static_cast<int>(
      std::lround(spec.pixel_fraction * spec.train_count));
  for (int i = 0; i < spec.train_count; ++i) {
    Rng stream = root.fork(static_cast<std::uint64_t>(i));
    Sample sample = render_sample(spec.image_size, spec.min_shapes,
                                  spec.max_shapes, spec.noise, stream);
    switch (spec.regime) {
      case Regime::kWsss:
        sample.labeled_image = true;
        break;
      case Regime::kSemiPixelImage:
        sample.labeled_pixels = i < pixel_labeled;
        sample.labeled_image = true;
        break;
      case Regime::kSemiPixelUnlabeled:
        sample.labeled_pixels = i < pixel_labeled;
        break;
    }
    out.train.push_back(std::move(sample));
  }
  for (int i = 0; i < spec.val_count; ++i) {
    Rng stream = root.fork(0x80000000ULL + static_cast<std::uint64_t>(i));
    Sample sample = render_sample(spec.image_size, spec.min_shapes,
                                  spec.max_shapes, spec.noise, stream);
    sample.labeled_pixels = true;
    sample.labeled_image = true;
    out.val.push_back(std::move(sample));
  }
  return out;
}

}  // namespace xvseg
