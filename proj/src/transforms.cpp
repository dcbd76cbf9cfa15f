#include "xvseg/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "xvseg/ops.hpp"

namespace xvseg {

int scaled_size(int extent, double scale) {
  if (!(scale > 0.0)) {
    throw ParamError("scaled_size: scale must be positive, got " +
                     std::to_string(scale));
  }
  const long long s = std::llround(extent * scale);
  return static_cast<int>(std::max(1LL, s));
}

Tensor apply_geom(const GeomTransform& geom, const Tensor& image) {
  if (image.ndim() != 3) {
    throw ShapeError("apply_geom: expected h*w*c input, got " +
                     shape_str(image.shape()));
  }
  const int oh = scaled_size(image.dim(0), geom.scale);
  const int ow = scaled_size(image.dim(1), geom.scale);
  Tensor out = image;
  if (oh != image.dim(0) || ow != image.dim(1)) {
    out = bilinear_resize(out, oh, ow);
  }
  if (geom.hflip) out = hflip(out);
  return out;
}

Tensor invert_geom(const GeomTransform& geom, const Tensor& logits,
                   int target_h, int target_w) {
  if (logits.ndim() != 3) {
    throw ShapeError("invert_geom: expected h*w*c input, got " +
                     shape_str(logits.shape()));
  }
  const int vh = scaled_size(target_h, geom.scale);
  const int vw = scaled_size(target_w, geom.scale);
  if (logits.dim(0) != vh || logits.dim(1) != vw) {
    throw ContractError(
        "invert_geom: logits " + shape_str(logits.shape()) +
        " were not produced by this transform from a " +
        std::to_string(target_h) + "x" + std::to_string(target_w) +
        " source (expected " + std::to_string(vh) + "x" + std::to_string(vw) +
        ")");
  }
  Tensor out = logits;
  if (geom.hflip) out = hflip(out);  // undo the mirror first (it was applied last)
  if (vh != target_h || vw != target_w) {
    out = bilinear_resize(out, target_h, target_w);
  }
  return out;
}

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

void clamp01(Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = std::min(1.0, std::max(0.0, t.data()[i]));
  }
}

void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  *v = mx;
  *s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    *h = 0.0;
  } else if (mx == r) {
    double seg = (g - b) / d;
    if (seg < 0.0) seg += 6.0;
    *h = seg / 6.0;
  } else if (mx == g) {
    *h = ((b - r) / d + 2.0) / 6.0;
  } else {
    *h = ((r - g) / d + 4.0) / 6.0;
  }
}

void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = std::min(5, static_cast<int>(hh));
  const double f = hh - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: *r = v; *g = t; *b = p; break;
    case 1: *r = q; *g = v; *b = p; break;
    case 2: *r = p; *g = v; *b = t; break;
    case 3: *r = p; *g = q; *b = v; break;
    case 4: *r = t; *g = p; *b = v; break;
    default: *r = v; *g = p; *b = q; break;
  }
}

}  // namespace

Tensor apply_color(const ColorDistortion& dist, const Tensor& image,
                   std::uint64_t seed) {
  if (image.ndim() != 3 || image.dim(2) != 3) {
    throw ShapeError("apply_color: expected h*w*3 image, got " +
                     shape_str(image.shape()));
  }
  // Zero-strength stages are skipped entirely so the all-zero spec is the
  // exact identity (no RNG draw, no FP round-trip).
  Rng rng(seed);
  Tensor out = image.detached_copy();
  const int n_px = image.dim(0) * image.dim(1);
  double* p = out.data();

  if (dist.brightness > 0.0) {
    const double f = rng.uniform(1.0 - dist.brightness, 1.0 + dist.brightness);
    for (int i = 0; i < n_px * 3; ++i) p[i] *= f;
    clamp01(out);
  }
  if (dist.contrast > 0.0) {
    const double f = rng.uniform(1.0 - dist.contrast, 1.0 + dist.contrast);
    double mean = 0.0;
    for (int i = 0; i < n_px; ++i) {
      mean += kLumaR * p[i * 3] + kLumaG * p[i * 3 + 1] + kLumaB * p[i * 3 + 2];
    }
    mean /= n_px;
    for (int i = 0; i < n_px * 3; ++i) p[i] = (p[i] - mean) * f + mean;
    clamp01(out);
  }
  if (dist.saturation > 0.0) {
    const double f = rng.uniform(1.0 - dist.saturation, 1.0 + dist.saturation);
    for (int i = 0; i < n_px; ++i) {
      const double gray =
          kLumaR * p[i * 3] + kLumaG * p[i * 3 + 1] + kLumaB * p[i * 3 + 2];
      for (int c = 0; c < 3; ++c) {
        p[i * 3 + c] = (p[i * 3 + c] - gray) * f + gray;
      }
    }
    clamp01(out);
  }
  if (dist.hue > 0.0) {
    const double shift = rng.uniform(-dist.hue, dist.hue);
    for (int i = 0; i < n_px; ++i) {
      double h, s, v;
      rgb_to_hsv(p[i * 3], p[i * 3 + 1], p[i * 3 + 2], &h, &s, &v);
      hsv_to_rgb(h + shift, s, v, &p[i * 3], &p[i * 3 + 1], &p[i * 3 + 2]);
    }
    clamp01(out);
  }
  return out;
}

Tensor apply_view(const GeomTransform& geom, const ColorDistortion& dist,
                  const Tensor& image, std::uint64_t color_seed) {
  return apply_color(dist, apply_geom(geom, image), color_seed);
}

Tensor crop(const Tensor& image, int top, int left, int size) {
  if (image.ndim() != 3) {
    throw ShapeError("crop: expected h*w*c input, got " +
                     shape_str(image.shape()));
  }
  if (top < 0 || left < 0 || size < 1 || top + size > image.dim(0) ||
      left + size > image.dim(1)) {
    throw ShapeError("crop: window " + std::to_string(size) + "@(" +
                     std::to_string(top) + "," + std::to_string(left) +
                     ") outside " + shape_str(image.shape()));
  }
  const int c = image.dim(2);
  Tensor out = Tensor::zeros({size, size, c});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        out.at(y, x, ch) = image.at(top + y, left + x, ch);
      }
    }
  }
  return out;
}

std::vector<int> project_labels(const GeomTransform& geom,
                                const std::vector<int>& labels, int h, int w) {
  if (labels.size() != static_cast<std::size_t>(h) * w) {
    throw ShapeError("project_labels: label count " +
                     std::to_string(labels.size()) + " != " +
                     std::to_string(h) + "*" + std::to_string(w));
  }
  const int vh = scaled_size(h, geom.scale);
  const int vw = scaled_size(w, geom.scale);
  std::vector<int> out(static_cast<std::size_t>(vh) * vw);
  const double sy = static_cast<double>(h) / vh;
  const double sx = static_cast<double>(w) / vw;
  for (int y = 0; y < vh; ++y) {
    int src_y = static_cast<int>(std::lround((y + 0.5) * sy - 0.5));
    src_y = std::min(h - 1, std::max(0, src_y));
    for (int x = 0; x < vw; ++x) {
      // apply_geom resizes then mirrors, so the mirror is undone first.
      const int pre_flip_x = geom.hflip ? vw - 1 - x : x;
      int src_x = static_cast<int>(std::lround((pre_flip_x + 0.5) * sx - 0.5));
      src_x = std::min(w - 1, std::max(0, src_x));
      out[static_cast<std::size_t>(y) * vw + x] =
          labels[static_cast<std::size_t>(src_y) * w + src_x];
    }
  }
  return out;
}

}  // namespace xvseg
