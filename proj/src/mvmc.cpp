#include "xvseg/mvmc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xvseg/ops.hpp"

namespace xvseg {

Tensor refine(const Tensor& probs, const Tensor& image,
              const RefineConfig& cfg) {
  if (probs.ndim() != 3 || image.ndim() != 3 || image.dim(2) != 3) {
    throw ShapeError("refine: expected h*w*k probs and h*w*3 image");
  }
  if (probs.dim(0) != image.dim(0) || probs.dim(1) != image.dim(1)) {
    throw ShapeError("refine: probs " + shape_str(probs.shape()) +
                     " vs image " + shape_str(image.shape()));
  }
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0) {
    throw ParamError("refine: kernel_size must be odd, got " +
                     std::to_string(cfg.kernel_size));
  }
  if (cfg.iterations < 0) throw ParamError("refine: negative iterations");
  if (!(cfg.sigma_color > 0.0)) {
    throw ParamError("refine: sigma_color must be positive");
  }
  if (cfg.iterations == 0) return probs.detached_copy();

  const int h = probs.dim(0), w = probs.dim(1), k = probs.dim(2);
  const int r = cfg.kernel_size / 2;
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma_color * cfg.sigma_color);

  Tensor cur = probs.detached_copy();
  Tensor next = Tensor::zeros({h, w, k});
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double wsum = 0.0;
        for (int c = 0; c < k; ++c) next.at(y, x, c) = 0.0;
        const double r0 = image.at(y, x, 0);
        const double g0 = image.at(y, x, 1);
        const double b0 = image.at(y, x, 2);
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const double dr = image.at(yy, xx, 0) - r0;
            const double dg = image.at(yy, xx, 1) - g0;
            const double db = image.at(yy, xx, 2) - b0;
            const double aff =
                std::exp(-(dr * dr + dg * dg + db * db) * inv_two_sigma_sq);
            wsum += aff;
            for (int c = 0; c < k; ++c) {
              next.at(y, x, c) += aff * cur.at(yy, xx, c);
            }
          }
        }
        for (int c = 0; c < k; ++c) next.at(y, x, c) /= wsum;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

PseudoMask calibrate(const std::vector<Tensor>& logits,
                     const std::vector<GeomTransform>& geoms,
                     const Tensor& image, const CalibrateConfig& cfg) {
  if (logits.empty() || logits.size() != geoms.size()) {
    throw ShapeError("calibrate: need matching, nonempty logits/geoms lists");
  }
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) {
    throw ParamError("calibrate: gamma must be in [0,1], got " +
                     std::to_string(cfg.gamma));
  }
  if (!(cfg.tie_delta >= 0.0)) {
    throw ParamError("calibrate: tie_delta must be >= 0");
  }
  if (image.ndim() != 3 || image.dim(2) != 3) {
    throw ShapeError("calibrate: expected h*w*3 image, got " +
                     shape_str(image.shape()));
  }
  const int h = image.dim(0), w = image.dim(1);
  const int k = logits[0].dim(2);

  // Pseudo-label generation sits behind a stop-gradient: everything below
  // runs on detached values and records nothing.
  Tensor acc = Tensor::zeros({h, w, k});
  for (std::size_t v = 0; v < logits.size(); ++v) {
    if (logits[v].ndim() != 3 || logits[v].dim(2) != k) {
      throw ShapeError("calibrate: view " + std::to_string(v) +
                       " logits shape " + shape_str(logits[v].shape()));
    }
    Tensor back = invert_geom(geoms[v], logits[v].detached_copy(), h, w);
    acc = add(acc, back);
  }
  acc = mul_scalar(acc, 1.0 / static_cast<double>(logits.size()));
  Tensor probs = softmax(acc, 2);
  if (cfg.refine.iterations > 0) probs = refine(probs, image, cfg.refine);

  PseudoMask out;
  out.h = h;
  out.w = w;
  out.labels.resize(static_cast<std::size_t>(h) * w);
  out.ignore.resize(static_cast<std::size_t>(h) * w);
  out.confidence.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (probs.at(y, x, c) > probs.at(y, x, best)) best = c;
      }
      double second = -1.0;
      for (int c = 0; c < k; ++c) {
        if (c != best) second = std::max(second, probs.at(y, x, c));
      }
      const double conf = probs.at(y, x, best);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      out.labels[i] = best;
      out.confidence[i] = conf;
      const bool low_conf = conf < cfg.gamma;
      const bool multi = k > 1 && second > conf - cfg.tie_delta;
      out.ignore[i] = (low_conf || multi) ? 1 : 0;
    }
  }
  return out;
}

std::vector<std::vector<int>> build_seg_targets(
    const PseudoMask& pseudo, const std::vector<GeomTransform>& geoms) {
  std::vector<int> src = pseudo.labels_with_ignore();
  std::vector<std::vector<int>> out;
  out.reserve(geoms.size());
  for (const GeomTransform& g : geoms) {
    out.push_back(project_labels(g, src, pseudo.h, pseudo.w));
  }
  return out;
}

}  // namespace xvseg
