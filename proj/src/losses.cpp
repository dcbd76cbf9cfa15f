#include "xvseg/losses.hpp"

#include <string>

#include "xvseg/ops.hpp"

namespace xvseg {

namespace {

void check_view_logits(const Tensor& t, const char* who) {
  if (t.shape().size() != 3) {
    throw ShapeError(std::string(who) + ": view logits must be h*w*k");
  }
}

}  // namespace

Tensor total_loss(const LossBundle& terms, const LossWeights& weights,
                  int epoch) {
  if (weights.lambda_seg < 0 || weights.lambda_cls < 0 ||
      weights.lambda_reg < 0) {
    throw ParamError("total_loss: negative term weight");
  }
  if (weights.warmup_epochs < 0) {
    throw ParamError("total_loss: negative warmup");
  }
  Tensor reg = add(terms.reg_mask, terms.reg_fact);
  return add(add(mul_scalar(terms.seg, weights.seg_weight_at(epoch)),
                 mul_scalar(terms.cls, weights.lambda_cls)),
             mul_scalar(reg, weights.lambda_reg));
}

Tensor seg_loss(const std::vector<Tensor>& logits,
                const std::vector<std::vector<int>>& targets,
                int ignore_label) {
  if (logits.size() != targets.size()) {
    throw ShapeError("seg_loss: view/target count mismatch");
  }
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t v = 0; v < logits.size(); ++v) {
    check_view_logits(logits[v], "seg_loss");
    const int h = logits[v].shape()[0];
    const int w = logits[v].shape()[1];
    const int k = logits[v].shape()[2];
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (targets[v].size() != n) {
      throw ShapeError("seg_loss: target size mismatch for view " +
                       std::to_string(v));
    }
    Tensor pick = Tensor::zeros({h, w, k});  // one-hot rows at live pixels
    std::size_t live = 0;
    for (std::size_t p = 0; p < n; ++p) {
      const int t = targets[v][p];
      if (t == ignore_label) continue;
      if (t < 0 || t >= k) {
        throw ShapeError("seg_loss: target label " + std::to_string(t) +
                         " outside [0, " + std::to_string(k) + ")");
      }
      pick.data()[p * k + t] = 1.0;
      ++live;
    }
    if (live == 0) continue;
    Tensor lsm = log_softmax(logits[v], 2);
    acc = add(acc, mul_scalar(sum_all(mul(lsm, pick)),
                              -1.0 / static_cast<double>(live)));
  }
  return acc;
}

Tensor class_scores(const Tensor& logits) {
  check_view_logits(logits, "class_scores");
  const int h = logits.shape()[0];
  const int w = logits.shape()[1];
  const int k = logits.shape()[2];
  const int n = h * w;

  Tensor mask = reshape(softmax(logits, 2), {n, k});
  Tensor flat = reshape(logits, {n, k});
  Tensor area = sum_axis(mask, 0);                                  // [k]
  Tensor pooled = div(sum_axis(mul(mask, flat), 0),
                      add_scalar(area, kPoolEps));                  // nGWP
  Tensor occupancy = mul_scalar(area, 1.0 / n);                     // mean mask
  Tensor absent = add_scalar(mul_scalar(occupancy, -1.0), 1.0);     // 1 - mean
  Tensor penalty = absent;
  for (int i = 1; i < kFocalPower; ++i) penalty = mul(penalty, absent);
  penalty = mul(penalty, log_op(add_scalar(occupancy, kFocalLambda)));
  return add(pooled, penalty);
}

Tensor cls_loss(const std::vector<Tensor>& logits,
                const std::vector<int>& labels) {
  Tensor acc = Tensor::scalar(0.0);
  for (const Tensor& view : logits) {
    check_view_logits(view, "cls_loss");
    const int k = view.shape()[2];
    if (static_cast<int>(labels.size()) != k - 1) {
      throw ShapeError("cls_loss: labels must cover the k-1 foreground "
                       "channels");
    }
    std::vector<double> y(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (labels[c] != 0 && labels[c] != 1) {
        throw ParamError("cls_loss: labels must be multi-hot 0/1");
      }
      y[c] = static_cast<double>(labels[c]);
    }
    Tensor target = Tensor::from_data({k - 1}, y);
    Tensor scores = slice1d(class_scores(view), 1, k - 1);
    // -[y log sigmoid(s) + (1-y) log(1-sigmoid(s))] == softplus(s) - y*s
    Tensor bce = sub(softplus(scores), mul(target, scores));
    acc = add(acc, sum_all(bce));
  }
  return acc;
}

Tensor mask_consistency_loss(const std::vector<Tensor>& logits,
                             const std::vector<GeomTransform>& geoms,
                             const std::vector<int>& channels, int src_h,
                             int src_w) {
  if (logits.size() != geoms.size()) {
    throw ShapeError("mask_consistency_loss: view/geom count mismatch");
  }
  const std::size_t m = logits.size();
  if (m < 2 || channels.empty()) return Tensor::scalar(0.0);

  int k = -1;
  std::vector<Tensor> back;
  back.reserve(m);
  for (std::size_t v = 0; v < m; ++v) {
    check_view_logits(logits[v], "mask_consistency_loss");
    if (k < 0) k = logits[v].shape()[2];
    if (logits[v].shape()[2] != k) {
      throw ShapeError("mask_consistency_loss: channel count differs "
                       "across views");
    }
    back.push_back(invert_geom(geoms[v], logits[v], src_h, src_w));
  }
  Tensor select = Tensor::zeros({src_h, src_w, k});
  for (const int c : channels) {
    if (c < 0 || c >= k) {
      throw ParamError("mask_consistency_loss: channel " + std::to_string(c) +
                       " outside [0, " + std::to_string(k) + ")");
    }
    for (int y = 0; y < src_h; ++y)
      for (int x = 0; x < src_w; ++x) select.at(y, x, c) = 1.0;
  }

  // Mean over ordered distinct pairs == mean over unordered pairs (the
  // per-pair distance is symmetric), so iterate u < v.
  Tensor acc = Tensor::scalar(0.0);
  int pairs = 0;
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = u + 1; v < m; ++v) {
      Tensor gap = mul(abs_op(sub(back[u], back[v])), select);
      acc = add(acc, mean_all(sum_axis(gap, 2)));
      ++pairs;
    }
  }
  return mul_scalar(acc, 1.0 / pairs);
}

std::vector<int> consistency_channels(const std::vector<int>& labels,
                                      bool has_labels, int k) {
  std::vector<int> out;
  if (!has_labels) {
    for (int c = 0; c < k; ++c) out.push_back(c);
    return out;
  }
  if (static_cast<int>(labels.size()) != k - 1) {
    throw ShapeError("consistency_channels: labels must cover the k-1 "
                     "foreground channels");
  }
  for (int c = 0; c < k - 1; ++c) {
    if (labels[c]) out.push_back(c + 1);
  }
  return out;
}

}  // namespace xvseg
