#include "xvseg/metrics.hpp"

#include <string>

namespace xvseg {

ConfusionAccumulator::ConfusionAccumulator(int num_classes, int ignore_label)
    : k_(num_classes), ignore_label_(ignore_label) {
  if (num_classes < 1) {
    throw ParamError("ConfusionAccumulator: num_classes must be >= 1");
  }
  counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

void ConfusionAccumulator::add(const std::vector<int>& truth,
                               const std::vector<int>& pred) {
  if (truth.size() != pred.size()) {
    throw ShapeError("ConfusionAccumulator::add: truth/pred size mismatch");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    if (t == ignore_label_) continue;
    const int p = pred[i];
    if (t < 0 || t >= k_) {
      throw ShapeError("ConfusionAccumulator::add: truth label " +
                       std::to_string(t) + " outside [0, " +
                       std::to_string(k_) + ")");
    }
    if (p < 0 || p >= k_) {
      throw ShapeError("ConfusionAccumulator::add: predicted label " +
                       std::to_string(p) + " outside [0, " +
                       std::to_string(k_) + ")");
    }
    ++counts_[static_cast<std::size_t>(t) * k_ + p];
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.k_ != k_) {
    throw ShapeError("ConfusionAccumulator::merge: class count mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    counts_[i] += other.counts_[i];
  }
}

std::int64_t ConfusionAccumulator::count(int truth_class,
                                         int pred_class) const {
  if (truth_class < 0 || truth_class >= k_ || pred_class < 0 ||
      pred_class >= k_) {
    throw ShapeError("ConfusionAccumulator::count: class index out of range");
  }
  return counts_[static_cast<std::size_t>(truth_class) * k_ + pred_class];
}

std::int64_t ConfusionAccumulator::total() const {
  std::int64_t sum = 0;
  for (const std::int64_t c : counts_) sum += c;
  return sum;
}

SegMetrics metrics(const ConfusionAccumulator& conf) {
  if (conf.total() == 0) {
    throw ContractError("metrics: empty accumulator");
  }
  const int k = conf.num_classes();
  SegMetrics out;
  double iou_sum = 0.0, fdr_sum = 0.0, fnr_sum = 0.0;
  int iou_n = 0, fdr_n = 0, fnr_n = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = conf.count(c, c);
    std::int64_t fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += conf.count(o, c);
      fn += conf.count(c, o);
    }
    if (tp + fp + fn > 0) {
      iou_sum += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
      ++iou_n;
    }
    if (tp + fp > 0) {
      fdr_sum += static_cast<double>(fp) / static_cast<double>(tp + fp);
      ++fdr_n;
    }
    if (tp + fn > 0) {
      fnr_sum += static_cast<double>(fn) / static_cast<double>(tp + fn);
      ++fnr_n;
    }
  }
  out.miou = iou_n > 0 ? iou_sum / iou_n : 0.0;
  out.mfdr = fdr_n > 0 ? fdr_sum / fdr_n : 0.0;
  out.mfnr = fnr_n > 0 ? fnr_sum / fnr_n : 0.0;
  return out;
}

}  // namespace xvseg
