#pragma once

#include <cstdint>
#include <vector>

#include "xvseg/tensor.hpp"

namespace xvseg {

// k*k matrix of (ground-truth class, predicted class) pixel counts.
// Ground-truth pixels equal to the ignore sentinel are skipped; everything
// else must be a valid class index. Accumulators built independently over
// disjoint pixel sets can be merged (associative, commutative).
class ConfusionAccumulator {
 public:
  explicit ConfusionAccumulator(int num_classes, int ignore_label = 255);

  void add(const std::vector<int>& truth, const std::vector<int>& pred);
  void merge(const ConfusionAccumulator& other);

  std::int64_t count(int truth_class, int pred_class) const;
  std::int64_t total() const;  // non-ignored pixels seen so far
  int num_classes() const { return k_; }

 private:
  int k_;
  int ignore_label_;
  std::vector<std::int64_t> counts_;  // row-major, truth-major
};

struct SegMetrics {
  double miou = 0.0;
  double mfdr = 0.0;  // mean over classes of FP / (TP + FP)
  double mfnr = 0.0;  // mean over classes of FN / (TP + FN)
};

// Class-averaged IoU / false-discovery / false-negative rates. A class with
// a zero denominator is excluded from that mean. Throws ContractError when
// the accumulator has seen no pixels.
SegMetrics metrics(const ConfusionAccumulator& conf);

}  // namespace xvseg
