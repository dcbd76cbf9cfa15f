#pragma once

#include <vector>

#include "xvseg/tensor.hpp"

namespace xvseg::oracles {

// Independent reference implementations used to cross-check the library.
// Each one computes its quantity by a deliberately different route than the
// production code (explicit per-cluster loops instead of matmuls, Jacobi
// instead of factored products, per-class scans instead of a confusion
// matrix) so agreement is meaningful.

struct LloydResult {
  std::vector<std::vector<int>> assignments;  // one vector per iteration
  Tensor centroids;                           // final d*k
};

// Classical Lloyd iterations on the columns of X (d*n), started from the
// centroids induced by init_assign (size n, values in [0,k)). Each iteration
// assigns every column to its nearest centroid in squared Euclidean distance
// (lowest index wins ties) and then recomputes centroids as per-cluster
// means; an empty cluster's centroid is the zero vector.
LloydResult lloyd_kmeans(const Tensor& X, const std::vector<int>& init_assign,
                         int k, int iterations);

// Singular values of a rank-2 tensor, descending, via a cyclic Jacobi
// eigensolver on the smaller Gram matrix.
std::vector<double> singular_values(const Tensor& A);

// Count of singular values above rel_tol * max(sv); 0 for an all-zero matrix.
int numeric_rank(const std::vector<double>& sv, double rel_tol = 1e-6);

struct PixelMetrics {
  double miou = 0.0;
  double mfdr = 0.0;
  double mfnr = 0.0;
};

// Brute-force per-class counting over gt/pred label maps. Pixels whose gt
// equals ignore_label are skipped. Classes with a zero denominator are
// excluded from the corresponding mean.
PixelMetrics brute_metrics(const std::vector<int>& gt,
                           const std::vector<int>& pred, int k,
                           int ignore_label = 255);

}  // namespace xvseg::oracles
