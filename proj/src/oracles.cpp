#include "xvseg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace xvseg::oracles {

namespace {

// Per-cluster means from an assignment vector; empty cluster -> zero vector.
Tensor centroids_from_assignments(const Tensor& X,
                                  const std::vector<int>& assign, int k) {
  const int d = X.dim(0), n = X.dim(1);
  Tensor cent = Tensor::zeros({d, k});
  std::vector<int> count(k, 0);
  for (int i = 0; i < n; ++i) {
    const int j = assign[static_cast<std::size_t>(i)];
    ++count[static_cast<std::size_t>(j)];
    for (int f = 0; f < d; ++f) cent.at(f, j) += X.at(f, i);
  }
  for (int j = 0; j < k; ++j) {
    if (count[static_cast<std::size_t>(j)] == 0) continue;
    for (int f = 0; f < d; ++f) cent.at(f, j) /= count[static_cast<std::size_t>(j)];
  }
  return cent;
}

std::vector<int> nearest_assignments(const Tensor& X, const Tensor& cent) {
  const int d = X.dim(0), n = X.dim(1), k = cent.dim(1);
  std::vector<int> assign(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_dist = 0.0;
    for (int j = 0; j < k; ++j) {
      double dist = 0.0;
      for (int f = 0; f < d; ++f) {
        const double diff = X.at(f, i) - cent.at(f, j);
        dist += diff * diff;
      }
      if (j == 0 || dist < best_dist) {
        best_dist = dist;
        best = j;
      }
    }
    assign[static_cast<std::size_t>(i)] = best;
  }
  return assign;
}

}  // namespace

LloydResult lloyd_kmeans(const Tensor& X, const std::vector<int>& init_assign,
                         int k, int iterations) {
  if (X.ndim() != 2) {
    throw ShapeError("lloyd_kmeans: expected d*n matrix, got " +
                     shape_str(X.shape()));
  }
  if (init_assign.size() != static_cast<std::size_t>(X.dim(1))) {
    throw ShapeError("lloyd_kmeans: init assignment size mismatch");
  }
  for (int a : init_assign) {
    if (a < 0 || a >= k) throw ParamError("lloyd_kmeans: assignment out of range");
  }
  LloydResult result;
  Tensor cent = centroids_from_assignments(X, init_assign, k);
  std::vector<int> assign = init_assign;
  for (int it = 0; it < iterations; ++it) {
    assign = nearest_assignments(X, cent);
    result.assignments.push_back(assign);
    cent = centroids_from_assignments(X, assign, k);
  }
  result.centroids = cent;
  return result;
}

std::vector<double> singular_values(const Tensor& A) {
  if (A.ndim() != 2) {
    throw ShapeError("singular_values: expected rank-2 input, got " +
                     shape_str(A.shape()));
  }
  const int rows = A.dim(0), cols = A.dim(1);
  // Gram matrix on the smaller side: B = A A^T or A^T A.
  const bool use_rows = rows <= cols;
  const int m = use_rows ? rows : cols;
  std::vector<double> B(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      double acc = 0.0;
      if (use_rows) {
        for (int t = 0; t < cols; ++t) acc += A.at(i, t) * A.at(j, t);
      } else {
        for (int t = 0; t < rows; ++t) acc += A.at(t, i) * A.at(t, j);
      }
      B[static_cast<std::size_t>(i) * m + j] = acc;
      B[static_cast<std::size_t>(j) * m + i] = acc;
    }
  }

  // Cyclic Jacobi: rotate away off-diagonal mass until convergence.
  auto at = [&](int i, int j) -> double& {
    return B[static_cast<std::size_t>(i) * m + j];
  };
  double scale = 0.0;
  for (int i = 0; i < m; ++i) scale = std::max(scale, std::fabs(at(i, i)));
  const double stop = std::max(scale, 1.0) * 1e-14;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) off = std::max(off, std::fabs(at(p, q)));
    if (off <= stop) break;
    for (int p = 0; p < m; ++p) {
      for (int q = p + 1; q < m; ++q) {
        const double apq = at(p, q);
        if (std::fabs(apq) <= stop * 1e-2) continue;
        const double phi = 0.5 * std::atan2(2.0 * apq, at(q, q) - at(p, p));
        const double c = std::cos(phi), s = std::sin(phi);
        for (int r = 0; r < m; ++r) {
          const double brp = at(r, p), brq = at(r, q);
          at(r, p) = c * brp - s * brq;
          at(r, q) = s * brp + c * brq;
        }
        for (int r = 0; r < m; ++r) {
          const double bpr = at(p, r), bqr = at(q, r);
          at(p, r) = c * bpr - s * bqr;
          at(q, r) = s * bpr + c * bqr;
        }
      }
    }
  }

  std::vector<double> sv(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    sv[static_cast<std::size_t>(i)] = std::sqrt(std::max(0.0, at(i, i)));
  }
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

int numeric_rank(const std::vector<double>& sv, double rel_tol) {
  if (sv.empty()) return 0;
  const double cutoff = sv.front() * rel_tol;
  if (sv.front() == 0.0) return 0;
  int rank = 0;
  for (double s : sv) {
    if (s > cutoff) ++rank;
  }
  return rank;
}

PixelMetrics brute_metrics(const std::vector<int>& gt,
                           const std::vector<int>& pred, int k,
                           int ignore_label) {
  if (gt.size() != pred.size()) {
    throw ShapeError("brute_metrics: gt/pred size mismatch");
  }
  PixelMetrics out;
  double iou_sum = 0.0, fdr_sum = 0.0, fnr_sum = 0.0;
  int iou_n = 0, fdr_n = 0, fnr_n = 0;
  for (int c = 0; c < k; ++c) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == ignore_label) continue;
      const bool is_gt = gt[i] == c;
      const bool is_pred = pred[i] == c;
      if (is_gt && is_pred) ++tp;
      if (!is_gt && is_pred) ++fp;
      if (is_gt && !is_pred) ++fn;
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

}  // namespace xvseg::oracles
