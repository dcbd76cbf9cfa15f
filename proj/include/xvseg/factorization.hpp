#pragma once

#include <vector>

#include "xvseg/tensor.hpp"

namespace xvseg {

// Collective matrix factorization across views: all views share one
// dictionary D (d*k); each view v keeps its own code matrix C^(v) (k*n_v)
// whose columns are soft assignments over the k atoms.
//
// Soft mode is the differentiable attention form (cosine logits through a
// temperature softmax). Hard mode is the classical VQ step — one-hot
// nearest-atom assignment in Euclidean distance — used by the K-means
// oracles and diagnostics; it does not record gradients.

inline constexpr double kFactorEps = 1e-6;

enum class AssignMode { kSoft, kHard };

struct FactorResult {
  Tensor dictionary;           // d*k
  std::vector<Tensor> codes;   // k*n_v per view
  std::vector<Tensor> recon;   // d*n_v per view, D * C^(v)
  // Hard mode only: assignments recorded after each assignment step,
  // one entry per iteration, columns flattened across views in order.
  std::vector<std::vector<int>> hard_assignments;
};

// D = (sum_v X^(v) C^(v)T) * diag(1/max(s_j, eps)), s = sum_v C^(v) 1.
// A starved atom (s_j ~ 0) degrades to a zero column instead of dividing
// by zero. Differentiable in X and C.
Tensor update_dictionary(const std::vector<Tensor>& X,
                         const std::vector<Tensor>& C);

// C^(v) = softmax((1/tau) * D_normT X^(v)) with D's columns unit-L2
// normalized (norms floored at eps). Differentiable in X and D.
std::vector<Tensor> update_codes(const std::vector<Tensor>& X, const Tensor& D,
                                 double tau);

// One-hot nearest-atom codes, squared Euclidean metric, lowest index wins
// ties. Raw values only (no tape participation).
std::vector<Tensor> hard_codes(const std::vector<Tensor>& X, const Tensor& D);

// Column-wise argmax of a code matrix (utility shared with tests).
std::vector<int> code_argmax(const Tensor& C);

// Alternating updates: D from init_C, then T sweeps of (codes, dictionary),
// the dictionary lagging one half-step as in the displayed algorithm; the
// final reconstruction uses the raw (unnormalized) D. T=0 reconstructs
// straight from init_C. Gradients flow through every iteration in soft mode.
FactorResult factorize(const std::vector<Tensor>& X,
                       const std::vector<Tensor>& init_C, double tau, int T,
                       AssignMode mode = AssignMode::kSoft);

// sum_v ||X^(v) - D C^(v)||_F (unsquared Frobenius norms). Diagnostic only.
double vq_objective(const std::vector<Tensor>& X, const Tensor& D,
                    const std::vector<Tensor>& C);

}  // namespace xvseg
