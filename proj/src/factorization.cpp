#include "xvseg/factorization.hpp"

#include <cmath>
#include <string>

#include "xvseg/ops.hpp"

namespace xvseg {

namespace {

// Validates the parallel X/C (or X-only) view lists and returns (d, k).
void check_views(const std::vector<Tensor>& X, const char* op) {
  if (X.empty()) throw ShapeError(std::string(op) + ": no views");
  for (const Tensor& x : X) {
    if (x.ndim() != 2) {
      throw ShapeError(std::string(op) + ": view matrices must be rank 2, got " +
                       shape_str(x.shape()));
    }
    if (x.dim(0) != X[0].dim(0)) {
      throw ShapeError(std::string(op) +
                       ": views disagree on feature dimension: " +
                       shape_str(X[0].shape()) + " vs " + shape_str(x.shape()));
    }
  }
}

void check_pairs(const std::vector<Tensor>& X, const std::vector<Tensor>& C,
                 const char* op) {
  check_views(X, op);
  if (C.size() != X.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(X.size()) +
                     " feature views vs " + std::to_string(C.size()) +
                     " code views");
  }
  for (std::size_t v = 0; v < X.size(); ++v) {
    if (C[v].ndim() != 2 || C[v].dim(0) != C[0].dim(0)) {
      throw ShapeError(std::string(op) + ": bad code matrix shape " +
                       shape_str(C[v].shape()));
    }
    if (C[v].dim(1) != X[v].dim(1)) {
      throw ShapeError(std::string(op) + ": view " + std::to_string(v) +
                       " has " + std::to_string(X[v].dim(1)) +
                       " feature columns but " + std::to_string(C[v].dim(1)) +
                       " code columns");
    }
  }
}

}  // namespace

Tensor update_dictionary(const std::vector<Tensor>& X,
                         const std::vector<Tensor>& C) {
  check_pairs(X, C, "update_dictionary");
  Tensor numer = matmul(X[0], transpose(C[0]));      // d*k
  Tensor atom_mass = sum_axis(C[0], 1);              // k, row sums = C 1_n
  for (std::size_t v = 1; v < X.size(); ++v) {
    numer = add(numer, matmul(X[v], transpose(C[v])));
    atom_mass = add(atom_mass, sum_axis(C[v], 1));
  }
  return div_columns(numer, clamp_min(atom_mass, kFactorEps));
}

std::vector<Tensor> update_codes(const std::vector<Tensor>& X, const Tensor& D,
                                 double tau) {
  check_views(X, "update_codes");
  if (D.ndim() != 2 || D.dim(0) != X[0].dim(0)) {
    throw ShapeError("update_codes: dictionary " + shape_str(D.shape()) +
                     " does not match features " + shape_str(X[0].shape()));
  }
  if (!(tau > 0.0)) {
    throw ParamError("update_codes: tau must be positive, got " +
                     std::to_string(tau));
  }
  // Unit-L2 columns; zero atoms floored so the logits stay defined. The
  // clamp sits inside the sqrt (max-then-sqrt equals sqrt-then-max, so the
  // forward values are unchanged for healthy atoms) because sqrt's backward
  // divides by its output: a nearly-dead atom would otherwise hand the
  // encoder a ~1/norm-sized gradient spike.
  Tensor col_norms = sqrt_op(
      clamp_min(sum_axis(mul(D, D), 0), kFactorEps * kFactorEps));
  Tensor d_norm = div_columns(D, col_norms);
  std::vector<Tensor> codes;
  codes.reserve(X.size());
  for (const Tensor& x : X) {
    codes.push_back(softmax(matmul(transpose(d_norm), x), 0, tau));
  }
  return codes;
}

std::vector<Tensor> hard_codes(const std::vector<Tensor>& X, const Tensor& D) {
  check_views(X, "hard_codes");
  if (D.ndim() != 2 || D.dim(0) != X[0].dim(0)) {
    throw ShapeError("hard_codes: dictionary " + shape_str(D.shape()) +
                     " does not match features " + shape_str(X[0].shape()));
  }
  const int d = D.dim(0), k = D.dim(1);
  std::vector<Tensor> codes;
  codes.reserve(X.size());
  for (const Tensor& x : X) {
    const int n = x.dim(1);
    Tensor c = Tensor::zeros({k, n});
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_dist = 0.0;
      for (int j = 0; j < k; ++j) {
        double dist = 0.0;
        for (int f = 0; f < d; ++f) {
          const double diff = x.at(f, i) - D.at(f, j);
          dist += diff * diff;
        }
        if (j == 0 || dist < best_dist) {
          best_dist = dist;
          best = j;
        }
      }
      c.at(best, i) = 1.0;
    }
    codes.push_back(c);
  }
  return codes;
}

std::vector<int> code_argmax(const Tensor& C) {
  if (C.ndim() != 2) {
    throw ShapeError("code_argmax: expected k*n matrix, got " +
                     shape_str(C.shape()));
  }
  const int k = C.dim(0), n = C.dim(1);
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (C.at(j, i) > C.at(best, i)) best = j;
    }
    out[i] = best;
  }
  return out;
}

FactorResult factorize(const std::vector<Tensor>& X,
                       const std::vector<Tensor>& init_C, double tau, int T,
                       AssignMode mode) {
  check_pairs(X, init_C, "factorize");
  if (T < 0) throw ParamError("factorize: T must be >= 0");
  const int d = X[0].dim(0);
  const int k = init_C[0].dim(0);
  int total_cols = 0;
  for (const Tensor& x : X) total_cols += x.dim(1);
  if (k >= d || k >= total_cols) {
    throw ConfigError("factorize: need k < d and k < total columns, got k=" +
                      std::to_string(k) + ", d=" + std::to_string(d) +
                      ", n=" + std::to_string(total_cols));
  }
  // init codes must be column distributions (they come from a softmax).
  for (const Tensor& c : init_C) {
    for (int i = 0; i < c.dim(1); ++i) {
      double sum = 0.0;
      for (int j = 0; j < k; ++j) {
        const double val = c.at(j, i);
        if (val < -1e-9) {
          throw ContractError("factorize: negative entry in init codes");
        }
        sum += val;
      }
      if (std::fabs(sum - 1.0) > 1e-6) {
        throw ContractError("factorize: init code column " + std::to_string(i) +
                            " sums to " + std::to_string(sum) + ", not 1");
      }
    }
  }

  FactorResult result;
  std::vector<Tensor> C = init_C;
  Tensor D = update_dictionary(X, C);
  for (int t = 1; t <= T; ++t) {
    if (mode == AssignMode::kHard) {
      C = hard_codes(X, D);
      std::vector<int> flat;
      for (const Tensor& c : C) {
        std::vector<int> a = code_argmax(c);
        flat.insert(flat.end(), a.begin(), a.end());
      }
      result.hard_assignments.push_back(std::move(flat));
    } else {
      C = update_codes(X, D, tau);
    }
    if (t < T) D = update_dictionary(X, C);
  }
  result.dictionary = D;
  result.codes = C;
  result.recon.reserve(X.size());
  for (const Tensor& c : C) result.recon.push_back(matmul(D, c));
  return result;
}

double vq_objective(const std::vector<Tensor>& X, const Tensor& D,
                    const std::vector<Tensor>& C) {
  check_pairs(X, C, "vq_objective");
  const int d = D.dim(0), k = D.dim(1);
  double total = 0.0;
  for (std::size_t v = 0; v < X.size(); ++v) {
    const int n = X[v].dim(1);
    double sq = 0.0;
    for (int f = 0; f < d; ++f) {
      for (int i = 0; i < n; ++i) {
        double recon = 0.0;
        for (int j = 0; j < k; ++j) recon += D.at(f, j) * C[v].at(j, i);
        const double diff = X[v].at(f, i) - recon;
        sq += diff * diff;
      }
    }
    total += std::sqrt(sq);
  }
  return total;
}

}  // namespace xvseg
