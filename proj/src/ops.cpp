#include "xvseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

namespace xvseg {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Common op epilogue: finiteness check, grad flag propagation, tape record.
void finalize(const char* name, Tensor& out,
              std::initializer_list<const Tensor*> inputs,
              std::function<void()> backward_fn) {
  check_finite(out, name);
  Tape* tape = Tape::current();
  if (tape != nullptr && any_requires_grad(inputs)) {
    out.set_requires_grad(true);
    std::vector<ImplPtr> impls;
    impls.reserve(inputs.size());
    for (const Tensor* t : inputs) impls.push_back(t->impl());
    tape->record(std::move(impls), std::move(backward_fn));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.ndim() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got shape " +
                     shape_str(t.shape()));
  }
}

// Output grad may be absent when the value never reached the loss.
const std::vector<double>* out_grad(const ImplPtr& out) {
  return out->grad.empty() ? nullptr : &out->grad;
}

// Decomposes a shape around `axis` into (outer, len, inner) so that flat
// index = (o * len + k) * inner + i.
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, int axis, const char* op) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(shape));
  }
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= static_cast<std::size_t>(shape[i]);
  v.len = static_cast<std::size_t>(shape[axis]);
  for (std::size_t i = axis + 1; i < shape.size(); ++i) {
    v.inner *= static_cast<std::size_t>(shape[i]);
  }
  return v;
}

Tensor elementwise_binary(const char* name, const Tensor& a, const Tensor& b,
                          double (*fwd)(double, double),
                          void (*bwd)(double a, double b, double out, double g,
                                      double* da, double* db)) {
  require_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);

  finalize(name, out, {&a, &b}, [ai = a.impl(), bi = b.impl(), oi = out.impl(), bwd] {
    const auto* g = out_grad(oi);
    if (!g) return;
    const std::size_t n = oi->data.size();
    const bool need_a = ai->requires_grad;
    const bool need_b = bi->requires_grad;
    if (need_a) ai->ensure_grad();
    if (need_b) bi->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double da = 0.0, db = 0.0;
      bwd(ai->data[i], bi->data[i], oi->data[i], (*g)[i], &da, &db);
      if (need_a) ai->grad[i] += da;
      if (need_b) bi->grad[i] += db;
    }
  });
  return out;
}

Tensor elementwise_unary(const char* name, const Tensor& a,
                         double (*fwd)(double),
                         double (*dfn)(double a, double out)) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i]);

  finalize(name, out, {&a}, [ai = a.impl(), oi = out.impl(), dfn] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    const std::size_t n = oi->data.size();
    for (std::size_t i = 0; i < n; ++i) {
      ai->grad[i] += (*g)[i] * dfn(ai->data[i], oi->data[i]);
    }
  });
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double, double g, double* da, double* db) {
        *da = g;
        *db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double, double g, double* da, double* db) {
        *da = g;
        *db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double, double g, double* da, double* db) {
        *da = g * y;
        *db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double, double g, double* da, double* db) {
        *da = g / y;
        *db = -g * x / (y * y);
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + s;
  finalize("add_scalar", out, {&a}, [ai = a.impl(), oi = out.impl()] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < oi->data.size(); ++i) ai->grad[i] += (*g)[i];
  });
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
  finalize("mul_scalar", out, {&a}, [ai = a.impl(), oi = out.impl(), s] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < oi->data.size(); ++i) ai->grad[i] += (*g)[i] * s;
  });
  return out;
}

Tensor exp_op(const Tensor& a) {
  return elementwise_unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double out) { return out; });
}

Tensor log_op(const Tensor& a) {
  return elementwise_unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_op(const Tensor& a) {
  return elementwise_unary(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double out) { return 0.5 / out; });
}

Tensor abs_op(const Tensor& a) {
  return elementwise_unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
  return elementwise_unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return elementwise_unary(
      "softplus", a,
      [](double x) {
        return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor reciprocal(const Tensor& a) {
  return elementwise_unary(
      "reciprocal", a, [](double x) { return 1.0 / x; },
      [](double, double out) { return -out * out; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = std::max(a.data()[i], floor);
  }
  finalize("clamp_min", out, {&a}, [ai = a.impl(), oi = out.impl(), floor] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < oi->data.size(); ++i) {
      if (ai->data[i] > floor) ai->grad[i] += (*g)[i];
    }
  });
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double av = pa[static_cast<std::size_t>(i) * k + p];
      const double* brow = pb + static_cast<std::size_t>(p) * n;
      double* orow = po + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }

  finalize("matmul", out, {&a, &b},
           [ai = a.impl(), bi = b.impl(), oi = out.impl(), m, k, n] {
             const auto* g = out_grad(oi);
             if (!g) return;
             const double* pg = g->data();
             // dL/dA = G * B^T
             if (ai->requires_grad) {
               ai->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 for (int p = 0; p < k; ++p) {
                   const double* grow = pg + static_cast<std::size_t>(i) * n;
                   const double* brow = bi->data.data() + static_cast<std::size_t>(p) * n;
                   double acc = 0.0;
                   for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                   ai->grad[static_cast<std::size_t>(i) * k + p] += acc;
                 }
               }
             }
             // dL/dB = A^T * G
             if (bi->requires_grad) {
               bi->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 const double* arow = ai->data.data() + static_cast<std::size_t>(i) * k;
                 const double* grow = pg + static_cast<std::size_t>(i) * n;
                 for (int p = 0; p < k; ++p) {
                   const double av = arow[p];
                   double* brow = bi->grad.data() + static_cast<std::size_t>(p) * n;
                   for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                 }
               }
             }
           });
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  }
  finalize("transpose", out, {&a}, [ai = a.impl(), oi = out.impl(), m, n] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        ai->grad[static_cast<std::size_t>(i) * n + j] +=
            (*g)[static_cast<std::size_t>(j) * m + i];
      }
    }
  });
  return out;
}

Tensor scale_columns(const Tensor& a, const Tensor& s) {
  require_rank(a, 2, "scale_columns");
  require_rank(s, 1, "scale_columns");
  if (s.dim(0) != a.dim(1)) {
    throw ShapeError("scale_columns: scale length " + shape_str(s.shape()) +
                     " does not match columns of " + shape_str(a.shape()));
  }
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) * s.at(j);
  }
  finalize("scale_columns", out, {&a, &s},
           [ai = a.impl(), si = s.impl(), oi = out.impl(), m, n] {
             const auto* g = out_grad(oi);
             if (!g) return;
             if (ai->requires_grad) {
               ai->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 for (int j = 0; j < n; ++j) {
                   ai->grad[static_cast<std::size_t>(i) * n + j] +=
                       (*g)[static_cast<std::size_t>(i) * n + j] * si->data[j];
                 }
               }
             }
             if (si->requires_grad) {
               si->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 for (int j = 0; j < n; ++j) {
                   si->grad[j] += (*g)[static_cast<std::size_t>(i) * n + j] *
                                  ai->data[static_cast<std::size_t>(i) * n + j];
                 }
               }
             }
           });
  return out;
}

Tensor div_columns(const Tensor& a, const Tensor& s) {
  require_rank(a, 2, "div_columns");
  require_rank(s, 1, "div_columns");
  if (s.dim(0) != a.dim(1)) {
    throw ShapeError("div_columns: divisor length " + shape_str(s.shape()) +
                     " does not match columns of " + shape_str(a.shape()));
  }
  const int m = a.dim(0), n = a.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / s.at(j);
  }
  finalize("div_columns", out, {&a, &s},
           [ai = a.impl(), si = s.impl(), oi = out.impl(), m, n] {
             const auto* g = out_grad(oi);
             if (!g) return;
             if (ai->requires_grad) {
               ai->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 for (int j = 0; j < n; ++j) {
                   ai->grad[static_cast<std::size_t>(i) * n + j] +=
                       (*g)[static_cast<std::size_t>(i) * n + j] / si->data[j];
                 }
               }
             }
             if (si->requires_grad) {
               si->ensure_grad();
               for (int i = 0; i < m; ++i) {
                 for (int j = 0; j < n; ++j) {
                   const std::size_t idx = static_cast<std::size_t>(i) * n + j;
                   si->grad[j] -= (*g)[idx] * ai->data[idx] /
                                  (si->data[j] * si->data[j]);
                 }
               }
             }
           });
  return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(shape));
  }
  Tensor out = Tensor::from_data(shape, a.vec());
  finalize("reshape", out, {&a}, [ai = a.impl(), oi = out.impl()] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t i = 0; i < g->size(); ++i) ai->grad[i] += (*g)[i];
  });
  return out;
}

Tensor slice1d(const Tensor& a, int start, int len) {
  require_rank(a, 1, "slice1d");
  if (start < 0 || len < 0 || start + len > a.dim(0)) {
    throw ShapeError("slice1d: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of bounds for " +
                     shape_str(a.shape()));
  }
  Tensor out = Tensor::zeros({len});
  for (int i = 0; i < len; ++i) out.at(i) = a.at(start + i);
  finalize("slice1d", out, {&a}, [ai = a.impl(), oi = out.impl(), start, len] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (int i = 0; i < len; ++i) ai->grad[start + i] += (*g)[i];
  });
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank(a, 3, "concat_channels");
  require_rank(b, 3, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) {
    throw ShapeError("concat_channels: spatial dims differ: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int h = a.dim(0), w = a.dim(1), ca = a.dim(2), cb = b.dim(2);
  Tensor out = Tensor::zeros({h, w, ca + cb});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < ca; ++c) out.at(y, x, c) = a.at(y, x, c);
      for (int c = 0; c < cb; ++c) out.at(y, x, ca + c) = b.at(y, x, c);
    }
  }
  finalize("concat_channels", out, {&a, &b},
           [ai = a.impl(), bi = b.impl(), oi = out.impl(), h, w, ca, cb] {
             const auto* g = out_grad(oi);
             if (!g) return;
             const int cc = ca + cb;
             if (ai->requires_grad) ai->ensure_grad();
             if (bi->requires_grad) bi->ensure_grad();
             for (int y = 0; y < h; ++y) {
               for (int x = 0; x < w; ++x) {
                 const std::size_t base =
                     (static_cast<std::size_t>(y) * w + x);
                 if (ai->requires_grad) {
                   for (int c = 0; c < ca; ++c) {
                     ai->grad[base * ca + c] += (*g)[base * cc + c];
                   }
                 }
                 if (bi->requires_grad) {
                   for (int c = 0; c < cb; ++c) {
                     bi->grad[base * cb + c] += (*g)[base * cc + ca + c];
                   }
                 }
               }
             }
           });
  return out;
}

Tensor hflip(const Tensor& a) {
  require_rank(a, 3, "hflip");
  const int h = a.dim(0), w = a.dim(1), c = a.dim(2);
  Tensor out = Tensor::zeros({h, w, c});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = a.at(y, w - 1 - x, ch);
    }
  }
  finalize("hflip", out, {&a}, [ai = a.impl(), oi = out.impl(), h, w, c] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int ch = 0; ch < c; ++ch) {
          ai->grad[(static_cast<std::size_t>(y) * w + (w - 1 - x)) * c + ch] +=
              (*g)[(static_cast<std::size_t>(y) * w + x) * c + ch];
        }
      }
    }
  });
  return out;
}

Tensor softmax(const Tensor& a, int axis, double temperature) {
  if (!(temperature > 0.0)) {
    throw ParamError("softmax: temperature must be positive, got " +
                     std::to_string(temperature));
  }
  const AxisView v = axis_view(a.shape(), axis, "softmax");
  Tensor out = Tensor::zeros(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  const double inv_t = 1.0 / temperature;
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.len * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.len; ++k) {
        mx = std::max(mx, pa[base + k * v.inner] * inv_t);
      }
      double denom = 0.0;
      for (std::size_t k = 0; k < v.len; ++k) {
        const double e = std::exp(pa[base + k * v.inner] * inv_t - mx);
        po[base + k * v.inner] = e;
        denom += e;
      }
      for (std::size_t k = 0; k < v.len; ++k) po[base + k * v.inner] /= denom;
    }
  }

  finalize("softmax", out, {&a}, [ai = a.impl(), oi = out.impl(), v, inv_t] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.len * v.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t idx = base + k * v.inner;
          dot += (*g)[idx] * oi->data[idx];
        }
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t idx = base + k * v.inner;
          ai->grad[idx] += oi->data[idx] * ((*g)[idx] - dot) * inv_t;
        }
      }
    }
  });
  return out;
}

Tensor log_softmax(const Tensor& a, int axis) {
  const AxisView v = axis_view(a.shape(), axis, "log_softmax");
  Tensor out = Tensor::zeros(a.shape());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.len * v.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < v.len; ++k) {
        mx = std::max(mx, pa[base + k * v.inner]);
      }
      double denom = 0.0;
      for (std::size_t k = 0; k < v.len; ++k) {
        denom += std::exp(pa[base + k * v.inner] - mx);
      }
      const double log_denom = mx + std::log(denom);
      for (std::size_t k = 0; k < v.len; ++k) {
        po[base + k * v.inner] = pa[base + k * v.inner] - log_denom;
      }
    }
  }

  finalize("log_softmax", out, {&a}, [ai = a.impl(), oi = out.impl(), v] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.len * v.inner + i;
        double gsum = 0.0;
        for (std::size_t k = 0; k < v.len; ++k) gsum += (*g)[base + k * v.inner];
        for (std::size_t k = 0; k < v.len; ++k) {
          const std::size_t idx = base + k * v.inner;
          ai->grad[idx] += (*g)[idx] - std::exp(oi->data[idx]) * gsum;
        }
      }
    }
  });
  return out;
}

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  Tensor out = Tensor::scalar(acc);
  finalize("sum_all", out, {&a}, [ai = a.impl(), oi = out.impl()] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    const double gv = (*g)[0];
    for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += gv;
  });
  return out;
}

Tensor mean_all(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
  const double inv_n = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(acc * inv_n);
  finalize("mean_all", out, {&a}, [ai = a.impl(), oi = out.impl(), inv_n] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    const double gv = (*g)[0] * inv_n;
    for (std::size_t i = 0; i < ai->data.size(); ++i) ai->grad[i] += gv;
  });
  return out;
}

namespace {

Shape drop_axis(const Shape& shape, int axis) {
  Shape out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis) {
  const AxisView v = axis_view(a.shape(), axis, "sum_axis");
  Tensor out = Tensor::zeros(drop_axis(a.shape(), axis));
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.len; ++k) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        po[o * v.inner + i] += pa[(o * v.len + k) * v.inner + i];
      }
    }
  }
  finalize("sum_axis", out, {&a}, [ai = a.impl(), oi = out.impl(), v] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t k = 0; k < v.len; ++k) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          ai->grad[(o * v.len + k) * v.inner + i] += (*g)[o * v.inner + i];
        }
      }
    }
  });
  return out;
}

Tensor mean_axis(const Tensor& a, int axis) {
  const AxisView v = axis_view(a.shape(), axis, "mean_axis");
  const double inv_len = 1.0 / static_cast<double>(v.len);
  Tensor out = Tensor::zeros(drop_axis(a.shape(), axis));
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t k = 0; k < v.len; ++k) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        po[o * v.inner + i] += pa[(o * v.len + k) * v.inner + i];
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) po[i] *= inv_len;
  finalize("mean_axis", out, {&a}, [ai = a.impl(), oi = out.impl(), v, inv_len] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t k = 0; k < v.len; ++k) {
        for (std::size_t i = 0; i < v.inner; ++i) {
          ai->grad[(o * v.len + k) * v.inner + i] +=
              (*g)[o * v.inner + i] * inv_len;
        }
      }
    }
  });
  return out;
}

Tensor max_axis(const Tensor& a, int axis) {
  const AxisView v = axis_view(a.shape(), axis, "max_axis");
  Tensor out = Tensor::zeros(drop_axis(a.shape(), axis));
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const double* pa = a.data();
  double* po = out.data();
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      double best = pa[(o * v.len) * v.inner + i];
      std::size_t best_k = 0;
      for (std::size_t k = 1; k < v.len; ++k) {
        const double val = pa[(o * v.len + k) * v.inner + i];
        if (val > best) {
          best = val;
          best_k = k;
        }
      }
      po[o * v.inner + i] = best;
      (*argmax)[o * v.inner + i] = best_k;
    }
  }
  finalize("max_axis", out, {&a}, [ai = a.impl(), oi = out.impl(), v, argmax] {
    const auto* g = out_grad(oi);
    if (!g || !ai->requires_grad) return;
    ai->ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t flat = o * v.inner + i;
        ai->grad[(o * v.len + (*argmax)[flat]) * v.inner + i] += (*g)[flat];
      }
    }
  });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int pad) {
  require_rank(x, 3, "conv2d");
  require_rank(kernel, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  const int h = x.dim(0), w = x.dim(1), ci = x.dim(2);
  const int kh = kernel.dim(0), kw = kernel.dim(1);
  if (kernel.dim(2) != ci) {
    throw ShapeError("conv2d: input channels " + shape_str(x.shape()) +
                     " do not match kernel " + shape_str(kernel.shape()));
  }
  const int co = kernel.dim(3);
  if (bias.dim(0) != co) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) +
                     " does not match kernel outputs " +
                     shape_str(kernel.shape()));
  }
  if (stride < 1) throw ParamError("conv2d: stride must be >= 1");
  if (pad < 0) throw ParamError("conv2d: pad must be >= 0");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (w + 2 * pad - kw) / stride + 1;
  if (oh < 1 || ow < 1) {
    throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                     " does not fit input " + shape_str(x.shape()));
  }

  Tensor out = Tensor::zeros({oh, ow, co});
  const double* px = x.data();
  const double* pk = kernel.data();
  double* po = out.data();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* orow = po + (static_cast<std::size_t>(oy) * ow + ox) * co;
      for (int c = 0; c < co; ++c) orow[c] = bias.at(c);
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * stride - pad + ky;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * stride - pad + kx;
          if (ix < 0 || ix >= w) continue;
          const double* xrow = px + (static_cast<std::size_t>(iy) * w + ix) * ci;
          const double* krow =
              pk + (static_cast<std::size_t>(ky) * kw + kx) * ci * co;
          for (int c = 0; c < ci; ++c) {
            const double xv = xrow[c];
            const double* kc = krow + static_cast<std::size_t>(c) * co;
            for (int o = 0; o < co; ++o) orow[o] += xv * kc[o];
          }
        }
      }
    }
  }

  finalize("conv2d", out, {&x, &kernel, &bias},
           [xi = x.impl(), ki = kernel.impl(), bi = bias.impl(),
            oi = out.impl(), h, w, ci, kh, kw, co, oh, ow, stride, pad] {
             const auto* g = out_grad(oi);
             if (!g) return;
             const double* pg = g->data();
             const bool need_x = xi->requires_grad;
             const bool need_k = ki->requires_grad;
             const bool need_b = bi->requires_grad;
             if (need_x) xi->ensure_grad();
             if (need_k) ki->ensure_grad();
             if (need_b) bi->ensure_grad();
             for (int oy = 0; oy < oh; ++oy) {
               for (int ox = 0; ox < ow; ++ox) {
                 const double* grow =
                     pg + (static_cast<std::size_t>(oy) * ow + ox) * co;
                 if (need_b) {
                   for (int o = 0; o < co; ++o) bi->grad[o] += grow[o];
                 }
                 for (int ky = 0; ky < kh; ++ky) {
                   const int iy = oy * stride - pad + ky;
                   if (iy < 0 || iy >= h) continue;
                   for (int kx = 0; kx < kw; ++kx) {
                     const int ix = ox * stride - pad + kx;
                     if (ix < 0 || ix >= w) continue;
                     const std::size_t xbase =
                         (static_cast<std::size_t>(iy) * w + ix) * ci;
                     const std::size_t kbase =
                         (static_cast<std::size_t>(ky) * kw + kx) * ci * co;
                     for (int c = 0; c < ci; ++c) {
                       const double xv = xi->data[xbase + c];
                       const std::size_t kc = kbase + static_cast<std::size_t>(c) * co;
                       if (need_x) {
                         double acc = 0.0;
                         for (int o = 0; o < co; ++o) {
                           acc += grow[o] * ki->data[kc + o];
                         }
                         xi->grad[xbase + c] += acc;
                       }
                       if (need_k) {
                         for (int o = 0; o < co; ++o) {
                           ki->grad[kc + o] += grow[o] * xv;
                         }
                       }
                     }
                   }
                 }
               }
             }
           });
  return out;
}

Tensor bilinear_resize(const Tensor& x, int out_h, int out_w) {
  require_rank(x, 3, "bilinear_resize");
  if (out_h < 1 || out_w < 1) {
    throw ShapeError("bilinear_resize: invalid target size " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor out = Tensor::zeros({out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;

  // Precompute the sampling geometry once; forward and backward share it.
  struct Lerp {
    int lo, hi;
    double w_hi;  // weight of hi; lo gets 1 - w_hi
  };
  auto make_axis = [](int out_n, int in_n, double scale) {
    std::vector<Lerp> v(out_n);
    for (int i = 0; i < out_n; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      if (src > in_n - 1) src = in_n - 1;
      const int lo = static_cast<int>(std::floor(src));
      const int hi = std::min(lo + 1, in_n - 1);
      v[i] = {lo, hi, src - lo};
    }
    return v;
  };
  auto ys = std::make_shared<std::vector<Lerp>>(make_axis(out_h, h, sy));
  auto xs = std::make_shared<std::vector<Lerp>>(make_axis(out_w, w, sx));

  const double* px = x.data();
  double* po = out.data();
  for (int oy = 0; oy < out_h; ++oy) {
    const Lerp& ly = (*ys)[oy];
    for (int ox = 0; ox < out_w; ++ox) {
      const Lerp& lx = (*xs)[ox];
      const double w00 = (1.0 - ly.w_hi) * (1.0 - lx.w_hi);
      const double w01 = (1.0 - ly.w_hi) * lx.w_hi;
      const double w10 = ly.w_hi * (1.0 - lx.w_hi);
      const double w11 = ly.w_hi * lx.w_hi;
      const double* p00 = px + (static_cast<std::size_t>(ly.lo) * w + lx.lo) * c;
      const double* p01 = px + (static_cast<std::size_t>(ly.lo) * w + lx.hi) * c;
      const double* p10 = px + (static_cast<std::size_t>(ly.hi) * w + lx.lo) * c;
      const double* p11 = px + (static_cast<std::size_t>(ly.hi) * w + lx.hi) * c;
      double* orow = po + (static_cast<std::size_t>(oy) * out_w + ox) * c;
      for (int ch = 0; ch < c; ++ch) {
        orow[ch] = w00 * p00[ch] + w01 * p01[ch] + w10 * p10[ch] + w11 * p11[ch];
      }
    }
  }

  finalize("bilinear_resize", out, {&x},
           [xi = x.impl(), oi = out.impl(), ys, xs, out_h, out_w, w, c] {
             const auto* g = out_grad(oi);
             if (!g || !xi->requires_grad) return;
             xi->ensure_grad();
             const double* pg = g->data();
             for (int oy = 0; oy < out_h; ++oy) {
               const Lerp& ly = (*ys)[oy];
               for (int ox = 0; ox < out_w; ++ox) {
                 const Lerp& lx = (*xs)[ox];
                 const double w00 = (1.0 - ly.w_hi) * (1.0 - lx.w_hi);
                 const double w01 = (1.0 - ly.w_hi) * lx.w_hi;
                 const double w10 = ly.w_hi * (1.0 - lx.w_hi);
                 const double w11 = ly.w_hi * lx.w_hi;
                 const std::size_t b00 = (static_cast<std::size_t>(ly.lo) * w + lx.lo) * c;
                 const std::size_t b01 = (static_cast<std::size_t>(ly.lo) * w + lx.hi) * c;
                 const std::size_t b10 = (static_cast<std::size_t>(ly.hi) * w + lx.lo) * c;
                 const std::size_t b11 = (static_cast<std::size_t>(ly.hi) * w + lx.hi) * c;
                 const double* grow =
                     pg + (static_cast<std::size_t>(oy) * out_w + ox) * c;
                 for (int ch = 0; ch < c; ++ch) {
                   xi->grad[b00 + ch] += w00 * grow[ch];
                   xi->grad[b01 + ch] += w01 * grow[ch];
                   xi->grad[b10 + ch] += w10 * grow[ch];
                   xi->grad[b11 + ch] += w11 * grow[ch];
                 }
               }
             }
           });
  return out;
}

}  // namespace xvseg
