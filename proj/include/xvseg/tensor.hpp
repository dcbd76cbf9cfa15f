#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace xvseg {

// Error taxonomy. Everything the library throws derives from Error so the
// CLI can map failure classes to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Invalid scalar parameter (temperature <= 0, gamma outside [0,1], ...).
class ParamError : public Error {
 public:
  explicit ParamError(const std::string& msg) : Error(msg) {}
};

// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf produced by an operation; training divergence.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// API misuse (backward called twice, empty accumulator, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward rule touches it
  bool requires_grad = false;

  // Allocates the gradient buffer (zeroed) if absent.
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

// Dense N-d array of doubles, row-major. Value-semantics handle to a shared
// payload: copies alias the same storage. Treat tensors as immutable once
// they have been consumed by an op; the gradient buffer is the only field
// mutated afterwards (during backward).
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return impl_->data.size(); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  // Element accessors for the ranks the library actually uses.
  double& at(int i) { return impl_->data[static_cast<std::size_t>(i)]; }
  double at(int i) const { return impl_->data[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) {
    return impl_->data[static_cast<std::size_t>(i) * dim(1) + j];
  }
  double at(int i, int j) const {
    return impl_->data[static_cast<std::size_t>(i) * dim(1) + j];
  }
  double& at(int y, int x, int c) {
    return impl_->data[(static_cast<std::size_t>(y) * dim(1) + x) * dim(2) + c];
  }
  double at(int y, int x, int c) const {
    return impl_->data[(static_cast<std::size_t>(y) * dim(1) + x) * dim(2) + c];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<double>& grad() const { return impl_->grad; }
  std::vector<double>& grad_buffer() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  void zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }

  double item() const;

  // Deep copy of values; the copy does not participate in any graph.
  Tensor detached_copy() const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Records the backward rules of one forward pass. Single-owner: a tape must
// not be shared across concurrently running forward passes. Ops record onto
// the thread's active tape (see Scope), so independent passes on separate
// threads with separate tapes are safe.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // RAII: makes `tape` the active tape for the current thread.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* current();

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and runs recorded rules newest-first,
  // accumulating gradients additively into every tensor that requires them.
  // Callable exactly once per tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Record {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::function<void()> fn;
  };
  std::vector<Record> records_;
  bool consumed_ = false;
};

// Throws NumericError if any entry of `t` is NaN/Inf. `op` names the
// producing operation in the message.
void check_finite(const Tensor& t, const char* op);

}  // namespace xvseg
