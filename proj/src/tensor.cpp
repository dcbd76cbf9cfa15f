#include "xvseg/tensor.hpp"

#include <cmath>
#include <sstream>

namespace xvseg {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data.assign(shape_numel(shape), 0.0);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(const Shape& shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data.assign(shape_numel(shape), value);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data,
                         bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    throw ShapeError("from_data: " + std::to_string(data.size()) +
                     " values do not fill shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item: tensor of shape " + shape_str(shape()) +
                     " is not a scalar");
  }
  return impl_->data[0];
}

Tensor Tensor::detached_copy() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = false;
  return Tensor(std::move(impl));
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::current() { return g_active_tape; }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::function<void()> backward_fn) {
  if (consumed_) {
    throw ContractError("Tape::record: tape already consumed by backward");
  }
  records_.push_back({std::move(inputs), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) {
    throw ContractError("Tape::backward: backward already ran on this tape");
  }
  consumed_ = true;
  if (loss.size() != 1) {
    throw ShapeError("Tape::backward: loss must be scalar, got shape " +
                     shape_str(loss.shape()));
  }
  if (!std::isfinite(loss.item())) {
    throw NumericError("Tape::backward: loss is not finite (" +
                       std::to_string(loss.item()) + ")");
  }
  loss.impl()->ensure_grad();
  loss.impl()->grad[0] += 1.0;

  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    it->fn();
    for (const auto& input : it->inputs) {
      for (double g : input->grad) {
        if (!std::isfinite(g)) {
          throw NumericError("Tape::backward: non-finite gradient produced");
        }
      }
    }
  }
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.vec()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced non-finite value");
    }
  }
}

}  // namespace xvseg
