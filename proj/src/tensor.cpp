#include "cymba/tensor.hpp"

#include <sstream>

namespace cymba {

Index numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

void TensorNode::accumulate(const Array& g) {
  if (g.size() != value.size())
    throw std::logic_error("gradient size mismatch");
  if (!has_grad()) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_array(std::move(shape), Array(), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  Array data = Array::Constant(numel(shape), v);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return full({1}, v, requires_grad);
}

Tensor Tensor::from_array(Shape shape, Array data, bool requires_grad) {
  const Index n = numel(shape);
  if (data.size() == 0) data = Array::Zero(n);
  if (data.size() != n)
    throw std::invalid_argument("tensor data does not match shape " + shape_str(shape));
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor");
  return node_->value[0];
}

const Array& Tensor::grad() const {
  if (!node_->has_grad())
    throw std::runtime_error("tensor has no gradient");
  return node_->grad;
}

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::function<void()> step) {
  if (g_current_tape) g_current_tape->steps_.push_back(std::move(step));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward requires a scalar loss");
  if (!loss.requires_grad())
    throw std::invalid_argument("loss is not connected to the tape");
  loss.node()->accumulate(Array::Constant(1, 1.0));
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_current_tape) {
  g_current_tape = &tape;
}

TapeScope::~TapeScope() { g_current_tape = prev_; }

namespace detail {

Tensor op_result(Shape shape, Array value, bool any_input_requires_grad) {
  const bool rq = Tape::active() && any_input_requires_grad;
  return Tensor::from_array(std::move(shape), std::move(value), rq);
}

}  // namespace detail

}  // namespace cymba
