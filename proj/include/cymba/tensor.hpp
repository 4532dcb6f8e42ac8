#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace cymba {

using Index = Eigen::Index;
using Array = Eigen::ArrayXd;
using Shape = std::vector<Index>;

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<MatrixRM>;
using MapConstMat = Eigen::Map<const MatrixRM>;

Index numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// One node of the computation graph. Values and gradients are flat row-major
// buffers; shape is carried separately. Gradient storage is allocated lazily
// on first accumulation so dead branches cost nothing.
struct TensorNode {
  Shape shape;
  Array value;
  Array grad;
  bool requires_grad = false;

  bool has_grad() const { return grad.size() == value.size(); }
  void accumulate(const Array& g);
  void zero_grad() { grad.resize(0); }
};

// Shared handle to a TensorNode. Copying a Tensor aliases the node, which is
// what both the tape and parameter registries rely on.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor from_array(Shape shape, Array data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index size() const { return node_->value.size(); }
  Index extent(int axis) const { return node_->shape.at(static_cast<size_t>(axis)); }

  const Array& value() const { return node_->value; }
  Array& raw_value() { return node_->value; }
  double item() const;

  const Array& grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rq) { node_->requires_grad = rq; }
  void zero_grad() { node_->zero_grad(); }

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;
};

// Records backward closures in forward order and replays them in reverse.
// Ops only record onto the tape installed by the innermost TapeScope; with no
// scope active, forward math runs gradient-free.
class Tape {
 public:
  static Tape* current();
  static bool active() { return current() != nullptr; }
  static void record(std::function<void()> step);

  // Seeds d(loss)/d(loss) = 1, replays the tape in reverse, then clears it.
  void backward(const Tensor& loss);

  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

 private:
  friend class TapeScope;
  friend void detail_record(Tape*, std::function<void()>);
  std::vector<std::function<void()>> steps_;
};

class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

namespace detail {

// Result constructor for op implementations: decides requires_grad from the
// inputs and the presence of an active tape.
Tensor op_result(Shape shape, Array value, bool any_input_requires_grad);

inline MapConstMat mat(const Tensor& t, Index rows, Index cols) {
  return MapConstMat(t.value().data(), rows, cols);
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

}  // namespace cymba
