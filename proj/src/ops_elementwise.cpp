#include "cymba/ops.hpp"

#include <cmath>

namespace cymba {

namespace {

using detail::check;
using detail::op_result;

// b must be a trailing suffix of a; returns how many times b tiles into a.
Index broadcast_reps(const char* op, const Shape& a, const Shape& b) {
  check(b.size() <= a.size(), std::string(op) + ": rhs rank exceeds lhs rank");
  const size_t off = a.size() - b.size();
  for (size_t i = 0; i < b.size(); ++i)
    check(a[off + i] == b[i], std::string(op) + ": rhs shape " + shape_str(b) +
                                  " is not a suffix of " + shape_str(a));
  const Index nb = numel(b);
  return nb == 0 ? 0 : numel(a) / nb;
}

Array reduce_to_suffix(const Array& g, Index reps, Index nb) {
  MapConstMat m(g.data(), reps, nb);
  Array out(nb);
  Eigen::Map<Eigen::RowVectorXd>(out.data(), nb) = m.colwise().sum();
  return out;
}

template <class Fwd, class Back>
Tensor binary_broadcast(const char* op, const Tensor& a, const Tensor& b, Fwd fwd,
                        Back back) {
  const Index reps = broadcast_reps(op, a.shape(), b.shape());
  const Index nb = b.size();
  Array v(a.size());
  {
    MapConstMat am(a.value().data(), reps, nb);
    Eigen::Map<const Eigen::RowVectorXd> bv(b.value().data(), nb);
    MapMat vm(v.data(), reps, nb);
    fwd(am, bv, vm);
  }
  Tensor out = op_result(a.shape(), std::move(v), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    Tape::record([an, bn, on, reps, nb, back] {
      if (!on->has_grad()) return;
      back(*an, *bn, *on, reps, nb);
    });
  }
  return out;
}

template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF df) {
  Array v(a.size());
  for (Index i = 0; i < v.size(); ++i) v[i] = f(a.value()[i]);
  Tensor out = op_result(a.shape(), std::move(v), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on, df] {
      if (!on->has_grad() || !an->requires_grad) return;
      Array d(an->value.size());
      for (Index i = 0; i < d.size(); ++i) d[i] = df(an->value[i], on->value[i]);
      an->accumulate(d * on->grad);
    });
  }
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      "add", a, b,
      [](const MapConstMat& am, const auto& bv, MapMat& vm) { vm = am.rowwise() + bv; },
      [](TensorNode& an, TensorNode& bn, TensorNode& on, Index reps, Index nb) {
        if (an.requires_grad) an.accumulate(on.grad);
        if (bn.requires_grad) bn.accumulate(reduce_to_suffix(on.grad, reps, nb));
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      "sub", a, b,
      [](const MapConstMat& am, const auto& bv, MapMat& vm) { vm = am.rowwise() - bv; },
      [](TensorNode& an, TensorNode& bn, TensorNode& on, Index reps, Index nb) {
        if (an.requires_grad) an.accumulate(on.grad);
        if (bn.requires_grad) bn.accumulate(-reduce_to_suffix(on.grad, reps, nb));
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      "mul", a, b,
      [](const MapConstMat& am, const auto& bv, MapMat& vm) {
        vm = am.array().rowwise() * bv.array();
      },
      [](TensorNode& an, TensorNode& bn, TensorNode& on, Index reps, Index nb) {
        if (an.requires_grad) {
          Array da(on.grad.size());
          MapConstMat g(on.grad.data(), reps, nb);
          Eigen::Map<const Eigen::RowVectorXd> bv(bn.value.data(), nb);
          MapMat dam(da.data(), reps, nb);
          dam = g.array().rowwise() * bv.array();
          an.accumulate(da);
        }
        if (bn.requires_grad) {
          Array prod = on.grad * an.value;
          bn.accumulate(reduce_to_suffix(prod, reps, nb));
        }
      });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor reciprocal(const Tensor& a) {
  return unary_op(
      a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        if (x > 30.0) return x;
        if (x < -30.0) return std::exp(x);
        return std::log1p(std::exp(x));
      },
      [](double x, double) { return sigmoid(x); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  detail::check(lo <= hi, "clamp: lo > hi");
  return unary_op(
      a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor add_per_row(const Tensor& x, const Tensor& v) {
  detail::check(x.rank() == 2 && v.rank() == 1 && v.extent(0) == x.extent(0),
                "add_per_row: want (R,K) and (R)");
  const Index R = x.extent(0), K = x.extent(1);
  Array out(x.size());
  MapMat om(out.data(), R, K);
  om = MapConstMat(x.value().data(), R, K).colwise() +
       Eigen::Map<const Eigen::VectorXd>(v.value().data(), R);
  Tensor res = op_result(x.shape(), std::move(out), x.requires_grad() || v.requires_grad());
  if (res.requires_grad()) {
    auto xn = x.node();
    auto vn = v.node();
    auto on = res.node();
    Tape::record([xn, vn, on, R, K] {
      if (!on->has_grad()) return;
      if (xn->requires_grad) xn->accumulate(on->grad);
      if (vn->requires_grad) {
        Array dv(R);
        Eigen::Map<Eigen::VectorXd>(dv.data(), R) =
            MapConstMat(on->grad.data(), R, K).rowwise().sum();
        vn->accumulate(dv);
      }
    });
  }
  return res;
}

Tensor sum_all(const Tensor& a) {
  Tensor out = op_result({1}, Array::Constant(1, a.value().sum()), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on] {
      if (!on->has_grad() || !an->requires_grad) return;
      an->accumulate(Array::Constant(an->value.size(), on->grad[0]));
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  Tensor out = op_result({1}, Array::Constant(1, a.value().sum() / n), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on, n] {
      if (!on->has_grad() || !an->requires_grad) return;
      an->accumulate(Array::Constant(an->value.size(), on->grad[0] / n));
    });
  }
  return out;
}

}  // namespace cymba
