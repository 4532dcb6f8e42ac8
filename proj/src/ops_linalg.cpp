#include "cymba/ops.hpp"

#include <cmath>

namespace cymba {

namespace {
using detail::check;
using detail::op_result;

void check_perm(const std::vector<Index>& perm, Index n, const char* what) {
  check(static_cast<Index>(perm.size()) == n, std::string(what) + ": permutation size mismatch");
}
}  // namespace

Tensor reshape(const Tensor& a, Shape shape) {
  check(numel(shape) == a.size(), "reshape: element count mismatch");
  Tensor out = op_result(std::move(shape), a.value(), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on] {
      if (on->has_grad() && an->requires_grad) an->accumulate(on->grad);
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  check(a.rank() == 2, "transpose: rank-2 only");
  const Index R = a.extent(0), K = a.extent(1);
  Array v(a.size());
  MapMat(v.data(), K, R) = MapConstMat(a.value().data(), R, K).transpose();
  Tensor out = op_result({K, R}, std::move(v), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on, R, K] {
      if (!on->has_grad() || !an->requires_grad) return;
      Array d(an->value.size());
      MapMat(d.data(), R, K) = MapConstMat(on->grad.data(), K, R).transpose();
      an->accumulate(d);
    });
  }
  return out;
}

Tensor concat0(const std::vector<Tensor>& parts) {
  check(!parts.empty(), "concat0: no inputs");
  Shape tail = parts[0].shape();
  check(!tail.empty(), "concat0: rank-0 input");
  Index total0 = 0;
  bool rq = false;
  for (const Tensor& p : parts) {
    check(p.rank() == static_cast<Index>(tail.size()), "concat0: rank mismatch");
    for (size_t i = 1; i < tail.size(); ++i)
      check(p.shape()[i] == tail[i], "concat0: trailing extents differ");
    total0 += p.extent(0);
    rq = rq || p.requires_grad();
  }
  Shape out_shape = tail;
  out_shape[0] = total0;
  Array v(numel(out_shape));
  Index off = 0;
  for (const Tensor& p : parts) {
    v.segment(off, p.size()) = p.value();
    off += p.size();
  }
  Tensor out = op_result(std::move(out_shape), std::move(v), rq);
  if (out.requires_grad()) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    Tape::record([nodes, on] {
      if (!on->has_grad()) return;
      Index off = 0;
      for (const auto& pn : nodes) {
        if (pn->requires_grad) pn->accumulate(on->grad.segment(off, pn->value.size()));
        off += pn->value.size();
      }
    });
  }
  return out;
}

Tensor slice0(const Tensor& a, Index begin, Index count) {
  check(a.rank() >= 1, "slice0: rank-0 input");
  check(begin >= 0 && count >= 1 && begin + count <= a.extent(0), "slice0: range out of bounds");
  const Index stride = a.size() / a.extent(0);
  Shape out_shape = a.shape();
  out_shape[0] = count;
  Array v = a.value().segment(begin * stride, count * stride);
  Tensor out = op_result(std::move(out_shape), std::move(v), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on, begin, stride] {
      if (!on->has_grad() || !an->requires_grad) return;
      Array d = Array::Zero(an->value.size());
      d.segment(begin * stride, on->grad.size()) = on->grad;
      an->accumulate(d);
    });
  }
  return out;
}

Tensor repeat_inner(const Tensor& a, Index n) {
  check(n >= 1, "repeat_inner: n must be positive");
  const Index m = a.size();
  Array v(m * n);
  MapMat(v.data(), m, n).colwise() = Eigen::Map<const Eigen::VectorXd>(a.value().data(), m);
  Shape out_shape = a.shape();
  out_shape.push_back(n);
  Tensor out = op_result(std::move(out_shape), std::move(v), a.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto on = out.node();
    Tape::record([an, on, m, n] {
      if (!on->has_grad() || !an->requires_grad) return;
      Array d(m);
      Eigen::Map<Eigen::VectorXd>(d.data(), m) =
          MapConstMat(on->grad.data(), m, n).rowwise().sum();
      an->accumulate(d);
    });
  }
  return out;
}

namespace {

enum class PermAxis { Rows, Cols };
enum class PermDir { Apply, Invert };

// Shared kernel for the four rank-2 permutation ops. Apply gathers
// (out[t] = x[perm[t]]); Invert scatters (out[perm[t]] = x[t]). The adjoint
// of a gather is the matching scatter and vice versa.
void permute_kernel(const Array& src, Array& dst, Index R, Index K,
                    const std::vector<Index>& perm, PermAxis axis, PermDir dir) {
  if (axis == PermAxis::Rows) {
    MapConstMat s(src.data(), R, K);
    MapMat d(dst.data(), R, K);
    for (Index t = 0; t < R; ++t) {
      if (dir == PermDir::Apply)
        d.row(t) = s.row(perm[static_cast<size_t>(t)]);
      else
        d.row(perm[static_cast<size_t>(t)]) = s.row(t);
    }
  } else {
    MapConstMat s(src.data(), R, K);
    MapMat d(dst.data(), R, K);
    for (Index t = 0; t < K; ++t) {
      if (dir == PermDir::Apply)
        d.col(t) = s.col(perm[static_cast<size_t>(t)]);
      else
        d.col(perm[static_cast<size_t>(t)]) = s.col(t);
    }
  }
}

Tensor permute_impl(const Tensor& x, const std::vector<Index>& perm, PermAxis axis,
                    PermDir dir, const char* what) {
  check(x.rank() == 2, std::string(what) + ": rank-2 only");
  const Index R = x.extent(0), K = x.extent(1);
  check_perm(perm, axis == PermAxis::Rows ? R : K, what);
  Array v(x.size());
  permute_kernel(x.value(), v, R, K, perm, axis, dir);
  Tensor out = op_result(x.shape(), std::move(v), x.requires_grad());
  if (out.requires_grad()) {
    auto xn = x.node();
    auto on = out.node();
    const PermDir inv = dir == PermDir::Apply ? PermDir::Invert : PermDir::Apply;
    Tape::record([xn, on, perm, R, K, axis, inv] {
      if (!on->has_grad() || !xn->requires_grad) return;
      Array d(xn->value.size());
      permute_kernel(on->grad, d, R, K, perm, axis, inv);
      xn->accumulate(d);
    });
  }
  return out;
}

}  // namespace

Tensor permute_cols(const Tensor& x, const std::vector<Index>& perm) {
  return permute_impl(x, perm, PermAxis::Cols, PermDir::Apply, "permute_cols");
}

Tensor unpermute_cols(const Tensor& x, const std::vector<Index>& perm) {
  return permute_impl(x, perm, PermAxis::Cols, PermDir::Invert, "unpermute_cols");
}

Tensor permute_rows(const Tensor& x, const std::vector<Index>& perm) {
  return permute_impl(x, perm, PermAxis::Rows, PermDir::Apply, "permute_rows");
}

Tensor unpermute_rows(const Tensor& x, const std::vector<Index>& perm) {
  return permute_impl(x, perm, PermAxis::Rows, PermDir::Invert, "unpermute_rows");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 only");
  const Index m = a.extent(0), k = a.extent(1), n = b.extent(1);
  check(b.extent(0) == k, "matmul: inner extents differ");
  Array v(m * n);
  MapMat(v.data(), m, n).noalias() =
      MapConstMat(a.value().data(), m, k) * MapConstMat(b.value().data(), k, n);
  Tensor out = op_result({m, n}, std::move(v), a.requires_grad() || b.requires_grad());
  if (out.requires_grad()) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    Tape::record([an, bn, on, m, k, n] {
      if (!on->has_grad()) return;
      MapConstMat g(on->grad.data(), m, n);
      if (an->requires_grad) {
        Array da(m * k);
        MapMat(da.data(), m, k).noalias() = g * MapConstMat(bn->value.data(), k, n).transpose();
        an->accumulate(da);
      }
      if (bn->requires_grad) {
        Array db(k * n);
        MapMat(db.data(), k, n).noalias() = MapConstMat(an->value.data(), m, k).transpose() * g;
        bn->accumulate(db);
      }
    });
  }
  return out;
}

Tensor softmax0(const Tensor& x) {
  check(x.rank() == 2, "softmax0: rank-2 only");
  const Index C = x.extent(0), V = x.extent(1);
  Array v(x.size());
  {
    MapConstMat xm(x.value().data(), C, V);
    MapMat p(v.data(), C, V);
    for (Index j = 0; j < V; ++j) {
      const double mx = xm.col(j).maxCoeff();
      p.col(j) = (xm.col(j).array() - mx).exp();
      p.col(j) /= p.col(j).sum();
    }
  }
  Tensor out = op_result(x.shape(), std::move(v), x.requires_grad());
  if (out.requires_grad()) {
    auto xn = x.node();
    auto on = out.node();
    Tape::record([xn, on, C, V] {
      if (!on->has_grad() || !xn->requires_grad) return;
      MapConstMat p(on->value.data(), C, V);
      MapConstMat g(on->grad.data(), C, V);
      Array d(xn->value.size());
      MapMat dm(d.data(), C, V);
      for (Index j = 0; j < V; ++j) {
        const double dot = (g.col(j).array() * p.col(j).array()).sum();
        dm.col(j) = p.col(j).array() * (g.col(j).array() - dot);
      }
      xn->accumulate(d);
    });
  }
  return out;
}

namespace {

// Shared normalization kernel. Normalizes each row of (R, K) to zero mean and
// unit variance over K, then applies an affine transform whose parameters are
// indexed per column (layer_norm) or per row (channel_norm).
Tensor norm_impl(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                 bool affine_per_col, const char* what) {
  check(x.rank() == 2, std::string(what) + ": rank-2 only");
  const Index R = x.extent(0), K = x.extent(1);
  const Index pn = affine_per_col ? K : R;
  check(gamma.rank() == 1 && gamma.extent(0) == pn, std::string(what) + ": gamma shape");
  check(beta.rank() == 1 && beta.extent(0) == pn, std::string(what) + ": beta shape");
  check(eps > 0.0, std::string(what) + ": eps must be positive");

  Array xhat(x.size());
  Array inv_std(R);
  Array v(x.size());
  {
    MapConstMat xm(x.value().data(), R, K);
    MapMat hm(xhat.data(), R, K);
    MapMat vm(v.data(), R, K);
    for (Index r = 0; r < R; ++r) {
      const double mean = xm.row(r).mean();
      const double var = (xm.row(r).array() - mean).square().mean();
      const double s = 1.0 / std::sqrt(var + eps);
      inv_std[r] = s;
      hm.row(r) = (xm.row(r).array() - mean) * s;
      if (affine_per_col)
        vm.row(r) = hm.row(r).array() * Eigen::Map<const Eigen::RowVectorXd>(
                                            gamma.value().data(), K)
                                            .array() +
                    Eigen::Map<const Eigen::RowVectorXd>(beta.value().data(), K).array();
      else
        vm.row(r) = hm.row(r).array() * gamma.value()[r] + beta.value()[r];
    }
  }
  const bool rq = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
  Tensor out = op_result(x.shape(), std::move(v), rq);
  if (out.requires_grad()) {
    auto xn = x.node();
    auto gn = gamma.node();
    auto bn = beta.node();
    auto on = out.node();
    auto xh = std::make_shared<Array>(std::move(xhat));
    auto istd = std::make_shared<Array>(std::move(inv_std));
    Tape::record([xn, gn, bn, on, xh, istd, R, K, affine_per_col] {
      if (!on->has_grad()) return;
      MapConstMat g(on->grad.data(), R, K);
      MapConstMat hm(xh->data(), R, K);
      if (bn->requires_grad) {
        Array db(bn->value.size());
        if (affine_per_col)
          Eigen::Map<Eigen::RowVectorXd>(db.data(), K) = g.colwise().sum();
        else
          Eigen::Map<Eigen::VectorXd>(db.data(), R) = g.rowwise().sum();
        bn->accumulate(db);
      }
      if (gn->requires_grad) {
        Array dg(gn->value.size());
        if (affine_per_col)
          Eigen::Map<Eigen::RowVectorXd>(dg.data(), K) =
              (g.array() * hm.array()).colwise().sum();
        else
          Eigen::Map<Eigen::VectorXd>(dg.data(), R) =
              (g.array() * hm.array()).rowwise().sum();
        gn->accumulate(dg);
      }
      if (xn->requires_grad) {
        Array dx(xn->value.size());
        MapMat dxm(dx.data(), R, K);
        for (Index r = 0; r < R; ++r) {
          Eigen::ArrayXd dh(K);
          if (affine_per_col)
            dh = g.row(r).transpose().array() *
                 Eigen::Map<const Eigen::VectorXd>(gn->value.data(), K).array();
          else
            dh = g.row(r).transpose().array() * gn->value[r];
          const double mean_dh = dh.mean();
          const double mean_dh_h = (dh * hm.row(r).transpose().array()).mean();
          dxm.row(r) = ((dh - mean_dh - hm.row(r).transpose().array() * mean_dh_h) *
                        (*istd)[r])
                           .transpose();
        }
        xn->accumulate(dx);
      }
    });
  }
  return out;
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  return norm_impl(x, gamma, beta, eps, true, "layer_norm");
}

Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  return norm_impl(x, gamma, beta, eps, false, "channel_norm");
}

}  // namespace cymba
