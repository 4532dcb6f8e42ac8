#include "cymba/ops.hpp"

#include <algorithm>

namespace cymba {

namespace {

using detail::check;
using detail::op_result;

using MatrixCM = Eigen::MatrixXd;
using StridedMap = Eigen::Map<MatrixRM, 0, Eigen::OuterStride<>>;
using StridedConstMap = Eigen::Map<const MatrixRM, 0, Eigen::OuterStride<>>;

struct ConvDims {
  Index Cin, L, W, H;
  Index Cout, kx, ky, kz;
  Index Lo, Wo, Ho;
  Index K;  // patch length Cin*kx*ky*kz
  Index N;  // output voxels Lo*Wo*Ho
};

Index out_extent(Index in, Index k, Index s, Index d, Index p, const char* axis) {
  const Index eff = d * (k - 1) + 1;
  const Index num = in + 2 * p - eff;
  check(num >= 0, std::string("conv3d: kernel does not fit along ") + axis);
  return num / s + 1;
}

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Conv3dSpec& s) {
  check(x.rank() == 4, "conv3d: input must be (C,L,W,H)");
  check(w.rank() == 5, "conv3d: weight must be (Cout,Cin,kx,ky,kz)");
  ConvDims d;
  d.Cin = x.extent(0);
  d.L = x.extent(1);
  d.W = x.extent(2);
  d.H = x.extent(3);
  d.Cout = w.extent(0);
  check(w.extent(1) == d.Cin, "conv3d: channel mismatch");
  d.kx = w.extent(2);
  d.ky = w.extent(3);
  d.kz = w.extent(4);
  check(s.kernel[0] == d.kx && s.kernel[1] == d.ky && s.kernel[2] == d.kz,
        "conv3d: spec kernel disagrees with weight extents");
  for (int i = 0; i < 3; ++i) {
    check(s.stride[i] >= 1 && s.dilation[i] >= 1 && s.padding[i] >= 0,
          "conv3d: bad stride/dilation/padding");
  }
  d.Lo = out_extent(d.L, d.kx, s.stride[0], s.dilation[0], s.padding[0], "x");
  d.Wo = out_extent(d.W, d.ky, s.stride[1], s.dilation[1], s.padding[1], "y");
  d.Ho = out_extent(d.H, d.kz, s.stride[2], s.dilation[2], s.padding[2], "z");
  d.K = d.Cin * d.kx * d.ky * d.kz;
  d.N = d.Lo * d.Wo * d.Ho;
  return d;
}

// Patch matrix for output columns [begin, begin+count), column-major K x count.
// Row order matches the flattened weight layout (c, a, b, dk innermost).
void im2col(const double* x, const ConvDims& d, const Conv3dSpec& s, Index begin,
            Index count, double* col) {
  const Index plane = d.W * d.H;
  for (Index jj = 0; jj < count; ++jj) {
    const Index j = begin + jj;
    const Index xo = j / (d.Wo * d.Ho);
    const Index yo = (j / d.Ho) % d.Wo;
    const Index zo = j % d.Ho;
    const Index xi0 = xo * s.stride[0] - s.padding[0];
    const Index yi0 = yo * s.stride[1] - s.padding[1];
    const Index zi0 = zo * s.stride[2] - s.padding[2];
    double* out = col + jj * d.K;
    for (Index c = 0; c < d.Cin; ++c) {
      const double* xc = x + c * d.L * plane;
      for (Index a = 0; a < d.kx; ++a) {
        const Index xi = xi0 + a * s.dilation[0];
        const bool xok = xi >= 0 && xi < d.L;
        for (Index b = 0; b < d.ky; ++b) {
          const Index yi = yi0 + b * s.dilation[1];
          const bool yok = yi >= 0 && yi < d.W;
          const double* row = xc + (xi * d.W + yi) * d.H;
          for (Index dk = 0; dk < d.kz; ++dk) {
            const Index zi = zi0 + dk * s.dilation[2];
            *out++ = (xok && yok && zi >= 0 && zi < d.H) ? row[zi] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds patch gradients back onto the input grid.
void col2im_add(const double* col, const ConvDims& d, const Conv3dSpec& s, Index begin,
                Index count, double* dx) {
  const Index plane = d.W * d.H;
  for (Index jj = 0; jj < count; ++jj) {
    const Index j = begin + jj;
    const Index xo = j / (d.Wo * d.Ho);
    const Index yo = (j / d.Ho) % d.Wo;
    const Index zo = j % d.Ho;
    const Index xi0 = xo * s.stride[0] - s.padding[0];
    const Index yi0 = yo * s.stride[1] - s.padding[1];
    const Index zi0 = zo * s.stride[2] - s.padding[2];
    const double* in = col + jj * d.K;
    for (Index c = 0; c < d.Cin; ++c) {
      double* xc = dx + c * d.L * plane;
      for (Index a = 0; a < d.kx; ++a) {
        const Index xi = xi0 + a * s.dilation[0];
        const bool xok = xi >= 0 && xi < d.L;
        for (Index b = 0; b < d.ky; ++b) {
          const Index yi = yi0 + b * s.dilation[1];
          const bool yok = yi >= 0 && yi < d.W;
          double* row = xc + (xi * d.W + yi) * d.H;
          for (Index dk = 0; dk < d.kz; ++dk) {
            const Index zi = zi0 + dk * s.dilation[2];
            if (xok && yok && zi >= 0 && zi < d.H) row[zi] += *in;
            ++in;
          }
        }
      }
    }
  }
}

Index conv_tile(Index K, Index N) {
  const Index budget = 262144;  // doubles per patch buffer (2 MB)
  return std::max<Index>(1, std::min(N, budget / std::max<Index>(K, 1)));
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor* bias, const Conv3dSpec& s) {
  const ConvDims d = conv_dims(x, w, s);
  if (bias)
    check(bias->rank() == 1 && bias->extent(0) == d.Cout, "conv3d: bias must be (Cout)");

  Array y(d.Cout * d.N);
  {
    const Index tile = conv_tile(d.K, d.N);
    MatrixCM col(d.K, tile);
    MapConstMat wm(w.value().data(), d.Cout, d.K);
    for (Index begin = 0; begin < d.N; begin += tile) {
      const Index count = std::min(tile, d.N - begin);
      im2col(x.value().data(), d, s, begin, count, col.data());
      StridedMap ym(y.data() + begin, d.Cout, count, Eigen::OuterStride<>(d.N));
      ym.noalias() = wm * col.leftCols(count);
    }
    if (bias) {
      MapMat ym(y.data(), d.Cout, d.N);
      ym.colwise() += Eigen::Map<const Eigen::VectorXd>(bias->value().data(), d.Cout);
    }
  }

  const bool rq =
      x.requires_grad() || w.requires_grad() || (bias && bias->requires_grad());
  Tensor out = op_result({d.Cout, d.Lo, d.Wo, d.Ho}, std::move(y), rq);
  if (out.requires_grad()) {
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias ? bias->node() : nullptr;
    auto on = out.node();
    Tape::record([xn, wn, bn, on, d, s] {
      if (!on->has_grad()) return;
      const Index tile = conv_tile(d.K, d.N);
      const bool need_dx = xn->requires_grad;
      const bool need_dw = wn->requires_grad;
      Array dx;
      Array dw;
      if (need_dx) dx = Array::Zero(xn->value.size());
      if (need_dw) dw = Array::Zero(wn->value.size());
      MatrixCM col(d.K, tile);
      MatrixCM gcol(d.K, tile);
      MapConstMat wm(wn->value.data(), d.Cout, d.K);
      for (Index begin = 0; begin < d.N && (need_dx || need_dw); begin += tile) {
        const Index count = std::min(tile, d.N - begin);
        StridedConstMap g(on->grad.data() + begin, d.Cout, count,
                          Eigen::OuterStride<>(d.N));
        if (need_dw) {
          im2col(xn->value.data(), d, s, begin, count, col.data());
          MapMat(dw.data(), d.Cout, d.K).noalias() += g * col.leftCols(count).transpose();
        }
        if (need_dx) {
          gcol.leftCols(count).noalias() = wm.transpose() * g;
          col2im_add(gcol.data(), d, s, begin, count, dx.data());
        }
      }
      if (need_dx) xn->accumulate(dx);
      if (need_dw) wn->accumulate(dw);
      if (bn && bn->requires_grad) {
        Array db(d.Cout);
        Eigen::Map<Eigen::VectorXd>(db.data(), d.Cout) =
            MapConstMat(on->grad.data(), d.Cout, d.N).rowwise().sum();
        bn->accumulate(db);
      }
    });
  }
  return out;
}

Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor* bias,
                        std::array<Index, 3> factor) {
  check(x.rank() == 4, "conv_transpose3d: input must be (C,l,w,h)");
  check(w.rank() == 5, "conv_transpose3d: weight must be (Cin,Cout,fx,fy,fz)");
  const Index Cin = x.extent(0), l = x.extent(1), wd = x.extent(2), h = x.extent(3);
  const Index Cout = w.extent(1);
  check(w.extent(0) == Cin, "conv_transpose3d: channel mismatch");
  for (int i = 0; i < 3; ++i) {
    check(factor[i] >= 1, "conv_transpose3d: factor must be positive");
    check(w.extent(2 + i) == factor[i], "conv_transpose3d: kernel must equal stride");
  }
  const Index fx = factor[0], fy = factor[1], fz = factor[2];
  const Index Lo = l * fx, Wo = wd * fy, Ho = h * fz;
  const Index M = Cout * fx * fy * fz;
  const Index n = l * wd * h;
  if (bias)
    check(bias->rank() == 1 && bias->extent(0) == Cout, "conv_transpose3d: bias must be (Cout)");

  Array y(Cout * Lo * Wo * Ho);
  {
    MatrixCM cols(M, n);
    cols.noalias() = MapConstMat(w.value().data(), Cin, M).transpose() *
                     MapConstMat(x.value().data(), Cin, n);
    double* out = y.data();
    for (Index o = 0; o < Cout; ++o) {
      for (Index j = 0; j < n; ++j) {
        const Index xi = j / (wd * h);
        const Index yi = (j / h) % wd;
        const Index zi = j % h;
        const double bias_v = bias ? bias->value()[o] : 0.0;
        for (Index a = 0; a < fx; ++a)
          for (Index b = 0; b < fy; ++b)
            for (Index dk = 0; dk < fz; ++dk) {
              const Index row = ((o * fx + a) * fy + b) * fz + dk;
              out[(o * Lo + xi * fx + a) * Wo * Ho + (yi * fy + b) * Ho + zi * fz + dk] =
                  cols(row, j) + bias_v;
            }
      }
    }
  }

  const bool rq =
      x.requires_grad() || w.requires_grad() || (bias && bias->requires_grad());
  Tensor out = op_result({Cout, Lo, Wo, Ho}, std::move(y), rq);
  if (out.requires_grad()) {
    auto xn = x.node();
    auto wn = w.node();
    auto bn = bias ? bias->node() : nullptr;
    auto on = out.node();
    Tape::record([xn, wn, bn, on, Cin, Cout, l, wd, h, fx, fy, fz, M, n, Lo, Wo, Ho] {
      if (!on->has_grad()) return;
      MatrixCM gcol(M, n);
      const double* g = on->grad.data();
      for (Index o = 0; o < Cout; ++o)
        for (Index j = 0; j < n; ++j) {
          const Index xi = j / (wd * h);
          const Index yi = (j / h) % wd;
          const Index zi = j % h;
          for (Index a = 0; a < fx; ++a)
            for (Index b = 0; b < fy; ++b)
              for (Index dk = 0; dk < fz; ++dk) {
                const Index row = ((o * fx + a) * fy + b) * fz + dk;
                gcol(row, j) =
                    g[(o * Lo + xi * fx + a) * Wo * Ho + (yi * fy + b) * Ho + zi * fz + dk];
              }
        }
      if (xn->requires_grad) {
        Array dx(xn->value.size());
        MapMat(dx.data(), Cin, n).noalias() =
            MapConstMat(wn->value.data(), Cin, M) * gcol;
        xn->accumulate(dx);
      }
      if (wn->requires_grad) {
        Array dw(wn->value.size());
        MapMat(dw.data(), Cin, M).noalias() =
            MapConstMat(xn->value.data(), Cin, n) * gcol.transpose();
        wn->accumulate(dw);
      }
      if (bn && bn->requires_grad) {
        Array db(Cout);
        Eigen::Map<Eigen::VectorXd>(db.data(), Cout) =
            MapConstMat(on->grad.data(), Cout, Lo * Wo * Ho).rowwise().sum();
        bn->accumulate(db);
      }
    });
  }
  return out;
}

}  // namespace cymba
