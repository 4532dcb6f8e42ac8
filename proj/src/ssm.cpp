#include "cymba/ssm.hpp"

#include <cmath>

namespace cymba {

namespace {
using detail::check;
using detail::op_result;

bool in_series_branch(double delta, double a) {
  return std::abs(delta * a) < kZohSeriesThreshold;
}
}  // namespace

double zoh_input_factor(double delta, double a) {
  if (in_series_branch(delta, a)) return delta;
  return (std::exp(delta * a) - 1.0) / a;
}

double zoh_input_factor_ddelta(double delta, double a) {
  if (in_series_branch(delta, a)) return 1.0;
  return std::exp(delta * a);
}

double zoh_input_factor_da(double delta, double a) {
  if (in_series_branch(delta, a)) return 0.5 * delta * delta;
  const double e = std::exp(delta * a);
  return (delta * a * e - (e - 1.0)) / (a * a);
}

DiscreteSsm discretize(const SsmParams& p) {
  check(p.a_diag.rank() == 1 && p.b.rank() == 1 && p.c.rank() == 1,
        "discretize: a_diag, b, c must be rank 1");
  const Index N = p.a_diag.extent(0);
  check(p.b.extent(0) == N && p.c.extent(0) == N, "discretize: state size mismatch");
  check(p.delta.size() == 1, "discretize: delta must be scalar");
  const double dt = p.delta.value()[0];
  check(std::isfinite(dt) && dt > 0.0, "discretize: delta must be finite and positive");
  check(p.a_diag.value().isFinite().all() && p.b.value().isFinite().all(),
        "discretize: non-finite parameters");

  Array a_bar(N), b_bar(N);
  for (Index n = 0; n < N; ++n) {
    const double a = p.a_diag.value()[n];
    a_bar[n] = std::exp(dt * a);
    b_bar[n] = zoh_input_factor(dt, a) * p.b.value()[n];
  }
  check(a_bar.isFinite().all() && b_bar.isFinite().all(),
        "discretize: non-finite discretization");

  const bool rq =
      p.a_diag.requires_grad() || p.b.requires_grad() || p.delta.requires_grad();
  Tensor ab = op_result({N}, std::move(a_bar), rq);
  Tensor bb = op_result({N}, std::move(b_bar), rq);
  if (ab.requires_grad() || bb.requires_grad()) {
    auto an = p.a_diag.node();
    auto bn = p.b.node();
    auto dn = p.delta.node();
    auto abn = ab.node();
    auto bbn = bb.node();
    Tape::record([an, bn, dn, abn, bbn, N] {
      const bool g_ab = abn->has_grad();
      const bool g_bb = bbn->has_grad();
      if (!g_ab && !g_bb) return;
      const double dt = dn->value[0];
      Array da = Array::Zero(N), db = Array::Zero(N);
      double ddt = 0.0;
      for (Index n = 0; n < N; ++n) {
        const double a = an->value[n];
        const double abar = abn->value[n];
        if (g_ab) {
          const double g = abn->grad[n];
          da[n] += g * dt * abar;
          ddt += g * a * abar;
        }
        if (g_bb) {
          const double g = bbn->grad[n];
          const double bv = bn->value[n];
          da[n] += g * bv * zoh_input_factor_da(dt, a);
          db[n] += g * zoh_input_factor(dt, a);
          ddt += g * bv * zoh_input_factor_ddelta(dt, a);
        }
      }
      if (an->requires_grad) an->accumulate(da);
      if (bn->requires_grad) bn->accumulate(db);
      if (dn->requires_grad) dn->accumulate(Array::Constant(1, ddt));
    });
  }
  return DiscreteSsm{ab, bb, p.c};
}

Tensor selective_scan(const Tensor& seq, const DiscreteSsm& m, const Tensor& h0) {
  check(seq.rank() == 1, "selective_scan: seq must be rank 1");
  const Index T = seq.extent(0);
  const Index N = m.a_bar.extent(0);
  check(m.b_bar.extent(0) == N && m.c_bar.extent(0) == N,
        "selective_scan: model state size mismatch");
  check(h0.rank() == 1 && h0.extent(0) == N, "selective_scan: h0 state size mismatch");

  auto hs = std::make_shared<Array>(Array((T + 1) * N));
  hs->segment(0, N) = h0.value();
  Array y(T);
  {
    const Array& ab = m.a_bar.value();
    const Array& bb = m.b_bar.value();
    const Array& cb = m.c_bar.value();
    for (Index t = 0; t < T; ++t) {
      auto h_prev = hs->segment(t * N, N);
      auto h = hs->segment((t + 1) * N, N);
      h = ab * h_prev + bb * seq.value()[t];
      y[t] = (cb * h).sum();
    }
  }

  const bool rq = seq.requires_grad() || m.a_bar.requires_grad() ||
                  m.b_bar.requires_grad() || m.c_bar.requires_grad() ||
                  h0.requires_grad();
  Tensor out = op_result({T}, std::move(y), rq);
  if (out.requires_grad()) {
    auto sn = seq.node();
    auto abn = m.a_bar.node();
    auto bbn = m.b_bar.node();
    auto cbn = m.c_bar.node();
    auto hn = h0.node();
    auto on = out.node();
    Tape::record([sn, abn, bbn, cbn, hn, on, hs, T, N] {
      if (!on->has_grad()) return;
      Array gh = Array::Zero(N);
      Array da = Array::Zero(N), db = Array::Zero(N), dc = Array::Zero(N);
      Array dx = Array::Zero(T);
      for (Index t = T - 1; t >= 0; --t) {
        const double gy = on->grad[t];
        auto h = hs->segment((t + 1) * N, N);
        auto h_prev = hs->segment(t * N, N);
        dc += gy * h;
        gh += gy * cbn->value;
        da += gh * h_prev;
        db += gh * sn->value[t];
        dx[t] = (gh * bbn->value).sum();
        gh *= abn->value;
      }
      if (sn->requires_grad) sn->accumulate(dx);
      if (abn->requires_grad) abn->accumulate(da);
      if (bbn->requires_grad) bbn->accumulate(db);
      if (cbn->requires_grad) cbn->accumulate(dc);
      if (hn->requires_grad) hn->accumulate(gh);
    });
  }
  return out;
}

Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a,
                      const Tensor& B, const Tensor& C) {
  check(u.rank() == 2 && delta.rank() == 2, "selective_scan: u and delta must be (T,D)");
  const Index T = u.extent(0), D = u.extent(1);
  check(same_shape(delta.shape(), u.shape()), "selective_scan: delta shape mismatch");
  check(a.rank() == 2 && a.extent(0) == D, "selective_scan: a must be (D,N)");
  const Index N = a.extent(1);
  check(B.rank() == 2 && B.extent(0) == T && B.extent(1) == N,
        "selective_scan: B must be (T,N)");
  check(C.rank() == 2 && C.extent(0) == T && C.extent(1) == N,
        "selective_scan: C must be (T,N)");

  // Saved post-update states, laid out (D, T, N) so per-channel backward
  // passes walk contiguous memory.
  auto hs = std::make_shared<Array>(Array::Zero(D * T * N));
  Array y(T * D);
  {
    const double* uv = u.value().data();
    const double* dv = delta.value().data();
    const double* av = a.value().data();
    const double* Bv = B.value().data();
    const double* Cv = C.value().data();
    for (Index d = 0; d < D; ++d) {
      const double* arow = av + d * N;
      double* hbase = hs->data() + d * T * N;
      for (Index t = 0; t < T; ++t) {
        const double dt = dv[t * D + d];
        const double ut = uv[t * D + d];
        const double* hp = t == 0 ? nullptr : hbase + (t - 1) * N;
        double* h = hbase + t * N;
        double acc = 0.0;
        for (Index n = 0; n < N; ++n) {
          const double abar = std::exp(dt * arow[n]);
          const double bbar = zoh_input_factor(dt, arow[n]) * Bv[t * N + n];
          const double prev = hp ? hp[n] : 0.0;
          h[n] = abar * prev + bbar * ut;
          acc += Cv[t * N + n] * h[n];
        }
        y[t * D + d] = acc;
      }
    }
  }

  const bool rq = u.requires_grad() || delta.requires_grad() || a.requires_grad() ||
                  B.requires_grad() || C.requires_grad();
  Tensor out = op_result({T, D}, std::move(y), rq);
  if (out.requires_grad()) {
    auto un = u.node();
    auto dn = delta.node();
    auto an = a.node();
    auto Bn = B.node();
    auto Cn = C.node();
    auto on = out.node();
    Tape::record([un, dn, an, Bn, Cn, on, hs, T, D, N] {
      if (!on->has_grad()) return;
      Array du = Array::Zero(T * D);
      Array ddelta = Array::Zero(T * D);
      Array da = Array::Zero(D * N);
      Array dB = Array::Zero(T * N);
      Array dC = Array::Zero(T * N);
      const double* uv = un->value.data();
      const double* dv = dn->value.data();
      const double* av = an->value.data();
      const double* Bv = Bn->value.data();
      const double* Cv = Cn->value.data();
      const double* gy = on->grad.data();
      Array gh(N);
      for (Index d = 0; d < D; ++d) {
        const double* arow = av + d * N;
        const double* hbase = hs->data() + d * T * N;
        gh.setZero();
        for (Index t = T - 1; t >= 0; --t) {
          const double g = gy[t * D + d];
          const double dt = dv[t * D + d];
          const double ut = uv[t * D + d];
          const double* h = hbase + t * N;
          const double* hp = t == 0 ? nullptr : hbase + (t - 1) * N;
          double ddt = 0.0;
          double duv = 0.0;
          for (Index n = 0; n < N; ++n) {
            const double an_v = arow[n];
            const double abar = std::exp(dt * an_v);
            const double f = zoh_input_factor(dt, an_v);
            const double bbar = f * Bv[t * N + n];
            dC[t * N + n] += g * h[n];
            double ghn = gh[n] + g * Cv[t * N + n];
            const double prev = hp ? hp[n] : 0.0;
            // h = abar*prev + f*B*u
            da[d * N + n] += ghn * (prev * dt * abar +
                                    ut * Bv[t * N + n] * zoh_input_factor_da(dt, an_v));
            ddt += ghn * (prev * an_v * abar +
                          ut * Bv[t * N + n] * zoh_input_factor_ddelta(dt, an_v));
            dB[t * N + n] += ghn * f * ut;
            duv += ghn * bbar;
            gh[n] = ghn * abar;
          }
          ddelta[t * D + d] = ddt;
          du[t * D + d] = duv;
        }
      }
      if (un->requires_grad) un->accumulate(du);
      if (dn->requires_grad) dn->accumulate(ddelta);
      if (an->requires_grad) an->accumulate(da);
      if (Bn->requires_grad) Bn->accumulate(dB);
      if (Cn->requires_grad) Cn->accumulate(dC);
    });
  }
  return out;
}

}  // namespace cymba
