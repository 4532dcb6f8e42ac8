#pragma once

#include "cymba/ops.hpp"

namespace cymba {

// Below this magnitude of delta*a the closed-form input factor switches to
// its series limit to avoid catastrophic cancellation.
inline constexpr double kZohSeriesThreshold = 1e-8;

// (exp(delta*a) - 1) / a, or delta when |delta*a| < kZohSeriesThreshold.
double zoh_input_factor(double delta, double a);
// Partial derivatives of zoh_input_factor, branch-consistent with it.
double zoh_input_factor_ddelta(double delta, double a);
double zoh_input_factor_da(double delta, double a);

// Continuous-time parameters of a single-input single-output state-space
// model with diagonal state matrix. delta is the step size, shape {1}.
struct SsmParams {
  Tensor a_diag;  // (N)
  Tensor b;       // (N)
  Tensor c;       // (N)
  Tensor delta;   // {1}, > 0
};

// Zero-order-hold discretization of SsmParams. c_bar aliases the continuous
// c exactly (the hold leaves the output map untouched).
struct DiscreteSsm {
  Tensor a_bar;  // (N)
  Tensor b_bar;  // (N)
  Tensor c_bar;  // (N)
};

DiscreteSsm discretize(const SsmParams& p);

// Sequential recurrence h_t = a_bar∘h_{t-1} + b_bar*x_t, y_t = <c_bar, h_t>.
// seq is (T), h0 is (N); returns (T).
Tensor selective_scan(const Tensor& seq, const DiscreteSsm& m, const Tensor& h0);

// Input-dependent form over token sequences, discretized per step inside the
// op. u and delta are (T,D); a is (D,N); B and C are (T,N). The state starts
// at zero. Returns (T,D).
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& a,
                      const Tensor& B, const Tensor& C);

}  // namespace cymba
