#pragma once

#include "cymba/checkpoint.hpp"
#include "cymba/ops.hpp"
#include "cymba/rng.hpp"
#include "cymba/scan_order.hpp"
#include "cymba/ssm.hpp"

namespace cymba {

// Uniform(-bound, bound) initialization drawn from the given stream.
Tensor init_uniform(Shape shape, double bound, Rng& rng);

// (C, L, W, H) -> (C, V) and back; pure reshapes.
Tensor as_rows(const Tensor& vol);
Tensor as_volume(const Tensor& rows, const Shape& vol_shape);

struct Linear {
  Tensor w;  // (in, out)
  Tensor b;  // (out), absent when bias is disabled

  Linear() = default;
  Linear(Index in, Index out, Rng& rng, bool bias = true);
  Tensor forward(const Tensor& x) const;  // (T, in) -> (T, out)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct Conv3 {
  Tensor w;  // (Cout, Cin, kx, ky, kz)
  Tensor b;  // (Cout)
  Conv3dSpec spec;

  Conv3() = default;
  // Same-extent padding (dilation*(k-1)/2 per axis) unless stride > 1, in
  // which case padding is zero and extents must divide exactly.
  Conv3(Index cin, Index cout, std::array<Index, 3> kernel, Rng& rng,
        std::array<Index, 3> stride = {1, 1, 1}, std::array<Index, 3> dilation = {1, 1, 1});
  Tensor forward(const Tensor& vol) const;
  void zero_init();
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct Deconv3 {
  Tensor w;  // (Cin, Cout, fx, fy, fz)
  Tensor b;  // (Cout)
  std::array<Index, 3> factor{1, 1, 1};

  Deconv3() = default;
  Deconv3(Index cin, Index cout, std::array<Index, 3> factor, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct LayerNormP {
  Tensor gamma, beta;  // (K)
  double eps = 1e-5;

  LayerNormP() = default;
  explicit LayerNormP(Index k);
  Tensor forward(const Tensor& x) const;  // (R, K)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Per-channel normalization of a volume: statistics over space, affine per
// channel. Fills the batch-norm role at batch size one.
struct ChannelNorm3 {
  Tensor gamma, beta;  // (C)
  double eps = 1e-5;

  ChannelNorm3() = default;
  explicit ChannelNorm3(Index c);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(Index dim, Index hidden, Rng& rng);
  Tensor forward(const Tensor& x) const;  // gelu between the two layers
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Token-sequence scan with input-dependent step size and projections.
// delta = softplus(W_d x + b_d), B = W_B x, C = W_C x, diag(A) = -exp(a_log).
struct SelectiveTokenSsm {
  Tensor a_log;  // (D, N)
  Linear delta_proj;
  Linear b_proj;
  Linear c_proj;

  SelectiveTokenSsm() = default;
  SelectiveTokenSsm(Index dim, Index state, Rng& rng);
  Tensor forward(const Tensor& tokens) const;  // (T, D) -> (T, D)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// One scan branch: pre-norm residual, three directional scans (forward,
// backward, inter-slice) summed, then a norm + MLP residual. Token order
// comes from the supplied scan order; the result returns to storage order.
struct TripleScanBranch {
  LayerNormP ln_in, ln_mid;
  SelectiveTokenSsm scan_fwd, scan_bwd, scan_slice;
  Mlp mlp;

  TripleScanBranch() = default;
  TripleScanBranch(Index dim, Index state, Rng& rng);
  Tensor forward(const Tensor& vol_rows, const ScanOrder& order,
                 std::uint64_t seed) const;  // (C, V) -> (C, V)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Two parallel scan branches, one over the raster order and one over the
// cylinder order, fused by addition in storage order. The cylinder branch
// can be disabled for ablation runs.
struct CylinderScanBlock {
  TripleScanBranch raster, cylinder;
  bool use_cylinder = true;
  int layer_index = 0;

  CylinderScanBlock() = default;
  CylinderScanBlock(Index dim, Index state, int layer_index, bool use_cylinder, Rng& rng);
  Tensor forward(const Tensor& vol, const ScanOrder& raster_order,
                 const ScanOrder& cylinder_order, std::uint64_t epoch) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Factorized 3-D convolution: 1x1xk, then 1xkx1, then kx1x1, all with the
// same dilation and same-extent padding. Purely linear.
struct DdrBlock {
  Conv3 along_z, along_y, along_x;

  DdrBlock() = default;
  DdrBlock(Index cin, Index cout, Index k, Index dilation, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Progressively stacked 3x3x3 convolutions whose intermediate activations
// are summed, projected, and added back to the input.
struct MultiConvBlock {
  Conv3 c1, c2, c3, proj;

  MultiConvBlock() = default;
  MultiConvBlock(Index c, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// 3x3x3 conv, a cascade of MultiConvBlocks, a closing 3x3x3 conv, plus the
// residual input. Zeroing the closing conv makes the block the identity.
struct Cscb {
  Conv3 head, tail;
  std::vector<MultiConvBlock> cascade;

  Cscb() = default;
  Cscb(Index c, Index mid, Index depth, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Three parallel DdrBlocks at dilations 1, 2, 3, summed, plus the residual.
struct Ddcb {
  DdrBlock d1, d2, d3;

  Ddcb() = default;
  Ddcb(Index c, Index k, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Replicates a (C, rows*cols) map along the vertical axis into a volume
// (C, rows, cols, h).
Tensor lift_columns(const Tensor& plane, Index rows, Index cols, Index h);

// Transformer-style sinusoidal embedding of an integer step, length dim
// (first half sine, second half cosine, geometric frequencies down to 1e-4).
Tensor sinusoidal_embedding(Index step, Index dim);

}  // namespace cymba
