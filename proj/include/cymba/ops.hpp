#pragma once

#include "cymba/tensor.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace cymba {

// Elementwise. For add/sub/mul, `b` may broadcast when its shape is a
// trailing suffix of `a`'s shape (it is tiled along the leading axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// x has shape (R, K); v has shape (R). Adds v[r] to every element of row r.
Tensor add_per_row(const Tensor& x, const Tensor& v);

// Reductions to a scalar of shape {1}.
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// Shape and indexing. All return fresh storage; round trips are exact.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);                 // rank 2
Tensor concat0(const std::vector<Tensor>& parts);  // along axis 0
Tensor slice0(const Tensor& a, Index begin, Index count);
Tensor repeat_inner(const Tensor& a, Index n);     // appends an axis of extent n

// Rank-2 permutations. permute_cols: out[:,t] = x[:,perm[t]];
// unpermute_cols inverts it (out[:,perm[t]] = x[:,t]). Same for rows.
Tensor permute_cols(const Tensor& x, const std::vector<Index>& perm);
Tensor unpermute_cols(const Tensor& x, const std::vector<Index>& perm);
Tensor permute_rows(const Tensor& x, const std::vector<Index>& perm);
Tensor unpermute_rows(const Tensor& x, const std::vector<Index>& perm);

// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);

// Softmax over axis 0 of a rank-2 tensor (per column).
Tensor softmax0(const Tensor& x);

// Normalization over the last axis of a rank-2 tensor (R, K).
// layer_norm: affine parameters indexed by column (shape K).
// channel_norm: affine parameters indexed by row (shape R); used where a
// per-channel scale/shift is wanted at batch size one.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor channel_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

// Dense 3-D convolution over volumes stored as (C, L, W, H) with x-major,
// z-innermost flattening. Weights are (Cout, Cin, kx, ky, kz).
struct Conv3dSpec {
  std::array<Index, 3> kernel{1, 1, 1};
  std::array<Index, 3> stride{1, 1, 1};
  std::array<Index, 3> dilation{1, 1, 1};
  std::array<Index, 3> padding{0, 0, 0};
};
Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor* bias, const Conv3dSpec& spec);

// Transposed convolution restricted to kernel == stride == factor (exact
// upsampling). Weights are (Cin, Cout, fx, fy, fz).
Tensor conv_transpose3d(const Tensor& x, const Tensor& w, const Tensor* bias,
                        std::array<Index, 3> factor);

// Fused losses over per-voxel class scores (C, V) and labels (V).
// cross_entropy: softmax + NLL with mean reduction over voxels; optional
// per-class weights (shape C) give a weighted mean.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::uint16_t>& labels,
                     const Tensor* class_weights);
// lovasz_softmax: takes probabilities (post-softmax); averages the per-class
// convex Jaccard surrogate over classes present in the labels.
Tensor lovasz_softmax(const Tensor& probs, const std::vector<std::uint16_t>& labels);

}  // namespace cymba
