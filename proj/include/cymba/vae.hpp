#pragma once

#include "cymba/blocks.hpp"

namespace cymba {

inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 20.0;

// Two stride-2 stages: spatial extents shrink by 4 on every axis.
inline constexpr Index kLatentFactor = 4;

// mean + exp(0.5 * logvar) * noise, with logvar clamped to a safe range.
Tensor reparameterize(const Tensor& mean, const Tensor& logvar, const Tensor& noise);

// KL(q || N(0, I)) summed over elements: 0.5 * sum(mu^2 + exp(lv) - 1 - lv).
Tensor kl_gaussian(const Tensor& mean, const Tensor& logvar);

// Four consecutive conv layers, each norm + relu; the last is the
// stride-2 downsample, so one stage halves every spatial extent.
struct DownStage {
  Conv3 conv1, conv2, conv3;
  ChannelNorm3 norm1, norm2, norm3;
  Conv3 down;
  ChannelNorm3 norm_down;

  DownStage() = default;
  DownStage(Index cin, Index cout, Rng& rng);
  Tensor forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct VaeEncoder {
  DownStage stage1, stage2;
  Conv3 head;  // 1x1x1 -> 2 * latent channels

  VaeEncoder() = default;
  VaeEncoder(Index in_channels, Index width, Index latent_channels, Rng& rng);
  // Returns (mean, logvar), each (cz, L/4, W/4, H/4); logvar is clamped.
  std::pair<Tensor, Tensor> forward(const Tensor& vol) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct VaeDecoder {
  Conv3 stem;  // 1x1x1 latent -> widest
  Conv3 mid;
  ChannelNorm3 norm_mid;
  Deconv3 up1;
  ChannelNorm3 norm_up1;
  Conv3 conv1;
  ChannelNorm3 norm1;
  Deconv3 up2;
  ChannelNorm3 norm_up2;
  Conv3 conv2;
  ChannelNorm3 norm2;
  Conv3 out;

  VaeDecoder() = default;
  VaeDecoder(Index out_channels, Index width, Index latent_channels, Rng& rng);
  Tensor forward(const Tensor& z) const;  // -> class scores (C, L, W, H)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

struct VaeModel {
  VaeEncoder encoder;
  VaeDecoder decoder;
  Index num_classes = 0;
  Index latent_channels = 0;

  VaeModel() = default;
  VaeModel(Index num_classes, Index width, Index latent_channels, Rng& rng);
  void collect(ParamStore& ps) const;
};

// Loss weights for the reconstruction objective:
// total = ce + gamma * lovasz + beta * kl.
struct VaeLossWeights {
  double gamma = 1.0;
  double beta = 0.001;
};

struct VaeLossParts {
  Tensor ce, lovasz, kl, total;
};

VaeLossParts vae_loss(const Tensor& scores, const std::vector<std::uint16_t>& labels,
                      const Tensor& mean, const Tensor& logvar,
                      const VaeLossWeights& wts);

}  // namespace cymba
