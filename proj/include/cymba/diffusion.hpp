#pragma once

#include "cymba/ssen.hpp"

namespace cymba {

// Linear-beta DDPM schedule. Timesteps are 1-based: beta(t) for t in [1, T].
struct NoiseSchedule {
  int timesteps = 0;
  Array betas;       // (T)
  Array alphas;      // (T), 1 - beta
  Array alpha_bars;  // (T), running product

  static NoiseSchedule linear(int timesteps, double beta_start, double beta_end);
  double beta(int t) const { return betas[t - 1]; }
  double alpha(int t) const { return alphas[t - 1]; }
  double alpha_bar(int t) const { return alpha_bars[t - 1]; }
};

// Forward-process sample: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise.
Array q_sample(const Array& x0, const NoiseSchedule& ns, int t, const Array& noise);

// Maps the full-resolution conditioning plane (lifted to a volume) down to
// latent-resolution features. Reuses the VAE encoder architecture; only the
// mean head is consumed, so the mapping is deterministic. Trained jointly
// with the denoiser.
struct LatentMapper {
  Dims full_dims;
  VaeEncoder enc;

  LatentMapper() = default;
  LatentMapper(const Dims& full_dims, Index in_channels, Index width, Index out_channels,
               Rng& rng);
  Tensor forward(const Tensor& plane) const;  // (Cin, L*W) -> (Cout, l, w, h)
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Fuses mapped conditioning features with sketch-encoder scores.
struct CondStem {
  Cscb cscb;
  Ddcb ddcb;
  Conv3 mix;

  CondStem() = default;
  CondStem(Index channels, Rng& rng);
  Tensor forward(const Tensor& cond) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Noise-prediction U-Net over latent volumes. Each resolution runs
// cylinder-scan blocks; downsampling halves the x/y extents and halves z
// only while it stays even. Blocks compose residually with the channel
// norm on the branch (v + norm(block(v))): the raw block multiplies its
// input magnitude, so composing blocks directly grows activations
// geometrically with depth, while normalizing the trunk would cut the
// identity path that carries the noised latent to the output.
// The final conv starts at zero so the initial prediction is the zero field.
struct Denoiser {
  Dims latent_dims;
  Index latent_channels = 0;
  Index cond_channels = 0;
  Index temb_dim = 64;

  Conv3 conv_in;
  Linear temb1, temb2;
  std::vector<CylinderScanBlock> stage1, stage2, stage3, dec2, dec1;
  std::vector<ChannelNorm3> norm1, norm2, norm3, dnorm2, dnorm1;
  Conv3 down1, down2;
  Deconv3 up2, up1;
  Conv3 conv_out;

  std::array<Index, 3> factor1{2, 2, 2}, factor2{2, 2, 2};
  ScanOrder raster1, cyl1, raster2, cyl2, raster3, cyl3;

  Denoiser() = default;
  Denoiser(const Dims& latent_dims, Index latent_channels, Index cond_channels,
           std::array<Index, 3> widths, Index state, Index blocks_per_stage,
           bool use_cylinder, Rng& rng);
  Tensor forward(const Tensor& x_t, const Tensor& cond, int t, std::uint64_t epoch) const;
  void collect(ParamStore& ps, const std::string& prefix) const;
};

// Denoiser plus the jointly trained conditioning path.
struct DiffusionModel {
  LatentMapper mapper;
  CondStem cond_stem;
  Denoiser denoiser;

  DiffusionModel() = default;
  DiffusionModel(const Dims& full_dims, const Dims& latent_dims, Index num_classes,
                 Index latent_channels, Index mapper_width, std::array<Index, 3> widths,
                 Index state, Index blocks_per_stage, bool use_cylinder, Rng& rng);

  // plane: conditioning plane at full resolution; sketch_scores: latent-
  // resolution scores from the frozen sketch encoder.
  Tensor conditioning(const Tensor& plane, const Tensor& sketch_scores) const;
  void collect(ParamStore& ps) const;
};

// Ancestral sampling from pure noise down to t = 1; noise is injected with
// sigma_t = sqrt(beta_t) except at the final step. Returns the latent volume.
Array p_sample_loop(const DiffusionModel& model, const Tensor& cond,
                    const NoiseSchedule& ns, const Shape& latent_shape, Rng& rng);

}  // namespace cymba
