#include "cymba/diffusion.hpp"

#include <cmath>

namespace cymba {

namespace {
using detail::check;
}

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
  check(timesteps >= 1, "NoiseSchedule: timesteps must be positive");
  check(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
        "NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule ns;
  ns.timesteps = timesteps;
  ns.betas.resize(timesteps);
  ns.alphas.resize(timesteps);
  ns.alpha_bars.resize(timesteps);
  double bar = 1.0;
  for (int i = 0; i < timesteps; ++i) {
    const double frac = timesteps == 1 ? 0.0 : static_cast<double>(i) / (timesteps - 1);
    ns.betas[i] = beta_start + (beta_end - beta_start) * frac;
    ns.alphas[i] = 1.0 - ns.betas[i];
    bar *= ns.alphas[i];
    ns.alpha_bars[i] = bar;
  }
  return ns;
}

Array q_sample(const Array& x0, const NoiseSchedule& ns, int t, const Array& noise) {
  check(t >= 1 && t <= ns.timesteps, "q_sample: t out of range");
  check(x0.size() == noise.size(), "q_sample: noise size mismatch");
  const double ab = ns.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

LatentMapper::LatentMapper(const Dims& dims, Index in_channels, Index width,
                           Index out_channels, Rng& rng)
    : full_dims(dims), enc(in_channels, width, out_channels, rng) {}

Tensor LatentMapper::forward(const Tensor& plane) const {
  Tensor vol = lift_columns(plane, full_dims.L, full_dims.W, full_dims.H);
  return enc.forward(vol).first;
}

void LatentMapper::collect(ParamStore& ps, const std::string& prefix) const {
  enc.collect(ps, prefix);
}

CondStem::CondStem(Index channels, Rng& rng)
    : cscb(channels, channels, 1, rng), ddcb(channels, 3, rng),
      mix(channels, channels, {1, 1, 1}, rng) {}

Tensor CondStem::forward(const Tensor& cond) const {
  return mix.forward(ddcb.forward(cscb.forward(cond)));
}

void CondStem::collect(ParamStore& ps, const std::string& prefix) const {
  cscb.collect(ps, prefix + ".cscb");
  ddcb.collect(ps, prefix + ".ddcb");
  mix.collect(ps, prefix + ".mix");
}

namespace {

std::array<Index, 3> down_factor(const Dims& d) {
  return {d.L % 2 == 0 && d.L > 1 ? Index(2) : Index(1),
          d.W % 2 == 0 && d.W > 1 ? Index(2) : Index(1),
          d.H % 2 == 0 && d.H > 1 ? Index(2) : Index(1)};
}

Dims shrink(const Dims& d, const std::array<Index, 3>& f) {
  return Dims{d.L / f[0], d.W / f[1], d.H / f[2]};
}

}  // namespace

Denoiser::Denoiser(const Dims& latent, Index cz, Index cond_ch,
                   std::array<Index, 3> widths, Index state, Index blocks_per_stage,
                   bool use_cylinder, Rng& rng)
    : latent_dims(latent), latent_channels(cz), cond_channels(cond_ch) {
  check(blocks_per_stage >= 1, "Denoiser: need at least one block per stage");
  const Index c1 = widths[0], c2 = widths[1], c3 = widths[2];
  conv_in = Conv3(cz + cond_ch, c1, {3, 3, 3}, rng);
  temb1 = Linear(temb_dim, c1, rng);
  temb2 = Linear(c1, c1, rng);

  const Dims d1 = latent;
  factor1 = down_factor(d1);
  const Dims d2 = shrink(d1, factor1);
  factor2 = down_factor(d2);
  const Dims d3 = shrink(d2, factor2);
  check(d3.L >= 1 && d3.W >= 1 && d3.H >= 1, "Denoiser: latent grid too small");

  raster1 = make_scan_order(ScanKind::Cartesian, d1);
  cyl1 = make_scan_order(ScanKind::Cylinder, d1);
  raster2 = make_scan_order(ScanKind::Cartesian, d2);
  cyl2 = make_scan_order(ScanKind::Cylinder, d2);
  raster3 = make_scan_order(ScanKind::Cartesian, d3);
  cyl3 = make_scan_order(ScanKind::Cylinder, d3);

  int layer = 0;
  auto make_stage = [&](std::vector<CylinderScanBlock>& stage,
                        std::vector<ChannelNorm3>& norms, Index dim) {
    for (Index i = 0; i < blocks_per_stage; ++i) {
      stage.emplace_back(dim, state, layer++, use_cylinder, rng);
      norms.emplace_back(dim);
    }
  };
  make_stage(stage1, norm1, c1);
  down1 = Conv3(c1, c2, factor1, rng, factor1);
  make_stage(stage2, norm2, c2);
  down2 = Conv3(c2, c3, factor2, rng, factor2);
  make_stage(stage3, norm3, c3);
  up2 = Deconv3(c3, c2, factor2, rng);
  make_stage(dec2, dnorm2, c2);
  up1 = Deconv3(c2, c1, factor1, rng);
  make_stage(dec1, dnorm1, c1);
  conv_out = Conv3(c1, cz, {3, 3, 3}, rng);
  conv_out.zero_init();
}

Tensor Denoiser::forward(const Tensor& x_t, const Tensor& cond, int t,
                         std::uint64_t epoch) const {
  check(x_t.rank() == 4 && x_t.extent(0) == latent_channels,
        "Denoiser: latent channel mismatch");
  check(cond.rank() == 4 && cond.extent(0) == cond_channels,
        "Denoiser: conditioning channel mismatch");

  Tensor h = conv_in.forward(concat0({x_t, cond}));

  Tensor emb = reshape(sinusoidal_embedding(t, temb_dim), {1, temb_dim});
  Tensor temb = reshape(temb2.forward(gelu(temb1.forward(emb))), {h.extent(0)});
  h = as_volume(add_per_row(as_rows(h), temb), h.shape());

  auto run_stage = [&](Tensor v, const std::vector<CylinderScanBlock>& stage,
                       const std::vector<ChannelNorm3>& norms, const ScanOrder& raster,
                       const ScanOrder& cyl) {
    for (size_t i = 0; i < stage.size(); ++i)
      v = add(v, norms[i].forward(stage[i].forward(v, raster, cyl, epoch)));
    return v;
  };

  Tensor s1 = run_stage(h, stage1, norm1, raster1, cyl1);
  Tensor s2 = run_stage(down1.forward(s1), stage2, norm2, raster2, cyl2);
  Tensor mid = run_stage(down2.forward(s2), stage3, norm3, raster3, cyl3);
  Tensor u2 = run_stage(add(up2.forward(mid), s2), dec2, dnorm2, raster2, cyl2);
  Tensor u1 = run_stage(add(up1.forward(u2), s1), dec1, dnorm1, raster1, cyl1);
  return conv_out.forward(u1);
}

void Denoiser::collect(ParamStore& ps, const std::string& prefix) const {
  conv_in.collect(ps, prefix + ".conv_in");
  temb1.collect(ps, prefix + ".temb1");
  temb2.collect(ps, prefix + ".temb2");
  auto collect_stage = [&](const std::vector<CylinderScanBlock>& stage,
                           const std::vector<ChannelNorm3>& norms,
                           const std::string& name) {
    for (size_t i = 0; i < stage.size(); ++i) {
      stage[i].collect(ps, prefix + "." + name + std::to_string(i));
      norms[i].collect(ps, prefix + "." + name + std::to_string(i) + "_norm");
    }
  };
  collect_stage(stage1, norm1, "enc1_");
  down1.collect(ps, prefix + ".down1");
  collect_stage(stage2, norm2, "enc2_");
  down2.collect(ps, prefix + ".down2");
  collect_stage(stage3, norm3, "mid_");
  up2.collect(ps, prefix + ".up2");
  collect_stage(dec2, dnorm2, "dec2_");
  up1.collect(ps, prefix + ".up1");
  collect_stage(dec1, dnorm1, "dec1_");
  conv_out.collect(ps, prefix + ".conv_out");
}

DiffusionModel::DiffusionModel(const Dims& full_dims, const Dims& latent_dims,
                               Index num_classes, Index latent_channels,
                               Index mapper_width, std::array<Index, 3> widths,
                               Index state, Index blocks_per_stage, bool use_cylinder,
                               Rng& rng) {
  const Index feat = 8;
  const Index cond_ch = feat + num_classes;
  mapper = LatentMapper(full_dims, 1 + num_classes, mapper_width, feat, rng);
  cond_stem = CondStem(cond_ch, rng);
  denoiser = Denoiser(latent_dims, latent_channels, cond_ch, widths, state,
                      blocks_per_stage, use_cylinder, rng);
}

Tensor DiffusionModel::conditioning(const Tensor& plane,
                                    const Tensor& sketch_scores) const {
  Tensor feats = mapper.forward(plane);
  return cond_stem.forward(concat0({feats, sketch_scores}));
}

void DiffusionModel::collect(ParamStore& ps) const {
  mapper.collect(ps, "mapper");
  cond_stem.collect(ps, "cond_stem");
  denoiser.collect(ps, "denoiser");
}

Array p_sample_loop(const DiffusionModel& model, const Tensor& cond,
                    const NoiseSchedule& ns, const Shape& latent_shape, Rng& rng) {
  const Index n = numel(latent_shape);
  Array x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.normal();
  for (int t = ns.timesteps; t >= 1; --t) {
    Tensor x_t = Tensor::from_array(latent_shape, x);
    Tensor eps = model.denoiser.forward(x_t, cond, t, 0);
    const double beta = ns.beta(t);
    const double coef = beta / std::sqrt(1.0 - ns.alpha_bar(t));
    x = (x - coef * eps.value()) / std::sqrt(ns.alpha(t));
    if (t > 1) {
      const double sigma = std::sqrt(beta);
      for (Index i = 0; i < n; ++i) x[i] += sigma * rng.normal();
    }
  }
  return x;
}

}  // namespace cymba
