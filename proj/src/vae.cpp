#include "cymba/vae.hpp"

namespace cymba {

namespace {
using detail::check;
}

Tensor reparameterize(const Tensor& mean, const Tensor& logvar, const Tensor& noise) {
  check(same_shape(mean.shape(), logvar.shape()) && same_shape(mean.shape(), noise.shape()),
        "reparameterize: shape mismatch");
  Tensor std_dev = exp(mul_scalar(clamp(logvar, kLogVarMin, kLogVarMax), 0.5));
  return add(mean, mul(std_dev, noise));
}

Tensor kl_gaussian(const Tensor& mean, const Tensor& logvar) {
  check(same_shape(mean.shape(), logvar.shape()), "kl_gaussian: shape mismatch");
  Tensor lv = clamp(logvar, kLogVarMin, kLogVarMax);
  Tensor term = sub(add(square(mean), exp(lv)), add_scalar(lv, 1.0));
  return mul_scalar(sum_all(term), 0.5);
}

DownStage::DownStage(Index cin, Index cout, Rng& rng)
    : conv1(cin, cout, {3, 3, 3}, rng),
      conv2(cout, cout, {3, 3, 3}, rng),
      conv3(cout, cout, {3, 3, 3}, rng),
      norm1(cout),
      norm2(cout),
      norm3(cout),
      down(cout, cout, {2, 2, 2}, rng, {2, 2, 2}),
      norm_down(cout) {}

Tensor DownStage::forward(const Tensor& vol) const {
  Tensor h = relu(norm1.forward(conv1.forward(vol)));
  h = relu(norm2.forward(conv2.forward(h)));
  h = relu(norm3.forward(conv3.forward(h)));
  return relu(norm_down.forward(down.forward(h)));
}

void DownStage::collect(ParamStore& ps, const std::string& prefix) const {
  conv1.collect(ps, prefix + ".conv1");
  conv2.collect(ps, prefix + ".conv2");
  conv3.collect(ps, prefix + ".conv3");
  norm1.collect(ps, prefix + ".norm1");
  norm2.collect(ps, prefix + ".norm2");
  norm3.collect(ps, prefix + ".norm3");
  down.collect(ps, prefix + ".down");
  norm_down.collect(ps, prefix + ".norm_down");
}

VaeEncoder::VaeEncoder(Index in_channels, Index width, Index latent_channels, Rng& rng)
    : stage1(in_channels, width, rng),
      stage2(width, width * 2, rng),
      head(width * 2, 2 * latent_channels, {1, 1, 1}, rng) {}

std::pair<Tensor, Tensor> VaeEncoder::forward(const Tensor& vol) const {
  Tensor h = stage1.forward(vol);
  h = stage2.forward(h);
  Tensor both = head.forward(h);  // (2cz, l, w, h)
  const Index cz = both.extent(0) / 2;
  Tensor mean = slice0(both, 0, cz);
  Tensor logvar = clamp(slice0(both, cz, cz), kLogVarMin, kLogVarMax);
  return {mean, logvar};
}

void VaeEncoder::collect(ParamStore& ps, const std::string& prefix) const {
  stage1.collect(ps, prefix + ".stage1");
  stage2.collect(ps, prefix + ".stage2");
  head.collect(ps, prefix + ".head");
}

VaeDecoder::VaeDecoder(Index out_channels, Index width, Index latent_channels, Rng& rng)
    : stem(latent_channels, width * 2, {1, 1, 1}, rng),
      mid(width * 2, width * 2, {3, 3, 3}, rng),
      norm_mid(width * 2),
      up1(width * 2, width, {2, 2, 2}, rng),
      norm_up1(width),
      conv1(width, width, {3, 3, 3}, rng),
      norm1(width),
      up2(width, width, {2, 2, 2}, rng),
      norm_up2(width),
      conv2(width, width, {3, 3, 3}, rng),
      norm2(width),
      out(width, out_channels, {3, 3, 3}, rng) {}

Tensor VaeDecoder::forward(const Tensor& z) const {
  Tensor h = stem.forward(z);
  h = relu(norm_mid.forward(mid.forward(h)));
  h = relu(norm_up1.forward(up1.forward(h)));
  h = relu(norm1.forward(conv1.forward(h)));
  h = relu(norm_up2.forward(up2.forward(h)));
  h = relu(norm2.forward(conv2.forward(h)));
  return out.forward(h);
}

void VaeDecoder::collect(ParamStore& ps, const std::string& prefix) const {
  stem.collect(ps, prefix + ".stem");
  mid.collect(ps, prefix + ".mid");
  norm_mid.collect(ps, prefix + ".norm_mid");
  up1.collect(ps, prefix + ".up1");
  norm_up1.collect(ps, prefix + ".norm_up1");
  conv1.collect(ps, prefix + ".conv1");
  norm1.collect(ps, prefix + ".norm1");
  up2.collect(ps, prefix + ".up2");
  norm_up2.collect(ps, prefix + ".norm_up2");
  conv2.collect(ps, prefix + ".conv2");
  norm2.collect(ps, prefix + ".norm2");
  out.collect(ps, prefix + ".out");
}

VaeModel::VaeModel(Index classes, Index width, Index latent, Rng& rng)
    : encoder(classes, width, latent, rng),
      decoder(classes, width, latent, rng),
      num_classes(classes),
      latent_channels(latent) {}

void VaeModel::collect(ParamStore& ps) const {
  encoder.collect(ps, "encoder");
  decoder.collect(ps, "decoder");
}

VaeLossParts vae_loss(const Tensor& scores, const std::vector<std::uint16_t>& labels,
                      const Tensor& mean, const Tensor& logvar,
                      const VaeLossWeights& wts) {
  Tensor rows = as_rows(scores);
  VaeLossParts parts;
  parts.ce = cross_entropy(rows, labels, nullptr);
  parts.lovasz = lovasz_softmax(softmax0(rows), labels);
  parts.kl = kl_gaussian(as_rows(mean), as_rows(logvar));
  parts.total = add(parts.ce, add(mul_scalar(parts.lovasz, wts.gamma),
                                  mul_scalar(parts.kl, wts.beta)));
  return parts;
}

}  // namespace cymba
