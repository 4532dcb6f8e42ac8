#include "cymba/optim.hpp"

#include <cmath>

namespace cymba {

double warmup_cosine_scale(int epoch, int total_epochs, int warmup_epochs) {
  detail::check(total_epochs >= 1, "warmup_cosine_scale: total_epochs must be positive");
  detail::check(warmup_epochs >= 0, "warmup_cosine_scale: warmup must be non-negative");
  const int warmup = std::min(warmup_epochs, total_epochs);
  if (epoch < warmup) return static_cast<double>(epoch + 1) / warmup;
  if (total_epochs == warmup) return 1.0;
  const double progress =
      static_cast<double>(epoch - warmup) / (total_epochs - warmup);
  return 0.5 * (1.0 + std::cos(M_PI * std::min(progress, 1.0)));
}

AdamW::AdamW(std::vector<Tensor> params, Hyper hyper)
    : params_(std::move(params)), hyper_(hyper) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.push_back(Tensor::zeros(p.shape(), false));
    v_.push_back(Tensor::zeros(p.shape(), false));
  }
  step_count_ = Tensor::zeros({1}, false);
}

void AdamW::step(double lr_scale) {
  step_count_.raw_value()[0] += 1.0;
  const double t = step_count_.value()[0];
  const double lr = hyper_.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.node()->has_grad()) continue;
    Array& g = p.node()->grad;
    Array& m = m_[i].raw_value();
    Array& v = v_[i].raw_value();
    m = hyper_.beta1 * m + (1.0 - hyper_.beta1) * g;
    v = hyper_.beta2 * v + (1.0 - hyper_.beta2) * g.square();
    const Array m_hat = m / bc1;
    const Array v_hat = v / bc2;
    p.raw_value() -= lr * (m_hat / (v_hat.sqrt() + hyper_.eps) + hyper_.weight_decay * p.value());
    p.node()->zero_grad();
  }
}

void AdamW::collect(ParamStore& ps) const {
  ps.add("opt.step", step_count_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string idx = std::to_string(i);
    ps.add("opt.m." + idx, m_[i]);
    ps.add("opt.v." + idx, v_[i]);
  }
}

}  // namespace cymba
