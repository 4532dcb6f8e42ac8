#pragma once

#include "cymba/checkpoint.hpp"

namespace cymba {

// Epoch-level learning-rate scale: linear ramp over the warmup epochs, then
// cosine decay to zero at total_epochs. epoch is 0-based.
double warmup_cosine_scale(int epoch, int total_epochs, int warmup_epochs);

// AdamW with decoupled weight decay. Moment buffers live as no-grad tensors
// so they ride along in checkpoints and make resumption exact.
class AdamW {
 public:
  struct Hyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
  };

  AdamW() = default;
  AdamW(std::vector<Tensor> params, Hyper hyper);

  // Applies one update from the gradients currently on the parameters,
  // scaling the base learning rate by lr_scale. Parameters without a
  // gradient are skipped. Gradients are cleared afterwards.
  void step(double lr_scale = 1.0);

  // Exposes step count and moments under "opt." names for checkpointing.
  void collect(ParamStore& ps) const;

  const Hyper& hyper() const { return hyper_; }
  std::int64_t steps_taken() const { return static_cast<std::int64_t>(step_count_.value()[0]); }

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> m_, v_;
  Tensor step_count_;
  Hyper hyper_;
};

}  // namespace cymba
