#pragma once

#include <cstdint>
#include <vector>

#include "tcdc/layers.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// Adam with optional decoupled (AdamW-style) weight decay. Frozen
// parameters are skipped entirely: no moment updates, no decay.
struct AdamConfig {
  real lr = 3e-5;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
  real weight_decay = 0.0;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, const AdamConfig& cfg);

  void step();
  void zero_grad();
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

// Global L2 norm over the gradients of trainable parameters.
real global_grad_norm(const std::vector<Parameter*>& params);
// Scales trainable gradients so the global norm is at most max_norm;
// returns the pre-clip norm.
real clip_grad_norm(const std::vector<Parameter*>& params, real max_norm);

}  // namespace tcdc
