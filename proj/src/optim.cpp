#include "tcdc/optim.hpp"

#include <cmath>

#include "tcdc/parallel.hpp"

namespace tcdc {

Adam::Adam(std::vector<Parameter*> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  require(cfg_.lr > 0.0, "learning rate must be positive");
  require(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 &&
              cfg_.beta2 < 1.0,
          "adam betas must be in [0, 1)");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    require(p != nullptr, "null parameter handed to the optimizer");
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::step() {
  ++t_;
  const real bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<real>(t_));
  const real bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<real>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (!p.trainable) continue;
    Tensor& m = m_[k];
    Tensor& v = v_[k];
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < p.value.numel(); ++i) {
      const real g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const real mhat = m[i] / bc1;
      const real vhat = v[i] / bc2;
      p.value[i] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                               cfg_.weight_decay * p.value[i]);
    }
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

real global_grad_norm(const std::vector<Parameter*>& params) {
  real total = 0.0;
  for (const Parameter* p : params) {
    if (!p->trainable) continue;
    total += deterministic_sum(p->grad.numel(), [&](std::int64_t i) {
      return p->grad[i] * p->grad[i];
    });
  }
  return std::sqrt(total);
}

real clip_grad_norm(const std::vector<Parameter*>& params, real max_norm) {
  require(max_norm > 0.0, "clip norm must be positive");
  const real norm = global_grad_norm(params);
  if (norm > max_norm) {
    const real scale = max_norm / norm;
    for (Parameter* p : params) {
      if (!p->trainable) continue;
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < p->grad.numel(); ++i) p->grad[i] *= scale;
    }
  }
  return norm;
}

}  // namespace tcdc
