#include "tcdc/losses.hpp"

#include <cmath>

#include "tcdc/parallel.hpp"

namespace tcdc {

void LossWeights::validate() const {
  require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0,
          "loss weights must be nonnegative");
  require(alpha > 0.0 || beta > 0.0 || gamma > 0.0,
          "loss weights must not all be zero");
}

real distortion_loss(const Tensor& x, const Tensor& x_hat) {
  require(x.same_shape(x_hat), "distortion shape mismatch");
  const real sq = deterministic_sum(x.numel(), [&](std::int64_t i) {
    const real d = x[i] - x_hat[i];
    return d * d;
  });
  return sq / static_cast<real>(x.numel());
}

Tensor distortion_backward(const Tensor& x, const Tensor& x_hat) {
  require(x.same_shape(x_hat), "distortion shape mismatch");
  Tensor d(x.shape());
  const real scale = 2.0 / static_cast<real>(x.numel());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < x.numel(); ++i)
    d[i] = scale * (x_hat[i] - x[i]);
  return d;
}

real joint_loss(real rate, real distortion, real ce, const LossWeights& w) {
  w.validate();
  require(std::isfinite(rate) && std::isfinite(distortion) &&
              std::isfinite(ce),
          "non-finite loss component");
  require(rate >= 0.0 && distortion >= 0.0 && ce >= 0.0,
          "loss components must be nonnegative");
  return w.alpha * rate + w.beta * distortion + w.gamma * ce;
}

}  // namespace tcdc
