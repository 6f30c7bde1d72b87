#pragma once

#include "tcdc/tensor.hpp"

namespace tcdc {

// Weights of the joint objective: alpha * rate + beta * distortion +
// gamma * cross-entropy.
struct LossWeights {
  real alpha = 0.18;
  real beta = 255.0 * 255.0;
  real gamma = 1.0;

  void validate() const;
};

// Mean squared error over every scalar element (B*3*H*W).
real distortion_loss(const Tensor& x, const Tensor& x_hat);
// d(mse)/d(x_hat) = 2 (x_hat - x) / N.
Tensor distortion_backward(const Tensor& x, const Tensor& x_hat);

// The scalar objective itself; components must be finite.
real joint_loss(real rate, real distortion, real ce, const LossWeights& w);

}  // namespace tcdc
