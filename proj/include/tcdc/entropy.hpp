#pragma once

#include <vector>

#include "tcdc/codec.hpp"
#include "tcdc/layers.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// Probabilities are floored here so the rate loss stays finite; the value
// matches one quantum of the 16-bit coder tables.
inline constexpr real kPFloor = 1.0 / 32768.0;

// Bin-integrated Gaussian likelihood of latent values under per-element
// (mu, sigma): p = Phi((v+0.5-mu)/sigma) - Phi((v-0.5-mu)/sigma), floored.
// Holds the caches for its backward, layer-style.
class GaussianConditional {
 public:
  Tensor likelihood(const Tensor& v, const GaussianParams& gp);
  // dp = dL/dlikelihood. Outputs are written (not accumulated).
  void backward(const Tensor& dp, Tensor& dv, Tensor& dmu, Tensor& dsigma);

 private:
  Tensor a_, b_, sigma_, p_raw_;
};

// Learned channelwise prior for the hyper-latent: a per-channel monotone
// 3-hidden-layer network (widths 3,3,3) parameterizes the CDF; bin mass is
// CDF(v+0.5) - CDF(v-0.5). Quantiles are calibrated by a separate auxiliary
// loss and belong to the aux optimizer; the network itself trains under the
// rate loss with everything else.
class FactorizedPrior {
 public:
  FactorizedPrior(int channels, Rng& rng);

  Tensor likelihood(const Tensor& z_hat);
  // Returns dL/dz_hat and accumulates network parameter grads.
  Tensor likelihood_backward(const Tensor& dp);

  // Absolute logit error of the three quantiles against their targets
  // (tail_mass 1e-6), summed over channels; aux_backward accumulates grads
  // on `quantiles` only.
  real aux_loss();
  void aux_backward();

  // CDF at x for one channel (used for table building).
  real cdf(int channel, real x) const;
  // Integer support [lo, hi] per channel that covers the tails.
  void support(int channel, int* lo, int* hi) const;

  std::vector<Parameter*> parameters();           // network (main optimizer)
  std::vector<Parameter*> quantile_parameters();  // aux optimizer

  int channels() const { return channels_; }

  // Layer widths of the logit network: 1 -> 3 -> 3 -> 3 -> 1.
  static constexpr int kLayers = 4;
  static constexpr int kWidths[kLayers + 1] = {1, 3, 3, 3, 1};

  Parameter matrices[kLayers];  // (C, d_out, d_in), softplus-reparameterized
  Parameter biases[kLayers];    // (C, d_out)
  Parameter factors[kLayers - 1];  // (C, d_out), tanh-reparameterized
  Parameter quantiles;             // (C, 3): lower tail, median, upper tail

 private:
  // One logit-chain evaluation with optional caches/derivative.
  struct Eval {
    real logit;
    real dlogit_dx;
  };
  Eval eval_logit(int channel, real x, std::vector<real>* cache) const;

  int channels_;
  Tensor z_, p_raw_;
};

// Eq. 2 realized on sampled likelihoods: sum over all elements of all
// tensors of -log2 p. Additive across tensors by construction.
real rate_loss(const std::vector<const Tensor*>& likelihoods);
// d(rate bits)/dp for one likelihood tensor: -1 / (p ln 2) elementwise.
Tensor rate_loss_backward(const Tensor& p);

struct RateEstimate {
  real total_bits = 0.0;
  real bits_y = 0.0;
  real bits_z = 0.0;
  real bpp = 0.0;
};

real bpp_of(real total_bits, int batch, int h, int w);
RateEstimate make_rate_estimate(real bits_y, real bits_z, int batch, int h,
                                int w);

}  // namespace tcdc
