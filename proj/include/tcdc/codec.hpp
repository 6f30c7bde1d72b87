#pragma once

#include <string>
#include <vector>

#include "tcdc/layers.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// Architecture sizing for the mean-scale hyperprior codec.
struct CodecConfig {
  int channels_n = 64;      // transform width
  int channels_m = 96;      // latent channels (M)
  int channels_hyper = 48;  // hyper-latent channels (N_h)
  std::string activation = "gdn";  // "gdn" or "relu"

  void validate() const;
};

// Per-element Gaussian parameters predicted by the hyper decoder. scale is
// already passed through the smooth lower bound, so scale >= kSigmaMin.
struct GaussianParams {
  Tensor mean;
  Tensor scale;
};

inline constexpr real kSigmaMin = 0.11;

enum class QuantizeMode { noise, round, round_offset };

// noise: t + U(-0.5, 0.5) (training proxy, consumes rng);
// round: elementwise nearest integer;
// round_offset: round(t - offset) + offset, so (result - offset) is integer.
Tensor quantize(const Tensor& t, QuantizeMode mode,
                const Tensor* offset = nullptr, Rng* rng = nullptr);

void clamp01(Tensor& t);

// The four transforms of the codec. Each forward caches activations for the
// matching *_backward, which returns dL/dinput and accumulates parameter
// grads; callers chain them in reverse order of the forwards.
class CodecModel {
 public:
  CodecModel(const CodecConfig& cfg, Rng& rng);

  // x (B,3,H,W) with H, W divisible by 64 -> y (B,M,H/16,W/16)
  Tensor analysis(const Tensor& x);
  Tensor analysis_backward(const Tensor& dy);

  // y_hat (B,M,h,w) -> x_hat (B,3,16h,16w), unclamped
  Tensor synthesis(const Tensor& y_hat);
  Tensor synthesis_backward(const Tensor& dx_hat);

  // y (B,M,h,w) -> z (B,N_h,h/4,w/4)
  Tensor hyper_analysis(const Tensor& y);
  Tensor hyper_analysis_backward(const Tensor& dz);

  // z_hat -> (mu, sigma), each shaped like the latent
  GaussianParams hyper_synthesis(const Tensor& z_hat);
  Tensor hyper_synthesis_backward(const Tensor& dmean, const Tensor& dscale);

  std::vector<Parameter*> parameters();
  const CodecConfig& config() const { return cfg_; }

 private:
  // GDN/ReLU switch for the main transforms.
  struct Act {
    Act(const std::string& name, int channels, bool inverse, bool use_gdn)
        : gdn(name, channels, inverse), use_gdn(use_gdn) {}
    Tensor forward(const Tensor& x) {
      return use_gdn ? gdn.forward(x) : relu.forward(x);
    }
    Tensor backward(const Tensor& dy) {
      return use_gdn ? gdn.backward(dy) : relu.backward(dy);
    }
    void params(std::vector<Parameter*>& out) {
      if (use_gdn) gdn.params(out);
    }
    Gdn gdn;
    Relu relu;
    bool use_gdn;
  };

  CodecConfig cfg_;

  Conv2d ga1_, ga2_, ga3_, ga4_;
  Act ga_act1_, ga_act2_, ga_act3_;

  ConvTranspose2d gs1_, gs2_, gs3_, gs4_;
  Act gs_act1_, gs_act2_, gs_act3_;

  Conv2d ha1_, ha2_, ha3_;
  Relu ha_act1_, ha_act2_;

  ConvTranspose2d hs1_, hs2_;
  Conv2d hs3_;
  Relu hs_act1_, hs_act2_;

  Tensor sigma_raw_;  // pre-bound scale cache for the backward pass
};

}  // namespace tcdc
