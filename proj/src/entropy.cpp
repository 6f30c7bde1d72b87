#include "tcdc/entropy.hpp"

#include <cmath>

#include "tcdc/parallel.hpp"

namespace tcdc {

namespace {

using i64 = std::int64_t;

constexpr real kInvSqrt2 = 0.7071067811865476;
constexpr real kInvSqrt2Pi = 0.3989422804014327;
constexpr real kLn2 = 0.6931471805599453;
constexpr real kTailMass = 1e-6;

real norm_pdf(real x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

real sigmoid(real x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------- GaussianConditional

Tensor GaussianConditional::likelihood(const Tensor& v,
                                       const GaussianParams& gp) {
  require(v.same_shape(gp.mean) && v.same_shape(gp.scale),
          "likelihood shape mismatch");
  require(v.all_finite() && gp.mean.all_finite() && gp.scale.all_finite(),
          "non-finite likelihood input");
  require(gp.scale.min_value() >= kSigmaMin - 1e-12,
          "gaussian scale below the lower bound");
  a_ = Tensor(v.shape());
  b_ = Tensor(v.shape());
  sigma_ = gp.scale;
  p_raw_ = Tensor(v.shape());
  Tensor p(v.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < v.numel(); ++i) {
    const real sg = gp.scale[i];
    const real c = v[i] - gp.mean[i];
    a_[i] = (c + 0.5) / sg;
    b_[i] = (c - 0.5) / sg;
    // Evaluate through the upper tail of |c| so the two CDF terms never
    // cancel catastrophically.
    const real t = std::fabs(c);
    const real raw = 0.5 * (std::erfc((t - 0.5) / sg * kInvSqrt2) -
                            std::erfc((t + 0.5) / sg * kInvSqrt2));
    p_raw_[i] = raw;
    p[i] = raw < kPFloor ? kPFloor : raw;
  }
  return p;
}

void GaussianConditional::backward(const Tensor& dp, Tensor& dv, Tensor& dmu,
                                   Tensor& dsigma) {
  dv = Tensor(dp.shape());
  dmu = Tensor(dp.shape());
  dsigma = Tensor(dp.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < dp.numel(); ++i) {
    if (p_raw_[i] < kPFloor) {  // clamped bin: flat, no gradient
      dv[i] = dmu[i] = dsigma[i] = 0.0;
      continue;
    }
    const real pa = norm_pdf(a_[i]), pb = norm_pdf(b_[i]);
    const real g = dp[i];
    dv[i] = g * (pa - pb) / sigma_[i];
    dmu[i] = -dv[i];
    dsigma[i] = g * (b_[i] * pb - a_[i] * pa) / sigma_[i];
  }
}

// -------------------------------------------------------- FactorizedPrior

FactorizedPrior::FactorizedPrior(int channels, Rng& rng)
    : channels_(channels) {
  require(channels > 0, "factorized prior needs channels > 0");
  // Initialized so the logit chain is roughly x/4: each layer contributes a
  // factor 1/(s*d_out) with s = 4^(1/kLayers), making the initial density a
  // logistic of scale 4 — wide enough that integer bins near the origin are
  // all above the probability floor.
  const real s = std::pow(4.0, 1.0 / kLayers);
  for (int k = 0; k < kLayers; ++k) {
    const int dout = kWidths[k + 1], din = kWidths[k];
    Tensor h({channels, dout, din});
    const real hinit = std::log(std::expm1(1.0 / (s * dout)));
    h.fill(hinit);
    matrices[k] = Parameter("prior.h" + std::to_string(k), std::move(h));
    Tensor b({channels, dout});
    for (i64 i = 0; i < b.numel(); ++i) b[i] = rng.uniform(-0.5, 0.5);
    biases[k] = Parameter("prior.b" + std::to_string(k), std::move(b));
    if (k < kLayers - 1) {
      factors[k] =
          Parameter("prior.a" + std::to_string(k), Tensor::zeros({channels, dout}));
    }
  }
  Tensor q({channels, 3});
  for (int c = 0; c < channels; ++c) {
    q.at(c, 0) = -4.0;
    q.at(c, 1) = 0.0;
    q.at(c, 2) = 4.0;
  }
  quantiles = Parameter("prior.quantiles", std::move(q));
}

FactorizedPrior::Eval FactorizedPrior::eval_logit(
    int channel, real x, std::vector<real>* cache) const {
  real u[4] = {x, 0, 0, 0};  // widths never exceed 3
  real du[4] = {1, 0, 0, 0};
  if (cache != nullptr) cache->clear();
  for (int k = 0; k < kLayers; ++k) {
    const int dout = kWidths[k + 1], din = kWidths[k];
    const real* h = matrices[k].value.data() +
                    static_cast<i64>(channel) * dout * din;
    const real* b = biases[k].value.data() + static_cast<i64>(channel) * dout;
    real v[4], unew[4], dunew[4];
    for (int i = 0; i < dout; ++i) {
      real acc = b[i], dacc = 0.0;
      for (int j = 0; j < din; ++j) {
        const real w = std::log1p(std::exp(h[i * din + j]));  // softplus
        acc += w * u[j];
        dacc += w * du[j];
      }
      v[i] = acc;
      if (k < kLayers - 1) {
        const real f =
            std::tanh(factors[k].value[static_cast<i64>(channel) * dout + i]);
        const real t = std::tanh(acc);
        unew[i] = acc + f * t;
        dunew[i] = dacc * (1.0 + f * (1.0 - t * t));
      } else {
        unew[i] = acc;
        dunew[i] = dacc;
      }
    }
    if (cache != nullptr) {
      // Layer input followed by pre-activations, consumed back to front by
      // the reverse pass in likelihood_backward.
      for (int j = 0; j < din; ++j) cache->push_back(u[j]);
      for (int i = 0; i < dout; ++i) cache->push_back(v[i]);
    }
    for (int i = 0; i < dout; ++i) {
      u[i] = unew[i];
      du[i] = dunew[i];
    }
  }
  return {u[0], du[0]};
}

Tensor FactorizedPrior::likelihood(const Tensor& z_hat) {
  require(z_hat.ndim() == 4 && z_hat.dim(1) == channels_,
          "factorized prior channel mismatch");
  require(z_hat.all_finite(), "non-finite prior input");
  z_ = z_hat;
  p_raw_ = Tensor(z_hat.shape());
  Tensor p(z_hat.shape());
  const int bsz = z_hat.dim(0);
  const i64 plane = static_cast<i64>(z_hat.dim(2)) * z_hat.dim(3);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    for (int b = 0; b < bsz; ++b) {
      const i64 off = (static_cast<i64>(b) * channels_ + c) * plane;
      for (i64 i = 0; i < plane; ++i) {
        const real x = z_hat[off + i];
        const real hi = sigmoid(eval_logit(c, x + 0.5, nullptr).logit);
        const real lo = sigmoid(eval_logit(c, x - 0.5, nullptr).logit);
        const real raw = hi - lo;
        p_raw_[off + i] = raw;
        p[off + i] = raw < kPFloor ? kPFloor : raw;
      }
    }
  }
  return p;
}

Tensor FactorizedPrior::likelihood_backward(const Tensor& dp) {
  require(dp.same_shape(z_), "prior backward shape mismatch");
  Tensor dz(z_.shape());
  const int bsz = z_.dim(0);
  const i64 plane = static_cast<i64>(z_.dim(2)) * z_.dim(3);

  // Channels own disjoint parameter slices, so the channel loop is safe to
  // run in parallel while accumulating parameter grads.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    std::vector<real> cache;
    for (int b = 0; b < bsz; ++b) {
      const i64 off = (static_cast<i64>(b) * channels_ + c) * plane;
      for (i64 i = 0; i < plane; ++i) {
        if (p_raw_[off + i] < kPFloor) {
          dz[off + i] = 0.0;
          continue;
        }
        const real g = dp[off + i];
        real dx_total = 0.0;
        for (int side = 0; side < 2; ++side) {
          const real x = z_[off + i] + (side == 0 ? 0.5 : -0.5);
          Eval ev = eval_logit(c, x, &cache);
          const real sp = sigmoid(ev.logit);
          // d p / d logit_side, signed by which CDF edge this is.
          const real upstream = (side == 0 ? g : -g) * sp * (1.0 - sp);
          dx_total += upstream * ev.dlogit_dx;

          // Reverse pass over the cached chain.
          real dun[4] = {upstream, 0, 0, 0};
          i64 pos = static_cast<i64>(cache.size());
          for (int k = kLayers - 1; k >= 0; --k) {
            const int dout = kWidths[k + 1], din = kWidths[k];
            pos -= dout;  // pre-activations v
            const real* v = cache.data() + pos;
            pos -= din;  // layer input u
            const real* u = cache.data() + pos;
            const real* h = matrices[k].value.data() +
                            static_cast<i64>(c) * dout * din;
            real* dh = matrices[k].grad.data() +
                       static_cast<i64>(c) * dout * din;
            real* db = biases[k].grad.data() + static_cast<i64>(c) * dout;
            real dv[4];
            for (int o = 0; o < dout; ++o) {
              if (k < kLayers - 1) {
                const real f = std::tanh(
                    factors[k].value[static_cast<i64>(c) * dout + o]);
                const real t = std::tanh(v[o]);
                dv[o] = dun[o] * (1.0 + f * (1.0 - t * t));
                factors[k].grad[static_cast<i64>(c) * dout + o] +=
                    dun[o] * t * (1.0 - f * f);
              } else {
                dv[o] = dun[o];
              }
              db[o] += dv[o];
            }
            real dup[4] = {0, 0, 0, 0};
            for (int o = 0; o < dout; ++o) {
              for (int j = 0; j < din; ++j) {
                const real w = std::log1p(std::exp(h[o * din + j]));
                dh[o * din + j] += dv[o] * u[j] * sigmoid(h[o * din + j]);
                dup[j] += dv[o] * w;
              }
            }
            for (int j = 0; j < din; ++j) dun[j] = dup[j];
          }
        }
        dz[off + i] = dx_total;
      }
    }
  }
  return dz;
}

real FactorizedPrior::aux_loss() {
  const real target = std::log(kTailMass / 2.0 / (1.0 - kTailMass / 2.0));
  real total = 0.0;
  for (int c = 0; c < channels_; ++c) {
    total += std::fabs(eval_logit(c, quantiles.value.at(c, 0), nullptr).logit -
                       target);
    total += std::fabs(eval_logit(c, quantiles.value.at(c, 1), nullptr).logit);
    total += std::fabs(eval_logit(c, quantiles.value.at(c, 2), nullptr).logit +
                       target);
  }
  return total;
}

void FactorizedPrior::aux_backward() {
  const real target = std::log(kTailMass / 2.0 / (1.0 - kTailMass / 2.0));
  const real goals[3] = {target, 0.0, -target};
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels_; ++c) {
    for (int q = 0; q < 3; ++q) {
      Eval ev = eval_logit(c, quantiles.value.at(c, q), nullptr);
      const real sign = ev.logit - goals[q] > 0.0 ? 1.0 : -1.0;
      quantiles.grad.at(c, q) += sign * ev.dlogit_dx;
    }
  }
}

real FactorizedPrior::cdf(int channel, real x) const {
  require(channel >= 0 && channel < channels_, "prior channel out of range");
  return sigmoid(eval_logit(channel, x, nullptr).logit);
}

void FactorizedPrior::support(int channel, int* lo, int* hi) const {
  // Expand from the learned median until both tail bins drop below a
  // quarter of the floor; the quantiles only seed the search.
  const int med = static_cast<int>(std::rint(quantiles.value.at(channel, 1)));
  constexpr int kMaxHalf = 4096;
  int l = med, h = med;
  while (l > med - kMaxHalf &&
         cdf(channel, static_cast<real>(l) - 0.5) > kPFloor / 4.0) {
    --l;
  }
  while (h < med + kMaxHalf &&
         1.0 - cdf(channel, static_cast<real>(h) + 0.5) > kPFloor / 4.0) {
    ++h;
  }
  // Keep a minimum width so fresh models still get usable tables.
  *lo = std::min(l, med - 12);
  *hi = std::max(h, med + 12);
}

std::vector<Parameter*> FactorizedPrior::parameters() {
  std::vector<Parameter*> out;
  for (int k = 0; k < kLayers; ++k) {
    out.push_back(&matrices[k]);
    out.push_back(&biases[k]);
    if (k < kLayers - 1) out.push_back(&factors[k]);
  }
  return out;
}

std::vector<Parameter*> FactorizedPrior::quantile_parameters() {
  return {&quantiles};
}

// -------------------------------------------------------------- rate loss

real rate_loss(const std::vector<const Tensor*>& likelihoods) {
  real bits = 0.0;
  for (const Tensor* p : likelihoods) {
    require(p != nullptr && !p->empty(), "rate_loss needs likelihood tensors");
    require(p->min_value() > 0.0, "nonpositive probability in rate_loss");
    const Tensor& t = *p;
    bits += deterministic_sum(t.numel(), [&](i64 i) {
      return -std::log2(t[i]);
    });
  }
  require(std::isfinite(bits), "non-finite rate loss");
  return bits;
}

Tensor rate_loss_backward(const Tensor& p) {
  Tensor dp(p.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < p.numel(); ++i) dp[i] = -1.0 / (p[i] * kLn2);
  return dp;
}

real bpp_of(real total_bits, int batch, int h, int w) {
  require(batch > 0 && h > 0 && w > 0, "bpp_of needs positive dimensions");
  return total_bits / (static_cast<real>(batch) * h * w);
}

RateEstimate make_rate_estimate(real bits_y, real bits_z, int batch, int h,
                                int w) {
  RateEstimate r;
  r.bits_y = bits_y;
  r.bits_z = bits_z;
  r.total_bits = bits_y + bits_z;
  r.bpp = bpp_of(r.total_bits, batch, h, w);
  return r;
}

}  // namespace tcdc
