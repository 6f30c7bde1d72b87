#include "tcdc/codec.hpp"

#include <cmath>

namespace tcdc {

namespace {

using i64 = std::int64_t;

// Smooth lower bound: lb(x) = m + tau*softplus((x - m)/tau). Always > m,
// approaches x from above for x >> m, and has gradient sigmoid((x-m)/tau)
// so the bound is differentiable everywhere (a hard max is not).
constexpr real kBoundTau = 0.05;

real softplus(real u) { return u > 30.0 ? u : std::log1p(std::exp(u)); }

real bound_scale(real raw) {
  return kSigmaMin + kBoundTau * softplus((raw - kSigmaMin) / kBoundTau);
}

real bound_scale_grad(real raw) {
  const real u = (raw - kSigmaMin) / kBoundTau;
  if (u > 30.0) return 1.0;
  return 1.0 / (1.0 + std::exp(-u));
}

}  // namespace

void CodecConfig::validate() const {
  require(channels_n > 0 && channels_m > 0 && channels_hyper > 0,
          "codec channel counts must be positive");
  require(channels_m * 2 >= channels_n,
          "channels_m must be at least channels_n/2");
  require(activation == "gdn" || activation == "relu",
          "codec activation must be 'gdn' or 'relu'");
}

Tensor quantize(const Tensor& t, QuantizeMode mode, const Tensor* offset,
                Rng* rng) {
  Tensor out(t.shape());
  switch (mode) {
    case QuantizeMode::noise: {
      require(rng != nullptr, "noise quantization needs an rng");
      // Serial: the noise draw is part of the run's reproducible stream.
      for (i64 i = 0; i < t.numel(); ++i) {
        out[i] = t[i] + rng->uniform(-0.5, 0.5);
      }
      break;
    }
    case QuantizeMode::round: {
#pragma omp parallel for schedule(static)
      for (i64 i = 0; i < t.numel(); ++i) out[i] = std::rint(t[i]);
      break;
    }
    case QuantizeMode::round_offset: {
      require(offset != nullptr, "round_offset quantization needs the offset");
      require(offset->same_shape(t), "offset shape mismatch");
#pragma omp parallel for schedule(static)
      for (i64 i = 0; i < t.numel(); ++i) {
        out[i] = std::rint(t[i] - (*offset)[i]) + (*offset)[i];
      }
      break;
    }
  }
  return out;
}

void clamp01(Tensor& t) {
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < t.numel(); ++i) {
    t[i] = t[i] < 0.0 ? 0.0 : (t[i] > 1.0 ? 1.0 : t[i]);
  }
}

CodecModel::CodecModel(const CodecConfig& cfg, Rng& rng)
    : cfg_(cfg),
      ga1_("ga1", 3, cfg.channels_n, 5, 2, 2, rng),
      ga2_("ga2", cfg.channels_n, cfg.channels_n, 5, 2, 2, rng),
      ga3_("ga3", cfg.channels_n, cfg.channels_n, 5, 2, 2, rng),
      ga4_("ga4", cfg.channels_n, cfg.channels_m, 5, 2, 2, rng),
      ga_act1_("ga_gdn1", cfg.channels_n, false, cfg.activation == "gdn"),
      ga_act2_("ga_gdn2", cfg.channels_n, false, cfg.activation == "gdn"),
      ga_act3_("ga_gdn3", cfg.channels_n, false, cfg.activation == "gdn"),
      gs1_("gs1", cfg.channels_m, cfg.channels_n, 5, 2, 2, 1, rng),
      gs2_("gs2", cfg.channels_n, cfg.channels_n, 5, 2, 2, 1, rng),
      gs3_("gs3", cfg.channels_n, cfg.channels_n, 5, 2, 2, 1, rng),
      gs4_("gs4", cfg.channels_n, 3, 5, 2, 2, 1, rng),
      gs_act1_("gs_igdn1", cfg.channels_n, true, cfg.activation == "gdn"),
      gs_act2_("gs_igdn2", cfg.channels_n, true, cfg.activation == "gdn"),
      gs_act3_("gs_igdn3", cfg.channels_n, true, cfg.activation == "gdn"),
      ha1_("ha1", cfg.channels_m, cfg.channels_hyper, 3, 1, 1, rng),
      ha2_("ha2", cfg.channels_hyper, cfg.channels_hyper, 5, 2, 2, rng),
      ha3_("ha3", cfg.channels_hyper, cfg.channels_hyper, 5, 2, 2, rng),
      hs1_("hs1", cfg.channels_hyper, cfg.channels_hyper, 5, 2, 2, 1, rng),
      hs2_("hs2", cfg.channels_hyper, cfg.channels_hyper, 5, 2, 2, 1, rng),
      hs3_("hs3", cfg.channels_hyper, 2 * cfg.channels_m, 3, 1, 1, rng) {
  cfg.validate();
}

Tensor CodecModel::analysis(const Tensor& x) {
  require(x.ndim() == 4 && x.dim(1) == 3,
          "analysis input must be (B,3,H,W), got " + x.shape_str());
  require(x.dim(2) % 64 == 0 && x.dim(3) % 64 == 0,
          "image side not divisible by 64: " + x.shape_str());
  require(x.all_finite(), "non-finite analysis input");
  Tensor t = ga_act1_.forward(ga1_.forward(x));
  t = ga_act2_.forward(ga2_.forward(t));
  t = ga_act3_.forward(ga3_.forward(t));
  return ga4_.forward(t);
}

Tensor CodecModel::analysis_backward(const Tensor& dy) {
  Tensor g = ga4_.backward(dy);
  g = ga2_.backward(ga_act2_.backward(ga3_.backward(ga_act3_.backward(g))));
  return ga1_.backward(ga_act1_.backward(g));
}

Tensor CodecModel::synthesis(const Tensor& y_hat) {
  require(y_hat.ndim() == 4 && y_hat.dim(1) == cfg_.channels_m,
          "synthesis input must have M channels");
  require(y_hat.all_finite(), "non-finite synthesis input");
  Tensor t = gs_act1_.forward(gs1_.forward(y_hat));
  t = gs_act2_.forward(gs2_.forward(t));
  t = gs_act3_.forward(gs3_.forward(t));
  return gs4_.forward(t);
}

Tensor CodecModel::synthesis_backward(const Tensor& dx_hat) {
  Tensor g = gs4_.backward(dx_hat);
  g = gs2_.backward(gs_act2_.backward(gs3_.backward(gs_act3_.backward(g))));
  return gs1_.backward(gs_act1_.backward(g));
}

Tensor CodecModel::hyper_analysis(const Tensor& y) {
  require(y.ndim() == 4 && y.dim(1) == cfg_.channels_m,
          "hyper analysis input must have M channels");
  require(y.all_finite(), "non-finite hyper analysis input");
  Tensor t = ha_act1_.forward(ha1_.forward(y));
  t = ha_act2_.forward(ha2_.forward(t));
  return ha3_.forward(t);
}

Tensor CodecModel::hyper_analysis_backward(const Tensor& dz) {
  Tensor g = ha3_.backward(dz);
  return ha1_.backward(ha_act1_.backward(ha2_.backward(ha_act2_.backward(g))));
}

GaussianParams CodecModel::hyper_synthesis(const Tensor& z_hat) {
  require(z_hat.ndim() == 4 && z_hat.dim(1) == cfg_.channels_hyper,
          "hyper synthesis input must have N_h channels");
  require(z_hat.all_finite(), "non-finite hyper synthesis input");
  Tensor t = hs_act1_.forward(hs1_.forward(z_hat));
  t = hs_act2_.forward(hs2_.forward(t));
  Tensor out = hs3_.forward(t);  // (B, 2M, h, w)

  const int bsz = out.dim(0), m = cfg_.channels_m;
  const int h = out.dim(2), w = out.dim(3);
  GaussianParams p{Tensor({bsz, m, h, w}), Tensor({bsz, m, h, w})};
  sigma_raw_ = Tensor({bsz, m, h, w});
  const i64 plane = static_cast<i64>(h) * w;
#pragma omp parallel for schedule(static) collapse(2)
  for (int b = 0; b < bsz; ++b) {
    for (int c = 0; c < m; ++c) {
      const i64 src_mu = (static_cast<i64>(b) * 2 * m + c) * plane;
      const i64 src_sg = (static_cast<i64>(b) * 2 * m + m + c) * plane;
      const i64 dst = (static_cast<i64>(b) * m + c) * plane;
      for (i64 i = 0; i < plane; ++i) {
        p.mean[dst + i] = out[src_mu + i];
        sigma_raw_[dst + i] = out[src_sg + i];
        p.scale[dst + i] = bound_scale(out[src_sg + i]);
      }
    }
  }
  return p;
}

Tensor CodecModel::hyper_synthesis_backward(const Tensor& dmean,
                                            const Tensor& dscale) {
  require(dmean.same_shape(sigma_raw_) && dscale.same_shape(sigma_raw_),
          "hyper synthesis grad shape mismatch");
  const int bsz = dmean.dim(0), m = cfg_.channels_m;
  const i64 plane = static_cast<i64>(dmean.dim(2)) * dmean.dim(3);
  Tensor dout({bsz, 2 * m, dmean.dim(2), dmean.dim(3)});
#pragma omp parallel for schedule(static) collapse(2)
  for (int b = 0; b < bsz; ++b) {
    for (int c = 0; c < m; ++c) {
      const i64 dst_mu = (static_cast<i64>(b) * 2 * m + c) * plane;
      const i64 dst_sg = (static_cast<i64>(b) * 2 * m + m + c) * plane;
      const i64 src = (static_cast<i64>(b) * m + c) * plane;
      for (i64 i = 0; i < plane; ++i) {
        dout[dst_mu + i] = dmean[src + i];
        dout[dst_sg + i] = dscale[src + i] * bound_scale_grad(sigma_raw_[src + i]);
      }
    }
  }
  Tensor g = hs3_.backward(dout);
  return hs1_.backward(hs_act1_.backward(hs2_.backward(hs_act2_.backward(g))));
}

std::vector<Parameter*> CodecModel::parameters() {
  std::vector<Parameter*> out;
  ga1_.params(out);
  ga_act1_.params(out);
  ga2_.params(out);
  ga_act2_.params(out);
  ga3_.params(out);
  ga_act3_.params(out);
  ga4_.params(out);
  gs1_.params(out);
  gs_act1_.params(out);
  gs2_.params(out);
  gs_act2_.params(out);
  gs3_.params(out);
  gs_act3_.params(out);
  gs4_.params(out);
  ha1_.params(out);
  ha2_.params(out);
  ha3_.params(out);
  hs1_.params(out);
  hs2_.params(out);
  hs3_.params(out);
  return out;
}

}  // namespace tcdc
