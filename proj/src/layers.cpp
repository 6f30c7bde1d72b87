#include "tcdc/layers.hpp"

#include <cmath>
#include <vector>

namespace tcdc {

namespace {

using i64 = std::int64_t;

// Uniform init with the usual 1/sqrt(fan_in) bound.
void uniform_init(Tensor& t, Rng& rng, int fan_in) {
  const real bound = 1.0 / std::sqrt(static_cast<real>(fan_in));
  for (i64 i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_c, int out_c, int k, int stride,
               int pad, Rng& rng)
    : in_c(in_c), out_c(out_c), k(k), stride(stride), pad(pad) {
  w = Parameter(name + ".w", Tensor({out_c, in_c, k, k}));
  b = Parameter(name + ".b", Tensor({out_c}));
  uniform_init(w.value, rng, in_c * k * k);
  uniform_init(b.value, rng, in_c * k * k);
}

Tensor Conv2d::forward(const Tensor& x) {
  require(x.ndim() == 4 && x.dim(1) == in_c,
          "conv input shape " + x.shape_str() + " wants " + std::to_string(in_c) +
              " channels");
  dims_ = kernels::ConvDims::conv(x.dim(0), in_c, x.dim(2), x.dim(3), out_c, k,
                                  stride, pad);
  x_ = x;
  Tensor y({dims_.batch, out_c, dims_.out_h, dims_.out_w});
  kernels::conv2d_forward(x.data(), w.value.data(), b.value.data(), y.data(),
                          dims_);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  kernels::conv2d_backward_input(dy.data(), w.value.data(), dx.data(), dims_);
  kernels::conv2d_backward_params(dy.data(), x_.data(), w.grad.data(),
                                  b.grad.data(), dims_);
  return dx;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(const std::string& name, int in_c, int out_c,
                                 int k, int stride, int pad, int out_pad,
                                 Rng& rng)
    : in_c(in_c), out_c(out_c), k(k), stride(stride), pad(pad), out_pad(out_pad) {
  w = Parameter(name + ".w", Tensor({in_c, out_c, k, k}));
  b = Parameter(name + ".b", Tensor({out_c}));
  uniform_init(w.value, rng, out_c * k * k);
  uniform_init(b.value, rng, out_c * k * k);
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
  require(x.ndim() == 4 && x.dim(1) == in_c,
          "deconv input shape " + x.shape_str() + " wants " +
              std::to_string(in_c) + " channels");
  const int oh = (x.dim(2) - 1) * stride - 2 * pad + k + out_pad;
  const int ow = (x.dim(3) - 1) * stride - 2 * pad + k + out_pad;
  mirror_ = kernels::ConvDims::conv(x.dim(0), out_c, oh, ow, in_c, k, stride, pad);
  require(mirror_.out_h == x.dim(2) && mirror_.out_w == x.dim(3),
          "transposed conv geometry does not close");
  x_ = x;
  Tensor y({x.dim(0), out_c, oh, ow});
  kernels::deconv2d_forward(x.data(), w.value.data(), b.value.data(), y.data(),
                            mirror_);
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
  kernels::deconv2d_backward_input(dy.data(), w.value.data(), dx.data(),
                                   mirror_);
  kernels::deconv2d_backward_params(dy.data(), x_.data(), w.grad.data(),
                                    b.grad.data(), mirror_);
  return dx;
}

// ------------------------------------------------------------------- Gdn

Gdn::Gdn(const std::string& name, int channels, bool inverse)
    : inverse(inverse), channels(channels) {
  beta_raw = Parameter(name + ".beta", Tensor::full({channels}, 1.0));
  Tensor g({channels, channels});
  // gamma = gamma_raw^2 starts near 0.1 on the diagonal; off-diagonal gets a
  // small nonzero seed so its gradient (2*gamma_raw*dgamma) is not stuck at 0.
  for (int i = 0; i < channels; ++i) {
    for (int j = 0; j < channels; ++j) {
      g.at(i, j) = i == j ? std::sqrt(0.1) : 0.03;
    }
  }
  gamma_raw = Parameter(name + ".gamma", std::move(g));
}

Tensor Gdn::forward(const Tensor& x) {
  require(x.ndim() == 4 && x.dim(1) == channels, "gdn channel mismatch");
  const int bsz = x.dim(0), c = channels;
  const i64 plane = static_cast<i64>(x.dim(2)) * x.dim(3);
  x_ = x;

  Tensor beta({c});
  for (int i = 0; i < c; ++i) {
    beta[i] = beta_raw.value[i] * beta_raw.value[i] + 1e-4;
  }
  Tensor gamma({c, c});
  for (i64 i = 0; i < gamma.numel(); ++i) {
    gamma[i] = gamma_raw.value[i] * gamma_raw.value[i];
  }

  s2_ = Tensor(x.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < x.numel(); ++i) s2_[i] = x[i] * x[i];

  d_ = Tensor(x.shape());
  for (int b = 0; b < bsz; ++b) {
    kernels::gemm(c, c, static_cast<int>(plane), gamma.data(),
                  s2_.data() + static_cast<i64>(b) * c * plane,
                  d_.data() + static_cast<i64>(b) * c * plane);
  }
  s_ = Tensor(x.shape());
  Tensor y(x.shape());
#pragma omp parallel for schedule(static) collapse(2)
  for (int b = 0; b < bsz; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const i64 off = (static_cast<i64>(b) * c + ch) * plane;
      for (i64 p = 0; p < plane; ++p) {
        const real den = d_[off + p] + beta[ch];
        d_[off + p] = den;
        const real s = std::sqrt(den);
        s_[off + p] = s;
        y[off + p] = inverse ? x[off + p] * s : x[off + p] / s;
      }
    }
  }
  return y;
}

Tensor Gdn::backward(const Tensor& dy) {
  const int bsz = x_.dim(0), c = channels;
  const i64 plane = static_cast<i64>(x_.dim(2)) * x_.dim(3);

  Tensor gamma({c, c}), gamma_t({c, c});
  for (i64 i = 0; i < gamma.numel(); ++i) {
    gamma[i] = gamma_raw.value[i] * gamma_raw.value[i];
  }
  kernels::transpose(c, c, gamma.data(), gamma_t.data());

  // t_i = g_i x_i / d_i^{3/2} (gdn) or r_i = g_i x_i / s_i (igdn); the same
  // tensor drives both dx and the parameter grads up to a +-1/2 factor.
  Tensor t(x_.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < t.numel(); ++i) {
    t[i] = inverse ? dy[i] * x_[i] / s_[i] : dy[i] * x_[i] / (d_[i] * s_[i]);
  }

  Tensor u(x_.shape());
  for (int b = 0; b < bsz; ++b) {
    kernels::gemm(c, c, static_cast<int>(plane), gamma_t.data(),
                  t.data() + static_cast<i64>(b) * c * plane,
                  u.data() + static_cast<i64>(b) * c * plane);
  }

  Tensor dx(x_.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < dx.numel(); ++i) {
    dx[i] = inverse ? dy[i] * s_[i] + x_[i] * u[i]
                    : dy[i] / s_[i] - x_[i] * u[i];
  }

  // Parameter grads w.r.t. effective beta/gamma, then chain through the
  // square reparameterization.
  const real half = inverse ? 0.5 : -0.5;
  Tensor tg(x_.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < tg.numel(); ++i) tg[i] = half * t[i];

  Tensor dgamma = Tensor::zeros({c, c});
  Tensor scratch({c, static_cast<int>(plane)});
  for (int b = 0; b < bsz; ++b) {
    kernels::transpose(c, static_cast<int>(plane),
                       s2_.data() + static_cast<i64>(b) * c * plane,
                       scratch.data());
    kernels::gemm(c, static_cast<int>(plane), c,
                  tg.data() + static_cast<i64>(b) * c * plane, scratch.data(),
                  dgamma.data(), /*accumulate=*/true);
  }
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    real acc = 0.0;
    for (int b = 0; b < bsz; ++b) {
      const real* p = tg.data() + (static_cast<i64>(b) * c + ch) * plane;
      for (i64 i = 0; i < plane; ++i) acc += p[i];
    }
    beta_raw.grad[ch] += 2.0 * beta_raw.value[ch] * acc;
  }
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < dgamma.numel(); ++i) {
    gamma_raw.grad[i] += 2.0 * gamma_raw.value[i] * dgamma[i];
  }
  return dx;
}

// ------------------------------------------------------------------ Relu

Tensor Relu::forward(const Tensor& x) {
  x_ = x;
  Tensor y(x.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor Relu::backward(const Tensor& dy) {
  Tensor dx(x_.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < dx.numel(); ++i) dx[i] = x_[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels)
    : channels(channels) {
  w = Parameter(name + ".w", Tensor::full({channels}, 1.0));
  b = Parameter(name + ".b", Tensor({channels}));
  running_mean = Tensor::zeros({channels});
  running_var = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  require(x.ndim() == 4 && x.dim(1) == channels, "bn channel mismatch");
  const int bsz = x.dim(0), c = channels;
  const i64 plane = static_cast<i64>(x.dim(2)) * x.dim(3);
  const i64 nr = static_cast<i64>(bsz) * plane;
  x_ = x;
  trained_forward_ = training;
  mean_ = Tensor({c});
  inv_std_ = Tensor({c});

  if (training) {
    require(nr > 1, "batchnorm needs more than one sample");
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
      real m = 0.0;
      for (int bi = 0; bi < bsz; ++bi) {
        const real* p = x.data() + (static_cast<i64>(bi) * c + ch) * plane;
        for (i64 i = 0; i < plane; ++i) m += p[i];
      }
      m /= static_cast<real>(nr);
      real v = 0.0;
      for (int bi = 0; bi < bsz; ++bi) {
        const real* p = x.data() + (static_cast<i64>(bi) * c + ch) * plane;
        for (i64 i = 0; i < plane; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= static_cast<real>(nr);
      mean_[ch] = m;
      inv_std_[ch] = 1.0 / std::sqrt(v + eps);
      running_mean[ch] = (1.0 - momentum) * running_mean[ch] + momentum * m;
      running_var[ch] = (1.0 - momentum) * running_var[ch] +
                        momentum * v * static_cast<real>(nr) /
                            static_cast<real>(nr - 1);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean_[ch] = running_mean[ch];
      inv_std_[ch] = 1.0 / std::sqrt(running_var[ch] + eps);
    }
  }

  xhat_ = Tensor(x.shape());
  Tensor y(x.shape());
#pragma omp parallel for schedule(static) collapse(2)
  for (int bi = 0; bi < bsz; ++bi) {
    for (int ch = 0; ch < c; ++ch) {
      const i64 off = (static_cast<i64>(bi) * c + ch) * plane;
      for (i64 i = 0; i < plane; ++i) {
        const real xh = (x[off + i] - mean_[ch]) * inv_std_[ch];
        xhat_[off + i] = xh;
        y[off + i] = w.value[ch] * xh + b.value[ch];
      }
    }
  }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
  const int bsz = x_.dim(0), c = channels;
  const i64 plane = static_cast<i64>(x_.dim(2)) * x_.dim(3);
  const i64 nr = static_cast<i64>(bsz) * plane;
  Tensor dx(x_.shape());

#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    real sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int bi = 0; bi < bsz; ++bi) {
      const i64 off = (static_cast<i64>(bi) * c + ch) * plane;
      for (i64 i = 0; i < plane; ++i) {
        sum_dy += dy[off + i];
        sum_dy_xhat += dy[off + i] * xhat_[off + i];
      }
    }
    b.grad[ch] += sum_dy;
    w.grad[ch] += sum_dy_xhat;

    const real scale = w.value[ch] * inv_std_[ch];
    if (trained_forward_) {
      const real mean_dy = sum_dy / static_cast<real>(nr);
      const real mean_dy_xhat = sum_dy_xhat / static_cast<real>(nr);
      for (int bi = 0; bi < bsz; ++bi) {
        const i64 off = (static_cast<i64>(bi) * c + ch) * plane;
        for (i64 i = 0; i < plane; ++i) {
          dx[off + i] =
              scale * (dy[off + i] - mean_dy - xhat_[off + i] * mean_dy_xhat);
        }
      }
    } else {
      // Eval-mode stats are constants, so the chain is a plain affine map.
      for (int bi = 0; bi < bsz; ++bi) {
        const i64 off = (static_cast<i64>(bi) * c + ch) * plane;
        for (i64 i = 0; i < plane; ++i) dx[off + i] = scale * dy[off + i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_f, int out_f, Rng& rng)
    : in_f(in_f), out_f(out_f) {
  w = Parameter(name + ".w", Tensor({out_f, in_f}));
  b = Parameter(name + ".b", Tensor({out_f}));
  uniform_init(w.value, rng, in_f);
  uniform_init(b.value, rng, in_f);
}

Tensor Linear::forward(const Tensor& x) {
  require(x.ndim() == 2 && x.dim(1) == in_f, "linear input mismatch");
  x_ = x;
  const int bsz = x.dim(0);
  Tensor wt({in_f, out_f});
  kernels::transpose(out_f, in_f, w.value.data(), wt.data());
  Tensor y({bsz, out_f});
  kernels::gemm(bsz, in_f, out_f, x.data(), wt.data(), y.data());
#pragma omp parallel for schedule(static)
  for (int bi = 0; bi < bsz; ++bi) {
    for (int o = 0; o < out_f; ++o) y.at(bi, o) += b.value[o];
  }
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  const int bsz = x_.dim(0);
  Tensor dx({bsz, in_f});
  kernels::gemm(bsz, out_f, in_f, dy.data(), w.value.data(), dx.data());
  Tensor dyt({out_f, bsz});
  kernels::transpose(bsz, out_f, dy.data(), dyt.data());
  kernels::gemm(out_f, bsz, in_f, dyt.data(), x_.data(), w.grad.data(),
                /*accumulate=*/true);
#pragma omp parallel for schedule(static)
  for (int o = 0; o < out_f; ++o) {
    real acc = 0.0;
    for (int bi = 0; bi < bsz; ++bi) acc += dy.at(bi, o);
    b.grad[o] += acc;
  }
  return dx;
}

// --------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, bool training, Rng& rng) {
  if (!training || p <= 0.0) {
    identity_ = true;
    return x;
  }
  identity_ = false;
  const real keep = 1.0 - p;
  mask_ = Tensor(x.shape());
  Tensor y(x.shape());
  // Serial draw: the mask consumes the run's RNG stream in index order.
  for (i64 i = 0; i < x.numel(); ++i) {
    mask_[i] = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (identity_) return dy;
  Tensor dx(dy.shape());
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < dx.numel(); ++i) dx[i] = dy[i] * mask_[i];
  return dx;
}

// ------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x) {
  require(x.ndim() == 4, "maxpool input must be 4-d");
  const int bsz = x.dim(0), c = x.dim(1), h = x.dim(2), w_ = x.dim(3);
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w_ + 2 * pad - k) / stride + 1;
  in_shape_ = x.shape();
  Tensor y({bsz, c, oh, ow});
  argmax_.assign(static_cast<size_t>(y.numel()), -1);
#pragma omp parallel for schedule(static) collapse(2)
  for (int bi = 0; bi < bsz; ++bi) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          real best = 0.0;
          i64 best_idx = -1;
          for (int u = 0; u < k; ++u) {
            const int ih = i * stride - pad + u;
            if (ih < 0 || ih >= h) continue;
            for (int v = 0; v < k; ++v) {
              const int iw = j * stride - pad + v;
              if (iw < 0 || iw >= w_) continue;
              const i64 idx =
                  ((static_cast<i64>(bi) * c + ch) * h + ih) * w_ + iw;
              if (best_idx < 0 || x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          require(best_idx >= 0, "maxpool window fell outside the input");
          const i64 out_idx =
              ((static_cast<i64>(bi) * c + ch) * oh + i) * ow + j;
          y[out_idx] = best;
          argmax_[static_cast<size_t>(out_idx)] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  Tensor dx = Tensor::zeros(in_shape_);
  const int c = in_shape_[1];
  const i64 out_plane = dy.numel() / (static_cast<i64>(dy.dim(0)) * c);
  // Scatter, but each (b, c) plane only touches its own input plane.
#pragma omp parallel for schedule(static) collapse(2)
  for (int bi = 0; bi < dy.dim(0); ++bi) {
    for (int ch = 0; ch < c; ++ch) {
      const i64 off = (static_cast<i64>(bi) * c + ch) * out_plane;
      for (i64 i = 0; i < out_plane; ++i) {
        dx[argmax_[static_cast<size_t>(off + i)]] += dy[off + i];
      }
    }
  }
  return dx;
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x) {
  require(x.ndim() == 4, "gap input must be 4-d");
  in_shape_ = x.shape();
  const int bsz = x.dim(0), c = x.dim(1);
  const i64 plane = static_cast<i64>(x.dim(2)) * x.dim(3);
  Tensor y({bsz, c});
#pragma omp parallel for schedule(static) collapse(2)
  for (int bi = 0; bi < bsz; ++bi) {
    for (int ch = 0; ch < c; ++ch) {
      const real* p = x.data() + (static_cast<i64>(bi) * c + ch) * plane;
      real acc = 0.0;
      for (i64 i = 0; i < plane; ++i) acc += p[i];
      y.at(bi, ch) = acc / static_cast<real>(plane);
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(in_shape_);
  const int bsz = in_shape_[0], c = in_shape_[1];
  const i64 plane = static_cast<i64>(in_shape_[2]) * in_shape_[3];
#pragma omp parallel for schedule(static) collapse(2)
  for (int bi = 0; bi < bsz; ++bi) {
    for (int ch = 0; ch < c; ++ch) {
      real* p = dx.data() + (static_cast<i64>(bi) * c + ch) * plane;
      const real g = dy.at(bi, ch) / static_cast<real>(plane);
      for (i64 i = 0; i < plane; ++i) p[i] = g;
    }
  }
  return dx;
}

}  // namespace tcdc
