#include "tcdc/kernels.hpp"

#include <cmath>
#include <vector>

#include "tcdc/parallel.hpp"

namespace tcdc::kernels {

namespace {

using i64 = std::int64_t;

// Grow-only scratch buffers. Kernels are driven from the main thread (the
// parallelism lives inside each kernel), so plain statics are fine.
std::vector<real>& scratch(int which, i64 n) {
  static std::vector<real> bufs[3];
  auto& b = bufs[which];
  if (static_cast<i64>(b.size()) < n) b.resize(n);
  return b;
}

void add_channel_bias(real* y, const real* bias, int batch, int channels,
                      i64 plane) {
  if (bias == nullptr) return;
#pragma omp parallel for schedule(static) collapse(2)
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      real* p = y + (static_cast<i64>(b) * channels + c) * plane;
      const real v = bias[c];
      for (i64 i = 0; i < plane; ++i) p[i] += v;
    }
  }
}

// Shared core for conv2d_backward_input / deconv2d_forward: dx_b = col2im(W^T dy_b).
void conv_input_grad(const real* dy, const real* w, real* dx,
                     const ConvDims& d) {
  const i64 ckk = static_cast<i64>(d.in_c) * d.kh * d.kw;
  const i64 opix = static_cast<i64>(d.out_h) * d.out_w;
  const i64 in_plane = static_cast<i64>(d.in_h) * d.in_w;
  real* wt = scratch(0, ckk * d.out_c).data();
  transpose(d.out_c, static_cast<int>(ckk), w, wt);
  real* dcols = scratch(1, ckk * opix).data();
  for (int b = 0; b < d.batch; ++b) {
    gemm(static_cast<int>(ckk), d.out_c, static_cast<int>(opix), wt,
         dy + static_cast<i64>(b) * d.out_c * opix, dcols);
    col2im(dcols, d, dx + static_cast<i64>(b) * d.in_c * in_plane);
  }
}

// Shared core for conv2d_backward_params / deconv2d_backward_params:
// dw += sum_b dy_b * cols_b^T. db (over out_c) is optional.
void conv_param_grad(const real* dy, const real* x, real* dw, real* db,
                     const ConvDims& d) {
  const i64 ckk = static_cast<i64>(d.in_c) * d.kh * d.kw;
  const i64 opix = static_cast<i64>(d.out_h) * d.out_w;
  const i64 in_plane = static_cast<i64>(d.in_h) * d.in_w;
  real* cols = scratch(1, ckk * opix).data();
  real* colst = scratch(2, ckk * opix).data();
  for (int b = 0; b < d.batch; ++b) {
    im2col(x + static_cast<i64>(b) * d.in_c * in_plane, d, cols);
    transpose(static_cast<int>(ckk), static_cast<int>(opix), cols, colst);
    gemm(d.out_c, static_cast<int>(opix), static_cast<int>(ckk),
         dy + static_cast<i64>(b) * d.out_c * opix, colst, dw,
         /*accumulate=*/true);
  }
  if (db != nullptr) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.out_c; ++co) {
      real acc = 0.0;
      for (int b = 0; b < d.batch; ++b) {
        const real* p = dy + (static_cast<i64>(b) * d.out_c + co) * opix;
        for (i64 i = 0; i < opix; ++i) acc += p[i];
      }
      db[co] += acc;
    }
  }
}

}  // namespace

ConvDims ConvDims::conv(int batch, int in_c, int in_h, int in_w, int out_c,
                        int k, int stride, int pad) {
  require(batch > 0 && in_c > 0 && in_h > 0 && in_w > 0 && out_c > 0,
          "conv dims must be positive");
  require(k > 0 && stride > 0 && pad >= 0, "bad conv kernel geometry");
  ConvDims d;
  d.batch = batch;
  d.in_c = in_c;
  d.in_h = in_h;
  d.in_w = in_w;
  d.out_c = out_c;
  d.kh = k;
  d.kw = k;
  d.stride = stride;
  d.pad = pad;
  d.out_h = (in_h + 2 * pad - k) / stride + 1;
  d.out_w = (in_w + 2 * pad - k) / stride + 1;
  require(d.out_h > 0 && d.out_w > 0, "conv output collapses to zero");
  return d;
}

void gemm(int m, int k, int n, const real* a, const real* b, real* c,
          bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    real* crow = c + static_cast<i64>(i) * n;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    }
    const real* arow = a + static_cast<i64>(i) * k;
    for (int p = 0; p < k; ++p) {
      const real av = arow[p];
      const real* brow = b + static_cast<i64>(p) * n;
      // Explicit fma pins the arithmetic so the serial reference can chain
      // the very same operations (no dependence on -ffp-contract).
#pragma omp simd
      for (int j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

void transpose(int rows, int cols, const real* src, real* dst) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const real* s = src + static_cast<i64>(r) * cols;
    for (int c = 0; c < cols; ++c) dst[static_cast<i64>(c) * rows + r] = s[c];
  }
}

void im2col(const real* x, const ConvDims& d, real* cols) {
  const i64 opix = static_cast<i64>(d.out_h) * d.out_w;
#pragma omp parallel for schedule(static) collapse(2)
  for (int ci = 0; ci < d.in_c; ++ci) {
    for (int u = 0; u < d.kh; ++u) {
      for (int v = 0; v < d.kw; ++v) {
        real* row =
            cols + ((static_cast<i64>(ci) * d.kh + u) * d.kw + v) * opix;
        const real* plane = x + static_cast<i64>(ci) * d.in_h * d.in_w;
        for (int oh = 0; oh < d.out_h; ++oh) {
          const int ih = oh * d.stride - d.pad + u;
          for (int ow = 0; ow < d.out_w; ++ow) {
            const int iw = ow * d.stride - d.pad + v;
            const bool in = ih >= 0 && ih < d.in_h && iw >= 0 && iw < d.in_w;
            row[static_cast<i64>(oh) * d.out_w + ow] =
                in ? plane[static_cast<i64>(ih) * d.in_w + iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const real* cols, const ConvDims& d, real* x) {
  const i64 opix = static_cast<i64>(d.out_h) * d.out_w;
  // Gather form: each input pixel sums the kernel taps that cover it, in
  // fixed (u, v) order, so the parallel loop is race-free and deterministic.
#pragma omp parallel for schedule(static) collapse(2)
  for (int ci = 0; ci < d.in_c; ++ci) {
    for (int h = 0; h < d.in_h; ++h) {
      for (int w = 0; w < d.in_w; ++w) {
        real acc = 0.0;
        for (int u = 0; u < d.kh; ++u) {
          const int oh_num = h + d.pad - u;
          if (oh_num < 0 || oh_num % d.stride != 0) continue;
          const int oh = oh_num / d.stride;
          if (oh >= d.out_h) continue;
          for (int v = 0; v < d.kw; ++v) {
            const int ow_num = w + d.pad - v;
            if (ow_num < 0 || ow_num % d.stride != 0) continue;
            const int ow = ow_num / d.stride;
            if (ow >= d.out_w) continue;
            acc += cols[((static_cast<i64>(ci) * d.kh + u) * d.kw + v) * opix +
                        static_cast<i64>(oh) * d.out_w + ow];
          }
        }
        x[(static_cast<i64>(ci) * d.in_h + h) * d.in_w + w] = acc;
      }
    }
  }
}

void conv2d_forward(const real* x, const real* w, const real* bias, real* y,
                    const ConvDims& d) {
  const i64 ckk = static_cast<i64>(d.in_c) * d.kh * d.kw;
  const i64 opix = static_cast<i64>(d.out_h) * d.out_w;
  const i64 in_plane = static_cast<i64>(d.in_h) * d.in_w;
  real* cols = scratch(1, ckk * opix).data();
  for (int b = 0; b < d.batch; ++b) {
    im2col(x + static_cast<i64>(b) * d.in_c * in_plane, d, cols);
    gemm(d.out_c, static_cast<int>(ckk), static_cast<int>(opix), w, cols,
         y + static_cast<i64>(b) * d.out_c * opix);
  }
  add_channel_bias(y, bias, d.batch, d.out_c, opix);
}

void conv2d_backward_input(const real* dy, const real* w, real* dx,
                           const ConvDims& d) {
  conv_input_grad(dy, w, dx, d);
}

void conv2d_backward_params(const real* dy, const real* x, real* dw, real* db,
                            const ConvDims& d) {
  conv_param_grad(dy, x, dw, db, d);
}

void deconv2d_forward(const real* x, const real* w, const real* bias, real* y,
                      const ConvDims& d) {
  // The transposed convolution is the input gradient of its mirror conv.
  conv_input_grad(x, w, y, d);
  add_channel_bias(y, bias, d.batch, d.in_c,
                   static_cast<i64>(d.in_h) * d.in_w);
}

void deconv2d_backward_input(const real* dy, const real* w, real* dx,
                             const ConvDims& d) {
  conv2d_forward(dy, w, nullptr, dx, d);
}

void deconv2d_backward_params(const real* dy, const real* x, real* dw,
                              real* db, const ConvDims& d) {
  // Weight grad: swap the roles of input and output grad in the mirror conv.
  conv_param_grad(x, dy, dw, nullptr, d);
  if (db != nullptr) {
    const i64 plane = static_cast<i64>(d.in_h) * d.in_w;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < d.in_c; ++c) {
      real acc = 0.0;
      for (int b = 0; b < d.batch; ++b) {
        const real* p = dy + (static_cast<i64>(b) * d.in_c + c) * plane;
        for (i64 i = 0; i < plane; ++i) acc += p[i];
      }
      db[c] += acc;
    }
  }
}

}  // namespace tcdc::kernels
