#pragma once

#include <cstdint>

#include "tcdc/tensor.hpp"

namespace tcdc::kernels {

// Geometry of a strided 2-d convolution. For transposed convolutions the
// same struct describes the mirror convolution (the one whose input
// gradient realizes the transposed forward pass).
struct ConvDims {
  int batch = 0;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0;
  int kh = 0, kw = 0;
  int stride = 1, pad = 0;
  int out_h = 0, out_w = 0;

  static ConvDims conv(int batch, int in_c, int in_h, int in_w, int out_c,
                       int k, int stride, int pad);

  std::int64_t in_numel() const {
    return static_cast<std::int64_t>(batch) * in_c * in_h * in_w;
  }
  std::int64_t out_numel() const {
    return static_cast<std::int64_t>(batch) * out_c * out_h * out_w;
  }
};

// C(m x n) = A(m x k) * B(k x n), optionally accumulating into C.
// Per output element the k-summation order is fixed, so results are
// bitwise identical for any thread count.
void gemm(int m, int k, int n, const real* a, const real* b, real* c,
          bool accumulate = false);

void transpose(int rows, int cols, const real* src, real* dst);

// cols has shape (in_c*kh*kw, out_h*out_w), row index (ci, u, v) major.
void im2col(const real* x, const ConvDims& d, real* cols);
// Gather-form adjoint of im2col: writes (does not accumulate) the input
// image. Safe to run in parallel over input pixels.
void col2im(const real* cols, const ConvDims& d, real* x);

// x: (B, in_c, in_h, in_w), w: (out_c, in_c, kh, kw), bias: (out_c) or null.
void conv2d_forward(const real* x, const real* w, const real* bias, real* y,
                    const ConvDims& d);
void conv2d_backward_input(const real* dy, const real* w, real* dx,
                           const ConvDims& d);
// Accumulates into dw/db (callers zero them at the start of a step).
void conv2d_backward_params(const real* dy, const real* x, real* dw, real* db,
                            const ConvDims& d);

// Transposed convolution. Weight layout (in_c, out_c, kh, kw); `d` is the
// mirror convolution: d.in_* describe the deconv OUTPUT, d.out_* the deconv
// INPUT, d.out_c the deconv in_c and d.in_c the deconv out_c.
// out_h = (in_h - 1)*stride - 2*pad + kh + out_pad must equal d.in_h.
void deconv2d_forward(const real* x, const real* w, const real* bias, real* y,
                      const ConvDims& d);
void deconv2d_backward_input(const real* dy, const real* w, real* dx,
                             const ConvDims& d);
void deconv2d_backward_params(const real* dy, const real* x, real* dw,
                              real* db, const ConvDims& d);

// Naive serial reference implementations. Loop nests are arranged to
// accumulate in the same per-element order as the production kernels, so
// the test suite can require exact equality.
namespace ref {
void gemm(int m, int k, int n, const real* a, const real* b, real* c,
          bool accumulate = false);
void conv2d_forward(const real* x, const real* w, const real* bias, real* y,
                    const ConvDims& d);
void conv2d_backward_input(const real* dy, const real* w, real* dx,
                           const ConvDims& d);
void conv2d_backward_params(const real* dy, const real* x, real* dw, real* db,
                            const ConvDims& d);
void deconv2d_forward(const real* x, const real* w, const real* bias, real* y,
                      const ConvDims& d);
void deconv2d_backward_input(const real* dy, const real* w, real* dx,
                             const ConvDims& d);
void deconv2d_backward_params(const real* dy, const real* x, real* dw,
                              real* db, const ConvDims& d);
}  // namespace ref

}  // namespace tcdc::kernels
