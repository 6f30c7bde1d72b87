#include <cmath>

#include "tcdc/kernels.hpp"

// Naive direct-convolution reference kernels. These are deliberately the
// dumbest correct loops we could write; the production kernels are tested
// for exact agreement against them. Two things make bitwise comparison
// possible: every multiply-add is an explicit std::fma (pinning the
// arithmetic independently of -ffp-contract), and partial sums are formed
// with the same hierarchy as the im2col/gemm pipeline — gemm chains one fma
// per k step (continuing from the existing value when accumulating), and
// col2im adds one already-rounded per-tap partial at a time.

namespace tcdc::kernels::ref {

namespace {
using i64 = std::int64_t;

inline i64 idx4(int a, int b, int c, int d, int nb, int nc, int nd) {
  return ((static_cast<i64>(a) * nb + b) * nc + c) * nd + d;
}
}  // namespace

void gemm(int m, int k, int n, const real* a, const real* b, real* c,
          bool accumulate) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      real acc = accumulate ? c[static_cast<i64>(i) * n + j] : 0.0;
      for (int p = 0; p < k; ++p) {
        acc = std::fma(a[static_cast<i64>(i) * k + p],
                       b[static_cast<i64>(p) * n + j], acc);
      }
      c[static_cast<i64>(i) * n + j] = acc;
    }
  }
}

void conv2d_forward(const real* x, const real* w, const real* bias, real* y,
                    const ConvDims& d) {
  for (int b = 0; b < d.batch; ++b) {
    for (int co = 0; co < d.out_c; ++co) {
      for (int oh = 0; oh < d.out_h; ++oh) {
        for (int ow = 0; ow < d.out_w; ++ow) {
          // One continuous chain over (ci, u, v), exactly like the gemm over
          // im2col rows; padded taps are exact zeros there and drop out.
          real acc = 0.0;
          for (int ci = 0; ci < d.in_c; ++ci) {
            for (int u = 0; u < d.kh; ++u) {
              const int ih = oh * d.stride - d.pad + u;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int v = 0; v < d.kw; ++v) {
                const int iw = ow * d.stride - d.pad + v;
                if (iw < 0 || iw >= d.in_w) continue;
                acc = std::fma(w[idx4(co, ci, u, v, d.in_c, d.kh, d.kw)],
                               x[idx4(b, ci, ih, iw, d.in_c, d.in_h, d.in_w)],
                               acc);
              }
            }
          }
          if (bias != nullptr) acc += bias[co];
          y[idx4(b, co, oh, ow, d.out_c, d.out_h, d.out_w)] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const real* dy, const real* w, real* dx,
                           const ConvDims& d) {
  for (int b = 0; b < d.batch; ++b) {
    for (int ci = 0; ci < d.in_c; ++ci) {
      for (int h = 0; h < d.in_h; ++h) {
        for (int w_ = 0; w_ < d.in_w; ++w_) {
          real acc = 0.0;
          for (int u = 0; u < d.kh; ++u) {
            const int oh_num = h + d.pad - u;
            if (oh_num < 0 || oh_num % d.stride != 0) continue;
            const int oh = oh_num / d.stride;
            if (oh >= d.out_h) continue;
            for (int v = 0; v < d.kw; ++v) {
              const int ow_num = w_ + d.pad - v;
              if (ow_num < 0 || ow_num % d.stride != 0) continue;
              const int ow = ow_num / d.stride;
              if (ow >= d.out_w) continue;
              // The pipeline rounds each (u, v) tap's channel sum before
              // col2im adds it, so form the partial separately here too.
              real tap = 0.0;
              for (int co = 0; co < d.out_c; ++co) {
                tap = std::fma(
                    w[idx4(co, ci, u, v, d.in_c, d.kh, d.kw)],
                    dy[idx4(b, co, oh, ow, d.out_c, d.out_h, d.out_w)], tap);
              }
              acc += tap;
            }
          }
          dx[idx4(b, ci, h, w_, d.in_c, d.in_h, d.in_w)] = acc;
        }
      }
    }
  }
}

void conv2d_backward_params(const real* dy, const real* x, real* dw, real* db,
                            const ConvDims& d) {
  for (int b = 0; b < d.batch; ++b) {
    for (int co = 0; co < d.out_c; ++co) {
      for (int ci = 0; ci < d.in_c; ++ci) {
        for (int u = 0; u < d.kh; ++u) {
          for (int v = 0; v < d.kw; ++v) {
            // Chain straight into dw, the way the accumulating gemm does.
            real acc = dw[idx4(co, ci, u, v, d.in_c, d.kh, d.kw)];
            for (int oh = 0; oh < d.out_h; ++oh) {
              const int ih = oh * d.stride - d.pad + u;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int ow = 0; ow < d.out_w; ++ow) {
                const int iw = ow * d.stride - d.pad + v;
                if (iw < 0 || iw >= d.in_w) continue;
                acc = std::fma(
                    dy[idx4(b, co, oh, ow, d.out_c, d.out_h, d.out_w)],
                    x[idx4(b, ci, ih, iw, d.in_c, d.in_h, d.in_w)], acc);
              }
            }
            dw[idx4(co, ci, u, v, d.in_c, d.kh, d.kw)] = acc;
          }
        }
      }
    }
  }
  if (db != nullptr) {
    for (int co = 0; co < d.out_c; ++co) {
      real acc = 0.0;
      for (int b = 0; b < d.batch; ++b) {
        for (int oh = 0; oh < d.out_h; ++oh) {
          for (int ow = 0; ow < d.out_w; ++ow) {
            acc += dy[idx4(b, co, oh, ow, d.out_c, d.out_h, d.out_w)];
          }
        }
      }
      db[co] += acc;
    }
  }
}

void deconv2d_forward(const real* x, const real* w, const real* bias, real* y,
                      const ConvDims& d) {
  // y has mirror-input shape (d.in_*), x has mirror-output shape (d.out_*).
  for (int b = 0; b < d.batch; ++b) {
    for (int a = 0; a < d.in_c; ++a) {
      for (int h = 0; h < d.in_h; ++h) {
        for (int w_ = 0; w_ < d.in_w; ++w_) {
          real acc = 0.0;
          for (int u = 0; u < d.kh; ++u) {
            const int oh_num = h + d.pad - u;
            if (oh_num < 0 || oh_num % d.stride != 0) continue;
            const int oh = oh_num / d.stride;
            if (oh >= d.out_h) continue;
            for (int v = 0; v < d.kw; ++v) {
              const int ow_num = w_ + d.pad - v;
              if (ow_num < 0 || ow_num % d.stride != 0) continue;
              const int ow = ow_num / d.stride;
              if (ow >= d.out_w) continue;
              real tap = 0.0;
              for (int k = 0; k < d.out_c; ++k) {
                tap = std::fma(
                    w[idx4(k, a, u, v, d.in_c, d.kh, d.kw)],
                    x[idx4(b, k, oh, ow, d.out_c, d.out_h, d.out_w)], tap);
              }
              acc += tap;
            }
          }
          if (bias != nullptr) acc += bias[a];
          y[idx4(b, a, h, w_, d.in_c, d.in_h, d.in_w)] = acc;
        }
      }
    }
  }
}

void deconv2d_backward_input(const real* dy, const real* w, real* dx,
                             const ConvDims& d) {
  // Same geometry as the mirror conv forward with dy as input.
  for (int b = 0; b < d.batch; ++b) {
    for (int k = 0; k < d.out_c; ++k) {
      for (int oh = 0; oh < d.out_h; ++oh) {
        for (int ow = 0; ow < d.out_w; ++ow) {
          real acc = 0.0;
          for (int a = 0; a < d.in_c; ++a) {
            for (int u = 0; u < d.kh; ++u) {
              const int ih = oh * d.stride - d.pad + u;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int v = 0; v < d.kw; ++v) {
                const int iw = ow * d.stride - d.pad + v;
                if (iw < 0 || iw >= d.in_w) continue;
                acc = std::fma(w[idx4(k, a, u, v, d.in_c, d.kh, d.kw)],
                               dy[idx4(b, a, ih, iw, d.in_c, d.in_h, d.in_w)],
                               acc);
              }
            }
          }
          dx[idx4(b, k, oh, ow, d.out_c, d.out_h, d.out_w)] = acc;
        }
      }
    }
  }
}

void deconv2d_backward_params(const real* dy, const real* x, real* dw,
                              real* db, const ConvDims& d) {
  for (int b = 0; b < d.batch; ++b) {
    for (int k = 0; k < d.out_c; ++k) {
      for (int a = 0; a < d.in_c; ++a) {
        for (int u = 0; u < d.kh; ++u) {
          for (int v = 0; v < d.kw; ++v) {
            real acc = dw[idx4(k, a, u, v, d.in_c, d.kh, d.kw)];
            for (int oh = 0; oh < d.out_h; ++oh) {
              const int ih = oh * d.stride - d.pad + u;
              if (ih < 0 || ih >= d.in_h) continue;
              for (int ow = 0; ow < d.out_w; ++ow) {
                const int iw = ow * d.stride - d.pad + v;
                if (iw < 0 || iw >= d.in_w) continue;
                acc = std::fma(
                    x[idx4(b, k, oh, ow, d.out_c, d.out_h, d.out_w)],
                    dy[idx4(b, a, ih, iw, d.in_c, d.in_h, d.in_w)], acc);
              }
            }
            dw[idx4(k, a, u, v, d.in_c, d.kh, d.kw)] = acc;
          }
        }
      }
    }
  }
  if (db != nullptr) {
    for (int c = 0; c < d.in_c; ++c) {
      real acc = 0.0;
      for (int b = 0; b < d.batch; ++b) {
        for (int h = 0; h < d.in_h; ++h) {
          for (int w_ = 0; w_ < d.in_w; ++w_) {
            acc += dy[idx4(b, c, h, w_, d.in_c, d.in_h, d.in_w)];
          }
        }
      }
      db[c] += acc;
    }
  }
}

}  // namespace tcdc::kernels::ref
