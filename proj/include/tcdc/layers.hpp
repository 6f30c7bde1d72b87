#pragma once

#include <string>
#include <vector>

#include "tcdc/kernels.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// A learnable tensor with its gradient accumulator. `trainable` is the
// freeze switch: optimizers skip parameters whose flag is off.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
  void zero_grad() { grad.zero(); }
};

// Layers follow one convention: forward() caches whatever backward() needs,
// backward(dy) returns dL/dinput and accumulates parameter gradients.
// Networks chain them by hand; there is no autograd tape.

class Conv2d {
 public:
  Conv2d(const std::string& name, int in_c, int out_c, int k, int stride,
         int pad, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  Parameter w, b;
  int in_c, out_c, k, stride, pad;

 private:
  Tensor x_;
  kernels::ConvDims dims_;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d(const std::string& name, int in_c, int out_c, int k,
                  int stride, int pad, int out_pad, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  Parameter w, b;  // w laid out (in_c, out_c, k, k)
  int in_c, out_c, k, stride, pad, out_pad;

 private:
  Tensor x_;
  kernels::ConvDims mirror_;  // the conv whose input grad is our forward
};

// Generalized divisive normalization: y_i = x_i / sqrt(beta_i + sum_j
// gamma_ij x_j^2), or times sqrt(...) for the inverse form. beta and gamma
// are kept positive by square reparameterization.
class Gdn {
 public:
  Gdn(const std::string& name, int channels, bool inverse);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out) {
    out.push_back(&beta_raw);
    out.push_back(&gamma_raw);
  }

  Parameter beta_raw, gamma_raw;
  bool inverse;
  int channels;

 private:
  Tensor x_, s_, d_, s2_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Tensor x_;
};

class BatchNorm2d {
 public:
  BatchNorm2d(const std::string& name, int channels);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  Parameter w, b;
  // Running stats are buffers, not parameters: saved in checkpoints but
  // never touched by optimizers, and only updated by training-mode forward.
  Tensor running_mean, running_var;
  real momentum = 0.1;
  real eps = 1e-5;
  int channels;

 private:
  bool trained_forward_ = false;
  Tensor x_, xhat_, inv_std_, mean_;
};

class Linear {
 public:
  Linear(const std::string& name, int in_f, int out_f, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }

  Parameter w, b;  // w laid out (out_f, in_f)
  int in_f, out_f;

 private:
  Tensor x_;
};

class Dropout {
 public:
  explicit Dropout(real p) : p(p) {}
  Tensor forward(const Tensor& x, bool training, Rng& rng);
  Tensor backward(const Tensor& dy);

  real p;

 private:
  Tensor mask_;
  bool identity_ = true;
};

class MaxPool2d {
 public:
  MaxPool2d(int k, int stride, int pad) : k(k), stride(stride), pad(pad) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  int k, stride, pad;

 private:
  std::vector<int> in_shape_;
  std::vector<std::int64_t> argmax_;
};

// (B, C, H, W) -> (B, C) mean over the spatial plane.
class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  std::vector<int> in_shape_;
};

}  // namespace tcdc
