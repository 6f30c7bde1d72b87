#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcdc {

using real = double;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

// Seeded random stream. Every stochastic draw in the project goes through
// one of these so runs are reproducible from a single seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  real uniform(real lo, real hi) {
    return std::uniform_real_distribution<real>(lo, hi)(gen_);
  }
  real normal(real mean = 0.0, real stddev = 1.0) {
    return std::normal_distribution<real>(mean, stddev)(gen_);
  }
  bool bernoulli(real p) { return std::bernoulli_distribution(p)(gen_); }
  std::uint64_t next_u64() { return gen_(); }
  // Integer in [0, n).
  std::int64_t below(std::int64_t n) {
    return std::uniform_int_distribution<std::int64_t>(0, n - 1)(gen_);
  }
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(p[i], p[below(i + 1)]);
    return p;
  }

 private:
  std::mt19937_64 gen_;
};

// Dense row-major tensor of doubles. Shapes are small vectors of ints;
// data is contiguous. This is deliberately minimal: layers and kernels
// work on raw pointers, the class only owns storage and shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, real v);
  static Tensor from(std::vector<int> shape, std::vector<real> values);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  real& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  real operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 4-d and 2-d indexers for the common layouts (B,C,H,W) and (R,C).
  real& at(int b, int c, int h, int w) {
    return data_[static_cast<size_t>(((static_cast<std::int64_t>(b) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  real at(int b, int c, int h, int w) const {
    return data_[static_cast<size_t>(((static_cast<std::int64_t>(b) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  real& at(int r, int c) {
    return data_[static_cast<size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
  }
  real at(int r, int c) const {
    return data_[static_cast<size_t>(static_cast<std::int64_t>(r) * shape_[1] + c)];
  }

  void fill(real v);
  void zero() { fill(0.0); }
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  real min_value() const;
  real max_value() const;

  // In-place elementwise helpers used all over the training code.
  void add_scaled(const Tensor& other, real scale);  // this += scale * other

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<real> data_;
};

Tensor randn(Rng& rng, std::vector<int> shape, real stddev = 1.0);

}  // namespace tcdc
