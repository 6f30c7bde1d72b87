#include "tcdc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tcdc {

[[noreturn]] void fail(const std::string& msg) { throw Error(msg); }

namespace {
std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) fail("negative tensor dimension");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0) {}

Tensor Tensor::full(std::vector<int> shape, real v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<real> values) {
  Tensor t(std::move(shape));
  require(t.numel() == static_cast<std::int64_t>(values.size()),
          "Tensor::from: value count does not match shape");
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = values[static_cast<size_t>(i)];
  return t;
}

void Tensor::fill(real v) {
  for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (real x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

real Tensor::min_value() const {
  require(!data_.empty(), "min_value on empty tensor");
  real m = data_[0];
  for (real x : data_) m = std::min(m, x);
  return m;
}

real Tensor::max_value() const {
  require(!data_.empty(), "max_value on empty tensor");
  real m = data_[0];
  for (real x : data_) m = std::max(m, x);
  return m;
}

void Tensor::add_scaled(const Tensor& other, real scale) {
  require(same_shape(other), "add_scaled: shape mismatch");
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ")";
  return os.str();
}

Tensor randn(Rng& rng, std::vector<int> shape, real stddev) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

}  // namespace tcdc
