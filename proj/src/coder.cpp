#include "tcdc/coder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace tcdc {

namespace {

using i64 = std::int64_t;

constexpr std::uint32_t kTopValue = 1u << 24;
constexpr real kInvSqrt2 = 0.7071067811865476;

// Mass of the integer bin at offset k under a centered gaussian, evaluated
// through the upper tail so distant bins keep full relative precision.
real gaussian_bin(real k, real sigma) {
  const real t = std::fabs(k);
  return 0.5 * (std::erfc((t - 0.5) / sigma * kInvSqrt2) -
                std::erfc((t + 0.5) / sigma * kInvSqrt2));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Bounds-checked big-endian reader for the container header.
struct ByteReader {
  const std::uint8_t* p;
  std::size_t size;
  std::size_t pos = 0;

  std::uint32_t u8() {
    require(pos + 1 <= size, "truncated stream");
    return p[pos++];
  }
  std::uint32_t u16() {
    require(pos + 2 <= size, "truncated stream");
    const std::uint32_t v = (static_cast<std::uint32_t>(p[pos]) << 8) | p[pos + 1];
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    require(pos + 4 <= size, "truncated stream");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | p[pos + i];
    pos += 4;
    return v;
  }
  const std::uint8_t* bytes(std::size_t n) {
    require(pos + n <= size, "truncated stream");
    const std::uint8_t* q = p + pos;
    pos += n;
    return q;
  }
};

// Integer latent value with a range check; the coder escapes to raw 32-bit
// words, so anything outside that is a hard error rather than corruption.
std::int32_t latent_int(real v) {
  const real r = std::rint(v);
  require(r >= -2147483648.0 && r <= 2147483647.0, "latent out of range");
  return static_cast<std::int32_t>(r);
}

}  // namespace

// ------------------------------------------------------------ RangeEncoder

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    std::uint8_t byte = cache_;
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<std::uint8_t>(byte + carry));
      byte = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(std::uint32_t start, std::uint32_t size,
                          std::uint32_t total) {
  require(size > 0 && start + size <= total && total <= kCdfTotal,
          "bad coder interval");
  range_ /= total;
  low_ += start * static_cast<std::uint64_t>(range_);
  range_ *= size;
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_direct(std::uint32_t value, int nbits) {
  require(nbits > 0 && nbits <= 32, "bad direct bit count");
  for (int i = nbits - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1u) low_ += range_;
    while (range_ < kTopValue) {
      range_ <<= 8;
      shift_low();
    }
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

// ------------------------------------------------------------ RangeDecoder

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : data_(data), size_(size) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  // Past-the-end reads return zero: the encoder's 5-byte flush guarantees a
  // well-formed stream never depends on them.
  return pos_ < size_ ? data_[pos_++] : 0;
}

std::uint32_t RangeDecoder::decode_freq(std::uint32_t total) {
  range_ /= total;
  const std::uint32_t f = code_ / range_;
  return f < total ? f : total - 1;
}

void RangeDecoder::decode_update(std::uint32_t start, std::uint32_t size) {
  code_ -= start * range_;
  range_ *= size;
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

std::uint32_t RangeDecoder::decode_direct(int nbits) {
  require(nbits > 0 && nbits <= 32, "bad direct bit count");
  std::uint32_t v = 0;
  for (int i = 0; i < nbits; ++i) {
    range_ >>= 1;
    std::uint32_t bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    v = (v << 1) | bit;
    while (range_ < kTopValue) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }
  return v;
}

// ---------------------------------------------------------------- CdfTable

CdfTable CdfTable::build(const std::vector<real>& probs) {
  const int n = static_cast<int>(probs.size());
  require(n >= 1 && static_cast<std::uint32_t>(n) <= kCdfTotal,
          "cdf table symbol count out of range");
  std::vector<real> raw(probs.size());
  std::vector<i64> q(probs.size());
  i64 sum = 0;
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(probs[i]) && probs[i] >= 0.0,
            "cdf table needs nonnegative probabilities");
    raw[i] = probs[i] * kCdfTotal;
    q[i] = std::max<i64>(1, static_cast<i64>(std::rint(raw[i])));
    sum += q[i];
  }
  // Largest-remainder rebalance; removals only touch bins above one quantum,
  // so every symbol stays representable.
  i64 diff = static_cast<i64>(kCdfTotal) - sum;
  while (diff != 0) {
    if (diff > 0) {
      int best = 0;
      real best_need = raw[0] - static_cast<real>(q[0]);
      for (int i = 1; i < n; ++i) {
        const real need = raw[i] - static_cast<real>(q[i]);
        if (need > best_need) {
          best_need = need;
          best = i;
        }
      }
      ++q[best];
      --diff;
    } else {
      int best = -1;
      real best_excess = 0.0;
      for (int i = 0; i < n; ++i) {
        if (q[i] <= 1) continue;
        const real excess = static_cast<real>(q[i]) - raw[i];
        if (best < 0 || excess > best_excess) {
          best_excess = excess;
          best = i;
        }
      }
      require(best >= 0, "cdf table does not fit the quantization grid");
      --q[best];
      ++diff;
    }
  }
  CdfTable t;
  t.cum.resize(probs.size() + 1);
  t.cum[0] = 0;
  for (int i = 0; i < n; ++i)
    t.cum[static_cast<std::size_t>(i) + 1] =
        t.cum[static_cast<std::size_t>(i)] + static_cast<std::uint32_t>(q[i]);
  require(t.cum.back() == kCdfTotal, "cdf table rebalance failed");
  return t;
}

void CdfTable::encode(RangeEncoder& enc, int symbol) const {
  require(symbol >= 0 && symbol < nsym(), "symbol outside the table");
  const std::size_t s = static_cast<std::size_t>(symbol);
  enc.encode(cum[s], cum[s + 1] - cum[s]);
}

int CdfTable::decode(RangeDecoder& dec) const {
  const std::uint32_t f = dec.decode_freq();
  // First bucket whose upper edge exceeds f.
  const auto it = std::upper_bound(cum.begin() + 1, cum.end(), f);
  const int s = static_cast<int>(it - cum.begin()) - 1;
  const std::size_t i = static_cast<std::size_t>(s);
  dec.decode_update(cum[i], cum[i + 1] - cum[i]);
  return s;
}

// -------------------------------------------------------- GaussianContexts

GaussianContexts GaussianContexts::build() {
  GaussianContexts g;
  g.tables.reserve(kScales);
  g.radius.reserve(kScales);
  g.sigmas.reserve(kScales);
  const real lo = std::log(kSigmaMin);
  const real step = (std::log(kSigmaMax) - lo) / (kScales - 1);
  for (int j = 0; j < kScales; ++j) {
    const real sigma = std::exp(lo + step * j);
    const int r = std::max(static_cast<int>(std::ceil(4.5 * sigma)) + 2, 24);
    std::vector<real> probs;
    probs.reserve(static_cast<std::size_t>(2 * r + 2));
    real covered = 0.0;
    for (int k = -r; k <= r; ++k) {
      const real p = gaussian_bin(static_cast<real>(k), sigma);
      probs.push_back(p);
      covered += p;
    }
    probs.push_back(std::max(1.0 - covered, 0.0));  // escape
    g.sigmas.push_back(sigma);
    g.radius.push_back(r);
    g.tables.push_back(CdfTable::build(probs));
  }
  return g;
}

int GaussianContexts::context_of(real sigma) const {
  const real lo = std::log(kSigmaMin);
  const real step = (std::log(kSigmaMax) - lo) / (kScales - 1);
  const real x = std::log(std::max(sigma, kSigmaMin));
  int j = static_cast<int>(std::rint((x - lo) / step));
  return std::clamp(j, 0, kScales - 1);
}

// ------------------------------------------------------------- PriorTables

PriorTables PriorTables::build(const FactorizedPrior& prior) {
  PriorTables t;
  const int c = prior.channels();
  t.tables.reserve(static_cast<std::size_t>(c));
  t.lo.resize(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    int lo = 0, hi = 0;
    prior.support(ch, &lo, &hi);
    std::vector<real> probs;
    probs.reserve(static_cast<std::size_t>(hi - lo + 2));
    real covered = 0.0;
    for (int v = lo; v <= hi; ++v) {
      const real p = prior.cdf(ch, static_cast<real>(v) + 0.5) -
                     prior.cdf(ch, static_cast<real>(v) - 0.5);
      probs.push_back(std::max(p, 0.0));
      covered += std::max(p, 0.0);
    }
    probs.push_back(std::max(1.0 - covered, 0.0));  // escape
    t.lo[static_cast<std::size_t>(ch)] = lo;
    t.tables.push_back(CdfTable::build(probs));
  }
  return t;
}

// --------------------------------------------------------------- pipeline

std::vector<std::uint8_t> encode_z_latents(const Tensor& z_hat,
                                           const PriorTables& zt) {
  RangeEncoder enc;
  const int c = z_hat.dim(1);
  const i64 plane = static_cast<i64>(z_hat.dim(2)) * z_hat.dim(3);
  for (i64 i = 0; i < z_hat.numel(); ++i) {
    const int ch = static_cast<int>(i / plane) % c;
    const CdfTable& table = zt.tables[static_cast<std::size_t>(ch)];
    const std::int32_t v = latent_int(z_hat[i]);
    const i64 s = static_cast<i64>(v) - zt.lo[static_cast<std::size_t>(ch)];
    if (s >= 0 && s < table.nsym() - 1) {
      table.encode(enc, static_cast<int>(s));
    } else {
      table.encode(enc, table.nsym() - 1);
      enc.encode_direct(static_cast<std::uint32_t>(v), 32);
    }
  }
  return enc.finish();
}

Tensor decode_z_latents(const std::uint8_t* data, std::size_t size,
                        const std::vector<int>& shape, const PriorTables& zt) {
  RangeDecoder dec(data, size);
  Tensor z_hat(shape);
  const int c = shape[1];
  const i64 plane = static_cast<i64>(shape[2]) * shape[3];
  for (i64 i = 0; i < z_hat.numel(); ++i) {
    const int ch = static_cast<int>(i / plane) % c;
    const CdfTable& table = zt.tables[static_cast<std::size_t>(ch)];
    const int s = table.decode(dec);
    if (s == table.nsym() - 1) {
      z_hat[i] = static_cast<real>(
          static_cast<std::int32_t>(dec.decode_direct(32)));
    } else {
      z_hat[i] =
          static_cast<real>(s + zt.lo[static_cast<std::size_t>(ch)]);
    }
  }
  return z_hat;
}

std::vector<std::uint8_t> encode_y_latents(const Tensor& y_hat,
                                           const GaussianParams& gp,
                                           const GaussianContexts& gauss) {
  RangeEncoder enc;
  for (i64 i = 0; i < y_hat.numel(); ++i) {
    const int ctx = gauss.context_of(gp.scale[i]);
    const CdfTable& table = gauss.tables[static_cast<std::size_t>(ctx)];
    const int r = gauss.radius[static_cast<std::size_t>(ctx)];
    const std::int32_t k = latent_int(y_hat[i] - gp.mean[i]);
    if (k >= -r && k <= r) {
      table.encode(enc, k + r);
    } else {
      table.encode(enc, table.nsym() - 1);
      enc.encode_direct(static_cast<std::uint32_t>(k), 32);
    }
  }
  return enc.finish();
}

Tensor decode_y_latents(const std::uint8_t* data, std::size_t size,
                        const GaussianParams& gp,
                        const GaussianContexts& gauss) {
  RangeDecoder dec(data, size);
  Tensor y_hat(gp.mean.shape());
  for (i64 i = 0; i < y_hat.numel(); ++i) {
    const int ctx = gauss.context_of(gp.scale[i]);
    const CdfTable& table = gauss.tables[static_cast<std::size_t>(ctx)];
    const int r = gauss.radius[static_cast<std::size_t>(ctx)];
    const int s = table.decode(dec);
    const std::int32_t k =
        s == table.nsym() - 1
            ? static_cast<std::int32_t>(dec.decode_direct(32))
            : s - r;
    y_hat[i] = gp.mean[i] + static_cast<real>(k);
  }
  return y_hat;
}

CompressResult compress(CodecModel& model, FactorizedPrior& prior,
                        const Tensor& image, int quality,
                        const GaussianContexts& gauss, const PriorTables& zt) {
  require(image.ndim() == 4 && image.dim(0) == 1,
          "compress expects a single image");
  require(quality >= 0 && quality <= 255, "quality must fit a byte");
  require(image.dim(2) <= 0xFFFF && image.dim(3) <= 0xFFFF,
          "image too large for the container");

  CompressResult res;
  Tensor y = model.analysis(image);
  Tensor z = model.hyper_analysis(y);
  res.z_hat = quantize(z, QuantizeMode::round);
  GaussianParams gp = model.hyper_synthesis(res.z_hat);
  res.y_hat = quantize(y, QuantizeMode::round_offset, &gp.mean);

  const std::vector<std::uint8_t> zbytes = encode_z_latents(res.z_hat, zt);
  const std::vector<std::uint8_t> ybytes = encode_y_latents(res.y_hat, gp, gauss);

  GaussianConditional gc;
  const Tensor py = gc.likelihood(res.y_hat, gp);
  const Tensor pz = prior.likelihood(res.z_hat);
  res.estimate = make_rate_estimate(rate_loss({&py}), rate_loss({&pz}), 1,
                                    image.dim(2), image.dim(3));
  res.payload_bits = 8 * static_cast<i64>(zbytes.size() + ybytes.size());

  std::vector<std::uint8_t>& out = res.stream;
  out.reserve(22 + zbytes.size() + ybytes.size());
  out.insert(out.end(), {'T', 'C', 'D', 'C'});
  out.push_back(1);  // version
  out.push_back(static_cast<std::uint8_t>(quality));
  put_u16(out, static_cast<std::uint32_t>(image.dim(2)));
  put_u16(out, static_cast<std::uint32_t>(image.dim(3)));
  put_u16(out, static_cast<std::uint32_t>(model.config().channels_m));
  put_u16(out, static_cast<std::uint32_t>(model.config().channels_hyper));
  put_u32(out, static_cast<std::uint32_t>(zbytes.size()));
  out.insert(out.end(), zbytes.begin(), zbytes.end());
  put_u32(out, static_cast<std::uint32_t>(ybytes.size()));
  out.insert(out.end(), ybytes.begin(), ybytes.end());
  return res;
}

DecompressResult decompress(CodecModel& model,
                            const std::vector<std::uint8_t>& stream,
                            const GaussianContexts& gauss,
                            const PriorTables& zt) {
  ByteReader rd{stream.data(), stream.size()};
  require(stream.size() >= 4 && std::memcmp(stream.data(), "TCDC", 4) == 0,
          "bad magic");
  rd.pos = 4;
  const std::uint32_t version = rd.u8();
  require(version == 1, "unsupported bitstream version");

  DecompressResult res;
  res.header.quality = static_cast<int>(rd.u8());
  res.header.h = static_cast<int>(rd.u16());
  res.header.w = static_cast<int>(rd.u16());
  res.header.m = static_cast<int>(rd.u16());
  res.header.nh = static_cast<int>(rd.u16());
  require(res.header.h > 0 && res.header.w > 0 &&
              res.header.h % 64 == 0 && res.header.w % 64 == 0,
          "bad image dimensions in header");
  require(res.header.m == model.config().channels_m &&
              res.header.nh == model.config().channels_hyper,
          "bitstream was produced by a different architecture");

  const std::uint32_t z_len = rd.u32();
  const std::uint8_t* zp = rd.bytes(z_len);
  res.z_hat = decode_z_latents(
      zp, z_len, {1, res.header.nh, res.header.h / 64, res.header.w / 64}, zt);

  GaussianParams gp = model.hyper_synthesis(res.z_hat);
  const std::uint32_t y_len = rd.u32();
  const std::uint8_t* yp = rd.bytes(y_len);
  res.y_hat = decode_y_latents(yp, y_len, gp, gauss);

  res.image = model.synthesis(res.y_hat);
  clamp01(res.image);
  return res;
}

}  // namespace tcdc
