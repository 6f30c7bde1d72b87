#pragma once

#include <cstdint>
#include <vector>

#include "tcdc/codec.hpp"
#include "tcdc/entropy.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// All tables operate on a fixed 16-bit probability grid: one quantum is
// exactly the likelihood floor used by the rate loss.
inline constexpr std::uint32_t kCdfTotal = 1u << 16;

// Carry-propagating byte-oriented range coder. The encoder/decoder pair is
// exact: whatever sequence of (start, size) intervals and direct bits goes
// in comes back out, independent of content.
class RangeEncoder {
 public:
  void encode(std::uint32_t start, std::uint32_t size,
              std::uint32_t total = kCdfTotal);
  void encode_direct(std::uint32_t value, int nbits);
  // Flushes the remaining state (5 bytes) and hands over the stream.
  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  RangeDecoder(const std::uint8_t* data, std::size_t size);

  // Two-phase decode: decode_freq locates the cumulative bucket, then
  // decode_update(start, size) consumes the symbol's interval.
  std::uint32_t decode_freq(std::uint32_t total = kCdfTotal);
  void decode_update(std::uint32_t start, std::uint32_t size);
  std::uint32_t decode_direct(int nbits);

 private:
  std::uint8_t next_byte();

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

// A probability table quantized onto the 16-bit grid. Every symbol keeps at
// least one quantum so anything representable stays decodable; the rounding
// error is balanced with a largest-remainder pass.
struct CdfTable {
  std::vector<std::uint32_t> cum;  // nsym+1 entries: 0 ... kCdfTotal

  int nsym() const { return static_cast<int>(cum.size()) - 1; }
  static CdfTable build(const std::vector<real>& probs);

  void encode(RangeEncoder& enc, int symbol) const;
  int decode(RangeDecoder& dec) const;
};

// Shared scale-conditioned tables for the gaussian latent: 64 log-spaced
// sigmas spanning the bound to 256. Each context covers integer offsets
// [-radius, radius] plus a final escape symbol; escaped values are sent as
// raw 32-bit words.
struct GaussianContexts {
  static constexpr int kScales = 64;
  static constexpr real kSigmaMax = 256.0;

  std::vector<CdfTable> tables;
  std::vector<int> radius;
  std::vector<real> sigmas;

  static GaussianContexts build();
  int context_of(real sigma) const;
};

// Per-channel tables for the factorized prior over its integer support,
// plus the same trailing escape symbol.
struct PriorTables {
  std::vector<CdfTable> tables;
  std::vector<int> lo;  // support start per channel

  static PriorTables build(const FactorizedPrior& prior);
};

// Container format (all integers big-endian):
//   magic "TCDC" | version u8 | quality u8 | H u16 | W u16 | M u16 |
//   Nh u16 | z_len u32 | z payload | y_len u32 | y payload
struct BitstreamHeader {
  int quality = 0;
  int h = 0;
  int w = 0;
  int m = 0;
  int nh = 0;
};

struct CompressResult {
  std::vector<std::uint8_t> stream;
  Tensor y_hat;  // decoder-identical quantized latents
  Tensor z_hat;
  RateEstimate estimate;           // from likelihoods at the coded points
  std::int64_t payload_bits = 0;   // measured: 8 * (z_len + y_len)
};

struct DecompressResult {
  Tensor image;
  Tensor y_hat;
  Tensor z_hat;
  BitstreamHeader header;
};

// Latent-plane codecs behind compress/decompress. Values outside a table's
// covered range take its escape symbol followed by a raw 32-bit word, so
// round-trips are exact for any integral latents.
std::vector<std::uint8_t> encode_z_latents(const Tensor& z_hat,
                                           const PriorTables& zt);
Tensor decode_z_latents(const std::uint8_t* data, std::size_t size,
                        const std::vector<int>& shape, const PriorTables& zt);
std::vector<std::uint8_t> encode_y_latents(const Tensor& y_hat,
                                           const GaussianParams& gp,
                                           const GaussianContexts& gauss);
Tensor decode_y_latents(const std::uint8_t* data, std::size_t size,
                        const GaussianParams& gp,
                        const GaussianContexts& gauss);

CompressResult compress(CodecModel& model, FactorizedPrior& prior,
                        const Tensor& image, int quality,
                        const GaussianContexts& gauss,
                        const PriorTables& zt);

DecompressResult decompress(CodecModel& model,
                            const std::vector<std::uint8_t>& stream,
                            const GaussianContexts& gauss,
                            const PriorTables& zt);

}  // namespace tcdc
