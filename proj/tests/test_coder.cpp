#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "tcdc/coder.hpp"

using namespace tcdc;

namespace {

// Random probability vector with occasional near-zero entries, normalized.
std::vector<real> random_probs(Rng& rng, int n) {
  std::vector<real> p(static_cast<size_t>(n));
  real total = 0.0;
  for (auto& v : p) {
    v = rng.uniform(0.0, 1.0);
    if (rng.bernoulli(0.2)) v *= 1e-7;  // stress the one-quantum floor
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

int draw_symbol(Rng& rng, const CdfTable& t) {
  const auto f = static_cast<std::uint32_t>(rng.below(kCdfTotal));
  int s = 0;
  while (t.cum[static_cast<size_t>(s) + 1] <= f) ++s;
  return s;
}

}  // namespace

TEST_CASE("cdf tables quantize probabilities onto the 16-bit grid") {
  CdfTable half = CdfTable::build({0.5, 0.5});
  CHECK(half.cum == std::vector<std::uint32_t>{0, 32768, 65536});

  // A vanishing symbol keeps one quantum; a dominant one absorbs the rest.
  CdfTable skew = CdfTable::build({1.0 - 1e-9, 1e-9});
  CHECK(skew.cum == std::vector<std::uint32_t>{0, 65535, 65536});

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(300));
    const std::vector<real> p = random_probs(rng, n);
    CdfTable t = CdfTable::build(p);
    REQUIRE(t.nsym() == n);
    CHECK(t.cum.front() == 0);
    CHECK(t.cum.back() == kCdfTotal);
    real tv = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::uint32_t q = t.cum[static_cast<size_t>(i) + 1] -
                              t.cum[static_cast<size_t>(i)];
      CHECK(q >= 1);  // everything stays decodable
      tv += std::fabs(static_cast<real>(q) / kCdfTotal - p[i]);
    }
    // These tables are built to stress the floor, so the bound scales with
    // the symbol count (one quantum of slack per bin, plus rebalance).
    CHECK(tv < 2.0 * n / kCdfTotal + 1e-4);
  }

  // A realistic smooth table sits well inside the strict budget.
  {
    std::vector<real> p;
    real covered = 0.0;
    for (int k = -16; k <= 16; ++k) {
      const real cdf_hi = 0.5 * std::erfc(-(k + 0.5) / 3.0 / std::sqrt(2.0));
      const real cdf_lo = 0.5 * std::erfc(-(k - 0.5) / 3.0 / std::sqrt(2.0));
      p.push_back(cdf_hi - cdf_lo);
      covered += p.back();
    }
    p.push_back(1.0 - covered);
    CdfTable t = CdfTable::build(p);
    real tv = 0.0;
    for (size_t i = 0; i + 1 < t.cum.size(); ++i)
      tv += std::fabs(static_cast<real>(t.cum[i + 1] - t.cum[i]) / kCdfTotal -
                      p[i]);
    CHECK(tv < 1e-3);
  }

  // Degenerate but legal: one symbol takes the whole grid.
  CdfTable one = CdfTable::build({1.0});
  CHECK(one.cum == std::vector<std::uint32_t>{0, 65536});
}

TEST_CASE("range coder round-trips random messages exactly") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(200));
    CdfTable t = CdfTable::build(random_probs(rng, n));
    const int len = 1 + static_cast<int>(rng.below(300));
    std::vector<int> msg(static_cast<size_t>(len));
    for (auto& s : msg) {
      // Mix distribution-matched draws with adversarial corner symbols.
      const auto pick = rng.below(10);
      if (pick == 0)
        s = 0;
      else if (pick == 1)
        s = n - 1;
      else
        s = draw_symbol(rng, t);
    }
    RangeEncoder enc;
    for (int s : msg) t.encode(enc, s);
    const std::vector<std::uint8_t> bytes = enc.finish();

    // Compressed size stays within a small constant of the table entropy.
    real bits = 0.0;
    for (int s : msg) {
      const std::uint32_t q = t.cum[static_cast<size_t>(s) + 1] -
                              t.cum[static_cast<size_t>(s)];
      bits -= std::log2(static_cast<real>(q) / kCdfTotal);
    }
    CHECK(static_cast<real>(bytes.size()) <= bits / 8.0 + 16.0);

    RangeDecoder dec(bytes.data(), bytes.size());
    for (int s : msg) REQUIRE(t.decode(dec) == s);
  }
}

TEST_CASE("range coder direct bits interleave with table symbols") {
  Rng rng(29);
  CdfTable t = CdfTable::build({0.2, 0.3, 0.5});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> syms;
    std::vector<std::pair<std::uint32_t, int>> raws;
    RangeEncoder enc;
    for (int i = 0; i < 50; ++i) {
      const int s = static_cast<int>(rng.below(3));
      syms.push_back(s);
      t.encode(enc, s);
      const int nbits = 1 + static_cast<int>(rng.below(32));
      const auto v = static_cast<std::uint32_t>(
          rng.next_u64() & (nbits == 32 ? 0xFFFFFFFFull
                                        : ((1ull << nbits) - 1)));
      raws.emplace_back(v, nbits);
      enc.encode_direct(v, nbits);
    }
    const std::vector<std::uint8_t> bytes = enc.finish();
    RangeDecoder dec(bytes.data(), bytes.size());
    for (int i = 0; i < 50; ++i) {
      REQUIRE(t.decode(dec) == syms[static_cast<size_t>(i)]);
      REQUIRE(dec.decode_direct(raws[static_cast<size_t>(i)].second) ==
              raws[static_cast<size_t>(i)].first);
    }
  }

  // An empty stream flushes to a handful of bytes and nothing more.
  RangeEncoder empty;
  CHECK(empty.finish().size() <= 16);
}

TEST_CASE("gaussian contexts snap scales to the nearest grid point") {
  GaussianContexts g = GaussianContexts::build();
  REQUIRE(static_cast<int>(g.tables.size()) == GaussianContexts::kScales);
  for (int j = 0; j < GaussianContexts::kScales; ++j) {
    CHECK(g.context_of(g.sigmas[static_cast<size_t>(j)]) == j);
    CHECK(g.radius[static_cast<size_t>(j)] >= 24);
    // Table covers offsets plus one escape slot.
    CHECK(g.tables[static_cast<size_t>(j)].nsym() ==
          2 * g.radius[static_cast<size_t>(j)] + 2);
  }
  CHECK(g.sigmas.front() == doctest::Approx(kSigmaMin));
  CHECK(g.sigmas.back() == doctest::Approx(GaussianContexts::kSigmaMax));
  CHECK(g.context_of(0.01) == 0);
  CHECK(g.context_of(1e6) == GaussianContexts::kScales - 1);
  // Monotone in sigma.
  int prev = 0;
  for (real s = kSigmaMin; s < 300.0; s *= 1.3) {
    const int c = g.context_of(s);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("latent planes round-trip through the coder, escapes included") {
  Rng rng(41);
  GaussianContexts gauss = GaussianContexts::build();
  FactorizedPrior prior(4, rng);
  PriorTables zt = PriorTables::build(prior);

  Tensor z({2, 4, 3, 5});
  for (std::int64_t i = 0; i < z.numel(); ++i)
    z[i] = std::rint(rng.uniform(-20.0, 20.0));
  // Values far outside the learned support must take the escape path.
  z[0] = 40000.0;
  z[7] = -2147483648.0;
  z[13] = 2147483647.0;
  const std::vector<std::uint8_t> zbytes = encode_z_latents(z, zt);
  Tensor zdec = decode_z_latents(zbytes.data(), zbytes.size(),
                                 {2, 4, 3, 5}, zt);
  for (std::int64_t i = 0; i < z.numel(); ++i) REQUIRE(zdec[i] == z[i]);

  GaussianParams gp;
  gp.mean = Tensor({1, 3, 4, 4});
  gp.scale = Tensor({1, 3, 4, 4});
  Tensor y(gp.mean.shape());
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    gp.mean[i] = rng.uniform(-30.0, 30.0);
    gp.scale[i] = std::exp(rng.uniform(std::log(0.2), std::log(300.0)));
    y[i] = gp.mean[i] + std::rint(rng.uniform(-50.0, 50.0));
  }
  y[3] = gp.mean[3] + 1e6;  // escape
  y[11] = gp.mean[11] - 77777.0;
  const std::vector<std::uint8_t> ybytes = encode_y_latents(y, gp, gauss);
  Tensor ydec = decode_y_latents(ybytes.data(), ybytes.size(), gp, gauss);
  for (std::int64_t i = 0; i < y.numel(); ++i) REQUIRE(ydec[i] == y[i]);
}

TEST_CASE("compress and decompress agree end to end") {
  Rng rng(57);
  CodecConfig cfg;
  cfg.channels_n = 8;
  cfg.channels_m = 12;
  cfg.channels_hyper = 6;
  CodecModel model(cfg, rng);
  FactorizedPrior prior(cfg.channels_hyper, rng);
  GaussianContexts gauss = GaussianContexts::build();
  PriorTables zt = PriorTables::build(prior);

  Tensor img({1, 3, 64, 64});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(0.0, 1.0);

  CompressResult cr = compress(model, prior, img, 3, gauss, zt);
  CHECK(cr.payload_bits == 8 * static_cast<std::int64_t>(cr.stream.size() - 22));
  CHECK(cr.estimate.total_bits > 0.0);

  DecompressResult dr = decompress(model, cr.stream, gauss, zt);
  CHECK(dr.header.quality == 3);
  CHECK(dr.header.h == 64);
  CHECK(dr.header.w == 64);
  REQUIRE(dr.z_hat.same_shape(cr.z_hat));
  REQUIRE(dr.y_hat.same_shape(cr.y_hat));
  for (std::int64_t i = 0; i < cr.z_hat.numel(); ++i)
    REQUIRE(dr.z_hat[i] == cr.z_hat[i]);
  for (std::int64_t i = 0; i < cr.y_hat.numel(); ++i)
    REQUIRE(dr.y_hat[i] == cr.y_hat[i]);

  // The decoded image is exactly the synthesis of the recovered latents.
  Tensor recon = model.synthesis(cr.y_hat);
  clamp01(recon);
  for (std::int64_t i = 0; i < recon.numel(); ++i)
    REQUIRE(dr.image[i] == recon[i]);

  // Same input, same stream.
  CompressResult cr2 = compress(model, prior, img, 3, gauss, zt);
  CHECK(cr2.stream == cr.stream);

  // Measured payload tracks the model's own estimate.
  const real slack = 0.10 * cr.estimate.total_bits + 256.0;
  CHECK(std::fabs(static_cast<real>(cr.payload_bits) -
                  cr.estimate.total_bits) <= slack);
}

TEST_CASE("decompress rejects malformed streams") {
  Rng rng(91);
  CodecConfig cfg;
  cfg.channels_n = 8;
  cfg.channels_m = 12;
  cfg.channels_hyper = 6;
  CodecModel model(cfg, rng);
  FactorizedPrior prior(cfg.channels_hyper, rng);
  GaussianContexts gauss = GaussianContexts::build();
  PriorTables zt = PriorTables::build(prior);

  Tensor img({1, 3, 64, 64});
  for (std::int64_t i = 0; i < img.numel(); ++i) img[i] = rng.uniform(0.0, 1.0);
  CompressResult cr = compress(model, prior, img, 0, gauss, zt);

  std::vector<std::uint8_t> bad = cr.stream;
  bad[0] = 'X';
  CHECK_THROWS(decompress(model, bad, gauss, zt));

  bad = cr.stream;
  bad[4] = 9;  // version
  CHECK_THROWS(decompress(model, bad, gauss, zt));

  bad = cr.stream;
  bad.resize(bad.size() / 2);  // truncated payload
  CHECK_THROWS(decompress(model, bad, gauss, zt));

  bad.assign(3, 0);  // shorter than the magic itself
  CHECK_THROWS(decompress(model, bad, gauss, zt));

  // A stream from a wider architecture is refused up front.
  CodecConfig other = cfg;
  other.channels_m = 16;
  Rng rng2(91);
  CodecModel mismatched(other, rng2);
  CHECK_THROWS(decompress(mismatched, cr.stream, gauss, zt));
}
