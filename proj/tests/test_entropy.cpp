#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "tcdc/entropy.hpp"
#include "tcdc/parallel.hpp"

using namespace tcdc;

namespace {

bool close_rel(real a, real b, real rel, real abs_tol = 1e-12) {
  const real diff = std::fabs(a - b);
  return diff <= abs_tol + rel * std::max(std::fabs(a), std::fabs(b));
}

GaussianParams make_params(const Tensor& mu, const Tensor& sigma) {
  GaussianParams gp;
  gp.mean = mu;
  gp.scale = sigma;
  return gp;
}

}  // namespace

TEST_CASE("gaussian bin likelihood matches the closed form") {
  GaussianConditional gc;
  Tensor v = Tensor::from({1, 1, 1, 1}, {0.0});
  Tensor mu = Tensor::from({1, 1, 1, 1}, {0.0});
  Tensor sg = Tensor::from({1, 1, 1, 1}, {1.0});
  Tensor p = gc.likelihood(v, make_params(mu, sg));
  // erf(0.5/sqrt(2)) evaluated independently.
  CHECK(close_rel(p[0], 0.3829249225480262, 1e-12));

  // Symmetric around the mean, maximal at the mean.
  Tensor v2 = Tensor::from({1, 1, 1, 4}, {1.25, -1.25, 0.0, 3.0});
  Tensor mu2 = Tensor::from({1, 1, 1, 4}, {0.0, 0.0, 0.0, 0.0});
  Tensor sg2 = Tensor::from({1, 1, 1, 4}, {0.7, 0.7, 0.7, 0.7});
  Tensor p2 = gc.likelihood(v2, make_params(mu2, sg2));
  CHECK(p2[0] == doctest::Approx(p2[1]).epsilon(1e-14));
  CHECK(p2[2] > p2[0]);
  CHECK(p2[3] < p2[0]);
}

TEST_CASE("gaussian likelihood floors far-tail bins and zeroes their grads") {
  GaussianConditional gc;
  Tensor v = Tensor::from({1, 1, 1, 2}, {10.0, 0.0});
  Tensor mu = Tensor::from({1, 1, 1, 2}, {0.0, 0.0});
  Tensor sg = Tensor::from({1, 1, 1, 2}, {0.11, 0.11});
  Tensor p = gc.likelihood(v, make_params(mu, sg));
  CHECK(p[0] == kPFloor);
  CHECK(p[1] > 0.99);

  Tensor dp = Tensor::full(p.shape(), 1.0);
  Tensor dv, dmu, dsg;
  gc.backward(dp, dv, dmu, dsg);
  CHECK(dv[0] == 0.0);
  CHECK(dmu[0] == 0.0);
  CHECK(dsg[0] == 0.0);
  CHECK(dv[1] == doctest::Approx(0.0));  // at the mean the pdf terms cancel

  // Scales below the bound are a contract violation, not a clamp.
  Tensor bad = Tensor::from({1, 1, 1, 2}, {0.05, 0.2});
  CHECK_THROWS(gc.likelihood(v, make_params(mu, bad)));
}

TEST_CASE("gaussian backward matches central differences") {
  GaussianConditional gc;
  Rng rng(7);
  const int n = 12;
  Tensor v({1, 1, 1, n}), mu({1, 1, 1, n}), sg({1, 1, 1, n});
  for (int i = 0; i < n; ++i) {
    v[i] = std::rint(rng.uniform(-4.0, 4.0));
    mu[i] = rng.uniform(-2.0, 2.0);
    sg[i] = rng.uniform(0.3, 3.0);
  }
  Tensor dp({1, 1, 1, n});
  for (int i = 0; i < n; ++i) dp[i] = rng.uniform(-1.0, 1.0);

  gc.likelihood(v, make_params(mu, sg));
  Tensor dv, dmu, dsg;
  gc.backward(dp, dv, dmu, dsg);

  const real h = 1e-5;
  auto loss = [&](const Tensor& vv, const Tensor& mm, const Tensor& ss) {
    GaussianConditional probe;
    Tensor p = probe.likelihood(vv, make_params(mm, ss));
    real acc = 0.0;
    for (int i = 0; i < n; ++i) acc += dp[i] * p[i];
    return acc;
  };
  for (int i = 0; i < n; ++i) {
    Tensor vp = v, vm = v;
    vp[i] += h;
    vm[i] -= h;
    CHECK(close_rel(dv[i], (loss(vp, mu, sg) - loss(vm, mu, sg)) / (2 * h),
                    1e-5, 1e-9));
    Tensor mp = mu, mm = mu;
    mp[i] += h;
    mm[i] -= h;
    CHECK(close_rel(dmu[i], (loss(v, mp, sg) - loss(v, mm, sg)) / (2 * h),
                    1e-5, 1e-9));
    Tensor sp = sg, sm = sg;
    sp[i] += h;
    sm[i] -= h;
    CHECK(close_rel(dsg[i], (loss(v, mu, sp) - loss(v, mu, sm)) / (2 * h),
                    1e-5, 1e-9));
  }
}

TEST_CASE("factorized prior integrates to one at init") {
  Rng rng(11);
  const int c = 6;
  FactorizedPrior prior(c, rng);
  // One batch entry per integer bin in [-30, 30], identical across channels.
  const int bins = 61;
  Tensor z({bins, c, 1, 1});
  for (int b = 0; b < bins; ++b)
    for (int ch = 0; ch < c; ++ch) z[b * c + ch] = static_cast<real>(b - 30);
  Tensor p = prior.likelihood(z);
  for (int ch = 0; ch < c; ++ch) {
    real total = 0.0;
    bool floored = false;
    for (int b = 0; b < bins; ++b) {
      total += p[b * c + ch];
      // The init must keep the central bins off the floor or the sum check
      // is meaningless.
      if (std::abs(b - 30) <= 10 && p[b * c + ch] <= kPFloor) floored = true;
    }
    CHECK(!floored);
    CHECK(total >= 0.99);
    CHECK(total <= 1.0 + 1e-9);
  }

  // CDF is strictly increasing.
  real prev = prior.cdf(0, -8.0);
  for (real x = -7.5; x <= 8.0; x += 0.5) {
    const real cur = prior.cdf(0, x);
    CHECK(cur > prev);
    prev = cur;
  }

  int lo = 0, hi = 0;
  prior.support(2, &lo, &hi);
  CHECK(lo <= -12);
  CHECK(hi >= 12);
  CHECK(prior.cdf(2, static_cast<real>(lo) - 0.5) <= kPFloor);
  CHECK(1.0 - prior.cdf(2, static_cast<real>(hi) + 0.5) <= kPFloor);
}

TEST_CASE("factorized prior backward matches central differences") {
  Rng rng(23);
  const int c = 3;
  FactorizedPrior prior(c, rng);
  Tensor z({2, c, 1, 2});
  for (std::int64_t i = 0; i < z.numel(); ++i)
    z[i] = std::rint(rng.uniform(-3.0, 3.0));
  Tensor dp(z.shape());
  for (std::int64_t i = 0; i < dp.numel(); ++i) dp[i] = rng.uniform(-1.0, 1.0);

  for (Parameter* pr : prior.parameters()) pr->zero_grad();
  prior.likelihood(z);
  Tensor dz = prior.likelihood_backward(dp);

  auto loss = [&](FactorizedPrior& pp, const Tensor& zz) {
    Tensor p = pp.likelihood(zz);
    real acc = 0.0;
    for (std::int64_t i = 0; i < p.numel(); ++i) acc += dp[i] * p[i];
    return acc;
  };

  const real h = 1e-5;
  // Input gradient.
  for (std::int64_t i = 0; i < z.numel(); ++i) {
    Tensor zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const real num = (loss(prior, zp) - loss(prior, zm)) / (2 * h);
    CHECK(close_rel(dz[i], num, 2e-4, 1e-8));
  }
  // Parameter gradients, a handful from every group.
  for (Parameter* pr : prior.parameters()) {
    const std::int64_t stride = std::max<std::int64_t>(1, pr->value.numel() / 5);
    for (std::int64_t i = 0; i < pr->value.numel(); i += stride) {
      const real keep = pr->value[i];
      pr->value[i] = keep + h;
      const real up = loss(prior, z);
      pr->value[i] = keep - h;
      const real dn = loss(prior, z);
      pr->value[i] = keep;
      CHECK(close_rel(pr->grad[i], (up - dn) / (2 * h), 2e-4, 1e-8));
    }
  }
}

TEST_CASE("factorized prior aux loss calibrates the quantiles") {
  Rng rng(5);
  FactorizedPrior prior(4, rng);
  const real before = prior.aux_loss();
  CHECK(before > 0.0);

  // FD check of the quantile gradient.
  prior.quantiles.zero_grad();
  prior.aux_backward();
  const real h = 1e-5;
  for (int i = 0; i < 6; ++i) {
    const real keep = prior.quantiles.value[i];
    prior.quantiles.value[i] = keep + h;
    const real up = prior.aux_loss();
    prior.quantiles.value[i] = keep - h;
    const real dn = prior.aux_loss();
    prior.quantiles.value[i] = keep;
    CHECK(close_rel(prior.quantiles.grad[i], (up - dn) / (2 * h), 1e-4, 1e-8));
  }

  // Gradient descent on the quantiles alone drives the loss down. The init
  // logit slope is ~1/4, so the tail quantiles have ~54 units to travel.
  for (int step = 0; step < 400; ++step) {
    prior.quantiles.zero_grad();
    prior.aux_backward();
    prior.quantiles.value.add_scaled(prior.quantiles.grad, -1.0);
  }
  CHECK(prior.aux_loss() < 0.05 * before);
  for (int ch = 0; ch < 4; ++ch) {
    CHECK(prior.quantiles.value.at(ch, 0) < prior.quantiles.value.at(ch, 1));
    CHECK(prior.quantiles.value.at(ch, 1) < prior.quantiles.value.at(ch, 2));
  }

  // The aux path must not touch the network parameters.
  for (Parameter* pr : prior.parameters())
    for (std::int64_t i = 0; i < pr->grad.numel(); ++i)
      CHECK(pr->grad[i] == 0.0);
}

TEST_CASE("rate loss reproduces hand-computed bit counts") {
  Tensor half = Tensor::from({1, 1, 1, 1}, {0.5});
  CHECK(rate_loss({&half}) == doctest::Approx(1.0).epsilon(1e-14));
  Tensor one = Tensor::from({1, 1, 1, 1}, {1.0});
  CHECK(rate_loss({&one}) == 0.0);

  const real p0 = 0.3829249225480262;  // unit gaussian mass of the zero bin
  Tensor two = Tensor::from({1, 1, 1, 2}, {p0, p0});
  CHECK(close_rel(rate_loss({&two}), 2.7697330685819797, 1e-12));

  // Additivity across tensors is exact, not approximate.
  Tensor a = Tensor::from({1, 1, 1, 3}, {0.1, 0.4, 0.9});
  Tensor b = Tensor::from({1, 1, 2, 2}, {0.2, 0.3, 0.6, 0.8});
  CHECK(rate_loss({&a, &b}) == rate_loss({&a}) + rate_loss({&b}));

  Tensor bad = Tensor::from({1, 1, 1, 2}, {0.5, 0.0});
  CHECK_THROWS(rate_loss({&bad}));

  // Floored likelihoods keep the loss finite at its ceiling of 15 bits.
  Tensor floored = Tensor::from({1, 1, 1, 1}, {kPFloor});
  CHECK(rate_loss({&floored}) == doctest::Approx(15.0).epsilon(1e-14));
}

TEST_CASE("rate loss backward matches the analytic derivative") {
  Tensor p = Tensor::from({1, 1, 1, 3}, {0.5, 0.25, 0.9});
  Tensor dp = rate_loss_backward(p);
  for (int i = 0; i < 3; ++i)
    CHECK(close_rel(dp[i], -1.0 / (p[i] * std::log(2.0)), 1e-14));

  const real h = 1e-6;
  for (int i = 0; i < 3; ++i) {
    Tensor pp = p, pm = p;
    pp[i] += h;
    pm[i] -= h;
    const real num = (rate_loss({&pp}) - rate_loss({&pm})) / (2 * h);
    CHECK(close_rel(dp[i], num, 1e-6, 1e-9));
  }
}

TEST_CASE("bits per pixel normalizes by batch and image area") {
  CHECK(bpp_of(8000.0, 1, 256, 256) == doctest::Approx(0.1220703125));
  CHECK(bpp_of(8000.0, 4, 256, 256) == doctest::Approx(0.1220703125 / 4));
  CHECK_THROWS(bpp_of(8000.0, 0, 256, 256));

  RateEstimate r = make_rate_estimate(6000.0, 2000.0, 1, 256, 256);
  CHECK(r.total_bits == 8000.0);
  CHECK(r.bpp == doctest::Approx(0.1220703125));
}

TEST_CASE("entropy results are bitwise invariant to the thread count") {
  Rng rng(31);
  const int c = 5;
  Tensor z({3, c, 2, 2});
  for (std::int64_t i = 0; i < z.numel(); ++i)
    z[i] = std::rint(rng.uniform(-4.0, 4.0));
  Tensor dp(z.shape());
  for (std::int64_t i = 0; i < dp.numel(); ++i) dp[i] = rng.uniform(-1.0, 1.0);

  auto run = [&](int threads, Tensor& p_out, Tensor& dz_out,
                 std::vector<Tensor>& grads, real& bits) {
    set_num_threads(threads);
    Rng prng(31);  // identical prior in both runs
    FactorizedPrior prior(c, prng);
    for (Parameter* pr : prior.parameters()) pr->zero_grad();
    p_out = prior.likelihood(z);
    dz_out = prior.likelihood_backward(dp);
    grads.clear();
    for (Parameter* pr : prior.parameters()) grads.push_back(pr->grad);
    bits = rate_loss({&p_out});
    set_num_threads(0);
  };

  Tensor p1, dz1, p4, dz4;
  std::vector<Tensor> g1, g4;
  real bits1 = 0.0, bits4 = 0.0;
  run(1, p1, dz1, g1, bits1);
  run(4, p4, dz4, g4, bits4);

  CHECK(bits1 == bits4);
  for (std::int64_t i = 0; i < p1.numel(); ++i) CHECK(p1[i] == p4[i]);
  for (std::int64_t i = 0; i < dz1.numel(); ++i) CHECK(dz1[i] == dz4[i]);
  REQUIRE(g1.size() == g4.size());
  for (size_t k = 0; k < g1.size(); ++k)
    for (std::int64_t i = 0; i < g1[k].numel(); ++i)
      CHECK(g1[k][i] == g4[k][i]);
}
