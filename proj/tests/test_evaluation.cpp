#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcdc/data.hpp"
#include "tcdc/evaluation.hpp"
#include "tcdc/metrics.hpp"
#include "tcdc/plot.hpp"

using namespace tcdc;
namespace fs = std::filesystem;

namespace {

RateAccuracyCurve make_curve(const std::string& label,
                             const std::vector<real>& bpp,
                             const std::vector<real>& acc_pp) {
  RateAccuracyCurve c;
  c.label = label;
  for (std::size_t i = 0; i < bpp.size(); ++i) {
    c.points.push_back({bpp[i], acc_pp[i] / 100.0, "", ""});
  }
  return c;
}

// Digitized rate-accuracy fixture: a saturating reference with a dip between
// 0.26 and 0.32 bpp, a same-accuracy curve at roughly half the rate, and a
// task-tuned curve that is steeper at low rates and saturates higher. All
// oracle values below were frozen from an offline scipy 1.15
// PchipInterpolator implementation of the same definition.
const std::vector<real> kBaseBpp = {0.080, 0.125, 0.190, 0.260, 0.320,
                                    0.430, 0.620, 0.900, 1.300};
const std::vector<real> kBaseAcc = {46.64, 47.53, 48.20, 48.64, 48.55,
                                    48.96, 49.28, 49.51, 49.68};
const std::vector<real> kCompBpp = {0.0405, 0.0633, 0.0963, 0.1318, 0.1622,
                                    0.2179, 0.3142, 0.4561, 0.6588};
const std::vector<real> kJointBpp = {0.0134, 0.0246, 0.0469, 0.0894,
                                     0.1677, 0.3130, 0.5366};
const std::vector<real> kJointAcc = {45.73, 48.33, 49.93, 51.23,
                                     52.03, 52.63, 52.93};

constexpr real kBdAccComp = 0.70955575775168533;
constexpr real kBdRateComp = -49.338107589685663;
constexpr real kBdAccJoint = 4.0358963171864746;
constexpr real kBdRateJoint = -89.105571604774596;
constexpr real kAccOverlapLo = -1.0969100130080565;  // log10(0.080)
constexpr real kAccOverlapHi = -0.18124640950228324; // log10(0.6588)

}  // namespace

TEST_CASE("pchip matches the reference interpolant on awkward knots") {
  // flat runs and direction changes: interior slopes collapse to zero
  const std::vector<real> x = {0.0, 0.7, 1.5, 2.2, 3.1, 4.0};
  const std::vector<real> y = {1.0, 2.5, 2.5, 1.2, 1.2, 3.0};
  Pchip p(x, y);

  const std::vector<real> slopes = {3.1428571428571428, 0.0, 0.0,
                                    0.0, 0.0, 3.0};
  for (int k = 0; k < 6; ++k) {
    CHECK(std::abs(p.slope(k) - slopes[static_cast<std::size_t>(k)]) <=
          1e-12);
  }

  const std::vector<real> xe = {0.0, 0.35, 0.7, 1.1, 1.5, 1.85,
                                2.2, 2.65, 3.1, 3.55, 4.0};
  const std::vector<real> ye = {1.0, 2.0249999999999995, 2.5, 2.5, 2.5,
                                1.8499999999999999, 1.2, 1.2, 1.2,
                                1.7624999999999995, 3.0};
  for (std::size_t i = 0; i < xe.size(); ++i) {
    CHECK(std::abs(p(xe[i]) - ye[i]) <= 1e-10);
  }

  CHECK(std::abs(p.integral(0.35, 3.6) - 5.9112654320987659) <= 1e-10);
  CHECK(std::abs(p.integral(0.0, 4.0) - 7.4158333333333335) <= 1e-10);
  CHECK(std::abs(p.integral(1.55, 1.6) - 0.12285623177842542) <= 1e-12);
  CHECK(p.integral(2.0, 2.0) == 0.0);
}

TEST_CASE("pchip matches the reference interpolant on monotone knots") {
  const std::vector<real> x = {-1.0969100130080565, -0.79588001734407521,
                               -0.52287874528033762, -0.39794000867203766,
                               -0.22184874961635639, 0.0};
  const std::vector<real> y = {41.2, 44.6, 46.9, 47.8, 48.9, 49.6};
  Pchip p(x, y);

  const std::vector<real> slopes = {12.799459034449217, 9.6281006938711542,
                                    7.6919242171040887, 6.7181848899130685,
                                    4.2463012832628273, 1.4318368108840869};
  for (int k = 0; k < 6; ++k) {
    CHECK(std::abs(p.slope(k) - slopes[static_cast<std::size_t>(k)]) <= 1e-11);
  }

  const std::vector<real> xe = {-1.0, -0.9, -0.55, -0.3, -0.1};
  const std::vector<real> ye = {42.396863219094406, 43.533702776001512,
                                46.690551787307442, 48.469264780819898,
                                49.36347145340757};
  for (std::size_t i = 0; i < xe.size(); ++i) {
    CHECK(std::abs(p(xe[i]) - ye[i]) <= 1e-10);
  }
  CHECK(std::abs(p.integral(-1.05, -0.1) - 43.918836799602026) <= 1e-10);

  // interpolation reproduces knots exactly and stays within data bounds
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(p(x[i]) == doctest::Approx(y[i]).epsilon(1e-14));
  }
  for (real t = x.front(); t <= x.back(); t += 0.013) {
    const real v = p(t);
    CHECK(v >= y.front());
    CHECK(v <= y.back());
  }
}

TEST_CASE("pchip handles two knots, rejects bad input and extrapolation") {
  Pchip lin({0.0, 1.0}, {3.0, 5.0});
  CHECK(lin(0.25) == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(std::abs(lin.integral(0.0, 1.0) - 4.0) <= 1e-14);

  CHECK_THROWS_AS(Pchip({1.0}, {2.0}), Error);
  CHECK_THROWS_AS(Pchip({0.0, 0.0, 1.0}, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(Pchip({0.0, 2.0, 1.0}, {1.0, 2.0, 3.0}), Error);
  CHECK_THROWS_AS(Pchip({0.0, 1.0}, {1.0, NAN}), Error);

  CHECK_THROWS_AS(lin(-0.001), Error);
  CHECK_THROWS_AS(lin(1.001), Error);
  CHECK_THROWS_AS(lin.integral(-0.1, 0.5), Error);
  CHECK_THROWS_AS(lin.integral(0.5, 1.1), Error);
  CHECK_THROWS_AS(lin.integral(0.8, 0.2), Error);
}

TEST_CASE("isotonic regression pools adjacent violators") {
  CHECK(isotonic_nondecreasing({40.0, 45.0, 44.0, 47.0}) ==
        std::vector<real>{40.0, 44.5, 44.5, 47.0});
  CHECK(isotonic_nondecreasing({1.0, 2.0, 3.0}) ==
        std::vector<real>{1.0, 2.0, 3.0});
  CHECK(isotonic_nondecreasing({3.0, 2.0, 1.0}) ==
        std::vector<real>{2.0, 2.0, 2.0});
  CHECK(isotonic_nondecreasing({5.0, 3.0, 4.0}) ==
        std::vector<real>{4.0, 4.0, 4.0});
  CHECK(isotonic_nondecreasing({4.0, 3.0, 2.0, 5.0}) ==
        std::vector<real>{3.0, 3.0, 3.0, 5.0});
  CHECK(isotonic_nondecreasing({2.0}) == std::vector<real>{2.0});
  CHECK_THROWS_AS(isotonic_nondecreasing({1.0, NAN}), Error);
}

TEST_CASE("bd identity is exactly zero in both modes") {
  const RateAccuracyCurve a =
      make_curve("a", kBaseBpp, kBaseAcc);
  const BDResult acc = bd_metric(a, a, BdMode::accuracy);
  const BDResult rate = bd_metric(a, a, BdMode::rate);
  CHECK(acc.bd_accuracy == 0.0);
  CHECK(rate.bd_rate == 0.0);
  CHECK(acc.overlap_lo == doctest::Approx(std::log10(0.080)).epsilon(1e-15));
  CHECK(acc.overlap_hi == doctest::Approx(std::log10(1.300)).epsilon(1e-15));
}

TEST_CASE("bd shift law: scaling bpp by k gives bd_rate = 100*(k-1)") {
  const std::vector<real> bpp = {0.10, 0.20, 0.40, 0.80};
  const std::vector<real> acc = {40.0, 45.0, 48.0, 49.5};
  const RateAccuracyCurve ref = make_curve("ref", bpp, acc);

  for (real k : {0.5, 0.25, 0.7, 1.5}) {
    std::vector<real> scaled = bpp;
    for (real& b : scaled) b *= k;
    const RateAccuracyCurve test = make_curve("scaled", scaled, acc);
    const BDResult r = bd_metric(ref, test, BdMode::rate);
    CHECK(std::abs(r.bd_rate - 100.0 * (k - 1.0)) <= 1e-9);
    CHECK_FALSE(r.adjusted);
  }

  // half rate at equal accuracy also means better accuracy at equal rate
  std::vector<real> half = bpp;
  for (real& b : half) b *= 0.5;
  const BDResult a =
      bd_metric(ref, make_curve("half", half, acc), BdMode::accuracy);
  CHECK(a.bd_accuracy > 0.0);
  CHECK(std::abs(a.bd_accuracy - 3.0833333333333437) <= 1e-9);
}

TEST_CASE("digitized fixture curves reproduce the reference deltas") {
  const RateAccuracyCurve base = make_curve("baseline", kBaseBpp, kBaseAcc);
  const RateAccuracyCurve comp = make_curve("compression-only", kCompBpp,
                                            kBaseAcc);
  const RateAccuracyCurve joint = make_curve("joint", kJointBpp, kJointAcc);

  const BDResult ca = bd_metric(base, comp, BdMode::accuracy);
  const BDResult cr = bd_metric(base, comp, BdMode::rate);
  const BDResult ja = bd_metric(base, joint, BdMode::accuracy);
  const BDResult jr = bd_metric(base, joint, BdMode::rate);

  // pinned against the offline oracle
  CHECK(std::abs(ca.bd_accuracy - kBdAccComp) <= 1e-9);
  CHECK(std::abs(cr.bd_rate - kBdRateComp) <= 1e-9);
  CHECK(std::abs(ja.bd_accuracy - kBdAccJoint) <= 1e-9);
  CHECK(std::abs(jr.bd_rate - kBdRateJoint) <= 1e-9);
  CHECK(std::abs(ca.overlap_lo - kAccOverlapLo) <= 1e-12);
  CHECK(std::abs(ca.overlap_hi - kAccOverlapHi) <= 1e-12);

  // and against the published reference values
  CHECK(std::abs(ca.bd_accuracy - 0.71) <= 0.5);
  CHECK(std::abs(cr.bd_rate - (-49.32)) <= 5.0);
  CHECK(std::abs(ja.bd_accuracy - 4.04) <= 0.5);
  CHECK(std::abs(jr.bd_rate - (-89.12)) <= 5.0);

  // the dip between 0.26 and 0.32 bpp forces isotonic regularization
  CHECK(cr.adjusted);
  CHECK(jr.adjusted);
  CHECK_FALSE(ca.adjusted);

  // rate-mode overlap is the shared accuracy span
  CHECK(cr.overlap_lo == doctest::Approx(46.64).epsilon(1e-12));
  CHECK(cr.overlap_hi == doctest::Approx(49.68).epsilon(1e-12));

  // deterministic: recomputation gives bit-identical results
  const BDResult cr2 = bd_metric(base, comp, BdMode::rate);
  CHECK(cr2.bd_rate == cr.bd_rate);
}

TEST_CASE("bd overlap discipline: results never depend on knots outside "
          "the overlap") {
  // B carries collinear (in log10 bpp) segment triples at each end, so
  // dropping its outer knots leaves the interpolant on the overlap
  // unchanged; the metric must not move either.
  const std::vector<real> bA = {0.08, 0.12, 0.20, 0.40};
  const std::vector<real> aA = {41.8, 42.9, 43.9, 44.9};
  const std::vector<real> bB = {0.03, 0.06, 0.12, 0.24,
                                0.35, 0.45, 0.55, 0.70};
  const std::vector<real> aB = {39.899999999999999, 41.0,
                                42.100000000000001, 43.200000000000003,
                                44.5, 45.15486681655041,
                                45.677767870863811, 46.306179973983888};
  const std::vector<real> bBs(bB.begin() + 1, bB.end() - 1);
  const std::vector<real> aBs(aB.begin() + 1, aB.end() - 1);

  const RateAccuracyCurve A = make_curve("A", bA, aA);
  const RateAccuracyCurve B = make_curve("B", bB, aB);
  const RateAccuracyCurve Bs = make_curve("Bshrunk", bBs, aBs);

  const BDResult fa = bd_metric(A, B, BdMode::accuracy);
  const BDResult sa = bd_metric(A, Bs, BdMode::accuracy);
  const BDResult fr = bd_metric(A, B, BdMode::rate);
  const BDResult sr = bd_metric(A, Bs, BdMode::rate);
  CHECK(std::abs(fa.bd_accuracy - sa.bd_accuracy) <= 1e-9);
  CHECK(std::abs(fr.bd_rate - sr.bd_rate) <= 1e-9);
  CHECK(std::abs(fa.bd_accuracy - (-0.73528401395623966)) <= 1e-9);
  CHECK(std::abs(fr.bd_rate - 44.558526706378629) <= 1e-9);

  // the overlap itself is A's range both times
  CHECK(fa.overlap_lo == doctest::Approx(std::log10(0.08)).epsilon(1e-15));
  CHECK(fa.overlap_hi == doctest::Approx(std::log10(0.40)).epsilon(1e-15));
  CHECK(sa.overlap_lo == fa.overlap_lo);
  CHECK(sa.overlap_hi == fa.overlap_hi);
}

TEST_CASE("bd rejects insufficient overlap and degenerate curves") {
  const RateAccuracyCurve low =
      make_curve("low", {0.05, 0.08, 0.12, 0.20}, {30.0, 35.0, 40.0, 45.0});
  const RateAccuracyCurve high =
      make_curve("high", {0.30, 0.50, 0.70, 0.90}, {60.0, 65.0, 70.0, 72.0});
  // disjoint bpp ranges
  CHECK_THROWS_AS(bd_metric(low, high, BdMode::accuracy), Error);
  // disjoint accuracy ranges
  CHECK_THROWS_AS(bd_metric(low, high, BdMode::rate), Error);

  // a flat curve collapses to one accuracy level under inversion
  const RateAccuracyCurve flat =
      make_curve("flat", {0.1, 0.2, 0.4, 0.8}, {50.0, 50.0, 50.0, 50.0});
  CHECK_THROWS_AS(bd_metric(low, flat, BdMode::rate), Error);
  // but stays usable in accuracy mode; equal log-spacing makes the Hermite
  // integral rational: mean of lap is 44.375, so the gap is exactly 5.625
  const RateAccuracyCurve lap =
      make_curve("lap", {0.1, 0.2, 0.4, 0.8}, {30.0, 40.0, 50.0, 55.0});
  CHECK(bd_metric(lap, flat, BdMode::accuracy).bd_accuracy ==
        doctest::Approx(5.625).epsilon(1e-12));

  // validation: point count, ordering, ranges
  RateAccuracyCurve three =
      make_curve("three", {0.1, 0.2, 0.4}, {30.0, 40.0, 50.0});
  CHECK_THROWS_AS(bd_metric(three, lap, BdMode::accuracy), Error);
  RateAccuracyCurve dup = lap;
  dup.points[2].bpp = dup.points[1].bpp;
  CHECK_THROWS_AS(validate_curve(dup), Error);
  RateAccuracyCurve neg = lap;
  neg.points[0].bpp = -0.1;
  CHECK_THROWS_AS(validate_curve(neg), Error);
  RateAccuracyCurve big = lap;
  big.points[3].top1 = 1.2;
  CHECK_THROWS_AS(validate_curve(big), Error);
}

TEST_CASE("curve files round-trip through json") {
  RateAccuracyCurve c = make_curve("sweep-joint", kJointBpp, kJointAcc);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    c.points[i].checkpoint = "ckpt_" + std::to_string(i);
    c.points[i].strategy = "joint";
  }
  const std::string path =
      (fs::temp_directory_path() / "tcdc_curve_test.json").string();
  save_curve(path, c);
  const RateAccuracyCurve back = load_curve(path);
  REQUIRE(back.points.size() == c.points.size());
  CHECK(back.label == c.label);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    CHECK(back.points[i].bpp == c.points[i].bpp);
    CHECK(back.points[i].top1 == c.points[i].top1);
    CHECK(back.points[i].checkpoint == c.points[i].checkpoint);
    CHECK(back.points[i].strategy == c.points[i].strategy);
  }
  fs::remove(path);

  CHECK_THROWS_AS(load_curve("/nonexistent/curve.json"), Error);
  const std::string bad =
      (fs::temp_directory_path() / "tcdc_curve_bad.json").string();
  std::ofstream(bad) << "not json";
  CHECK_THROWS_AS(load_curve(bad), Error);
  fs::remove(bad);
}

namespace {

struct EvalFixture {
  EvalFixture()
      : model(CodecConfig{8, 12, 6, "gdn"}, ClassifierConfig{"resnet8_toy", 2, 0.0},
              77),
        gauss(GaussianContexts::build()),
        zt(PriorTables::build(model.prior)) {
    const std::string dir =
        (fs::temp_directory_path() / "tcdc_eval_ds").string();
    fs::remove_all(dir);
    const DatasetManifest m = generate_synthetic_dataset(3, 2, 64, 9001, dir);
    data = load_dataset(m, 64);
  }
  ~EvalFixture() {
    fs::remove_all((fs::temp_directory_path() / "tcdc_eval_ds").string());
  }

  JointModel model;
  GaussianContexts gauss;
  PriorTables zt;
  Dataset data;
};

}  // namespace

TEST_CASE("evaluate_model measures real bitstreams deterministically") {
  EvalFixture f;
  const std::vector<int> idx = {0, 1, 2, 3, 4, 5};
  ModelEval a = evaluate_model(f.model, f.data, idx, f.gauss, f.zt, "ck", "joint");
  ModelEval b = evaluate_model(f.model, f.data, idx, f.gauss, f.zt, "ck", "joint");

  CHECK(a.point.bpp == b.point.bpp);
  CHECK(a.point.top1 == b.point.top1);
  CHECK(a.mse == b.mse);
  CHECK(a.point.bpp > 0.0);
  CHECK(a.point.top1 >= 0.0);
  CHECK(a.point.top1 <= 1.0);
  CHECK(a.point.checkpoint == "ck");
  CHECK(a.point.strategy == "joint");
  REQUIRE(a.measured_bits.size() == idx.size());
  REQUIRE(a.estimate_bits.size() == idx.size());

  // payload accounting: whole containers are payload plus a 22-byte header
  std::int64_t payload = 0;
  for (std::int64_t bits : a.measured_bits) payload += bits;
  CHECK(payload == a.payload_bits);
  CHECK(a.stream_bytes == a.payload_bits / 8 + 22 * static_cast<int>(idx.size()));

  // reported bpp is the mean per-image payload over pixels
  real bpp_sum = 0.0;
  for (std::int64_t bits : a.measured_bits) {
    bpp_sum += static_cast<real>(bits) / (64.0 * 64.0);
  }
  CHECK(a.point.bpp == doctest::Approx(bpp_sum / 6.0).epsilon(1e-12));

  CHECK_THROWS_AS(evaluate_model(f.model, f.data, {}, f.gauss, f.zt), Error);
  CHECK_THROWS_AS(evaluate_model(f.model, f.data, {99}, f.gauss, f.zt), Error);
}

TEST_CASE("cross_domain_eval reports both domains from one pass") {
  EvalFixture f;
  const std::vector<int> idx = {0, 1, 2, 3};
  const CrossDomainEval cd = cross_domain_eval(f.model, f.data, idx, f.gauss, f.zt);
  CHECK(cd.top1_compressed >= 0.0);
  CHECK(cd.top1_compressed <= 1.0);
  CHECK(cd.top1_uncompressed >= 0.0);
  CHECK(cd.top1_uncompressed <= 1.0);

  const ModelEval ev = evaluate_model(f.model, f.data, idx, f.gauss, f.zt);
  CHECK(cd.bpp == doctest::Approx(ev.point.bpp).epsilon(1e-12));
  CHECK(cd.top1_compressed == doctest::Approx(ev.point.top1).epsilon(1e-12));
}

TEST_CASE("dump_reconstructions writes n*m + m files with measured bpp") {
  EvalFixture f;
  JointModel other(CodecConfig{8, 12, 6, "gdn"},
                   ClassifierConfig{"resnet8_toy", 2, 0.0}, 78);
  const std::string dir =
      (fs::temp_directory_path() / "tcdc_recon_test").string();
  fs::remove_all(dir);

  const std::vector<int> idx = {0, 3, 4};
  const ReconDump dump = dump_reconstructions({&f.model, &other},
                                              {"q_low", "q_high"}, f.data, idx,
                                              dir);
  CHECK(dump.files_written == 2 * 3 + 3);

  std::ifstream mf(dump.manifest_path);
  REQUIRE(mf.good());
  const nlohmann::json manifest = nlohmann::json::parse(mf);
  REQUIRE(manifest.size() == 3);
  for (const auto& row : manifest) {
    CHECK(fs::exists(fs::path(dir) / row.at("original").get<std::string>()));
    REQUIRE(row.at("reconstructions").size() == 2);
    for (const auto& rec : row.at("reconstructions")) {
      CHECK(fs::exists(fs::path(dir) / rec.at("file").get<std::string>()));
      CHECK(rec.at("bpp").get<real>() > 0.0);
    }
  }

  // sidecar bpp agrees with evaluate-time measurement for each model's own
  // coding tables (same code path)
  const PriorTables zt_other = PriorTables::build(other.prior);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const ModelEval one =
        evaluate_model(f.model, f.data, {idx[k]}, f.gauss, f.zt);
    const ModelEval two =
        evaluate_model(other, f.data, {idx[k]}, f.gauss, zt_other);
    const auto& recs = manifest[k].at("reconstructions");
    CHECK(std::abs(recs[0].at("bpp").get<real>() - one.point.bpp) <= 1e-9);
    CHECK(std::abs(recs[1].at("bpp").get<real>() - two.point.bpp) <= 1e-9);
  }
  fs::remove_all(dir);
}

TEST_CASE("ablation_sweep records failures and keeps going") {
  EvalFixture f;
  OptimizerConfig opt;
  opt.batch_size = 2;
  opt.max_epochs = 1;
  opt.patience = 1;

  const std::vector<int> train_idx = {0, 1, 2, 3};
  const std::vector<int> val_idx = {4};
  const std::vector<int> eval_idx = {5};
  const LossWeights base{0.18, 255.0 * 255.0, 1.0};
  const CodecConfig codec_cfg{8, 12, 6, "gdn"};
  const ClassifierConfig cls_cfg{"resnet8_toy", 2, 0.0};

  // the middle value is invalid: its failure is recorded, the rest run
  const std::vector<AblationRow> rows = ablation_sweep(
      "beta", {1000.0, -5.0, 4000.0}, Strategy::compression_only, base,
      codec_cfg, cls_cfg, opt, f.data, train_idx, val_idx, eval_idx, 11,
      &f.model);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].ok);
  CHECK(rows[0].bpp > 0.0);
  CHECK(rows[0].value == doctest::Approx(1000.0));
  CHECK_FALSE(rows[1].ok);
  CHECK(rows[1].error.find("nonnegative") != std::string::npos);
  CHECK(rows[2].ok);
  CHECK(rows[2].bpp > 0.0);

  CHECK_THROWS_AS(ablation_sweep("beta", {1.0, 2.0}, Strategy::joint, base,
                                 codec_cfg, cls_cfg, opt, f.data, train_idx,
                                 val_idx, eval_idx, 11),
                  Error);
  CHECK_THROWS_AS(ablation_sweep("delta", {1.0, 2.0, 3.0}, Strategy::joint,
                                 base, codec_cfg, cls_cfg, opt, f.data,
                                 train_idx, val_idx, eval_idx, 11),
                  Error);
}

TEST_CASE("metrics log appends and reads json lines") {
  const std::string path =
      (fs::temp_directory_path() / "tcdc_metrics_test.jsonl").string();
  fs::remove(path);
  MetricsLog log(path);

  MetricsRecord r1;
  r1.run_id = "run-1";
  r1.checkpoint = "ck-a";
  r1.strategy = "compression_only";
  r1.bpp = 0.173;
  r1.top1 = 0.912;
  r1.weights = {0.18, 255.0 * 255.0, 1.0};
  r1.seed = 4242;
  r1.payload_bits = 708;
  r1.stream_bytes = 1104;
  r1.config_hash = "deadbeef01";
  MetricsRecord r2 = r1;
  r2.checkpoint = "ck-b";
  r2.strategy = "joint";
  r2.bpp = 0.101;

  log.append(r1);
  log.append(r2);
  const std::vector<MetricsRecord> back = MetricsLog::read(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].run_id == "run-1");
  CHECK(back[0].checkpoint == "ck-a");
  CHECK(back[0].strategy == "compression_only");
  CHECK(back[0].bpp == r1.bpp);
  CHECK(back[0].top1 == r1.top1);
  CHECK(back[0].weights.alpha == r1.weights.alpha);
  CHECK(back[0].weights.beta == r1.weights.beta);
  CHECK(back[0].weights.gamma == r1.weights.gamma);
  CHECK(back[0].seed == r1.seed);
  CHECK(back[0].payload_bits == r1.payload_bits);
  CHECK(back[0].stream_bytes == r1.stream_bytes);
  CHECK(back[0].config_hash == r1.config_hash);
  CHECK(back[1].checkpoint == "ck-b");
  CHECK(back[1].bpp == r2.bpp);

  // append-only: a further record lands after the existing ones
  log.append(r1);
  CHECK(MetricsLog::read(path).size() == 3);
  fs::remove(path);

  CHECK_THROWS_AS(MetricsLog::read("/nonexistent/metrics.jsonl"), Error);
}

TEST_CASE("svg plot is deterministic and self-contained") {
  const std::vector<RateAccuracyCurve> curves = {
      make_curve("baseline", kBaseBpp, kBaseAcc),
      make_curve("compression-only", kCompBpp, kBaseAcc),
      make_curve("joint", kJointBpp, kJointAcc)};
  PlotOptions opt;
  opt.title = "Rate-accuracy comparison";
  opt.baseline_top1 = 0.4971;

  const std::string path =
      (fs::temp_directory_path() / "tcdc_plot_test.svg").string();
  write_rate_accuracy_svg(path, curves, opt);

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string svg((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = 0; (pos = svg.find("<polyline", pos)) != std::string::npos;
       ++pos) {
    ++polylines;
  }
  CHECK(polylines == curves.size());
  CHECK(svg.find("uncompressed") != std::string::npos);
  CHECK(svg.find("compression-only") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);  // no external references

  const std::string path2 =
      (fs::temp_directory_path() / "tcdc_plot_test2.svg").string();
  write_rate_accuracy_svg(path2, curves, opt);
  std::ifstream in2(path2);
  std::string svg2((std::istreambuf_iterator<char>(in2)),
                   std::istreambuf_iterator<char>());
  CHECK(svg == svg2);
  fs::remove(path);
  fs::remove(path2);

  CHECK_THROWS_AS(write_rate_accuracy_svg(path, {}, opt), Error);
}
