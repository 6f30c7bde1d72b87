#include "tcdc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tcdc/classifier.hpp"
#include "tcdc/losses.hpp"

namespace tcdc {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- curves

void validate_curve(const RateAccuracyCurve& curve, int min_points) {
  const auto& pts = curve.points;
  require(static_cast<int>(pts.size()) >= min_points,
          "curve '" + curve.label + "' has " + std::to_string(pts.size()) +
              " points, need at least " + std::to_string(min_points));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    require(std::isfinite(pts[i].bpp) && pts[i].bpp > 0.0,
            "curve '" + curve.label + "': bpp must be finite and positive");
    require(std::isfinite(pts[i].top1) && pts[i].top1 >= 0.0 &&
                pts[i].top1 <= 1.0,
            "curve '" + curve.label + "': top1 must lie in [0,1]");
    require(i == 0 || pts[i].bpp > pts[i - 1].bpp,
            "curve '" + curve.label + "': bpp must be strictly increasing");
  }
}

RateAccuracyCurve load_curve(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open curve file " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  require(!j.is_discarded() && j.is_object() && j.contains("points"),
          "curve file " + path + " is not a curve object");
  RateAccuracyCurve c;
  c.label = j.value("label", "");
  for (const auto& p : j.at("points")) {
    RatePoint pt;
    pt.bpp = p.at("bpp").get<real>();
    pt.top1 = p.at("top1").get<real>();
    pt.checkpoint = p.value("checkpoint", "");
    pt.strategy = p.value("strategy", "");
    c.points.push_back(pt);
  }
  return c;
}

void save_curve(const std::string& path, const RateAccuracyCurve& curve) {
  json pts = json::array();
  for (const auto& p : curve.points) {
    pts.push_back({{"bpp", p.bpp},
                   {"top1", p.top1},
                   {"checkpoint", p.checkpoint},
                   {"strategy", p.strategy}});
  }
  json j{{"label", curve.label}, {"points", pts}};
  std::ofstream out(path);
  require(out.good(), "cannot write curve file " + path);
  out << j.dump(2) << "\n";
  require(out.good(), "short write on " + path);
}

// ---------------------------------------------------------------- pchip

namespace {

int sgn(real v) { return (v > 0.0) - (v < 0.0); }

// One-sided three-point slope at an endpoint, clamped so the interpolant
// keeps the data's shape next to the boundary.
real edge_slope(real h0, real h1, real d0, real d1) {
  real m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
  if (sgn(m) != sgn(d0)) return 0.0;
  if (sgn(d0) != sgn(d1) && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
  return m;
}

}  // namespace

Pchip::Pchip(std::vector<real> x, std::vector<real> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  require(n >= 2, "pchip needs at least two knots");
  require(x_.size() == y_.size(), "pchip knot arrays disagree");
  for (int i = 0; i < n; ++i) {
    require(std::isfinite(x_[i]) && std::isfinite(y_[i]),
            "pchip knots must be finite");
    require(i == 0 || x_[i] > x_[i - 1], "pchip x must be strictly increasing");
  }

  std::vector<real> h(n - 1), d(n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    d[i] = (y_[i + 1] - y_[i]) / h[i];
  }

  m_.assign(n, 0.0);
  if (n == 2) {
    m_[0] = m_[1] = d[0];
    return;
  }
  for (int k = 1; k + 1 < n; ++k) {
    if (sgn(d[k - 1]) != sgn(d[k]) || d[k - 1] == 0.0 || d[k] == 0.0) {
      m_[k] = 0.0;
    } else {
      const real w1 = 2.0 * h[k] + h[k - 1];
      const real w2 = h[k] + 2.0 * h[k - 1];
      m_[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
    }
  }
  m_[0] = edge_slope(h[0], h[1], d[0], d[1]);
  m_[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
}

real Pchip::operator()(real t) const {
  require(t >= x_.front() && t <= x_.back(), "pchip evaluation out of range");
  int k = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), t) -
                           x_.begin()) -
          1;
  k = std::clamp(k, 0, static_cast<int>(x_.size()) - 2);
  const real h = x_[k + 1] - x_[k];
  const real u = (t - x_[k]) / h;
  const real u2 = u * u, u3 = u2 * u;
  const real h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
  const real h10 = u3 - 2.0 * u2 + u;
  const real h01 = -2.0 * u3 + 3.0 * u2;
  const real h11 = u3 - u2;
  return y_[k] * h00 + h * m_[k] * h10 + y_[k + 1] * h01 + h * m_[k + 1] * h11;
}

real Pchip::segment_area(int k, real u) const {
  const real h = x_[k + 1] - x_[k];
  const real u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  const real i00 = 0.5 * u4 - u3 + u;
  const real i10 = 0.25 * u4 - (2.0 / 3.0) * u3 + 0.5 * u2;
  const real i01 = -0.5 * u4 + u3;
  const real i11 = 0.25 * u4 - u3 / 3.0;
  return h * (y_[k] * i00 + h * m_[k] * i10 + y_[k + 1] * i01 +
              h * m_[k + 1] * i11);
}

real Pchip::integral(real lo, real hi) const {
  require(lo <= hi, "pchip integral bounds are reversed");
  require(lo >= x_.front() && hi <= x_.back(),
          "pchip integration out of range");
  const int n = static_cast<int>(x_.size());
  real acc = 0.0;
  for (int k = 0; k + 1 < n; ++k) {
    const real a = std::max(lo, x_[k]);
    const real b = std::min(hi, x_[k + 1]);
    if (a >= b) continue;
    const real h = x_[k + 1] - x_[k];
    acc += segment_area(k, (b - x_[k]) / h) - segment_area(k, (a - x_[k]) / h);
  }
  return acc;
}

// ---------------------------------------------------------------- isotonic

std::vector<real> isotonic_nondecreasing(const std::vector<real>& y) {
  std::vector<real> vals;
  std::vector<int> wts;
  vals.reserve(y.size());
  wts.reserve(y.size());
  for (real yi : y) {
    require(std::isfinite(yi), "isotonic fit needs finite values");
    vals.push_back(yi);
    wts.push_back(1);
    while (vals.size() > 1 && vals[vals.size() - 2] > vals.back()) {
      const int w = wts[wts.size() - 2] + wts.back();
      const real v =
          (wts[wts.size() - 2] * vals[vals.size() - 2] + wts.back() * vals.back()) /
          w;
      vals.pop_back();
      wts.pop_back();
      vals.back() = v;
      wts.back() = w;
    }
  }
  std::vector<real> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < vals.size(); ++b) {
    out.insert(out.end(), static_cast<std::size_t>(wts[b]), vals[b]);
  }
  return out;
}

// ---------------------------------------------------------------- bd

namespace {

struct InverseKnots {
  std::vector<real> acc;      // strictly increasing after tie collapse
  std::vector<real> log_bpp;
  bool adjusted = false;
};

// Regularize accuracy to a nondecreasing sequence, then collapse exact ties
// keeping the cheapest rate, so log10(bpp) becomes a function of accuracy.
InverseKnots invert_curve(const RateAccuracyCurve& c) {
  std::vector<real> acc(c.points.size());
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    acc[i] = 100.0 * c.points[i].top1;
  }
  const std::vector<real> iso = isotonic_nondecreasing(acc);
  InverseKnots out;
  out.adjusted = iso != acc;
  for (std::size_t i = 0; i < iso.size(); ++i) {
    if (!out.acc.empty() && iso[i] == out.acc.back()) continue;
    out.acc.push_back(iso[i]);
    out.log_bpp.push_back(std::log10(c.points[i].bpp));
  }
  require(out.acc.size() >= 2,
          "curve '" + c.label +
              "' collapses to a single accuracy level; rate inversion "
              "undefined");
  return out;
}

}  // namespace

BDResult bd_metric(const RateAccuracyCurve& reference,
                   const RateAccuracyCurve& test, BdMode mode) {
  validate_curve(reference);
  validate_curve(test);
  BDResult out;
  if (mode == BdMode::accuracy) {
    auto knots = [](const RateAccuracyCurve& c) {
      std::vector<real> x(c.points.size()), y(c.points.size());
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        x[i] = std::log10(c.points[i].bpp);
        y[i] = 100.0 * c.points[i].top1;
      }
      return std::pair{std::move(x), std::move(y)};
    };
    auto [xr, yr] = knots(reference);
    auto [xt, yt] = knots(test);
    const real lo = std::max(xr.front(), xt.front());
    const real hi = std::min(xr.back(), xt.back());
    require(hi > lo, "curves '" + reference.label + "' and '" + test.label +
                         "' do not overlap in rate");
    Pchip pr(std::move(xr), std::move(yr));
    Pchip pt(std::move(xt), std::move(yt));
    out.bd_accuracy = (pt.integral(lo, hi) - pr.integral(lo, hi)) / (hi - lo);
    out.overlap_lo = lo;
    out.overlap_hi = hi;
  } else {
    InverseKnots ir = invert_curve(reference);
    InverseKnots it = invert_curve(test);
    out.adjusted = ir.adjusted || it.adjusted;
    const real lo = std::max(ir.acc.front(), it.acc.front());
    const real hi = std::min(ir.acc.back(), it.acc.back());
    require(hi > lo, "curves '" + reference.label + "' and '" + test.label +
                         "' do not overlap in accuracy");
    Pchip pr(std::move(ir.acc), std::move(ir.log_bpp));
    Pchip pt(std::move(it.acc), std::move(it.log_bpp));
    const real delta =
        (pt.integral(lo, hi) - pr.integral(lo, hi)) / (hi - lo);
    out.bd_rate = 100.0 * (std::pow(10.0, delta) - 1.0);
    out.overlap_lo = lo;
    out.overlap_hi = hi;
  }
  return out;
}

// ---------------------------------------------------------------- model eval

namespace {

struct ImagePass {
  Tensor x;      // (1,3,H,W) eval-preprocessed input
  Tensor x_hat;  // (1,3,H,W) decoded reconstruction
  std::int64_t payload_bits = 0;
  std::int64_t stream_bytes = 0;
  real estimate_bits = 0.0;
};

ImagePass run_image(JointModel& m, const ImageU8& img,
                    const GaussianContexts& gauss, const PriorTables& zt) {
  ImagePass out;
  Rng rng(0);  // eval preprocessing ignores the stream
  Tensor chw = preprocess(img, /*train_mode=*/false, rng);
  out.x = Tensor::zeros({1, chw.dim(0), chw.dim(1), chw.dim(2)});
  std::copy(chw.data(), chw.data() + chw.numel(), out.x.data());

  CompressResult cr = compress(m.codec, m.prior, out.x, /*quality=*/0, gauss, zt);
  DecompressResult dr = decompress(m.codec, cr.stream, gauss, zt);
  require(cr.y_hat.same_shape(dr.y_hat), "coder round trip changed shape");

  out.x_hat = std::move(dr.image);
  out.payload_bits = cr.payload_bits;
  out.stream_bytes = static_cast<std::int64_t>(cr.stream.size());
  out.estimate_bits = cr.estimate.total_bits;
  return out;
}

}  // namespace

ModelEval evaluate_model(JointModel& m, const Dataset& data,
                         const std::vector<int>& indices,
                         const GaussianContexts& gauss, const PriorTables& zt,
                         const std::string& checkpoint_id,
                         const std::string& strategy_tag) {
  require(!indices.empty(), "evaluate_model needs at least one image");
  const real pixels = static_cast<real>(data.h) * data.w;
  Rng rng(0);

  ModelEval ev;
  ev.point.checkpoint = checkpoint_id;
  ev.point.strategy = strategy_tag;
  real bpp_sum = 0.0, mse_sum = 0.0;
  int correct = 0;
  for (int idx : indices) {
    require(idx >= 0 && idx < data.size(), "image index out of range");
    ImagePass p = run_image(m, data.images[static_cast<std::size_t>(idx)],
                            gauss, zt);
    ev.measured_bits.push_back(p.payload_bits);
    ev.estimate_bits.push_back(p.estimate_bits);
    ev.payload_bits += p.payload_bits;
    ev.stream_bytes += p.stream_bytes;
    bpp_sum += static_cast<real>(p.payload_bits) / pixels;
    mse_sum += distortion_loss(p.x_hat, p.x);

    const Tensor logits = m.classifier.forward(p.x_hat, /*training=*/false, rng);
    if (classify(logits)[0] == data.labels[static_cast<std::size_t>(idx)]) {
      ++correct;
    }
  }
  const real n = static_cast<real>(indices.size());
  ev.point.bpp = bpp_sum / n;
  ev.point.top1 = static_cast<real>(correct) / n;
  ev.mse = mse_sum / n;
  return ev;
}

CrossDomainEval cross_domain_eval(JointModel& m, const Dataset& data,
                                  const std::vector<int>& indices,
                                  const GaussianContexts& gauss,
                                  const PriorTables& zt) {
  require(!indices.empty(), "cross_domain_eval needs at least one image");
  Rng rng(0);
  const real pixels = static_cast<real>(data.h) * data.w;
  int correct_hat = 0, correct_raw = 0;
  real bpp_sum = 0.0;
  for (int idx : indices) {
    require(idx >= 0 && idx < data.size(), "image index out of range");
    ImagePass p = run_image(m, data.images[static_cast<std::size_t>(idx)],
                            gauss, zt);
    bpp_sum += static_cast<real>(p.payload_bits) / pixels;
    const int label = data.labels[static_cast<std::size_t>(idx)];
    const Tensor lh = m.classifier.forward(p.x_hat, false, rng);
    const Tensor lr = m.classifier.forward(p.x, false, rng);
    correct_hat += classify(lh)[0] == label;
    correct_raw += classify(lr)[0] == label;
  }
  const real n = static_cast<real>(indices.size());
  return {static_cast<real>(correct_hat) / n,
          static_cast<real>(correct_raw) / n, bpp_sum / n};
}

ReconDump dump_reconstructions(const std::vector<JointModel*>& models,
                               const std::vector<std::string>& tags,
                               const Dataset& data,
                               const std::vector<int>& indices,
                               const std::string& out_dir) {
  require(!models.empty() && !indices.empty(),
          "reconstruction dump needs at least one model and one image");
  require(models.size() == tags.size(), "one tag per model");
  fs::create_directories(out_dir);
  const real pixels = static_cast<real>(data.h) * data.w;

  const GaussianContexts gauss = GaussianContexts::build();
  std::vector<PriorTables> tables;  // coding tables follow each model's prior
  tables.reserve(models.size());
  for (JointModel* m : models) tables.push_back(PriorTables::build(m->prior));

  ReconDump out;
  json manifest = json::array();
  for (int idx : indices) {
    require(idx >= 0 && idx < data.size(), "image index out of range");
    const ImageU8& src = data.images[static_cast<std::size_t>(idx)];
    char name[64];
    std::snprintf(name, sizeof(name), "img%04d_original.png", idx);
    save_png((fs::path(out_dir) / name).string(), src);
    ++out.files_written;

    json row{{"index", idx},
             {"original", name},
             {"label", data.labels[static_cast<std::size_t>(idx)]},
             {"reconstructions", json::array()}};
    for (std::size_t j = 0; j < models.size(); ++j) {
      ImagePass p = run_image(*models[j], src, gauss, tables[j]);
      Tensor chw = Tensor::zeros({3, data.h, data.w});
      std::copy(p.x_hat.data(), p.x_hat.data() + p.x_hat.numel(), chw.data());
      char rname[96];
      std::snprintf(rname, sizeof(rname), "img%04d_%s.png", idx,
                    tags[j].c_str());
      save_png((fs::path(out_dir) / rname).string(), from_tensor01(chw));
      ++out.files_written;
      row["reconstructions"].push_back(
          {{"file", rname},
           {"tag", tags[j]},
           {"bpp", static_cast<real>(p.payload_bits) / pixels},
           {"mse", distortion_loss(p.x_hat, p.x)}});
    }
    manifest.push_back(std::move(row));
  }

  out.manifest_path = (fs::path(out_dir) / "reconstructions.json").string();
  std::ofstream mf(out.manifest_path);
  require(mf.good(), "cannot write " + out.manifest_path);
  mf << manifest.dump(2) << "\n";
  require(mf.good(), "short write on " + out.manifest_path);
  return out;
}

std::vector<AblationRow> ablation_sweep(
    const std::string& weight, const std::vector<real>& values,
    Strategy strategy, const LossWeights& base, const CodecConfig& codec_cfg,
    const ClassifierConfig& cls_cfg, const OptimizerConfig& opt,
    const Dataset& data, const std::vector<int>& train_idx,
    const std::vector<int>& val_idx, const std::vector<int>& eval_idx,
    std::uint64_t seed, JointModel* warm_start) {
  require(values.size() >= 3, "ablation sweep needs at least 3 values");
  require(weight == "alpha" || weight == "beta" || weight == "gamma",
          "ablation weight must be one of alpha, beta, gamma");

  const GaussianContexts gauss = GaussianContexts::build();
  std::vector<AblationRow> rows;
  rows.reserve(values.size());
  for (real v : values) {
    AblationRow row;
    row.value = v;
    try {
      LossWeights w = base;
      (weight == "alpha"  ? w.alpha
       : weight == "beta" ? w.beta
                          : w.gamma) = v;
      w.validate();

      JointModel m(codec_cfg, cls_cfg, seed);
      if (warm_start) copy_state(*warm_start, m);
      fit(m, data, train_idx, val_idx, w, strategy, opt, seed);

      const PriorTables zt = PriorTables::build(m.prior);
      const ModelEval ev = evaluate_model(m, data, eval_idx, gauss, zt);
      row.bpp = ev.point.bpp;
      row.top1 = ev.point.top1;
      row.mse = ev.mse;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace tcdc
