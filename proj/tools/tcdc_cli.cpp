// Command-line surface: dataset generation, training, evaluation, BD
// comparison, ablations, single-image codec runs, reconstruction dumps,
// and SVG plots. One experiment per invocation; a run directory becomes
// immutable once its config.json lands (it is written last).
//
// Exit codes: 0 success, 1 validation or runtime failure (one JSON error
// line on stderr), 2 bad flags or subcommand (usage text).

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "tcdc/coder.hpp"
#include "tcdc/config.hpp"
#include "tcdc/data.hpp"
#include "tcdc/evaluation.hpp"
#include "tcdc/image_io.hpp"
#include "tcdc/metrics.hpp"
#include "tcdc/plot.hpp"
#include "tcdc/train.hpp"

namespace fs = std::filesystem;
using namespace tcdc;

namespace {

struct Prepared {
  Dataset data;
  SplitIndices splits;
};

// Dataset + deterministic splits for a validated config. The synthetic
// generator is idempotent (same seed, same bytes), so regenerating into the
// shared directory is safe across runs. The split is seeded by the dataset
// seed, not the experiment seed, so runs with different training seeds stay
// comparable and never leak test images into each other's training sets.
Prepared prepare_dataset(const ExperimentConfig& cfg) {
  DatasetManifest m;
  if (cfg.dataset.manifest.empty()) {
    const fs::path dir = fs::path(cfg.output_dir) / "synthetic";
    m = generate_synthetic_dataset(
        cfg.dataset.synthetic_per_class, cfg.dataset.num_classes,
        cfg.dataset.image_size, cfg.dataset.synthetic_seed, dir.string());
  } else {
    m = load_manifest(cfg.dataset.manifest, cfg.dataset.num_classes);
  }
  Prepared p;
  p.data = load_dataset(m, cfg.dataset.image_size);
  p.splits = split_dataset(p.data.size(), cfg.dataset.train_frac,
                           cfg.dataset.val_frac, cfg.dataset.synthetic_seed);
  return p;
}

// Completed runs own their directory; config.json is the completion marker.
fs::path claim_run_dir(const ExperimentConfig& cfg) {
  const fs::path run_dir = fs::path(cfg.output_dir) / cfg.run_id;
  require(!fs::exists(run_dir / "config.json"),
          "run directory " + run_dir.string() +
              " already holds a completed run; pick a fresh run_id");
  fs::create_directories(run_dir);
  return run_dir;
}

const std::vector<int>& pick_split(const Prepared& p,
                                   const std::string& name) {
  if (name == "train") return p.splits.train;
  if (name == "val") return p.splits.val;
  return p.splits.test;
}

MetricsRecord make_record(const ExperimentConfig& cfg,
                          const std::string& checkpoint,
                          const LossWeights& w, const ModelEval& ev) {
  MetricsRecord rec;
  rec.run_id = cfg.run_id;
  rec.checkpoint = checkpoint;
  rec.strategy = to_string(cfg.strategy);
  rec.bpp = ev.point.bpp;
  rec.top1 = ev.point.top1;
  rec.weights = w;
  rec.seed = cfg.seed;
  rec.payload_bits = ev.payload_bits;
  rec.stream_bytes = ev.stream_bytes;
  rec.config_hash = config_hash(cfg);
  return rec;
}

// ------------------------------------------------------------- synth-data

struct SynthOpts {
  std::string out;
  int classes = 5;
  int per_class = 400;
  int size = 64;
  std::uint64_t seed = 7;
};

int run_synth(const SynthOpts& o) {
  const DatasetManifest m = generate_synthetic_dataset(
      o.per_class, o.classes, o.size, o.seed, o.out);
  std::printf("synth-data wrote %d images (%d classes) manifest %s\n",
              m.size(), m.num_classes,
              (fs::path(o.out) / "manifest.csv").string().c_str());
  return 0;
}

// ------------------------------------------------------------------ train

struct TrainOpts {
  std::string config;
  std::string warm_start;
  int pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
  bool verbose = false;
};

int run_train(const TrainOpts& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const fs::path run_dir = claim_run_dir(cfg);
  const Prepared p = prepare_dataset(cfg);

  JointModel model(cfg.codec, cfg.classifier, cfg.seed);
  if (!o.warm_start.empty()) {
    JointModel src = load_checkpoint(o.warm_start);
    copy_state(src, model);
  }
  if (o.pretrain_epochs > 0) {
    const real acc = fit_classifier(
        model.classifier, p.data, p.splits.train, p.splits.val, o.pretrain_lr,
        cfg.optimizer.batch_size, o.pretrain_epochs, cfg.optimizer.patience,
        cfg.seed + 1, o.verbose);
    std::printf("pretrain val_top1 %.4f\n", acc);
  }

  const FitResult fr = fit(model, p.data, p.splits.train, p.splits.val,
                           cfg.weights, cfg.strategy, cfg.optimizer, cfg.seed,
                           o.verbose);

  const std::string ckpt = (run_dir / "checkpoint.bin").string();
  CheckpointMeta meta;
  meta.codec = cfg.codec;
  meta.classifier = cfg.classifier;
  meta.strategy = cfg.strategy;
  meta.weights = cfg.weights;
  meta.seed = cfg.seed;
  meta.epoch = fr.best_epoch;
  meta.val = fr.best_val;
  save_checkpoint(ckpt, model, meta);

  const GaussianContexts gauss = GaussianContexts::build();
  const PriorTables zt = PriorTables::build(model.prior);
  const ModelEval ev = evaluate_model(model, p.data, p.splits.test, gauss, zt,
                                      ckpt, to_string(cfg.strategy));

  MetricsLog log((fs::path(cfg.output_dir) / "metrics.jsonl").string());
  log.append(make_record(cfg, ckpt, cfg.weights, ev));
  save_config((run_dir / "config.json").string(), cfg);

  std::printf("train %s bpp %.6f top1 %.4f mse %.6g checkpoint %s\n",
              cfg.run_id.c_str(), ev.point.bpp, ev.point.top1, ev.mse,
              ckpt.c_str());
  return 0;
}

// ------------------------------------------------------------------- eval

struct EvalOpts {
  std::string checkpoint;
  std::string config;
  std::string split = "test";
  std::string append_curve;
  std::string label;
  std::string metrics;
};

int run_eval(const EvalOpts& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const Prepared p = prepare_dataset(cfg);

  CheckpointMeta meta;
  JointModel model = load_checkpoint(o.checkpoint, &meta);
  const GaussianContexts gauss = GaussianContexts::build();
  const PriorTables zt = PriorTables::build(model.prior);
  const ModelEval ev =
      evaluate_model(model, p.data, pick_split(p, o.split), gauss, zt,
                     o.checkpoint, to_string(meta.strategy));

  std::printf("eval bpp %.6f top1 %.4f mse %.6g payload_bits %lld "
              "stream_bytes %lld\n",
              ev.point.bpp, ev.point.top1, ev.mse,
              static_cast<long long>(ev.payload_bits),
              static_cast<long long>(ev.stream_bytes));

  if (!o.append_curve.empty()) {
    RateAccuracyCurve curve;
    if (fs::exists(o.append_curve)) curve = load_curve(o.append_curve);
    if (!o.label.empty()) curve.label = o.label;
    if (curve.label.empty()) curve.label = cfg.run_id;
    curve.points.push_back(ev.point);
    std::sort(curve.points.begin(), curve.points.end(),
              [](const RatePoint& a, const RatePoint& b) {
                return a.bpp < b.bpp;
              });
    validate_curve(curve, /*min_points=*/1);
    save_curve(o.append_curve, curve);
    std::printf("curve %s points %zu\n", o.append_curve.c_str(),
                curve.points.size());
  }
  if (!o.metrics.empty()) {
    ExperimentConfig tagged = cfg;
    tagged.strategy = meta.strategy;
    MetricsLog(o.metrics).append(
        make_record(tagged, o.checkpoint, meta.weights, ev));
  }
  return 0;
}

// ------------------------------------------------------------------ sweep

struct SweepOpts {
  std::string config;
  std::string warm_start;
  std::string out;
  std::string label;
  int pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
  bool verbose = false;
};

int run_sweep(const SweepOpts& o) {
  const ExperimentConfig cfg = load_config(o.config);
  require(!cfg.alpha_sweep.empty(),
          "sweep needs config.alpha_sweep to list at least one value");
  const fs::path run_dir = claim_run_dir(cfg);
  const Prepared p = prepare_dataset(cfg);

  JointModel proto(cfg.codec, cfg.classifier, cfg.seed);
  if (!o.warm_start.empty()) {
    JointModel src = load_checkpoint(o.warm_start);
    copy_state(src, proto);
  }
  if (o.pretrain_epochs > 0) {
    const real acc = fit_classifier(
        proto.classifier, p.data, p.splits.train, p.splits.val, o.pretrain_lr,
        cfg.optimizer.batch_size, o.pretrain_epochs, cfg.optimizer.patience,
        cfg.seed + 1, o.verbose);
    std::printf("pretrain val_top1 %.4f\n", acc);
  }

  const GaussianContexts gauss = GaussianContexts::build();
  MetricsLog log((fs::path(cfg.output_dir) / "metrics.jsonl").string());

  RateAccuracyCurve curve;
  curve.label = o.label.empty() ? cfg.run_id : o.label;
  for (std::size_t i = 0; i < cfg.alpha_sweep.size(); ++i) {
    LossWeights w = cfg.weights;
    w.alpha = cfg.alpha_sweep[i];

    JointModel m(cfg.codec, cfg.classifier, cfg.seed);
    copy_state(proto, m);
    const FitResult fr = fit(m, p.data, p.splits.train, p.splits.val, w,
                             cfg.strategy, cfg.optimizer, cfg.seed, o.verbose);

    char name[32];
    std::snprintf(name, sizeof(name), "ckpt_%02zu.bin", i);
    const std::string ckpt = (run_dir / name).string();
    CheckpointMeta meta;
    meta.codec = cfg.codec;
    meta.classifier = cfg.classifier;
    meta.strategy = cfg.strategy;
    meta.weights = w;
    meta.seed = cfg.seed;
    meta.epoch = fr.best_epoch;
    meta.val = fr.best_val;
    save_checkpoint(ckpt, m, meta);

    const PriorTables zt = PriorTables::build(m.prior);
    const ModelEval ev = evaluate_model(m, p.data, p.splits.test, gauss, zt,
                                        ckpt, to_string(cfg.strategy));
    curve.points.push_back(ev.point);
    log.append(make_record(cfg, ckpt, w, ev));
    std::printf("sweep alpha %.6g bpp %.6f top1 %.4f checkpoint %s\n",
                w.alpha, ev.point.bpp, ev.point.top1, ckpt.c_str());
  }

  std::sort(curve.points.begin(), curve.points.end(),
            [](const RatePoint& a, const RatePoint& b) {
              return a.bpp < b.bpp;
            });
  validate_curve(curve, /*min_points=*/1);
  const std::string curve_path =
      o.out.empty() ? (run_dir / "curve.json").string() : o.out;
  save_curve(curve_path, curve);
  save_config((run_dir / "config.json").string(), cfg);
  std::printf("sweep wrote %s points %zu\n", curve_path.c_str(),
              curve.points.size());
  return 0;
}

// --------------------------------------------------------------------- bd

struct BdOpts {
  std::string ref;
  std::string test;
  std::string mode = "both";
  bool verbose = false;
};

int run_bd(const BdOpts& o) {
  const RateAccuracyCurve ref = load_curve(o.ref);
  const RateAccuracyCurve test = load_curve(o.test);

  if (o.mode == "accuracy") {
    const BDResult a = bd_metric(ref, test, BdMode::accuracy);
    std::printf("bd_accuracy %.2f\n", a.bd_accuracy);
    if (o.verbose) {
      std::printf("# accuracy overlap log10(bpp) [%.6f, %.6f]\n",
                  a.overlap_lo, a.overlap_hi);
    }
  } else if (o.mode == "rate") {
    const BDResult r = bd_metric(ref, test, BdMode::rate);
    std::printf("bd_rate %.2f\n", r.bd_rate);
    if (o.verbose) {
      std::printf("# rate overlap accuracy [%.4f, %.4f] adjusted %d\n",
                  r.overlap_lo, r.overlap_hi, r.adjusted ? 1 : 0);
    }
  } else {
    const BDResult a = bd_metric(ref, test, BdMode::accuracy);
    const BDResult r = bd_metric(ref, test, BdMode::rate);
    std::printf("bd_accuracy %.2f bd_rate %.2f\n", a.bd_accuracy, r.bd_rate);
    if (o.verbose) {
      std::printf("# accuracy overlap log10(bpp) [%.6f, %.6f]\n",
                  a.overlap_lo, a.overlap_hi);
      std::printf("# rate overlap accuracy [%.4f, %.4f] adjusted %d\n",
                  r.overlap_lo, r.overlap_hi, r.adjusted ? 1 : 0);
    }
  }
  return 0;
}

// ----------------------------------------------------------------- ablate

struct AblateOpts {
  std::string config;
  std::string weight;
  std::vector<double> values;
  std::string warm_start;
  int pretrain_epochs = 0;
  double pretrain_lr = 1e-3;
};

int run_ablate(const AblateOpts& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const fs::path run_dir = claim_run_dir(cfg);
  const Prepared p = prepare_dataset(cfg);

  JointModel proto(cfg.codec, cfg.classifier, cfg.seed);
  if (!o.warm_start.empty()) {
    JointModel src = load_checkpoint(o.warm_start);
    copy_state(src, proto);
  }
  if (o.pretrain_epochs > 0) {
    const real acc = fit_classifier(
        proto.classifier, p.data, p.splits.train, p.splits.val, o.pretrain_lr,
        cfg.optimizer.batch_size, o.pretrain_epochs, cfg.optimizer.patience,
        cfg.seed + 1, false);
    std::printf("pretrain val_top1 %.4f\n", acc);
  }

  const std::vector<real> values(o.values.begin(), o.values.end());
  const std::vector<AblationRow> rows = ablation_sweep(
      o.weight, values, cfg.strategy, cfg.weights, cfg.codec, cfg.classifier,
      cfg.optimizer, p.data, p.splits.train, p.splits.val, p.splits.test,
      cfg.seed, &proto);

  nlohmann::json table{{"weight", o.weight},
                       {"rows", nlohmann::json::array()},
                       {"failures", nlohmann::json::array()}};
  std::size_t failures = 0;
  for (const AblationRow& r : rows) {
    if (r.ok) {
      table["rows"].push_back({{"value", r.value},
                               {"bpp", r.bpp},
                               {"top1", r.top1},
                               {"mse", r.mse}});
      std::printf("ablate %s=%.6g bpp %.6f top1 %.4f mse %.6g\n",
                  o.weight.c_str(), r.value, r.bpp, r.top1, r.mse);
    } else {
      ++failures;
      table["failures"].push_back({{"value", r.value}, {"error", r.error}});
      std::printf("ablate %s=%.6g failed: %s\n", o.weight.c_str(), r.value,
                  r.error.c_str());
    }
  }

  const std::string table_path = (run_dir / "ablation.json").string();
  std::ofstream out(table_path);
  require(out.good(), "cannot write " + table_path);
  out << table.dump(2) << "\n";
  require(out.good(), "short write on " + table_path);
  save_config((run_dir / "config.json").string(), cfg);
  std::printf("ablate wrote %s rows %zu failures %zu\n", table_path.c_str(),
              rows.size() - failures, failures);
  return 0;
}

// --------------------------------------------------- compress / decompress

struct CompressOpts {
  std::string input;
  std::string checkpoint;
  std::string out;
  int quality = 0;
  int resize = 0;
};

int run_compress(const CompressOpts& o) {
  ImageU8 img = load_png(o.input);
  if (o.resize > 0) img = resize_bilinear(img, o.resize, o.resize);

  const Tensor chw = to_tensor01(img);
  Tensor x = Tensor::zeros({1, chw.dim(0), chw.dim(1), chw.dim(2)});
  std::copy(chw.data(), chw.data() + chw.numel(), x.data());

  JointModel model = load_checkpoint(o.checkpoint);
  const GaussianContexts gauss = GaussianContexts::build();
  const PriorTables zt = PriorTables::build(model.prior);
  const CompressResult cr =
      compress(model.codec, model.prior, x, o.quality, gauss, zt);

  std::ofstream out(o.out, std::ios::binary);
  require(out.good(), "cannot write " + o.out);
  out.write(reinterpret_cast<const char*>(cr.stream.data()),
            static_cast<std::streamsize>(cr.stream.size()));
  require(out.good(), "short write on " + o.out);

  const real pixels = static_cast<real>(img.h) * img.w;
  std::printf("compress %s -> %s payload_bits %lld bpp %.6f "
              "estimate_bits %.1f\n",
              o.input.c_str(), o.out.c_str(),
              static_cast<long long>(cr.payload_bits),
              static_cast<real>(cr.payload_bits) / pixels,
              cr.estimate.total_bits);
  return 0;
}

struct DecompressOpts {
  std::string input;
  std::string checkpoint;
  std::string out;
};

int run_decompress(const DecompressOpts& o) {
  std::ifstream in(o.input, std::ios::binary);
  require(in.good(), "cannot open " + o.input);
  const std::vector<std::uint8_t> stream(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  JointModel model = load_checkpoint(o.checkpoint);
  const GaussianContexts gauss = GaussianContexts::build();
  const PriorTables zt = PriorTables::build(model.prior);
  const DecompressResult dr = decompress(model.codec, stream, gauss, zt);

  Tensor chw = Tensor::zeros({3, dr.header.h, dr.header.w});
  std::copy(dr.image.data(), dr.image.data() + dr.image.numel(), chw.data());
  save_png(o.out, from_tensor01(chw));
  std::printf("decompress %s %dx%d -> %s\n", o.input.c_str(), dr.header.h,
              dr.header.w, o.out.c_str());
  return 0;
}

// ------------------------------------------------------------- recon-dump

struct ReconOpts {
  std::string config;
  std::vector<std::string> checkpoints;
  std::vector<std::string> tags;
  std::string out;
  int count = 4;
};

int run_recon_dump(const ReconOpts& o) {
  const ExperimentConfig cfg = load_config(o.config);
  const Prepared p = prepare_dataset(cfg);
  require(o.count >= 1, "recon-dump needs at least one image");
  require(static_cast<std::size_t>(o.count) <= p.splits.test.size(),
          "recon-dump count exceeds the test split");

  std::deque<JointModel> models;  // stable addresses for the pointer list
  std::vector<JointModel*> ptrs;
  std::vector<std::string> tags = o.tags;
  for (const std::string& path : o.checkpoints) {
    models.push_back(load_checkpoint(path));
    ptrs.push_back(&models.back());
    if (o.tags.empty()) tags.push_back(fs::path(path).stem().string());
  }
  require(tags.size() == ptrs.size(), "one tag per checkpoint");

  const std::vector<int> indices(p.splits.test.begin(),
                                 p.splits.test.begin() + o.count);
  const ReconDump dump =
      dump_reconstructions(ptrs, tags, p.data, indices, o.out);
  std::printf("recon-dump wrote %d files manifest %s\n", dump.files_written,
              dump.manifest_path.c_str());
  return 0;
}

// ------------------------------------------------------------------- plot

struct PlotCliOpts {
  std::string out;
  std::string metrics;
  std::vector<std::string> curve_files;
  std::string title = "Rate-accuracy";
  double baseline = -1.0;
  bool linear_x = false;
};

int run_plot(const PlotCliOpts& o) {
  std::vector<RateAccuracyCurve> curves;
  for (const std::string& path : o.curve_files) {
    curves.push_back(load_curve(path));
  }
  if (!o.metrics.empty()) {
    // one curve per run_id, one point per checkpoint; the log is
    // append-only, so the newest record for a checkpoint supersedes
    // earlier evaluations of it
    std::map<std::string, std::map<std::string, RatePoint>> by_run;
    for (const MetricsRecord& r : MetricsLog::read(o.metrics)) {
      by_run[r.run_id][r.checkpoint] = {r.bpp, r.top1, r.checkpoint,
                                        r.strategy};
    }
    for (auto& [id, points] : by_run) {
      RateAccuracyCurve c;
      c.label = id;
      for (auto& [ckpt, pt] : points) c.points.push_back(pt);
      std::sort(c.points.begin(), c.points.end(),
                [](const RatePoint& a, const RatePoint& b) {
                  return a.bpp < b.bpp;
                });
      curves.push_back(std::move(c));
    }
  }
  require(!curves.empty(), "plot needs --metrics or at least one --curve");

  PlotOptions po;
  po.title = o.title;
  po.baseline_top1 = o.baseline;
  po.log_x = !o.linear_x;
  write_rate_accuracy_svg(o.out, curves, po);
  std::printf("plot wrote %s curves %zu\n", o.out.c_str(), curves.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-aware learned image compression toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  int rc = 0;

  SynthOpts synth;
  CLI::App* sc = app.add_subcommand(
      "synth-data", "generate the procedural face-like dataset");
  sc->add_option("--out", synth.out, "output directory")->required();
  sc->add_option("--classes", synth.classes, "number of classes");
  sc->add_option("--per-class", synth.per_class, "images per class");
  sc->add_option("--size", synth.size, "image side (multiple of 64)");
  sc->add_option("--seed", synth.seed, "generator seed");
  sc->callback([&] { rc = run_synth(synth); });

  TrainOpts train;
  CLI::App* tr = app.add_subcommand("train", "train one model per config");
  tr->add_option("--config", train.config, "experiment config JSON")
      ->required();
  tr->add_option("--warm-start", train.warm_start,
                 "checkpoint to initialize from");
  tr->add_option("--pretrain-epochs", train.pretrain_epochs,
                 "classifier pretraining epochs on raw images before the "
                 "main loop");
  tr->add_option("--pretrain-lr", train.pretrain_lr,
                 "classifier pretraining learning rate");
  tr->add_flag("--verbose", train.verbose, "per-epoch progress");
  tr->callback([&] { rc = run_train(train); });

  EvalOpts ev;
  CLI::App* evc = app.add_subcommand(
      "eval", "measure one checkpoint through the real coder");
  evc->add_option("--checkpoint", ev.checkpoint, "checkpoint file")
      ->required();
  evc->add_option("--config", ev.config, "experiment config JSON (dataset)")
      ->required();
  evc->add_option("--split", ev.split, "train|val|test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  evc->add_option("--append-curve", ev.append_curve,
                  "curve JSON to insert this point into");
  evc->add_option("--label", ev.label, "curve label when appending");
  evc->add_option("--metrics", ev.metrics, "metrics JSONL to append to");
  evc->callback([&] { rc = run_eval(ev); });

  SweepOpts sweep;
  CLI::App* sw = app.add_subcommand(
      "sweep", "train the config's alpha grid into a rate-accuracy curve");
  sw->add_option("--config", sweep.config, "experiment config JSON")
      ->required();
  sw->add_option("--warm-start", sweep.warm_start,
                 "checkpoint every grid point starts from");
  sw->add_option("--out", sweep.out, "curve output path");
  sw->add_option("--label", sweep.label, "curve label");
  sw->add_option("--pretrain-epochs", sweep.pretrain_epochs,
                 "classifier pretraining epochs before the grid");
  sw->add_option("--pretrain-lr", sweep.pretrain_lr,
                 "classifier pretraining learning rate");
  sw->add_flag("--verbose", sweep.verbose, "per-epoch progress");
  sw->callback([&] { rc = run_sweep(sweep); });

  BdOpts bd;
  CLI::App* bdc = app.add_subcommand(
      "bd", "Bjontegaard delta between two curve files");
  bdc->add_option("--ref", bd.ref, "reference curve JSON")->required();
  bdc->add_option("--test", bd.test, "test curve JSON")->required();
  bdc->add_option("--mode", bd.mode, "accuracy|rate|both")
      ->check(CLI::IsMember({"accuracy", "rate", "both"}));
  bdc->add_flag("--verbose", bd.verbose, "print overlap details");
  bdc->callback([&] { rc = run_bd(bd); });

  AblateOpts ab;
  CLI::App* abc = app.add_subcommand(
      "ablate", "adjust one loss weight over a value grid");
  abc->add_option("--config", ab.config, "experiment config JSON")
      ->required();
  abc->add_option("--weight", ab.weight, "alpha|beta|gamma")
      ->required()
      ->check(CLI::IsMember({"alpha", "beta", "gamma"}));
  abc->add_option("--values", ab.values, "comma-separated grid (>= 3)")
      ->required()
      ->delimiter(',');
  abc->add_option("--warm-start", ab.warm_start,
                  "checkpoint every value starts from");
  abc->add_option("--pretrain-epochs", ab.pretrain_epochs,
                  "classifier pretraining epochs before the grid");
  abc->add_option("--pretrain-lr", ab.pretrain_lr,
                  "classifier pretraining learning rate");
  abc->callback([&] { rc = run_ablate(ab); });

  CompressOpts comp;
  CLI::App* cc = app.add_subcommand("compress", "PNG to bitstream");
  cc->add_option("--input", comp.input, "input PNG")->required();
  cc->add_option("--checkpoint", comp.checkpoint, "model checkpoint")
      ->required();
  cc->add_option("--out", comp.out, "bitstream output path")->required();
  cc->add_option("--quality", comp.quality, "quality byte stored in the "
                 "header (0-255)")
      ->check(CLI::Range(0, 255));
  cc->add_option("--resize", comp.resize,
                 "bilinear-resize the input to this side first");
  cc->callback([&] { rc = run_compress(comp); });

  DecompressOpts dec;
  CLI::App* dc = app.add_subcommand("decompress", "bitstream to PNG");
  dc->add_option("--input", dec.input, "bitstream file")->required();
  dc->add_option("--checkpoint", dec.checkpoint, "model checkpoint")
      ->required();
  dc->add_option("--out", dec.out, "output PNG path")->required();
  dc->callback([&] { rc = run_decompress(dec); });

  ReconOpts recon;
  CLI::App* rd = app.add_subcommand(
      "recon-dump", "write originals plus per-checkpoint reconstructions");
  rd->add_option("--config", recon.config, "experiment config JSON (dataset)")
      ->required();
  rd->add_option("--checkpoint", recon.checkpoints,
                 "checkpoint file (repeatable)")
      ->required();
  rd->add_option("--tag", recon.tags,
                 "file tag per checkpoint (default: checkpoint stem)");
  rd->add_option("--out", recon.out, "output directory")->required();
  rd->add_option("--count", recon.count, "number of test images");
  rd->callback([&] { rc = run_recon_dump(recon); });

  PlotCliOpts plot;
  CLI::App* pl = app.add_subcommand(
      "plot", "render rate-accuracy curves as a standalone SVG");
  pl->add_option("--out", plot.out, "SVG output path")->required();
  pl->add_option("--metrics", plot.metrics,
                 "metrics JSONL; records group into one curve per run_id");
  pl->add_option("--curve", plot.curve_files, "curve JSON (repeatable)");
  pl->add_option("--title", plot.title, "chart title");
  pl->add_option("--baseline", plot.baseline,
                 "uncompressed top-1 fraction for the dashed reference line");
  pl->add_flag("--linear-x", plot.linear_x, "linear bpp axis instead of log");
  pl->callback([&] { rc = run_plot(plot); });

  try {
#ifdef _OPENMP
    if (const int threads = env_thread_override(); threads > 0) {
      omp_set_num_threads(threads);
    }
#endif
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s\n",
                 nlohmann::json{{"error", e.what()}}.dump().c_str());
    return 1;
  }
  return rc;
}
