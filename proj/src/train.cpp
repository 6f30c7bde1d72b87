#include "tcdc/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace tcdc {

using json = nlohmann::json;

namespace {

using i64 = std::int64_t;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t x = seed + (k + 1) * 0x9E3779B97F4A7C15ull;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

CodecModel make_codec(const CodecConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return CodecModel(cfg, rng);
}

FactorizedPrior make_prior(int channels, std::uint64_t seed) {
  Rng rng(seed);
  return FactorizedPrior(channels, rng);
}

Classifier make_classifier(const ClassifierConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return Classifier(cfg, rng);
}

void scale_inplace(Tensor& t, real s) {
#pragma omp parallel for schedule(static)
  for (i64 i = 0; i < t.numel(); ++i) t[i] *= s;
}

}  // namespace

Strategy strategy_from_string(const std::string& s) {
  if (s == "compression_only") return Strategy::compression_only;
  if (s == "joint") return Strategy::joint;
  fail("unknown strategy: " + s + " (want compression_only or joint)");
}

std::string to_string(Strategy s) {
  return s == Strategy::compression_only ? "compression_only" : "joint";
}

void OptimizerConfig::validate() const {
  require(lr > 0.0 && aux_lr > 0.0, "learning rates must be positive");
  require(weight_decay >= 0.0, "weight decay must be nonnegative");
  require(batch_size >= 1, "batch size must be at least 1");
  require(grad_clip > 0.0, "gradient clip must be positive");
  require(max_epochs >= 1, "need at least one epoch");
  require(patience >= 1, "patience must be at least 1");
}

// ------------------------------------------------------------- JointModel

JointModel::JointModel(const CodecConfig& codec_cfg,
                       const ClassifierConfig& cls_cfg, std::uint64_t seed)
    : codec(make_codec(codec_cfg, sub_seed(seed, 0))),
      prior(make_prior(codec_cfg.channels_hyper, sub_seed(seed, 1))),
      classifier(make_classifier(cls_cfg, sub_seed(seed, 2))),
      init_seed(seed) {}

std::vector<Parameter*> JointModel::main_parameters() {
  std::vector<Parameter*> out = codec.parameters();
  for (Parameter* p : prior.parameters()) out.push_back(p);
  for (Parameter* p : classifier.parameters()) out.push_back(p);
  return out;
}

std::vector<Parameter*> JointModel::checkpoint_parameters() {
  std::vector<Parameter*> out = main_parameters();
  for (Parameter* p : prior.quantile_parameters()) out.push_back(p);
  return out;
}

std::vector<Tensor*> JointModel::buffers() { return classifier.buffers(); }

void JointModel::apply_strategy(Strategy s) {
  for (Parameter* p : codec.parameters()) p->trainable = true;
  for (Parameter* p : prior.parameters()) p->trainable = true;
  classifier.set_trainable(s == Strategy::joint);
}

void copy_state(JointModel& src, JointModel& dst) {
  const std::vector<Parameter*> sp = src.checkpoint_parameters();
  const std::vector<Parameter*> dp = dst.checkpoint_parameters();
  require(sp.size() == dp.size(), "models have different parameter sets");
  for (std::size_t i = 0; i < sp.size(); ++i) {
    require(sp[i]->name == dp[i]->name &&
                sp[i]->value.same_shape(dp[i]->value),
            "parameter mismatch at " + sp[i]->name);
    dp[i]->value = sp[i]->value;
  }
  const std::vector<Tensor*> sb = src.buffers();
  const std::vector<Tensor*> db = dst.buffers();
  require(sb.size() == db.size(), "models have different buffer sets");
  for (std::size_t i = 0; i < sb.size(); ++i) {
    require(sb[i]->same_shape(*db[i]), "buffer shape mismatch");
    *db[i] = *sb[i];
  }
}

// ------------------------------------------------------ forward / backward

ForwardResult joint_forward(JointModel& m, const Tensor& x,
                            const std::vector<int>& labels,
                            const LossWeights& w, Strategy strategy,
                            bool training, Rng& rng) {
  w.validate();
  require(x.ndim() == 4 && x.dim(1) == 3, "expected a (B,3,H,W) image batch");
  require(labels.empty() || static_cast<int>(labels.size()) == x.dim(0),
          "label count does not match the batch");
  const int b = x.dim(0), h = x.dim(2), wd = x.dim(3);

  ForwardResult fr;
  fr.training_pass = training;
  fr.y = m.codec.analysis(x);
  fr.z = m.codec.hyper_analysis(fr.y);
  fr.z_hat = training ? quantize(fr.z, QuantizeMode::noise, nullptr, &rng)
                      : quantize(fr.z, QuantizeMode::round);
  fr.p_z = m.prior.likelihood(fr.z_hat);
  fr.gp = m.codec.hyper_synthesis(fr.z_hat);
  fr.y_hat = training
                 ? quantize(fr.y, QuantizeMode::noise, nullptr, &rng)
                 : quantize(fr.y, QuantizeMode::round_offset, &fr.gp.mean);
  fr.p_y = fr.gc.likelihood(fr.y_hat, fr.gp);
  fr.x_hat = m.codec.synthesis(fr.y_hat);
  if (!training) clamp01(fr.x_hat);

  // With gamma == 0 the classifier would contribute nothing to training,
  // so the pass is skipped; evaluation always reports it when labels exist.
  const bool run_classifier =
      !labels.empty() && !(training && w.gamma == 0.0);
  if (run_classifier) {
    const bool cls_training = training && strategy == Strategy::joint;
    fr.logits = m.classifier.forward(fr.x_hat, cls_training, rng);
    fr.ce = cross_entropy(fr.logits, labels);
  }

  fr.bits = rate_loss({&fr.p_y, &fr.p_z});
  fr.bpp = bpp_of(fr.bits, b, h, wd);
  fr.mse = distortion_loss(x, fr.x_hat);
  fr.total = joint_loss(fr.bpp, fr.mse, fr.ce, w);
  return fr;
}

void joint_backward(JointModel& m, const Tensor& x,
                    const std::vector<int>& labels, const LossWeights& w,
                    Strategy strategy, ForwardResult& fr) {
  (void)strategy;  // the forward already fixed the classifier's mode
  require(fr.training_pass, "backward needs a training-mode forward");
  const int b = x.dim(0), h = x.dim(2), wd = x.dim(3);

  // Distortion and task branches meet at the reconstruction.
  Tensor dx_hat = distortion_backward(x, fr.x_hat);
  scale_inplace(dx_hat, w.beta);
  if (!fr.logits.empty() && w.gamma > 0.0) {
    Tensor dlogits = cross_entropy_backward(fr.logits, labels);
    scale_inplace(dlogits, w.gamma);
    dx_hat.add_scaled(m.classifier.backward(dlogits), 1.0);
  }
  Tensor dy_hat = m.codec.synthesis_backward(dx_hat);

  // Rate branch: total carries alpha * bits / (B H W).
  const real rate_scale =
      w.alpha / (static_cast<real>(b) * static_cast<real>(h) * wd);

  Tensor dp_y = rate_loss_backward(fr.p_y);
  scale_inplace(dp_y, rate_scale);
  Tensor dv(fr.y_hat.shape()), dmu(fr.y_hat.shape()), dsigma(fr.y_hat.shape());
  fr.gc.backward(dp_y, dv, dmu, dsigma);
  dy_hat.add_scaled(dv, 1.0);
  Tensor dz_hat = m.codec.hyper_synthesis_backward(dmu, dsigma);

  Tensor dp_z = rate_loss_backward(fr.p_z);
  scale_inplace(dp_z, rate_scale);
  dz_hat.add_scaled(m.prior.likelihood_backward(dp_z), 1.0);

  // Straight-through around both quantizers; y fans out into the hyper
  // path and the quantized latent.
  Tensor dy = m.codec.hyper_analysis_backward(dz_hat);
  dy.add_scaled(dy_hat, 1.0);
  m.codec.analysis_backward(dy);
}

// ---------------------------------------------------------------- training

StepResult train_step(JointModel& m, Adam& opt, Adam& aux_opt, const Tensor& x,
                      const std::vector<int>& labels, const LossWeights& w,
                      Strategy strategy, real grad_clip, Rng& rng) {
  opt.zero_grad();
  aux_opt.zero_grad();

  ForwardResult fr = joint_forward(m, x, labels, w, strategy, true, rng);
  if (!std::isfinite(fr.total)) {
    std::ostringstream msg;
    msg << "non-finite training loss: total=" << fr.total
        << " bpp=" << fr.bpp << " mse=" << fr.mse << " ce=" << fr.ce
        << " y=[" << fr.y.min_value() << "," << fr.y.max_value() << "]"
        << " z=[" << fr.z.min_value() << "," << fr.z.max_value() << "]";
    fail(msg.str());
  }
  joint_backward(m, x, labels, w, strategy, fr);

  StepResult sr;
  sr.grad_norm = grad_clip > 0.0 ? clip_grad_norm(opt.params(), grad_clip)
                                 : global_grad_norm(opt.params());
  opt.step();

  sr.aux = m.prior.aux_loss();
  m.prior.aux_backward();
  aux_opt.step();

  sr.total = fr.total;
  sr.bpp = fr.bpp;
  sr.mse = fr.mse;
  sr.ce = fr.ce;
  return sr;
}

EvalMetrics validate(JointModel& m, const Dataset& data,
                     const std::vector<int>& indices, const LossWeights& w,
                     int batch_size) {
  require(!indices.empty(), "validation needs at least one sample");
  require(batch_size >= 1, "batch size must be at least 1");
  Rng unused(0);  // eval-mode passes draw nothing
  EvalMetrics out;
  real correct = 0.0;
  for (std::size_t s = 0; s < indices.size();
       s += static_cast<std::size_t>(batch_size)) {
    const std::size_t e =
        std::min(indices.size(), s + static_cast<std::size_t>(batch_size));
    const std::vector<int> bidx(indices.begin() + static_cast<std::ptrdiff_t>(s),
                                indices.begin() + static_cast<std::ptrdiff_t>(e));
    std::vector<int> labels;
    const Tensor x = make_batch(data, bidx, false, unused, &labels);
    ForwardResult fr =
        joint_forward(m, x, labels, w, Strategy::joint, false, unused);
    const int b = static_cast<int>(bidx.size());
    out.total += fr.total * b;
    out.bpp += fr.bpp * b;
    out.mse += fr.mse * b;
    out.ce += fr.ce * b;
    const std::vector<int> pred = classify(fr.logits);
    for (int i = 0; i < b; ++i)
      if (pred[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(i)])
        correct += 1.0;
    out.count += b;
  }
  out.total /= out.count;
  out.bpp /= out.count;
  out.mse /= out.count;
  out.ce /= out.count;
  out.accuracy = correct / out.count;
  return out;
}

FitResult fit(JointModel& m, const Dataset& data,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const LossWeights& w,
              Strategy strategy, const OptimizerConfig& cfg,
              std::uint64_t seed, bool verbose) {
  cfg.validate();
  w.validate();
  require(!train_idx.empty() && !val_idx.empty(),
          "training needs nonempty train and val splits");

  m.apply_strategy(strategy);
  AdamConfig main_cfg;
  main_cfg.lr = cfg.lr;
  main_cfg.weight_decay = cfg.weight_decay;
  Adam opt(m.main_parameters(), main_cfg);
  AdamConfig aux_cfg;
  aux_cfg.lr = cfg.aux_lr;
  Adam aux_opt(m.prior.quantile_parameters(), aux_cfg);

  Rng rng(seed);
  FitResult out;
  real best = std::numeric_limits<real>::infinity();
  std::vector<Tensor> snap_params, snap_buffers;
  const auto snapshot = [&] {
    snap_params.clear();
    for (Parameter* p : m.checkpoint_parameters())
      snap_params.push_back(p->value);
    snap_buffers.clear();
    for (Tensor* t : m.buffers()) snap_buffers.push_back(*t);
  };
  const auto restore = [&] {
    const std::vector<Parameter*> ps = m.checkpoint_parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap_params[i];
    const std::vector<Tensor*> bs = m.buffers();
    for (std::size_t i = 0; i < bs.size(); ++i) *bs[i] = snap_buffers[i];
  };

  const int n = static_cast<int>(train_idx.size());
  const int bs = std::min(cfg.batch_size, n);
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::vector<int> perm = rng.permutation(n);
    real train_sum = 0.0;
    int steps = 0;
    for (int s = 0; s + bs <= n; s += bs) {
      std::vector<int> bidx(static_cast<std::size_t>(bs));
      for (int i = 0; i < bs; ++i)
        bidx[static_cast<std::size_t>(i)] =
            train_idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(s + i)])];
      std::vector<int> labels;
      const Tensor x = make_batch(data, bidx, true, rng, &labels);
      const StepResult sr =
          train_step(m, opt, aux_opt, x, labels, w, strategy, cfg.grad_clip, rng);
      train_sum += sr.total;
      ++steps;
    }
    EpochLog log;
    log.epoch = epoch;
    log.train_total = steps > 0 ? train_sum / steps : 0.0;
    log.val = validate(m, data, val_idx, w, cfg.batch_size);
    out.history.push_back(log);
    if (verbose) {
      std::printf(
          "epoch %3d  train %.6f | val total %.6f bpp %.4f mse %.6f ce %.4f "
          "acc %.4f\n",
          epoch, log.train_total, log.val.total, log.val.bpp, log.val.mse,
          log.val.ce, log.val.accuracy);
      std::fflush(stdout);
    }
    if (log.val.total < best) {
      best = log.val.total;
      out.best_epoch = epoch;
      out.best_val = log.val;
      snapshot();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  restore();
  return out;
}

real fit_classifier(Classifier& cls, const Dataset& data,
                    const std::vector<int>& train_idx,
                    const std::vector<int>& val_idx, real lr, int batch_size,
                    int max_epochs, int patience, std::uint64_t seed,
                    bool verbose) {
  require(!train_idx.empty() && !val_idx.empty(),
          "training needs nonempty train and val splits");
  require(lr > 0.0 && batch_size >= 1 && max_epochs >= 1 && patience >= 1,
          "bad classifier training settings");

  cls.set_trainable(true);
  AdamConfig ac;
  ac.lr = lr;
  Adam opt(cls.parameters(), ac);
  Rng rng(seed);

  const auto eval_split = [&](const std::vector<int>& idx, real* acc_out) {
    Rng unused(0);
    real ce_sum = 0.0, correct = 0.0;
    for (std::size_t s = 0; s < idx.size();
         s += static_cast<std::size_t>(batch_size)) {
      const std::size_t e =
          std::min(idx.size(), s + static_cast<std::size_t>(batch_size));
      const std::vector<int> bidx(idx.begin() + static_cast<std::ptrdiff_t>(s),
                                  idx.begin() + static_cast<std::ptrdiff_t>(e));
      std::vector<int> labels;
      const Tensor x = make_batch(data, bidx, false, unused, &labels);
      const Tensor logits = cls.forward(x, false, unused);
      ce_sum += cross_entropy(logits, labels) * static_cast<real>(bidx.size());
      const std::vector<int> pred = classify(logits);
      for (std::size_t i = 0; i < bidx.size(); ++i)
        if (pred[i] == labels[i]) correct += 1.0;
    }
    const real n = static_cast<real>(idx.size());
    if (acc_out != nullptr) *acc_out = correct / n;
    return ce_sum / n;
  };

  real best_ce = std::numeric_limits<real>::infinity();
  real best_acc = 0.0;
  int since_best = 0;
  std::vector<Tensor> snap_params, snap_buffers;
  const int n = static_cast<int>(train_idx.size());
  const int bs = std::min(batch_size, n);
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    const std::vector<int> perm = rng.permutation(n);
    for (int s = 0; s + bs <= n; s += bs) {
      std::vector<int> bidx(static_cast<std::size_t>(bs));
      for (int i = 0; i < bs; ++i)
        bidx[static_cast<std::size_t>(i)] =
            train_idx[static_cast<std::size_t>(perm[static_cast<std::size_t>(s + i)])];
      std::vector<int> labels;
      const Tensor x = make_batch(data, bidx, true, rng, &labels);
      opt.zero_grad();
      const Tensor logits = cls.forward(x, true, rng);
      const real ce = cross_entropy(logits, labels);
      require(std::isfinite(ce), "non-finite classifier loss");
      cls.backward(cross_entropy_backward(logits, labels));
      opt.step();
    }
    real acc = 0.0;
    const real val_ce = eval_split(val_idx, &acc);
    if (verbose) {
      std::printf("classifier epoch %3d  val ce %.4f acc %.4f\n", epoch,
                  val_ce, acc);
      std::fflush(stdout);
    }
    if (val_ce < best_ce) {
      best_ce = val_ce;
      best_acc = acc;
      since_best = 0;
      snap_params.clear();
      for (Parameter* p : cls.parameters()) snap_params.push_back(p->value);
      snap_buffers.clear();
      for (Tensor* t : cls.buffers()) snap_buffers.push_back(*t);
    } else if (++since_best >= patience) {
      break;
    }
  }
  const std::vector<Parameter*> ps = cls.parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = snap_params[i];
  const std::vector<Tensor*> bs_ = cls.buffers();
  for (std::size_t i = 0; i < bs_.size(); ++i) *bs_[i] = snap_buffers[i];
  return best_acc;
}

// -------------------------------------------------------------- checkpoint

namespace {

constexpr char kCkptMagic[4] = {'T', 'C', 'K', 'P'};
constexpr std::uint8_t kCkptVersion = 1;

json metrics_to_json(const EvalMetrics& v) {
  return json{{"total", v.total}, {"bpp", v.bpp},           {"mse", v.mse},
              {"ce", v.ce},       {"accuracy", v.accuracy}, {"count", v.count}};
}

EvalMetrics metrics_from_json(const json& j) {
  EvalMetrics v;
  v.total = j.at("total").get<real>();
  v.bpp = j.at("bpp").get<real>();
  v.mse = j.at("mse").get<real>();
  v.ce = j.at("ce").get<real>();
  v.accuracy = j.at("accuracy").get<real>();
  v.count = j.at("count").get<int>();
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, JointModel& m,
                     const CheckpointMeta& meta) {
  json j;
  const CodecConfig& cc = m.codec.config();
  j["codec"] = {{"channels_n", cc.channels_n},
                {"channels_m", cc.channels_m},
                {"channels_hyper", cc.channels_hyper},
                {"activation", cc.activation}};
  const ClassifierConfig& cl = m.classifier.config();
  j["classifier"] = {{"arch", cl.arch},
                     {"num_classes", cl.num_classes},
                     {"dropout", cl.dropout}};
  j["strategy"] = to_string(meta.strategy);
  j["weights"] = {{"alpha", meta.weights.alpha},
                  {"beta", meta.weights.beta},
                  {"gamma", meta.weights.gamma}};
  j["seed"] = meta.seed;
  j["epoch"] = meta.epoch;
  j["metrics"] = metrics_to_json(meta.val);
  json params = json::array();
  for (Parameter* p : m.checkpoint_parameters())
    params.push_back({{"name", p->name}, {"shape", p->value.shape()}});
  j["params"] = std::move(params);
  json buffers = json::array();
  for (Tensor* t : m.buffers()) buffers.push_back(t->shape());
  j["buffers"] = std::move(buffers);

  const std::string js = j.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "cannot write checkpoint: " + path);
  out.write(kCkptMagic, 4);
  out.put(static_cast<char>(kCkptVersion));
  const std::uint32_t len = static_cast<std::uint32_t>(js.size());
  char lenb[4];  // little-endian, like the weight blob
  for (int i = 0; i < 4; ++i)
    lenb[i] = static_cast<char>((len >> (8 * i)) & 0xFF);
  out.write(lenb, 4);
  out.write(js.data(), static_cast<std::streamsize>(js.size()));
  // Raw doubles; this and the reader both assume a little-endian host.
  for (Parameter* p : m.checkpoint_parameters())
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(real)));
  for (Tensor* t : m.buffers())
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->numel() * sizeof(real)));
  require(out.good(), "checkpoint write failed: " + path);
}

JointModel load_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.gcount() == 4 && std::memcmp(magic, kCkptMagic, 4) == 0,
          "not a checkpoint file: " + path);
  const int version = in.get();
  require(version == kCkptVersion,
          "unsupported checkpoint version " + std::to_string(version));
  char lenb[4];
  in.read(lenb, 4);
  require(in.gcount() == 4, "truncated checkpoint header");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i)
    len |= static_cast<std::uint32_t>(static_cast<unsigned char>(lenb[i]))
           << (8 * i);
  std::string js(len, '\0');
  in.read(js.data(), static_cast<std::streamsize>(len));
  require(in.gcount() == static_cast<std::streamsize>(len),
          "truncated checkpoint metadata");

  json j;
  try {
    j = json::parse(js);
  } catch (const std::exception& e) {
    fail(std::string("corrupt checkpoint metadata: ") + e.what());
  }

  CheckpointMeta meta;
  try {
    const json& jc = j.at("codec");
    meta.codec.channels_n = jc.at("channels_n").get<int>();
    meta.codec.channels_m = jc.at("channels_m").get<int>();
    meta.codec.channels_hyper = jc.at("channels_hyper").get<int>();
    meta.codec.activation = jc.at("activation").get<std::string>();
    const json& jl = j.at("classifier");
    meta.classifier.arch = jl.at("arch").get<std::string>();
    meta.classifier.num_classes = jl.at("num_classes").get<int>();
    meta.classifier.dropout = jl.at("dropout").get<real>();
    meta.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    meta.weights.alpha = j.at("weights").at("alpha").get<real>();
    meta.weights.beta = j.at("weights").at("beta").get<real>();
    meta.weights.gamma = j.at("weights").at("gamma").get<real>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.epoch = j.at("epoch").get<int>();
    meta.val = metrics_from_json(j.at("metrics"));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(std::string("corrupt checkpoint metadata: ") + e.what());
  }

  JointModel m(meta.codec, meta.classifier, meta.seed);
  const std::vector<Parameter*> ps = m.checkpoint_parameters();
  const json& jp = j.at("params");
  require(jp.size() == ps.size(), "checkpoint parameter manifest mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    require(jp[i].at("name").get<std::string>() == ps[i]->name,
            "checkpoint parameter order mismatch at " + ps[i]->name);
    require(jp[i].at("shape").get<std::vector<int>>() ==
                ps[i]->value.shape(),
            "checkpoint shape mismatch at " + ps[i]->name);
    in.read(reinterpret_cast<char*>(ps[i]->value.data()),
            static_cast<std::streamsize>(ps[i]->value.numel() * sizeof(real)));
    require(in.gcount() == static_cast<std::streamsize>(
                               ps[i]->value.numel() * sizeof(real)),
            "truncated checkpoint weights at " + ps[i]->name);
  }
  const std::vector<Tensor*> bs = m.buffers();
  const json& jb = j.at("buffers");
  require(jb.size() == bs.size(), "checkpoint buffer manifest mismatch");
  for (std::size_t i = 0; i < bs.size(); ++i) {
    require(jb[i].get<std::vector<int>>() == bs[i]->shape(),
            "checkpoint buffer shape mismatch");
    in.read(reinterpret_cast<char*>(bs[i]->data()),
            static_cast<std::streamsize>(bs[i]->numel() * sizeof(real)));
    require(in.gcount() == static_cast<std::streamsize>(bs[i]->numel() *
                                                        sizeof(real)),
            "truncated checkpoint buffers");
  }
  in.peek();
  require(in.eof(), "checkpoint has trailing bytes");
  if (meta_out != nullptr) *meta_out = meta;
  return m;
}

}  // namespace tcdc
