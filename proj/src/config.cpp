#include "tcdc/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

namespace tcdc {

using nlohmann::json;

void DatasetSpec::validate() const {
  require(num_classes >= 2 && num_classes <= 8,
          "dataset.num_classes must be within [2, 8]");
  require(image_size >= 64 && image_size % 64 == 0,
          "dataset.image_size must be a positive multiple of 64");
  require(synthetic_per_class >= 1, "dataset.synthetic_per_class must be >= 1");
  require(train_frac > 0.0 && val_frac > 0.0 &&
              train_frac + val_frac < 1.0,
          "dataset split fractions must be positive and leave a test share");
}

void ExperimentConfig::validate() const {
  require(!run_id.empty(), "run_id must not be empty");
  require(!output_dir.empty(), "output_dir must not be empty");
  dataset.validate();
  codec.validate();
  classifier.validate();
  optimizer.validate();
  weights.validate();
  require(classifier.num_classes == dataset.num_classes,
          "classifier.num_classes must match dataset.num_classes");
  for (real a : alpha_sweep) {
    require(std::isfinite(a) && a > 0.0, "alpha_sweep values must be > 0");
  }
}

namespace {

void reject_unknown(const json& j, const char* scope,
                    std::initializer_list<const char*> known) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok |= item.key() == k;
    require(ok, std::string("unknown config key '") + scope + item.key() + "'");
  }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  require(j.is_object(), "config must be a JSON object");

  reject_unknown(j, "",
                 {"run_id", "dataset", "codec", "classifier", "optimizer",
                  "weights", "alpha_sweep", "strategy", "seed", "output_dir"});

  ExperimentConfig cfg;
  maybe(j, "run_id", cfg.run_id);
  maybe(j, "seed", cfg.seed);
  maybe(j, "output_dir", cfg.output_dir);
  if (j.contains("strategy")) {
    cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  }
  if (j.contains("alpha_sweep")) {
    cfg.alpha_sweep = j.at("alpha_sweep").get<std::vector<real>>();
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, "dataset.",
                   {"manifest", "num_classes", "image_size",
                    "synthetic_per_class", "synthetic_seed", "train_frac",
                    "val_frac"});
    maybe(d, "manifest", cfg.dataset.manifest);
    maybe(d, "num_classes", cfg.dataset.num_classes);
    maybe(d, "image_size", cfg.dataset.image_size);
    maybe(d, "synthetic_per_class", cfg.dataset.synthetic_per_class);
    maybe(d, "synthetic_seed", cfg.dataset.synthetic_seed);
    maybe(d, "train_frac", cfg.dataset.train_frac);
    maybe(d, "val_frac", cfg.dataset.val_frac);
    // the classifier head follows the dataset unless set explicitly
    if (!j.contains("classifier")) {
      cfg.classifier.num_classes = cfg.dataset.num_classes;
    }
  }
  if (j.contains("codec")) {
    const json& c = j.at("codec");
    reject_unknown(c, "codec.",
                   {"channels_n", "channels_m", "channels_hyper", "activation"});
    maybe(c, "channels_n", cfg.codec.channels_n);
    maybe(c, "channels_m", cfg.codec.channels_m);
    maybe(c, "channels_hyper", cfg.codec.channels_hyper);
    maybe(c, "activation", cfg.codec.activation);
  }
  if (j.contains("classifier")) {
    const json& c = j.at("classifier");
    reject_unknown(c, "classifier.", {"arch", "num_classes", "dropout"});
    maybe(c, "arch", cfg.classifier.arch);
    cfg.classifier.num_classes = cfg.dataset.num_classes;
    maybe(c, "num_classes", cfg.classifier.num_classes);
    maybe(c, "dropout", cfg.classifier.dropout);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, "optimizer.",
                   {"lr", "weight_decay", "aux_lr", "batch_size", "grad_clip",
                    "max_epochs", "patience"});
    maybe(o, "lr", cfg.optimizer.lr);
    maybe(o, "weight_decay", cfg.optimizer.weight_decay);
    maybe(o, "aux_lr", cfg.optimizer.aux_lr);
    maybe(o, "batch_size", cfg.optimizer.batch_size);
    maybe(o, "grad_clip", cfg.optimizer.grad_clip);
    maybe(o, "max_epochs", cfg.optimizer.max_epochs);
    maybe(o, "patience", cfg.optimizer.patience);
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, "weights.", {"alpha", "beta", "gamma"});
    maybe(w, "alpha", cfg.weights.alpha);
    maybe(w, "beta", cfg.weights.beta);
    maybe(w, "gamma", cfg.weights.gamma);
  }

  cfg.validate();
  return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j{
      {"run_id", cfg.run_id},
      {"dataset",
       {{"manifest", cfg.dataset.manifest},
        {"num_classes", cfg.dataset.num_classes},
        {"image_size", cfg.dataset.image_size},
        {"synthetic_per_class", cfg.dataset.synthetic_per_class},
        {"synthetic_seed", cfg.dataset.synthetic_seed},
        {"train_frac", cfg.dataset.train_frac},
        {"val_frac", cfg.dataset.val_frac}}},
      {"codec",
       {{"channels_n", cfg.codec.channels_n},
        {"channels_m", cfg.codec.channels_m},
        {"channels_hyper", cfg.codec.channels_hyper},
        {"activation", cfg.codec.activation}}},
      {"classifier",
       {{"arch", cfg.classifier.arch},
        {"num_classes", cfg.classifier.num_classes},
        {"dropout", cfg.classifier.dropout}}},
      {"optimizer",
       {{"lr", cfg.optimizer.lr},
        {"weight_decay", cfg.optimizer.weight_decay},
        {"aux_lr", cfg.optimizer.aux_lr},
        {"batch_size", cfg.optimizer.batch_size},
        {"grad_clip", cfg.optimizer.grad_clip},
        {"max_epochs", cfg.optimizer.max_epochs},
        {"patience", cfg.optimizer.patience}}},
      {"weights",
       {{"alpha", cfg.weights.alpha},
        {"beta", cfg.weights.beta},
        {"gamma", cfg.weights.gamma}}},
      {"alpha_sweep", cfg.alpha_sweep},
      {"strategy", to_string(cfg.strategy)},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
  };
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ExperimentConfig cfg = config_from_json_text(text);
  if (const char* dir = std::getenv("TCDC_OUTPUT_DIR"); dir && *dir) {
    cfg.output_dir = dir;
  }
  return cfg;
}

void save_config(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream out(path);
  require(out.good(), "cannot write config " + path);
  out << config_to_json_text(cfg);
  require(out.good(), "short write on config " + path);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json_text(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

int env_thread_override() {
  const char* t = std::getenv("TCDC_THREADS");
  if (!t || !*t) return 0;
  char* end = nullptr;
  const long v = std::strtol(t, &end, 10);
  require(end && *end == '\0' && v > 0 && v <= 1024,
          "TCDC_THREADS must be a positive integer");
  return static_cast<int>(v);
}

}  // namespace tcdc
