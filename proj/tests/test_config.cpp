#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "tcdc/config.hpp"

using namespace tcdc;
namespace fs = std::filesystem;

namespace {

// setenv/unsetenv with automatic restore so tests can't leak into each other.
struct EnvGuard {
  std::string name;
  std::string saved;
  bool had = false;

  EnvGuard(const std::string& n, const char* value) : name(n) {
    if (const char* old = std::getenv(name.c_str())) {
      saved = old;
      had = true;
    }
    if (value) {
      ::setenv(name.c_str(), value, 1);
    } else {
      ::unsetenv(name.c_str());
    }
  }
  ~EnvGuard() {
    if (had) {
      ::setenv(name.c_str(), saved.c_str(), 1);
    } else {
      ::unsetenv(name.c_str());
    }
  }
};

const char* kFullConfig = R"({
  "run_id": "ablation_a",
  "dataset": {
    "manifest": "data/faces.json",
    "num_classes": 7,
    "image_size": 128,
    "synthetic_per_class": 50,
    "synthetic_seed": 99,
    "train_frac": 0.7,
    "val_frac": 0.15
  },
  "codec": {
    "channels_n": 16,
    "channels_m": 24,
    "channels_hyper": 12,
    "activation": "relu"
  },
  "classifier": {
    "arch": "resnet18",
    "num_classes": 7,
    "dropout": 0.2
  },
  "optimizer": {
    "lr": 1e-4,
    "weight_decay": 0.005,
    "aux_lr": 2e-4,
    "batch_size": 8,
    "grad_clip": 0.5,
    "max_epochs": 12,
    "patience": 3
  },
  "weights": {"alpha": 0.09, "beta": 1000.0, "gamma": 0.5},
  "alpha_sweep": [0.18, 0.09, 0.045],
  "strategy": "joint",
  "seed": 31337,
  "output_dir": "out/ablation"
})";

}  // namespace

TEST_CASE("empty json gives the documented defaults") {
  const ExperimentConfig cfg = config_from_json_text("{}");
  CHECK(cfg.run_id == "run");
  CHECK(cfg.output_dir == "runs");
  CHECK(cfg.seed == 1);
  CHECK(cfg.strategy == Strategy::compression_only);
  CHECK(cfg.alpha_sweep.empty());

  CHECK(cfg.dataset.manifest.empty());
  CHECK(cfg.dataset.num_classes == 5);
  CHECK(cfg.dataset.image_size == 64);
  CHECK(cfg.dataset.train_frac == doctest::Approx(0.8));

  CHECK(cfg.codec.channels_n == 32);
  CHECK(cfg.codec.channels_m == 48);
  CHECK(cfg.codec.channels_hyper == 24);
  CHECK(cfg.codec.activation == "gdn");

  CHECK(cfg.classifier.arch == "resnet8_toy");
  CHECK(cfg.classifier.num_classes == 5);
  CHECK(cfg.classifier.dropout == doctest::Approx(0.1));

  CHECK(cfg.weights.alpha == doctest::Approx(0.18));
  CHECK(cfg.weights.beta == doctest::Approx(255.0 * 255.0));
  CHECK(cfg.weights.gamma == doctest::Approx(1.0));

  // defaults must themselves be a valid experiment
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("full config parses every field") {
  const ExperimentConfig cfg = config_from_json_text(kFullConfig);
  CHECK(cfg.run_id == "ablation_a");
  CHECK(cfg.dataset.manifest == "data/faces.json");
  CHECK(cfg.dataset.num_classes == 7);
  CHECK(cfg.dataset.image_size == 128);
  CHECK(cfg.dataset.synthetic_per_class == 50);
  CHECK(cfg.dataset.synthetic_seed == 99);
  CHECK(cfg.dataset.train_frac == doctest::Approx(0.7));
  CHECK(cfg.dataset.val_frac == doctest::Approx(0.15));
  CHECK(cfg.codec.channels_n == 16);
  CHECK(cfg.codec.channels_m == 24);
  CHECK(cfg.codec.channels_hyper == 12);
  CHECK(cfg.codec.activation == "relu");
  CHECK(cfg.classifier.arch == "resnet18");
  CHECK(cfg.classifier.num_classes == 7);
  CHECK(cfg.classifier.dropout == doctest::Approx(0.2));
  CHECK(cfg.optimizer.lr == doctest::Approx(1e-4));
  CHECK(cfg.optimizer.weight_decay == doctest::Approx(0.005));
  CHECK(cfg.optimizer.aux_lr == doctest::Approx(2e-4));
  CHECK(cfg.optimizer.batch_size == 8);
  CHECK(cfg.optimizer.grad_clip == doctest::Approx(0.5));
  CHECK(cfg.optimizer.max_epochs == 12);
  CHECK(cfg.optimizer.patience == 3);
  CHECK(cfg.weights.alpha == doctest::Approx(0.09));
  CHECK(cfg.weights.beta == doctest::Approx(1000.0));
  CHECK(cfg.weights.gamma == doctest::Approx(0.5));
  REQUIRE(cfg.alpha_sweep.size() == 3);
  CHECK(cfg.alpha_sweep[1] == doctest::Approx(0.09));
  CHECK(cfg.strategy == Strategy::joint);
  CHECK(cfg.seed == 31337);
  CHECK(cfg.output_dir == "out/ablation");
}

TEST_CASE("serialization round-trips and is canonical") {
  const ExperimentConfig cfg = config_from_json_text(kFullConfig);
  const std::string text = config_to_json_text(cfg);
  const ExperimentConfig back = config_from_json_text(text);

  CHECK(back.run_id == cfg.run_id);
  CHECK(back.dataset.manifest == cfg.dataset.manifest);
  CHECK(back.dataset.num_classes == cfg.dataset.num_classes);
  CHECK(back.dataset.synthetic_seed == cfg.dataset.synthetic_seed);
  CHECK(back.dataset.train_frac == cfg.dataset.train_frac);
  CHECK(back.dataset.val_frac == cfg.dataset.val_frac);
  CHECK(back.codec.channels_n == cfg.codec.channels_n);
  CHECK(back.codec.activation == cfg.codec.activation);
  CHECK(back.classifier.arch == cfg.classifier.arch);
  CHECK(back.classifier.dropout == cfg.classifier.dropout);
  CHECK(back.optimizer.lr == cfg.optimizer.lr);
  CHECK(back.optimizer.batch_size == cfg.optimizer.batch_size);
  CHECK(back.weights.beta == cfg.weights.beta);
  CHECK(back.alpha_sweep == cfg.alpha_sweep);
  CHECK(back.strategy == cfg.strategy);
  CHECK(back.seed == cfg.seed);
  CHECK(back.output_dir == cfg.output_dir);

  // parse(serialize(x)) must be a fixed point of the canonical text
  CHECK(config_to_json_text(back) == text);
}

TEST_CASE("save and load through a file") {
  const std::string path =
      (fs::temp_directory_path() / "tcdc_config_test.json").string();
  const ExperimentConfig cfg = config_from_json_text(kFullConfig);
  save_config(path, cfg);
  const ExperimentConfig back = load_config(path);
  CHECK(back.run_id == cfg.run_id);
  CHECK(back.seed == cfg.seed);
  CHECK(config_to_json_text(back) == config_to_json_text(cfg));
  fs::remove(path);

  CHECK_THROWS_AS(load_config(path), Error);  // file is gone now
}

TEST_CASE("TCDC_OUTPUT_DIR overrides only the loaded output_dir") {
  const std::string path =
      (fs::temp_directory_path() / "tcdc_config_env.json").string();
  save_config(path, config_from_json_text(kFullConfig));

  {
    EnvGuard guard("TCDC_OUTPUT_DIR", "/tmp/elsewhere");
    CHECK(load_config(path).output_dir == "/tmp/elsewhere");
    // the override applies on load, not on parse
    CHECK(config_from_json_text(kFullConfig).output_dir == "out/ablation");
  }
  {
    EnvGuard guard("TCDC_OUTPUT_DIR", "");
    CHECK(load_config(path).output_dir == "out/ablation");
  }
  {
    EnvGuard guard("TCDC_OUTPUT_DIR", nullptr);
    CHECK(load_config(path).output_dir == "out/ablation");
  }
  fs::remove(path);
}

TEST_CASE("unknown keys are rejected with their scoped name") {
  auto message_of = [](const std::string& text) {
    try {
      config_from_json_text(text);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };

  CHECK(message_of(R"({"run_idd": "x"})").find("'run_idd'") !=
        std::string::npos);
  CHECK(message_of(R"({"dataset": {"imge_size": 64}})")
            .find("'dataset.imge_size'") != std::string::npos);
  CHECK(message_of(R"({"codec": {"channels": 32}})")
            .find("'codec.channels'") != std::string::npos);
  CHECK(message_of(R"({"classifier": {"architecture": "resnet18"}})")
            .find("'classifier.architecture'") != std::string::npos);
  CHECK(message_of(R"({"optimizer": {"learning_rate": 0.001}})")
            .find("'optimizer.learning_rate'") != std::string::npos);
  CHECK(message_of(R"({"weights": {"delta": 1.0}})")
            .find("'weights.delta'") != std::string::npos);
}

TEST_CASE("malformed documents are rejected") {
  CHECK_THROWS_AS(config_from_json_text("[1, 2]"), Error);
  CHECK_THROWS_AS(config_from_json_text("not json"), Error);
  CHECK_THROWS_AS(config_from_json_text(""), Error);
}

TEST_CASE("validation failures") {
  CHECK_THROWS_AS(config_from_json_text(R"({"run_id": ""})"), Error);
  CHECK_THROWS_AS(
      config_from_json_text(R"({"dataset": {"num_classes": 1}})"), Error);
  CHECK_THROWS_AS(
      config_from_json_text(R"({"dataset": {"num_classes": 9}})"), Error);
  CHECK_THROWS_AS(
      config_from_json_text(R"({"dataset": {"image_size": 65}})"), Error);
  CHECK_THROWS_AS(
      config_from_json_text(R"({"dataset": {"synthetic_per_class": 0}})"),
      Error);
  // split fractions must leave a test share
  CHECK_THROWS_AS(config_from_json_text(
                      R"({"dataset": {"train_frac": 0.9, "val_frac": 0.1}})"),
                  Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"alpha_sweep": [0.18, 0.0]})"),
                  Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"alpha_sweep": [-0.1]})"), Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"strategy": "bogus"})"), Error);
  CHECK_THROWS_AS(
      config_from_json_text(R"({"optimizer": {"batch_size": 0}})"), Error);
  // classifier head must match the dataset's class count
  CHECK_THROWS_AS(
      config_from_json_text(
          R"({"dataset": {"num_classes": 4}, "classifier": {"num_classes": 5}})"),
      Error);
}

TEST_CASE("classifier head follows the dataset class count") {
  const ExperimentConfig a =
      config_from_json_text(R"({"dataset": {"num_classes": 3}})");
  CHECK(a.classifier.num_classes == 3);

  // an explicit classifier block without num_classes still follows
  const ExperimentConfig b = config_from_json_text(
      R"({"dataset": {"num_classes": 3}, "classifier": {"dropout": 0.0}})");
  CHECK(b.classifier.num_classes == 3);
  CHECK(b.classifier.dropout == doctest::Approx(0.0));

  // matching explicit value is fine
  const ExperimentConfig c = config_from_json_text(
      R"({"dataset": {"num_classes": 3}, "classifier": {"num_classes": 3}})");
  CHECK(c.classifier.num_classes == 3);
}

TEST_CASE("config_hash is stable, hex, and sensitive") {
  const ExperimentConfig cfg = config_from_json_text(kFullConfig);
  const std::string h = config_hash(cfg);
  REQUIRE(h.size() == 16);
  for (char ch : h) {
    CHECK(std::isxdigit(static_cast<unsigned char>(ch)));
  }
  CHECK(config_hash(cfg) == h);
  CHECK(config_hash(config_from_json_text(config_to_json_text(cfg))) == h);

  ExperimentConfig other = cfg;
  other.seed += 1;
  CHECK(config_hash(other) != h);
  other = cfg;
  other.weights.alpha = 0.045;
  CHECK(config_hash(other) != h);
}

TEST_CASE("TCDC_THREADS override parses and validates") {
  {
    EnvGuard guard("TCDC_THREADS", nullptr);
    CHECK(env_thread_override() == 0);
  }
  {
    EnvGuard guard("TCDC_THREADS", "");
    CHECK(env_thread_override() == 0);
  }
  {
    EnvGuard guard("TCDC_THREADS", "8");
    CHECK(env_thread_override() == 8);
  }
  {
    EnvGuard guard("TCDC_THREADS", "1");
    CHECK(env_thread_override() == 1);
  }
  for (const char* bad : {"abc", "0", "-2", "8 ", "3.5", "1025"}) {
    EnvGuard guard("TCDC_THREADS", bad);
    CHECK_THROWS_AS(env_thread_override(), Error);
  }
}
