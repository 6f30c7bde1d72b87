#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/classifier.hpp"
#include "tcdc/codec.hpp"
#include "tcdc/losses.hpp"
#include "tcdc/train.hpp"

namespace tcdc {

// Where the images come from: an existing manifest, or the procedural
// generator when `manifest` is empty.
struct DatasetSpec {
  std::string manifest;
  int num_classes = 5;
  int image_size = 64;
  int synthetic_per_class = 400;
  std::uint64_t synthetic_seed = 7;
  real train_frac = 0.8;
  real val_frac = 0.1;

  void validate() const;
};

// One experiment, fully described by a single JSON file. Unknown keys are
// rejected so typos fail loudly instead of silently running defaults.
struct ExperimentConfig {
  std::string run_id = "run";
  DatasetSpec dataset;
  CodecConfig codec{32, 48, 24, "gdn"};
  ClassifierConfig classifier{"resnet8_toy", 5, 0.1};
  OptimizerConfig optimizer;
  LossWeights weights{0.18, 255.0 * 255.0, 1.0};
  std::vector<real> alpha_sweep;  // optional grid for sweep/ablate runs
  Strategy strategy = Strategy::compression_only;
  std::uint64_t seed = 1;
  std::string output_dir = "runs";

  void validate() const;
};

// Load validates and applies the environment override TCDC_OUTPUT_DIR (the
// only settings the environment may change are the output directory and the
// thread count; see env_thread_override).
ExperimentConfig load_config(const std::string& path);
void save_config(const std::string& path, const ExperimentConfig& cfg);

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

// Stable 64-bit FNV-1a over the canonical serialization, as 16 hex digits.
// Identifies a config in the metrics log regardless of file formatting.
std::string config_hash(const ExperimentConfig& cfg);

// TCDC_THREADS when set (validated positive), else 0 for "leave as is".
int env_thread_override();

}  // namespace tcdc
