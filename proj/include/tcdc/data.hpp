#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/image_io.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

// CSV-backed dataset description: `path,label` rows relative to root.
struct DatasetManifest {
  std::string root;
  std::vector<std::string> paths;
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(paths.size()); }
};

// Reads and validates a manifest CSV (header `path,label`): labels within
// [0, num_classes), files present, no duplicate paths.
DatasetManifest load_manifest(const std::string& csv_path, int num_classes);
void save_manifest(const std::string& csv_path, const DatasetManifest& m);

struct SplitIndices {
  std::vector<int> train, val, test;
};

// Deterministic shuffled split; fractions must leave every requested split
// nonempty.
SplitIndices split_dataset(int n, real train_frac, real val_frac,
                           std::uint64_t seed);

// Fully decoded dataset held in memory, every image resized to target_size.
struct Dataset {
  int h = 0, w = 0;
  int num_classes = 0;
  std::vector<ImageU8> images;
  std::vector<int> labels;

  int size() const { return static_cast<int>(images.size()); }
};

Dataset load_dataset(const DatasetManifest& m, int target_size);

// [0,1] CHW tensor; train mode applies a seeded horizontal flip with
// probability 1/2, eval mode is deterministic.
Tensor preprocess(const ImageU8& img, bool train_mode, Rng& rng);

// Stacks dataset rows into a (B,3,H,W) batch (optionally reporting labels).
Tensor make_batch(const Dataset& data, const std::vector<int>& indices,
                  bool train_mode, Rng& rng, std::vector<int>* labels_out);

// Procedural face-like classes for desk-scale experiments: per-class mouth
// curvature/width, eye openness, and brow angle, with per-image jitter,
// color variation, and noise. Writes PNGs plus manifest.csv under out_dir.
// Deterministic in (seed); supports 2..8 classes.
DatasetManifest generate_synthetic_dataset(int n_per_class, int num_classes,
                                           int size, std::uint64_t seed,
                                           const std::string& out_dir);

}  // namespace tcdc
