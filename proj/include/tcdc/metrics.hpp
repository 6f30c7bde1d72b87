#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/losses.hpp"

namespace tcdc {

// One evaluation outcome, serialized as a single JSON line. Every reported
// bpp stays traceable to the byte counts recorded next to it.
struct MetricsRecord {
  std::string run_id;
  std::string checkpoint;
  std::string strategy;
  real bpp = 0.0;
  real top1 = 0.0;
  LossWeights weights;
  std::uint64_t seed = 0;
  std::int64_t payload_bits = 0;
  std::int64_t stream_bytes = 0;
  std::string config_hash;
};

// Append-only JSON-lines log; one writer per run directory.
class MetricsLog {
 public:
  explicit MetricsLog(std::string path) : path_(std::move(path)) {}

  void append(const MetricsRecord& rec) const;
  const std::string& path() const { return path_; }

  static std::vector<MetricsRecord> read(const std::string& path);

 private:
  std::string path_;
};

}  // namespace tcdc
