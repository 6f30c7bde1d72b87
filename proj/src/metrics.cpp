#include "tcdc/metrics.hpp"

#include <fstream>

#include <json.hpp>

#include "tcdc/tensor.hpp"

namespace tcdc {

using nlohmann::json;

void MetricsLog::append(const MetricsRecord& rec) const {
  json j{{"run_id", rec.run_id},
         {"checkpoint", rec.checkpoint},
         {"strategy", rec.strategy},
         {"bpp", rec.bpp},
         {"top1", rec.top1},
         {"alpha", rec.weights.alpha},
         {"beta", rec.weights.beta},
         {"gamma", rec.weights.gamma},
         {"seed", rec.seed},
         {"payload_bits", rec.payload_bits},
         {"stream_bytes", rec.stream_bytes},
         {"config_hash", rec.config_hash}};
  std::ofstream out(path_, std::ios::app);
  require(out.good(), "cannot open metrics log " + path_);
  out << j.dump() << "\n";
  require(out.good(), "short write on metrics log " + path_);
}

std::vector<MetricsRecord> MetricsLog::read(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open metrics log " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    require(j.is_object(), "metrics log " + path + ": bad record at line " +
                               std::to_string(lineno));
    MetricsRecord r;
    r.run_id = j.value("run_id", "");
    r.checkpoint = j.value("checkpoint", "");
    r.strategy = j.value("strategy", "");
    r.bpp = j.value("bpp", 0.0);
    r.top1 = j.value("top1", 0.0);
    r.weights.alpha = j.value("alpha", 0.0);
    r.weights.beta = j.value("beta", 0.0);
    r.weights.gamma = j.value("gamma", 0.0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.payload_bits = j.value("payload_bits", std::int64_t{0});
    r.stream_bytes = j.value("stream_bytes", std::int64_t{0});
    r.config_hash = j.value("config_hash", "");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tcdc
