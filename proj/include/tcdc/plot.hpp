#pragma once

#include <string>
#include <vector>

#include "tcdc/evaluation.hpp"

namespace tcdc {

struct PlotOptions {
  std::string title = "Rate-accuracy";
  // Dashed horizontal reference line (fraction in [0,1]); negative disables.
  real baseline_top1 = -1.0;
  bool log_x = true;
  int width = 860;
  int height = 540;
};

// Self-contained SVG chart: one polyline with markers per curve, axes with
// tick labels, a legend, and an optional dashed baseline. Deterministic
// output for identical inputs.
void write_rate_accuracy_svg(const std::string& path,
                             const std::vector<RateAccuracyCurve>& curves,
                             const PlotOptions& opt = {});

}  // namespace tcdc
