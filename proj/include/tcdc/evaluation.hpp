#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/coder.hpp"
#include "tcdc/data.hpp"
#include "tcdc/train.hpp"

namespace tcdc {

// One measured point on a rate-accuracy curve. bpp comes from real
// bitstream byte counts, never from the entropy estimate.
struct RatePoint {
  real bpp = 0.0;
  real top1 = 0.0;  // fraction in [0, 1]
  std::string checkpoint;
  std::string strategy;
};

struct RateAccuracyCurve {
  std::string label;
  std::vector<RatePoint> points;  // strictly increasing bpp
};

// Finite values, bpp > 0 strictly increasing, top1 in [0,1], and at least
// min_points entries.
void validate_curve(const RateAccuracyCurve& curve, int min_points = 4);

RateAccuracyCurve load_curve(const std::string& path);
void save_curve(const std::string& path, const RateAccuracyCurve& curve);

// Shape-preserving piecewise cubic Hermite interpolant: harmonic-mean
// Fritsch-Carlson slopes at interior knots (zeroed across sign changes and
// flats), one-sided three-point estimates clamped for shape at the ends.
// Defined only inside the knot range; evaluation and integration never
// extrapolate.
class Pchip {
 public:
  Pchip(std::vector<real> x, std::vector<real> y);

  real operator()(real t) const;
  real integral(real lo, real hi) const;

  real slope(int k) const { return m_[static_cast<std::size_t>(k)]; }
  real x_front() const { return x_.front(); }
  real x_back() const { return x_.back(); }

 private:
  // Antiderivative over [x_[k], x_[k] + u*h_k] in segment-local units.
  real segment_area(int k, real u) const;

  std::vector<real> x_, y_, m_;
};

// Least-squares nondecreasing fit (pool adjacent violators, unit weights).
// Already-monotone input comes back unchanged.
std::vector<real> isotonic_nondecreasing(const std::vector<real>& y);

enum class BdMode { accuracy, rate };

// One mode per call: accuracy mode fills bd_accuracy and an overlap interval
// in log10(bpp); rate mode fills bd_rate and an overlap interval in accuracy
// percentage points. `adjusted` reports whether rate mode had to
// monotone-regularize a curve before inverting it.
struct BDResult {
  real bd_accuracy = 0.0;  // percentage points
  real bd_rate = 0.0;      // percent
  real overlap_lo = 0.0;
  real overlap_hi = 0.0;
  bool adjusted = false;
};

// accuracy mode: mean gap of interpolated accuracy (percentage points,
// test minus reference) over the overlapping log10(bpp) range.
// rate mode: curves are inverted to log10(bpp) as a function of accuracy --
// after isotonic regularization when a curve dips, with exact ties collapsed
// to their cheapest rate -- and the mean log-rate gap Delta over the
// overlapping accuracy range maps to 100*(10^Delta - 1) percent.
// Insufficient overlap is an error in both modes.
BDResult bd_metric(const RateAccuracyCurve& reference,
                   const RateAccuracyCurve& test, BdMode mode);

// Compresses every selected image through the range coder, decodes, and
// classifies the reconstruction in eval mode. bpp is the mean of measured
// payload bits per pixel; stream_bytes counts whole containers.
struct ModelEval {
  RatePoint point;
  real mse = 0.0;
  std::int64_t payload_bits = 0;
  std::int64_t stream_bytes = 0;
  std::vector<real> estimate_bits;  // entropy-model estimate per image
  std::vector<std::int64_t> measured_bits;  // payload per image
};

ModelEval evaluate_model(JointModel& m, const Dataset& data,
                         const std::vector<int>& indices,
                         const GaussianContexts& gauss, const PriorTables& zt,
                         const std::string& checkpoint_id = "",
                         const std::string& strategy_tag = "");

// The same classifier applied to decoded reconstructions and to the raw
// preprocessed images, in one pass over the selected rows.
struct CrossDomainEval {
  real top1_compressed = 0.0;
  real top1_uncompressed = 0.0;
  real bpp = 0.0;
};

CrossDomainEval cross_domain_eval(JointModel& m, const Dataset& data,
                                  const std::vector<int>& indices,
                                  const GaussianContexts& gauss,
                                  const PriorTables& zt);

// Writes each selected image once plus one reconstruction per model, with a
// JSON sidecar recording the measured bpp and MSE per reconstruction.
// Coding tables are built per model, so the sidecar numbers match what
// evaluate_model reports for the same checkpoint. Returns the count of
// image files written (models * images + images).
struct ReconDump {
  int files_written = 0;
  std::string manifest_path;
};

ReconDump dump_reconstructions(const std::vector<JointModel*>& models,
                               const std::vector<std::string>& tags,
                               const Dataset& data,
                               const std::vector<int>& indices,
                               const std::string& out_dir);

// One row of a loss-weight ablation: the trained-and-evaluated outcome for
// a single value, or the error that interrupted that value's run.
struct AblationRow {
  real value = 0.0;
  real bpp = 0.0;
  real top1 = 0.0;
  real mse = 0.0;
  bool ok = false;
  std::string error;
};

// Adjusts one loss weight ("alpha", "beta", "gamma") over >= 3 values while
// keeping the others at `base`, training one model per value (optionally
// warm-started) and evaluating it on eval_idx through the real coder.
// A failed value is recorded with its message and the sweep continues.
std::vector<AblationRow> ablation_sweep(
    const std::string& weight, const std::vector<real>& values,
    Strategy strategy, const LossWeights& base, const CodecConfig& codec_cfg,
    const ClassifierConfig& cls_cfg, const OptimizerConfig& opt,
    const Dataset& data, const std::vector<int>& train_idx,
    const std::vector<int>& val_idx, const std::vector<int>& eval_idx,
    std::uint64_t seed, JointModel* warm_start = nullptr);

}  // namespace tcdc
