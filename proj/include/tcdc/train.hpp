#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcdc/classifier.hpp"
#include "tcdc/codec.hpp"
#include "tcdc/data.hpp"
#include "tcdc/entropy.hpp"
#include "tcdc/losses.hpp"
#include "tcdc/optim.hpp"

namespace tcdc {

// compression_only: the classifier is frozen and acts purely as a task-loss
// supervisor for the codec. joint: codec and classifier train together.
enum class Strategy { compression_only, joint };

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

struct OptimizerConfig {
  real lr = 3e-5;
  real weight_decay = 1e-2;
  real aux_lr = 3e-5;
  int batch_size = 16;
  real grad_clip = 0.1;
  int max_epochs = 30;
  int patience = 5;

  void validate() const;
};

// The complete trainable system: codec transforms, hyper-latent prior, and
// the downstream classifier.
struct JointModel {
  JointModel(const CodecConfig& codec_cfg, const ClassifierConfig& cls_cfg,
             std::uint64_t seed);

  CodecModel codec;
  FactorizedPrior prior;
  Classifier classifier;
  std::uint64_t init_seed;

  // Everything the main optimizer owns (codec, prior network, classifier).
  std::vector<Parameter*> main_parameters();
  // main_parameters plus the prior quantiles; the full persisted state
  // together with buffers().
  std::vector<Parameter*> checkpoint_parameters();
  // Batch-norm running statistics.
  std::vector<Tensor*> buffers();

  void apply_strategy(Strategy s);
};

// Copies parameter values and buffers; shapes must already agree.
void copy_state(JointModel& src, JointModel& dst);

// One pass of the training graph. The backward reuses layer caches, so it
// must directly follow its forward on the same model.
struct ForwardResult {
  Tensor y, z, z_hat, y_hat, x_hat;
  GaussianParams gp;
  Tensor p_y, p_z;
  Tensor logits;
  GaussianConditional gc;  // holds the likelihood caches for the backward
  bool training_pass = false;

  real bits = 0.0;
  real bpp = 0.0;
  real mse = 0.0;
  real ce = 0.0;
  real total = 0.0;
};

// training=true: additive-noise quantization, unclamped reconstruction, the
// classifier sees gradients (and train-mode statistics only under joint).
// training=false: round/round-to-offset quantization, clamped reconstruction,
// eval-mode classifier. The classifier pass is skipped when labels are empty
// or when training with gamma == 0.
ForwardResult joint_forward(JointModel& m, const Tensor& x,
                            const std::vector<int>& labels,
                            const LossWeights& w, Strategy strategy,
                            bool training, Rng& rng);

// Accumulates parameter gradients for d(total)/d(params).
void joint_backward(JointModel& m, const Tensor& x,
                    const std::vector<int>& labels, const LossWeights& w,
                    Strategy strategy, ForwardResult& fr);

struct StepResult {
  real total = 0.0;
  real bpp = 0.0;
  real mse = 0.0;
  real ce = 0.0;
  real grad_norm = 0.0;  // pre-clip norm of the trainable gradients
  real aux = 0.0;
};

// zero grads -> forward -> backward -> clip -> main step -> aux step.
// Aborts (throws) on a non-finite loss with a component breakdown.
StepResult train_step(JointModel& m, Adam& opt, Adam& aux_opt, const Tensor& x,
                      const std::vector<int>& labels, const LossWeights& w,
                      Strategy strategy, real grad_clip, Rng& rng);

struct EvalMetrics {
  real total = 0.0;
  real bpp = 0.0;
  real mse = 0.0;
  real ce = 0.0;
  real accuracy = 0.0;
  int count = 0;
};

// Deterministic eval-mode pass over `indices` in batches.
EvalMetrics validate(JointModel& m, const Dataset& data,
                     const std::vector<int>& indices, const LossWeights& w,
                     int batch_size);

struct EpochLog {
  int epoch = 0;
  real train_total = 0.0;
  EvalMetrics val;
};

struct FitResult {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  EvalMetrics best_val;
};

// Full training loop: shuffled minibatches, per-epoch validation, early
// stopping on validation total loss, restore of the best epoch's state.
FitResult fit(JointModel& m, const Dataset& data,
              const std::vector<int>& train_idx,
              const std::vector<int>& val_idx, const LossWeights& w,
              Strategy strategy, const OptimizerConfig& cfg,
              std::uint64_t seed, bool verbose = false);

// Supervised pretraining of the classifier on raw images (no codec in the
// loop). Early-stops on validation cross entropy, restores the best state,
// and returns its validation accuracy.
real fit_classifier(Classifier& cls, const Dataset& data,
                    const std::vector<int>& train_idx,
                    const std::vector<int>& val_idx, real lr, int batch_size,
                    int max_epochs, int patience, std::uint64_t seed,
                    bool verbose = false);

struct CheckpointMeta {
  CodecConfig codec;
  ClassifierConfig classifier;
  Strategy strategy = Strategy::joint;
  LossWeights weights;
  std::uint64_t seed = 0;
  int epoch = 0;
  EvalMetrics val;
};

// Container: "TCKP", version byte, JSON metadata (configs + tensor
// manifest), then raw little-endian doubles for every checkpoint parameter
// and buffer in enumeration order.
void save_checkpoint(const std::string& path, JointModel& m,
                     const CheckpointMeta& meta);
JointModel load_checkpoint(const std::string& path,
                           CheckpointMeta* meta_out = nullptr);

}  // namespace tcdc
