#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tcdc/layers.hpp"
#include "tcdc/tensor.hpp"

namespace tcdc {

struct ClassifierConfig {
  std::string arch = "resnet8_toy";  // or "resnet18"
  int num_classes = 8;
  real dropout = 0.1;

  void validate() const;
};

// Standard two-conv residual block; the shortcut is a strided 1x1
// conv + norm whenever the shape changes.
class ResidualBlock {
 public:
  ResidualBlock(const std::string& name, int in_c, int out_c, int stride,
                Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& dy);
  void params(std::vector<Parameter*>& out);
  void buffers(std::vector<Tensor*>& out);

 private:
  Conv2d conv1_;
  BatchNorm2d bn1_;
  Relu relu1_;
  Conv2d conv2_;
  BatchNorm2d bn2_;
  std::unique_ptr<Conv2d> down_conv_;
  std::unique_ptr<BatchNorm2d> down_bn_;
  Relu relu_out_;
};

// Residual classifier over decoded images. Two sizes of the same design:
// resnet8_toy is a 16/32/64 three-stage net for small inputs, resnet18 the
// usual 4-stage/2-block layout. Inputs are (B,3,H,W) with H,W >= 32.
class Classifier {
 public:
  Classifier(const ClassifierConfig& cfg, Rng& rng);

  // Logits (B, num_classes). Training mode drives batch-norm statistics and
  // dropout; eval mode is deterministic and leaves all state untouched.
  Tensor forward(const Tensor& x, bool training, Rng& rng);
  Tensor backward(const Tensor& dlogits);

  std::vector<Parameter*> parameters();
  // Non-trainable state (batch-norm running statistics), for checkpoints.
  std::vector<Tensor*> buffers();
  void set_trainable(bool trainable);
  const ClassifierConfig& config() const { return cfg_; }

 private:
  ClassifierConfig cfg_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  Relu stem_relu_;
  std::unique_ptr<MaxPool2d> stem_pool_;  // resnet18 only
  std::vector<std::unique_ptr<ResidualBlock>> blocks_;
  GlobalAvgPool gap_;
  Dropout dropout_;
  Linear fc_;
};

// Mean natural-log cross entropy of logits (B,C) against integer labels.
real cross_entropy(const Tensor& logits, const std::vector<int>& labels);
// d(mean CE)/dlogits = (softmax - onehot) / B.
Tensor cross_entropy_backward(const Tensor& logits,
                              const std::vector<int>& labels);

// Top-1 predictions; ties resolve to the lowest class index.
std::vector<int> classify(const Tensor& logits);
real top1_accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace tcdc
