#include "tcdc/classifier.hpp"

#include <cmath>

namespace tcdc {

namespace {

using i64 = std::int64_t;

}  // namespace

void ClassifierConfig::validate() const {
  require(arch == "resnet8_toy" || arch == "resnet18",
          "unknown classifier arch: " + arch);
  require(num_classes >= 2, "classifier needs at least two classes");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

// ----------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(const std::string& name, int in_c, int out_c,
                             int stride, Rng& rng)
    : conv1_(name + ".conv1", in_c, out_c, 3, stride, 1, rng),
      bn1_(name + ".bn1", out_c),
      conv2_(name + ".conv2", out_c, out_c, 3, 1, 1, rng),
      bn2_(name + ".bn2", out_c) {
  if (stride != 1 || in_c != out_c) {
    down_conv_ = std::make_unique<Conv2d>(name + ".down", in_c, out_c, 1,
                                          stride, 0, rng);
    down_bn_ = std::make_unique<BatchNorm2d>(name + ".down_bn", out_c);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
  Tensor t = bn1_.forward(conv1_.forward(x), training);
  t = relu1_.forward(t);
  t = bn2_.forward(conv2_.forward(t), training);
  Tensor shortcut = down_conv_
                        ? down_bn_->forward(down_conv_->forward(x), training)
                        : x;
  require(t.same_shape(shortcut), "residual branch shape mismatch");
  t.add_scaled(shortcut, 1.0);
  return relu_out_.forward(t);
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  Tensor d = relu_out_.backward(dy);
  Tensor dmain = conv2_.backward(bn2_.backward(d));
  dmain = relu1_.backward(dmain);
  Tensor dx = conv1_.backward(bn1_.backward(dmain));
  if (down_conv_) {
    Tensor dsc = down_conv_->backward(down_bn_->backward(d));
    dx.add_scaled(dsc, 1.0);
  } else {
    dx.add_scaled(d, 1.0);
  }
  return dx;
}

void ResidualBlock::params(std::vector<Parameter*>& out) {
  conv1_.params(out);
  bn1_.params(out);
  conv2_.params(out);
  bn2_.params(out);
  if (down_conv_) {
    down_conv_->params(out);
    down_bn_->params(out);
  }
}

void ResidualBlock::buffers(std::vector<Tensor*>& out) {
  out.push_back(&bn1_.running_mean);
  out.push_back(&bn1_.running_var);
  out.push_back(&bn2_.running_mean);
  out.push_back(&bn2_.running_var);
  if (down_bn_) {
    out.push_back(&down_bn_->running_mean);
    out.push_back(&down_bn_->running_var);
  }
}

// -------------------------------------------------------------- Classifier

namespace {

// (width, blocks, first-stride) rows per stage for each arch.
struct StageSpec {
  int width;
  int blocks;
  int stride;
};

std::vector<StageSpec> stages_for(const std::string& arch) {
  if (arch == "resnet8_toy")
    return {{16, 1, 1}, {32, 1, 2}, {64, 1, 2}};
  return {{64, 2, 1}, {128, 2, 2}, {256, 2, 2}, {512, 2, 2}};
}

int stem_width(const std::string& arch) {
  return arch == "resnet8_toy" ? 16 : 64;
}

ClassifierConfig validated(ClassifierConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Classifier::Classifier(const ClassifierConfig& cfg, Rng& rng)
    : cfg_(validated(cfg)),
      stem_("cls.stem", 3, stem_width(cfg_.arch),
            cfg_.arch == "resnet8_toy" ? 3 : 7, 2,
            cfg_.arch == "resnet8_toy" ? 1 : 3, rng),
      stem_bn_("cls.stem_bn", stem_width(cfg_.arch)),
      dropout_(cfg_.dropout),
      fc_("cls.fc", stages_for(cfg_.arch).back().width, cfg_.num_classes,
          rng) {
  if (cfg_.arch == "resnet18")
    stem_pool_ = std::make_unique<MaxPool2d>(3, 2, 1);
  int in_c = stem_width(cfg_.arch);
  int stage_idx = 0;
  for (const StageSpec& st : stages_for(cfg_.arch)) {
    for (int b = 0; b < st.blocks; ++b) {
      const std::string name = "cls.s" + std::to_string(stage_idx) + ".b" +
                               std::to_string(b);
      blocks_.push_back(std::make_unique<ResidualBlock>(
          name, in_c, st.width, b == 0 ? st.stride : 1, rng));
      in_c = st.width;
    }
    ++stage_idx;
  }
}

Tensor Classifier::forward(const Tensor& x, bool training, Rng& rng) {
  require(x.ndim() == 4 && x.dim(1) == 3, "classifier expects (B,3,H,W)");
  require(x.dim(2) >= 32 && x.dim(3) >= 32,
          "classifier input must be at least 32x32");
  Tensor t = stem_relu_.forward(stem_bn_.forward(stem_.forward(x), training));
  if (stem_pool_) t = stem_pool_->forward(t);
  for (auto& blk : blocks_) t = blk->forward(t, training);
  t = gap_.forward(t);
  t = dropout_.forward(t, training, rng);
  return fc_.forward(t);
}

Tensor Classifier::backward(const Tensor& dlogits) {
  Tensor d = fc_.backward(dlogits);
  d = dropout_.backward(d);
  d = gap_.backward(d);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it)
    d = (*it)->backward(d);
  if (stem_pool_) d = stem_pool_->backward(d);
  d = stem_bn_.backward(stem_relu_.backward(d));
  return stem_.backward(d);
}

std::vector<Parameter*> Classifier::parameters() {
  std::vector<Parameter*> out;
  stem_.params(out);
  stem_bn_.params(out);
  for (auto& blk : blocks_) blk->params(out);
  fc_.params(out);
  return out;
}

std::vector<Tensor*> Classifier::buffers() {
  std::vector<Tensor*> out;
  out.push_back(&stem_bn_.running_mean);
  out.push_back(&stem_bn_.running_var);
  for (auto& blk : blocks_) blk->buffers(out);
  return out;
}

void Classifier::set_trainable(bool trainable) {
  for (Parameter* p : parameters()) p->trainable = trainable;
}

// ------------------------------------------------------------------ losses

real cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.ndim() == 2, "cross_entropy expects (B,C) logits");
  const int bsz = logits.dim(0), c = logits.dim(1);
  require(static_cast<int>(labels.size()) == bsz,
          "labels do not match the batch");
  real total = 0.0;
  for (int b = 0; b < bsz; ++b) {
    require(labels[static_cast<size_t>(b)] >= 0 &&
                labels[static_cast<size_t>(b)] < c,
            "label out of range");
    real m = logits.at(b, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, logits.at(b, j));
    real lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(logits.at(b, j) - m);
    total += m + std::log(lse) - logits.at(b, labels[static_cast<size_t>(b)]);
  }
  return total / bsz;
}

Tensor cross_entropy_backward(const Tensor& logits,
                              const std::vector<int>& labels) {
  const int bsz = logits.dim(0), c = logits.dim(1);
  Tensor d(logits.shape());
  for (int b = 0; b < bsz; ++b) {
    real m = logits.at(b, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, logits.at(b, j));
    real z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(logits.at(b, j) - m);
    for (int j = 0; j < c; ++j)
      d.at(b, j) = std::exp(logits.at(b, j) - m) / z / bsz;
    d.at(b, labels[static_cast<size_t>(b)]) -= 1.0 / bsz;
  }
  return d;
}

std::vector<int> classify(const Tensor& logits) {
  require(logits.ndim() == 2, "classify expects (B,C) logits");
  const int bsz = logits.dim(0), c = logits.dim(1);
  std::vector<int> pred(static_cast<size_t>(bsz));
  for (int b = 0; b < bsz; ++b) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (logits.at(b, j) > logits.at(b, best)) best = j;
    pred[static_cast<size_t>(b)] = best;
  }
  return pred;
}

real top1_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::vector<int> pred = classify(logits);
  require(pred.size() == labels.size(), "labels do not match the batch");
  i64 hits = 0;
  for (size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == labels[i]) ++hits;
  return static_cast<real>(hits) / static_cast<real>(pred.size());
}

}  // namespace tcdc
