#pragma once

#include <utility>
#include <vector>

#include "actgen/autodiff.hpp"
#include "actgen/optim.hpp"
#include "actgen/rng.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

struct ClassifierConfig {
  int channels = 1, height = 16, width = 16;
  int c1 = 12, c2 = 24;
  int num_classes = 4;

  std::vector<int> image_shape() const { return {channels, height, width}; }
};

/// Target model: two conv blocks, global average pooling, linear head.
struct ClassifierParams {
  ClassifierConfig cfg;
  Tensor conv1_w, conv1_b;  // (c1,C,3,3),(c1)
  Tensor conv2_w, conv2_b;  // (c2,c1,3,3),(c2)
  Tensor fc_w, fc_b;        // (num_classes,c2),(num_classes)

  std::vector<std::pair<const char*, Tensor*>> named_params();
  std::vector<std::pair<const char*, const Tensor*>> named_params() const;
};

ClassifierParams init_classifier(const ClassifierConfig& cfg, RngState& rng);

struct ClassifierLeaves {
  ad::Value conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
};

ClassifierLeaves classifier_leaves(ad::Tape& tape, const ClassifierParams& p, bool requires_grad);
std::vector<ad::Value> leaf_list(const ClassifierLeaves& l);

/// Logits on a tape; image may itself be a differentiable value (the
/// adversarial loss backpropagates through it).
ad::Value classifier_forward(ad::Tape& tape, const ClassifierConfig& cfg,
                             const ClassifierLeaves& l, ad::Value image);

/// Pure evaluation.
Tensor classifier_logits(const ClassifierParams& p, const Tensor& image);

struct SampleEval {
  int index;
  int label;
  int predicted;
  double confidence;  // softmax probability of the predicted class
};

struct EvalReport {
  double accuracy = 0.0;  // correct / total
  std::vector<SampleEval> per_sample;
};

/// Argmax prediction and confidence per sample. Pure; ties resolve to the
/// lowest class index.
EvalReport evaluate(const ClassifierParams& p, const std::vector<Tensor>& images,
                    const std::vector<int>& labels);

struct SelectionRule {
  enum class Kind { misclassified, confidence_below } kind = Kind::misclassified;
  double theta = 0.5;  // used by confidence_below; must lie in (0,1]
};

/// Hard-sample mining over an evaluation report. misclassified: predicted !=
/// label. confidence_below: confidence < theta (correctly classified
/// low-confidence samples included).
std::vector<int> find_hard_samples(const EvalReport& report, const SelectionRule& rule);

/// One pass of shuffled minibatch SGD on cross-entropy. Momentum state lives
/// with the caller so epochs chain (and resume) correctly. Returns the mean
/// per-sample CE loss of the epoch.
double train_classifier_epoch(ClassifierParams& p, SgdMomentum& opt,
                              const std::vector<Tensor>& images, const std::vector<int>& labels,
                              double lr, int batch, RngState& rng);

}  // namespace actgen
