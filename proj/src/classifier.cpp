#include "actgen/classifier.hpp"

#include <cmath>

namespace actgen {

namespace {
Tensor he_init(std::vector<int> shape, double fan_in, RngState& rng) {
  Tensor t = rng.gaussian_tensor(std::move(shape));
  const double s = std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v *= s;
  return t;
}
}  // namespace

std::vector<std::pair<const char*, Tensor*>> ClassifierParams::named_params() {
  return {{"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w},
          {"conv2_b", &conv2_b}, {"fc_w", &fc_w},       {"fc_b", &fc_b}};
}

std::vector<std::pair<const char*, const Tensor*>> ClassifierParams::named_params() const {
  auto mut = const_cast<ClassifierParams*>(this)->named_params();
  std::vector<std::pair<const char*, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [n, t] : mut) out.emplace_back(n, t);
  return out;
}

ClassifierParams init_classifier(const ClassifierConfig& cfg, RngState& rng) {
  detail::require(cfg.height % 2 == 0 && cfg.width % 2 == 0,
                  "init_classifier: image size must be even for pooling");
  ClassifierParams p;
  p.cfg = cfg;
  p.conv1_w = he_init({cfg.c1, cfg.channels, 3, 3}, 9.0 * cfg.channels, rng);
  p.conv1_b = Tensor::zeros({cfg.c1});
  p.conv2_w = he_init({cfg.c2, cfg.c1, 3, 3}, 9.0 * cfg.c1, rng);
  p.conv2_b = Tensor::zeros({cfg.c2});
  p.fc_w = he_init({cfg.num_classes, cfg.c2}, cfg.c2, rng);
  p.fc_b = Tensor::zeros({cfg.num_classes});
  return p;
}

ClassifierLeaves classifier_leaves(ad::Tape& tape, const ClassifierParams& p, bool rg) {
  ClassifierLeaves l;
  l.conv1_w = tape.leaf(p.conv1_w, rg);
  l.conv1_b = tape.leaf(p.conv1_b, rg);
  l.conv2_w = tape.leaf(p.conv2_w, rg);
  l.conv2_b = tape.leaf(p.conv2_b, rg);
  l.fc_w = tape.leaf(p.fc_w, rg);
  l.fc_b = tape.leaf(p.fc_b, rg);
  return l;
}

std::vector<ad::Value> leaf_list(const ClassifierLeaves& l) {
  return {l.conv1_w, l.conv1_b, l.conv2_w, l.conv2_b, l.fc_w, l.fc_b};
}

ad::Value classifier_forward(ad::Tape& tape, const ClassifierConfig& cfg,
                             const ClassifierLeaves& l, ad::Value image) {
  using namespace ad;
  detail::require(tape.val(image).shape == cfg.image_shape(),
                  "classifier_forward: image shape " + shape_str(tape.val(image).shape) +
                      " does not match model " + shape_str(cfg.image_shape()));
  Value h = relu(tape, conv2d(tape, image, l.conv1_w, l.conv1_b, 1));
  h = avgpool2(tape, h);
  h = relu(tape, conv2d(tape, h, l.conv2_w, l.conv2_b, 1));
  Value pooled = global_mean(tape, h);  // (c2)
  return linear(tape, l.fc_w, l.fc_b, pooled);
}

Tensor classifier_logits(const ClassifierParams& p, const Tensor& image) {
  ad::Tape tape;
  ClassifierLeaves l = classifier_leaves(tape, p, false);
  return tape.val(classifier_forward(tape, p.cfg, l, tape.leaf(image)));
}

EvalReport evaluate(const ClassifierParams& p, const std::vector<Tensor>& images,
                    const std::vector<int>& labels) {
  detail::require(images.size() == labels.size(), "evaluate: images/labels size mismatch");
  EvalReport r;
  r.per_sample.reserve(images.size());
  int correct = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    const Tensor probs = ops::softmax(classifier_logits(p, images[i]));
    int pred = 0;
    for (int c = 1; c < p.cfg.num_classes; ++c)
      if (probs.data[c] > probs.data[pred]) pred = c;
    if (pred == labels[i]) ++correct;
    r.per_sample.push_back({static_cast<int>(i), labels[i], pred, probs.data[pred]});
  }
  r.accuracy = images.empty() ? 0.0 : static_cast<double>(correct) / images.size();
  return r;
}

std::vector<int> find_hard_samples(const EvalReport& report, const SelectionRule& rule) {
  std::vector<int> out;
  if (rule.kind == SelectionRule::Kind::confidence_below)
    detail::require(rule.theta > 0.0 && rule.theta <= 1.0,
                    "find_hard_samples: theta " + std::to_string(rule.theta) + " outside (0,1]");
  for (const SampleEval& s : report.per_sample) {
    const bool hard = rule.kind == SelectionRule::Kind::misclassified
                          ? s.predicted != s.label
                          : s.confidence < rule.theta;
    if (hard) out.push_back(s.index);
  }
  return out;
}

double train_classifier_epoch(ClassifierParams& p, SgdMomentum& opt,
                              const std::vector<Tensor>& images, const std::vector<int>& labels,
                              double lr, int batch, RngState& rng) {
  detail::require(!images.empty(), "train_classifier_epoch: empty dataset");
  detail::require(images.size() == labels.size(),
                  "train_classifier_epoch: images/labels size mismatch");
  const size_t n = images.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);

  std::vector<Tensor*> param_ptrs;
  for (auto& [name, tp] : p.named_params()) param_ptrs.push_back(tp);

  double loss_sum = 0.0;
  for (size_t start = 0; start < n; start += batch) {
    const size_t b = std::min<size_t>(batch, n - start);
    ad::Tape tape;
    ClassifierLeaves l = classifier_leaves(tape, p, true);
    ad::Value batch_loss;
    for (size_t i = 0; i < b; ++i) {
      const size_t idx = order[start + i];
      ad::Value logits = classifier_forward(tape, p.cfg, l, tape.leaf(images[idx]));
      ad::Value ce = ad::cross_entropy(tape, logits, labels[idx]);
      batch_loss = i == 0 ? ce : ad::add(tape, batch_loss, ce);
    }
    batch_loss = ad::affine(tape, batch_loss, 1.0 / static_cast<double>(b));
    tape.backward(batch_loss);
    loss_sum += tape.val(batch_loss).item() * static_cast<double>(b);

    std::vector<Tensor> grads;
    for (ad::Value v : leaf_list(l)) grads.push_back(tape.grad(v));
    opt.step(param_ptrs, grads, lr);
  }
  return loss_sum / static_cast<double>(n);
}

}  // namespace actgen
