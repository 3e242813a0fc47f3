#include "actgen/guidance.hpp"

#include <algorithm>
#include <cmath>

namespace actgen {

void GuidanceConfig::validate(int T) const {
  detail::require(s >= 0.0, "guidance: s must be >= 0");
  detail::require(lambda >= 0.0, "guidance: lambda must be >= 0");
  detail::require(rho > 0.0, "guidance: rho must be > 0");
  detail::require(n_cap >= 1, "guidance: n_cap must be >= 1");
  detail::require(nu >= 0.0, "guidance: nu must be >= 0");
  detail::require(grad_window >= 0 && grad_window <= T,
                  "guidance: grad_window outside [0," + std::to_string(T) + "]");
}

MemoryBank::MemoryBank(int capacity_per_class) : capacity_(capacity_per_class) {
  detail::require(capacity_per_class >= 1, "memory bank: capacity must be >= 1");
}

void MemoryBank::insert(int class_id, const Tensor& latent) {
  detail::require(latent.all_finite(), "memory bank: refusing non-finite latent");
  std::deque<Tensor>& q = store_[class_id];
  Tensor flat({static_cast<int>(latent.data.size())}, latent.data);
  q.push_back(std::move(flat));
  while (static_cast<int>(q.size()) > capacity_) q.pop_front();
}

void MemoryBank::restore(int class_id, Tensor latent) { store_[class_id].push_back(std::move(latent)); }

std::vector<const Tensor*> MemoryBank::sample(int class_id, int n_cap, RngState& rng) const {
  std::vector<const Tensor*> out;
  auto it = store_.find(class_id);
  if (it == store_.end() || it->second.empty()) return out;
  const std::deque<Tensor>& q = it->second;
  const int n = static_cast<int>(q.size());
  const int k = std::min(n_cap, n);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // partial Fisher-Yates: first k entries are a uniform sample w/o replacement
  for (int i = 0; i < k; ++i)
    std::swap(idx[i], idx[i + static_cast<int>(rng.next_u64() % (n - i))]);
  out.reserve(k);
  for (int i = 0; i < k; ++i) out.push_back(&q[idx[i]]);
  return out;
}

int MemoryBank::size(int class_id) const {
  auto it = store_.find(class_id);
  return it == store_.end() ? 0 : static_cast<int>(it->second.size());
}

double gamma_schedule(double t, double i) {
  // 1 - e^{t-i}/(1+e^{t-i}) == 1/(1+e^{t-i}), evaluated on the stable side
  const double d = t - i;
  if (d >= 0.0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

Tensor guide_target(const Tensor& x0_guide, int t, const Tensor& z, const NoiseSchedule& sched) {
  detail::require(t >= 1 && t <= sched.T, "guide_target: timestep out of range");
  detail::require(x0_guide.same_shape(z), "guide_target: shape mismatch " +
                                              shape_str(x0_guide.shape) + " vs " +
                                              shape_str(z.shape));
  const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
  const double sig = sched.sigma[t];
  Tensor r = x0_guide;
  for (size_t j = 0; j < r.data.size(); ++j) r.data[j] = inv_sqrt_a * r.data[j] + sig * z.data[j];
  return r;
}

Tensor apply_image_guidance(const Tensor& x_prev, const Tensor& x_guide_prev, double gamma) {
  detail::require(x_prev.same_shape(x_guide_prev),
                  "apply_image_guidance: shape mismatch " + shape_str(x_prev.shape) + " vs " +
                      shape_str(x_guide_prev.shape));
  detail::require(gamma >= 0.0 && gamma <= 1.0,
                  "apply_image_guidance: gamma " + std::to_string(gamma) + " outside [0,1]");
  Tensor r = x_prev;
  for (size_t j = 0; j < r.data.size(); ++j)
    r.data[j] += gamma * (x_guide_prev.data[j] - r.data[j]);
  return r;
}

namespace {

void check_mask(const Tensor& x, const AttentionMask& mask, const char* op) {
  detail::require(mask.m.shape.size() == 3 && mask.m.shape[0] == 1 && x.shape.size() == 3 &&
                      mask.m.shape[1] == x.shape[1] && mask.m.shape[2] == x.shape[2],
                  std::string(op) + ": mask " + shape_str(mask.m.shape) +
                      " does not fit latent " + shape_str(x.shape));
}

Tensor masked_shift(const Tensor& x, const Tensor& xg, double gamma, const AttentionMask& mask,
                    double sign) {
  const int C = x.shape[0];
  const std::int64_t hw = static_cast<std::int64_t>(x.shape[1]) * x.shape[2];
  Tensor r = x;
  for (int c = 0; c < C; ++c)
    for (std::int64_t j = 0; j < hw; ++j) {
      const std::int64_t id = c * hw + j;
      r.data[id] += mask.m.data[j] * gamma * sign * (xg.data[id] - x.data[id]);
    }
  return r;
}

}  // namespace

Tensor apply_attentive_guidance(const Tensor& x_prev, const Tensor& x_guide_prev, double gamma,
                                const AttentionMask& mask) {
  detail::require(x_prev.same_shape(x_guide_prev),
                  "apply_attentive_guidance: shape mismatch " + shape_str(x_prev.shape) + " vs " +
                      shape_str(x_guide_prev.shape));
  detail::require(gamma >= 0.0 && gamma <= 1.0,
                  "apply_attentive_guidance: gamma " + std::to_string(gamma) + " outside [0,1]");
  check_mask(x_prev, mask, "apply_attentive_guidance");
  return masked_shift(x_prev, x_guide_prev, gamma, mask, 1.0);
}

Tensor apply_attentive_guidance_repel(const Tensor& x_prev, const Tensor& x_guide_prev,
                                      double gamma, const AttentionMask& mask) {
  detail::require(x_prev.same_shape(x_guide_prev),
                  "apply_attentive_guidance_repel: shape mismatch " + shape_str(x_prev.shape) +
                      " vs " + shape_str(x_guide_prev.shape));
  check_mask(x_prev, mask, "apply_attentive_guidance_repel");
  return masked_shift(x_prev, x_guide_prev, gamma, mask, -1.0);
}

AttentionMask extract_mask(const Tensor& attn, MaskMode mode, const Tensor* gt_mask) {
  if (mode == MaskMode::none) {
    detail::require(attn.shape.size() == 3, "extract_mask: attn must be (1,H,W)");
    return {Tensor::full(attn.shape, 1.0)};
  }
  if (mode == MaskMode::ground_truth) {
    detail::require(gt_mask != nullptr, "extract_mask: ground_truth mode without a mask");
    return {*gt_mask};
  }
  detail::require(attn.shape.size() == 3 && attn.shape[0] == 1,
                  "extract_mask: attn must be (1,H,W), got " + shape_str(attn.shape));
  double lo = attn.data[0], hi = attn.data[0];
  for (double v : attn.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-9) return {Tensor::full(attn.shape, 1.0)};  // degenerate map
  Tensor m = attn;
  const double inv = 1.0 / (hi - lo);
  for (auto& v : m.data) {
    const double a = (v - lo) * inv;
    v = std::clamp((a - 0.3) / 0.4, 0.0, 1.0);
  }
  return {std::move(m)};
}

ad::Value contrastive_loss(ad::Tape& tape, ad::Value x,
                           const std::vector<const Tensor*>& bank_entries, double rho) {
  if (bank_entries.empty()) return tape.leaf(Tensor::scalar(0.0), false);
  ad::Value acc;
  for (size_t i = 0; i < bank_entries.size(); ++i) {
    detail::require(bank_entries[i]->numel() == tape.val(x).numel(),
                    "contrastive_loss: bank entry length " +
                        std::to_string(bank_entries[i]->numel()) + " vs latent " +
                        std::to_string(tape.val(x).numel()));
    ad::Value d = ad::l2_dist(tape, x, *bank_entries[i]);
    ad::Value hinge = ad::relu(tape, ad::affine(tape, d, -1.0, rho));  // max(rho - d, 0)
    acc = i == 0 ? hinge : ad::add(tape, acc, hinge);
  }
  return ad::affine(tape, acc, 1.0 / static_cast<double>(bank_entries.size()));
}

double contrastive_loss_value(const Tensor& x, const std::vector<const Tensor*>& bank_entries,
                              double rho) {
  ad::Tape tape;
  Tensor flat({static_cast<int>(x.data.size())}, x.data);
  return tape.val(contrastive_loss(tape, tape.leaf(flat), bank_entries, rho)).item();
}

ad::Value x0_estimate_taped(ad::Tape& tape, const LatentState& state, ad::Value eps_hat,
                            const NoiseSchedule& sched) {
  detail::require(state.t >= 1 && state.t <= sched.T, "x0_estimate_taped: timestep out of range");
  const double ab = sched.alpha_bar[state.t];
  detail::require(ab > 0.0, "x0_estimate_taped: alpha_bar is zero");
  const double inv = 1.0 / std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  // (x_t - b eps) / sqrt(ab) = -b/sqrt(ab) eps + x_t/sqrt(ab)
  ad::Value scaled = ad::affine(tape, eps_hat, -b * inv);
  return ad::add_const(tape, scaled, ops::scale(state.x, inv));
}

ad::Value adversarial_loss(ad::Tape& tape, const LatentState& state, ad::Value eps_hat,
                           const NoiseSchedule& sched, const ClassifierParams& classifier, int y) {
  detail::require(y >= 0 && y < classifier.cfg.num_classes,
                  "adversarial_loss: label " + std::to_string(y) + " out of range");
  ad::Value decoded = x0_estimate_taped(tape, state, eps_hat, sched);
  ClassifierLeaves cl = classifier_leaves(tape, classifier, false);
  ad::Value logits = classifier_forward(tape, classifier.cfg, cl, decoded);
  ad::Value ce = ad::cross_entropy(tape, logits, y);
  return ad::affine(tape, ce, -1.0);
}

EmbeddingUpdate update_embedding(ConditionEmbedding& cond, const Tensor& grad, double nu) {
  detail::require(grad.same_shape(cond.vec), "update_embedding: grad shape " +
                                                 shape_str(grad.shape) + " vs embedding " +
                                                 shape_str(cond.vec.shape));
  const double norm = ops::l2_norm(grad);
  if (norm < 1e-12) return {true};
  const double k = nu / norm;
  for (size_t i = 0; i < cond.vec.data.size(); ++i) cond.vec.data[i] -= k * grad.data[i];
  return {false};
}

double confidence_to_guidance(double f, double L, double k, double p, double u) {
  return L / (1.0 + std::exp(k * (f - u))) + p;
}

GenerationResult guided_generate(const DenoiserParams& denoiser, const ClassifierParams* classifier,
                                 const Tensor& guide_image, int y, const GuidanceConfig& cfg,
                                 MemoryBank& bank, const NoiseSchedule& sched, RngState& rng,
                                 const Tensor* gt_mask) {
  cfg.validate(sched.T);
  detail::require(guide_image.shape == denoiser.cfg.image_shape(),
                  "guided_generate: guide shape " + shape_str(guide_image.shape) +
                      " does not match model " + shape_str(denoiser.cfg.image_shape()));
  detail::require(!cfg.adversarial || classifier != nullptr,
                  "guided_generate: adversarial guidance needs a classifier");

  RngState rng_sample = rng.fork("sample");
  RngState rng_bank = rng.fork("bank");

  GenerationResult result;
  ConditionEmbedding cond = embed_class(denoiser, y);
  const ConditionEmbedding uncond = embed_class(denoiser, std::nullopt);

  StepHook hook = [&](const StepContext& ctx, Tensor& x_prev, ConditionEmbedding& c) {
    StepEvent ev;
    ev.step = ctx.t;
    ev.gamma = gamma_schedule(ctx.t, cfg.i);

    const AttentionMask mask =
        extract_mask(ctx.attn, cfg.mask_mode, cfg.mask_mode == MaskMode::ground_truth ? gt_mask
                                                                                      : nullptr);
    ev.mask_mean = ops::mean(mask.m);
    const Tensor xg = guide_target(guide_image, ctx.t, ctx.z, sched);
    x_prev = cfg.repel_form ? apply_attentive_guidance_repel(x_prev, xg, ev.gamma, mask)
                            : apply_attentive_guidance(x_prev, xg, ev.gamma, mask);

    if (ctx.step_index < cfg.grad_window) {
      // one gradient-descent step on the condition embedding; takes effect
      // from the next denoising step on
      ad::Tape tape;
      DenoiserLeaves dl = denoiser_leaves(tape, denoiser, false);
      ad::Value cvec = tape.leaf(c.vec, true);
      DenoiserOut out = denoiser_forward(tape, denoiser.cfg, dl, tape.leaf(ctx.x_t), cvec, ctx.t);
      // eps_hat = (1-s) eps_uncond + s eps_cond with eps_uncond constant
      ad::Value eps_hat = ad::add_const(tape, ad::affine(tape, out.eps, cfg.s),
                                        ops::scale(ctx.eps_uncond, 1.0 - cfg.s));
      const LatentState here{ctx.x_t, ctx.t};
      ad::Value x0hat = x0_estimate_taped(tape, here, eps_hat, sched);
      ad::Value x0flat =
          ad::reshape(tape, x0hat, {static_cast<int>(tape.val(x0hat).numel())});

      const auto entries = bank.sample(y, cfg.n_cap, rng_bank);
      ad::Value loss = contrastive_loss(tape, x0flat, entries, cfg.rho);
      ev.l_contra = tape.val(loss).item();
      if (cfg.adversarial) {
        ad::Value ladv = adversarial_loss(tape, here, eps_hat, sched, *classifier, y);
        ev.l_adv = tape.val(ladv).item();
        loss = ad::add(tape, loss, ad::affine(tape, ladv, cfg.lambda));
      }
      tape.backward(loss);
      const Tensor g = tape.grad(cvec);
      ev.grad_norm = ops::l2_norm(g);
      ev.skipped_update = update_embedding(c, g, cfg.nu).skipped;
    }
    result.events.push_back(ev);
  };

  result.image = sample(make_denoiser_fn(denoiser), cond, uncond, sched, cfg.s,
                        denoiser.cfg.image_shape(), rng_sample, hook);
  bank.insert(y, result.image);
  return result;
}

Tensor plain_generate(const DenoiserParams& denoiser, int y, double s, const NoiseSchedule& sched,
                      RngState& rng) {
  RngState rng_sample = rng.fork("sample");
  ConditionEmbedding cond = embed_class(denoiser, y);
  const ConditionEmbedding uncond = embed_class(denoiser, std::nullopt);
  return sample(make_denoiser_fn(denoiser), cond, uncond, sched, s, denoiser.cfg.image_shape(),
                rng_sample);
}

}  // namespace actgen
