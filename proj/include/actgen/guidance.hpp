#pragma once

#include <deque>
#include <map>
#include <vector>

#include "actgen/classifier.hpp"
#include "actgen/denoiser.hpp"
#include "actgen/diffusion.hpp"
#include "actgen/rng.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

enum class MaskMode { attention, ground_truth, none };

/// All generation-steering knobs in one place.
struct GuidanceConfig {
  double s = 15.0;        // classifier-free guidance scale
  double i = 12.5;        // image-guidance strength: sigmoid center in timestep units
  double lambda = 1.0;    // balance between contrastive and adversarial losses
  double rho = 200.0;     // contrastive margin
  int n_cap = 1024;       // max bank entries per loss evaluation
  double nu = 0.1;        // embedding learning rate (step length after normalization)
  int grad_window = 10;   // number of initial denoising steps with gradient guidance
  MaskMode mask_mode = MaskMode::attention;
  bool adversarial = false;  // include the adversarial loss term
  bool repel_form = false;   // use x + gamma (x - x_guide) instead of interpolation

  void validate(int T) const;
};

/// Per-class FIFO store of flattened latents from completed generations.
/// Single writer, many readers: insert needs exclusive access, sample shared.
class MemoryBank {
 public:
  explicit MemoryBank(int capacity_per_class = 4096);

  void insert(int class_id, const Tensor& latent);
  /// Uniform sample without replacement, at most min(n_cap, stored) entries.
  std::vector<const Tensor*> sample(int class_id, int n_cap, RngState& rng) const;
  int size(int class_id) const;
  int capacity_per_class() const { return capacity_; }

  // resumable-state access
  const std::map<int, std::deque<Tensor>>& store() const { return store_; }
  void restore(int class_id, Tensor latent);

 private:
  int capacity_;
  std::map<int, std::deque<Tensor>> store_;
};

struct AttentionMask {
  Tensor m;  // (1,H,W), entries in [0,1]
};

/// Timestep-dependent guidance weight 1/(1+e^{t-i}): 0.5 at t = i, near 0 for
/// t >> i (early denoising), near 1 for t << i (late denoising).
double gamma_schedule(double t, double i);

/// Guide-side latent for the current step, sharing the step's Gaussian draw:
/// x_guide_{t-1} = x0_guide / sqrt(alpha_t) + sigma_t z.
Tensor guide_target(const Tensor& x0_guide, int t, const Tensor& z, const NoiseSchedule& sched);

/// Interpolation toward the guide: x + gamma (x_guide - x), gamma in [0,1].
Tensor apply_image_guidance(const Tensor& x_prev, const Tensor& x_guide_prev, double gamma);

/// As apply_image_guidance but masked per pixel: x + m o gamma (x_guide - x).
/// Pixels with m = 0 are untouched.
Tensor apply_attentive_guidance(const Tensor& x_prev, const Tensor& x_guide_prev, double gamma,
                                const AttentionMask& mask);

/// Variant that pushes away from the guide: x + gamma (x - x_guide), masked.
Tensor apply_attentive_guidance_repel(const Tensor& x_prev, const Tensor& x_guide_prev,
                                      double gamma, const AttentionMask& mask);

/// attention: min-max normalize the map then soft-threshold
/// clamp((a-0.3)/0.4, 0, 1); near-constant maps (max-min < 1e-9) degrade to
/// all ones. ground_truth: pass the dataset mask through. none: all ones.
AttentionMask extract_mask(const Tensor& attn, MaskMode mode, const Tensor* gt_mask = nullptr);

/// Hinge repulsion from stored latents: mean_i max(rho - ||x - B_i||, 0).
/// Differentiable w.r.t. x; zero for an empty entry list.
ad::Value contrastive_loss(ad::Tape& tape, ad::Value x,
                           const std::vector<const Tensor*>& bank_entries, double rho);
double contrastive_loss_value(const Tensor& x, const std::vector<const Tensor*>& bank_entries,
                              double rho);

/// x0 estimate as a tape op in eps_hat (x_t and schedule coefficients enter
/// as constants).
ad::Value x0_estimate_taped(ad::Tape& tape, const LatentState& state, ad::Value eps_hat,
                            const NoiseSchedule& sched);

/// Negative cross-entropy of the classifier on the decoded latent:
/// -CE(classifier(x0_estimate(x_t, eps_hat)), y). Always <= 0; differentiable
/// through eps_hat.
ad::Value adversarial_loss(ad::Tape& tape, const LatentState& state, ad::Value eps_hat,
                           const NoiseSchedule& sched, const ClassifierParams& classifier, int y);

struct EmbeddingUpdate {
  bool skipped = false;  // gradient norm below 1e-12; counted, not an error
};

/// c <- c - nu g/||g||: a step of exact length nu along the normalized
/// gradient. Near-zero gradients skip the update and report it.
EmbeddingUpdate update_embedding(ConditionEmbedding& cond, const Tensor& grad, double nu);

/// Few-shot confidence-to-guidance map L/(1+e^{k(f-u)}) + p, strictly
/// decreasing in f.
double confidence_to_guidance(double f, double L, double k, double p, double u);

struct StepEvent {
  int step = 0;  // timestep t being denoised
  double gamma = 0.0;
  double mask_mean = 0.0;
  double l_contra = 0.0;
  double l_adv = 0.0;
  double grad_norm = 0.0;
  bool skipped_update = false;
};

struct GenerationResult {
  Tensor image;
  std::vector<StepEvent> events;
};

/// One guided generation. Per step: (a) gamma-weighted, mask-restricted pull
/// toward the guide built from the shared z; (b) inside the initial
/// grad_window steps, L = L_contra + lambda L_adv is backpropagated to the
/// condition embedding, which then steers all later steps. The finished
/// image's flattened latent is inserted into the bank.
///
/// rng is forked internally ("sample" for the reverse process, "bank" for
/// bank sampling), so a run with all interventions disabled consumes the same
/// stream as plain_generate with the same rng.
GenerationResult guided_generate(const DenoiserParams& denoiser, const ClassifierParams* classifier,
                                 const Tensor& guide_image, int y, const GuidanceConfig& cfg,
                                 MemoryBank& bank, const NoiseSchedule& sched, RngState& rng,
                                 const Tensor* gt_mask = nullptr);

/// Plain conditional sampling with the same stream discipline as
/// guided_generate (the random-generation baseline arm).
Tensor plain_generate(const DenoiserParams& denoiser, int y, double s, const NoiseSchedule& sched,
                      RngState& rng);

}  // namespace actgen
