#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "actgen/autodiff.hpp"
#include "actgen/diffusion.hpp"
#include "actgen/rng.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

/// The condition vector steering the denoiser. Generations receive a fresh
/// mutable copy so gradient guidance can move it without touching the learned
/// table. null_flag marks the dedicated unconditional token.
struct ConditionEmbedding {
  int class_id = -1;  // -1 for the unconditional token
  Tensor vec;         // (D)
  bool null_flag = false;
};

struct DenoiserConfig {
  int channels = 1, height = 16, width = 16;
  int num_classes = 4;
  int feat = 24;      // conv width F
  int cond_dim = 16;  // D
  int heads = 2;
  int head_dim = 8;
  int temb_dim = 16;

  std::vector<int> image_shape() const { return {channels, height, width}; }
};

/// Noise-prediction net: conv stem with a timestep bias, one cross-attention
/// block whose keys/values come from the condition embedding, conv trunk,
/// linear output head. The attention map over spatial positions is exposed so
/// guidance can mask to the foreground.
struct DenoiserParams {
  DenoiserConfig cfg;

  Tensor class_embed;        // (num_classes, D)
  Tensor null_embed;         // (D)
  Tensor temb_w, temb_b;     // (F, temb_dim), (F)
  Tensor conv1_w, conv1_b;   // (F, C, 3, 3), (F)
  Tensor wq, bq;             // 1x1 conv: (heads*head_dim, F, 1, 1), (heads*head_dim)
  Tensor wk, bk;             // (heads*head_dim, D), (heads*head_dim)
  Tensor wv, bv;             // (heads*head_dim, D), (heads*head_dim)
  Tensor wo, bo;             // 1x1 conv: (F, heads*head_dim, 1, 1), (F)
  Tensor conv2_w, conv2_b;   // (F, F, 3, 3), (F)
  Tensor out_w, out_b;       // (C, F, 3, 3), (C)

  std::vector<std::pair<const char*, Tensor*>> named_params();
  std::vector<std::pair<const char*, const Tensor*>> named_params() const;
};

DenoiserParams init_denoiser(const DenoiserConfig& cfg, RngState& rng);

/// Tape handles for every weight; reused across samples of a batch so
/// gradients accumulate on one leaf per tensor.
struct DenoiserLeaves {
  ad::Value class_embed, null_embed, temb_w, temb_b, conv1_w, conv1_b, wq, bq, wk, bk, wv, bv, wo,
      bo, conv2_w, conv2_b, out_w, out_b;
};

DenoiserLeaves denoiser_leaves(ad::Tape& tape, const DenoiserParams& p, bool requires_grad);

std::vector<ad::Value> leaf_list(const DenoiserLeaves& l);

struct DenoiserOut {
  ad::Value eps;   // (C,H,W)
  ad::Value attn;  // (1,H,W), softmax over spatial positions, sums to 1
};

/// Forward pass on a tape. `x_t` and `cond_vec` are tape values so callers
/// choose what is differentiated (weights for training, the condition for
/// gradient guidance).
DenoiserOut denoiser_forward(ad::Tape& tape, const DenoiserConfig& cfg, const DenoiserLeaves& l,
                             ad::Value x_t, ad::Value cond_vec, int t);

/// Pure evaluation: (eps_hat, attn) with nothing differentiated.
std::pair<Tensor, Tensor> predict_noise(const DenoiserParams& p, const Tensor& x_t,
                                        const ConditionEmbedding& cond, int t);

/// Learned embedding for class y, or the unconditional token for nullopt.
/// Always returns a fresh copy.
ConditionEmbedding embed_class(const DenoiserParams& p, std::optional<int> y);

struct DenoiserTrainStats {
  std::vector<double> epoch_loss;  // mean per-sample L2 loss per epoch
};

/// Classifier-free training: per sample draw t ~ U[1,T] and eps ~ N(0,I),
/// noise the image with forward_sample, regress eps with mean squared error;
/// the condition is replaced by the unconditional token with probability
/// drop_cond_prob. Adam, minibatched.
DenoiserTrainStats train_denoiser(DenoiserParams& p, const std::vector<Tensor>& images,
                                  const std::vector<int>& labels, const NoiseSchedule& sched,
                                  int epochs, double drop_cond_prob, double lr, int batch,
                                  RngState& rng);

/// Adapter for the sampler.
DenoiserFn make_denoiser_fn(const DenoiserParams& p);

}  // namespace actgen
