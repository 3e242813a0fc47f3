#pragma once

#include <functional>
#include <utility>

#include "actgen/rng.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

/// Per-timestep coefficients of the forward/reverse diffusion. Index 0 is the
/// clean-data convention (beta 0, alpha 1, alpha_bar 1, sigma 0); steps run
/// t = 1..T. alpha[t] = 1 - beta[t] exactly and alpha_bar[t] =
/// alpha_bar[t-1] * alpha[t] exactly, so the product identity holds to the
/// last bit. sigma[t] is the posterior std sqrt(beta_t (1-alpha_bar_{t-1}) /
/// (1-alpha_bar_t)); sigma[1] = 0, making the final denoising step
/// deterministic given the noise estimate.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta, alpha, alpha_bar, sigma;
};

enum class ScheduleKind { linear, cosine };

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min, double beta_max);

/// The diffusion variable: an image-shaped array plus its timestep.
struct LatentState {
  Tensor x;
  int t = 0;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1-alpha_bar_t) eps
Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

/// Inverts forward_sample: (x_t - sqrt(1-alpha_bar_t) eps_hat) / sqrt(alpha_bar_t).
Tensor x0_estimate(const LatentState& state, const Tensor& eps_hat, const NoiseSchedule& sched);

/// eps_uncond + s (eps_cond - eps_uncond)
Tensor cfg_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double s);

/// One reverse step: x_{t-1} = (x_t - (1-alpha_t)/sqrt(1-alpha_bar_t) eps_hat)
/// / sqrt(alpha_t) + sigma_t z. The caller supplies z because guidance reuses
/// the same draw when it builds the guide-side latent for this step.
LatentState ddpm_step(const LatentState& state, const Tensor& eps_hat, const Tensor& z,
                      const NoiseSchedule& sched);

struct ConditionEmbedding;  // defined in denoiser.hpp

/// Denoiser as seen by the sampler: (x_t, condition, t) -> (eps_hat, attn).
using DenoiserFn =
    std::function<std::pair<Tensor, Tensor>(const Tensor&, const ConditionEmbedding&, int)>;

/// Everything a per-step hook may need to intervene after a reverse step.
struct StepContext {
  int t;                    // step being denoised: x_t -> x_{t-1}
  int step_index;           // 0 at t = T
  const Tensor& x_t;        // state before the step
  const Tensor& z;          // the Gaussian draw used by ddpm_step
  const Tensor& eps_cond;   // conditional prediction
  const Tensor& eps_uncond; // unconditional prediction
  const Tensor& eps_hat;    // after classifier-free mixing
  const Tensor& attn;       // attention map of the conditional pass, (1,H,W)
  const NoiseSchedule& sched;
};

/// Hook may replace the proposed x_{t-1} and mutate the condition used from
/// the next step on. Replacing x with a different shape is an error.
using StepHook = std::function<void(const StepContext&, Tensor& x_prev, ConditionEmbedding& cond)>;

/// Full reverse process with classifier-free guidance. Starts from
/// x_T ~ N(0,I) drawn from rng, applies cfg_noise then ddpm_step for
/// t = T..1, invoking the hook after each step. With an empty hook this is
/// plain conditional DDPM sampling.
Tensor sample(const DenoiserFn& denoiser, ConditionEmbedding cond, const ConditionEmbedding& uncond,
              const NoiseSchedule& sched, double cfg_scale, const std::vector<int>& image_shape,
              RngState& rng, const StepHook& hook = {});

}  // namespace actgen
