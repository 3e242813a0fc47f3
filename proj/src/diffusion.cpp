#include "actgen/diffusion.hpp"

#include <cmath>

#include "actgen/denoiser.hpp"

namespace actgen {

NoiseSchedule build_schedule(ScheduleKind kind, int T, double beta_min, double beta_max) {
  detail::require(T >= 1, "build_schedule: T must be >= 1, got " + std::to_string(T));
  detail::require(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0,
                  "build_schedule: need 0 < beta_min <= beta_max < 1, got [" +
                      std::to_string(beta_min) + "," + std::to_string(beta_max) + "]");
  NoiseSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.sigma.assign(T + 1, 0.0);

  if (kind == ScheduleKind::linear) {
    for (int t = 1; t <= T; ++t) {
      const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
      s.beta[t] = beta_min + (beta_max - beta_min) * frac;
    }
  } else {
    // cosine alpha_bar (offset 0.008), converted to betas and clamped to the
    // given bounds; alpha_bar is then rebuilt from the clamped betas so the
    // product identity stays exact.
    const double off = 0.008;
    auto f = [&](double t) {
      const double a = (t / T + off) / (1.0 + off) * (3.14159265358979323846 / 2.0);
      const double c = std::cos(a);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= T; ++t) {
      const double ab = f(static_cast<double>(t)) / f0;
      double beta = 1.0 - ab / prev;
      beta = std::min(std::max(beta, beta_min), beta_max);
      s.beta[t] = beta;
      prev = ab;
    }
  }
  for (int t = 1; t <= T; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] = std::sqrt(s.beta[t] * (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]));
  }
  return s;
}

namespace {
void check_t(const NoiseSchedule& sched, int t, int lo, const char* op) {
  detail::require(t >= lo && t <= sched.T, std::string(op) + ": timestep " + std::to_string(t) +
                                               " outside [" + std::to_string(lo) + "," +
                                               std::to_string(sched.T) + "]");
}
}  // namespace

Tensor forward_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  check_t(sched, t, 0, "forward_sample");
  detail::require(x0.same_shape(eps), "forward_sample: shape mismatch " + shape_str(x0.shape) +
                                          " vs " + shape_str(eps.shape));
  const double a = std::sqrt(sched.alpha_bar[t]);
  const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
  Tensor r = x0;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] = a * r.data[i] + b * eps.data[i];
  return r;
}

Tensor x0_estimate(const LatentState& state, const Tensor& eps_hat, const NoiseSchedule& sched) {
  check_t(sched, state.t, 1, "x0_estimate");
  detail::require(state.x.same_shape(eps_hat), "x0_estimate: shape mismatch " +
                                                   shape_str(state.x.shape) + " vs " +
                                                   shape_str(eps_hat.shape));
  const double ab = sched.alpha_bar[state.t];
  detail::require(ab > 0.0, "x0_estimate: alpha_bar is zero at t=" + std::to_string(state.t));
  const double inv = 1.0 / std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor r = state.x;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] = (r.data[i] - b * eps_hat.data[i]) * inv;
  return r;
}

Tensor cfg_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double s) {
  detail::require(eps_cond.same_shape(eps_uncond),
                  "cfg_noise: shape mismatch " + shape_str(eps_cond.shape) + " vs " +
                      shape_str(eps_uncond.shape));
  // eps_uncond + s (eps_cond - eps_uncond), written as the lerp so the
  // s = 0 and s = 1 limits are exact
  Tensor r = eps_uncond;
  for (size_t i = 0; i < r.data.size(); ++i)
    r.data[i] = (1.0 - s) * r.data[i] + s * eps_cond.data[i];
  return r;
}

LatentState ddpm_step(const LatentState& state, const Tensor& eps_hat, const Tensor& z,
                      const NoiseSchedule& sched) {
  detail::require(state.t >= 1, "ddpm_step: nothing to denoise at t=0");
  check_t(sched, state.t, 1, "ddpm_step");
  detail::require(state.x.same_shape(eps_hat) && state.x.same_shape(z),
                  "ddpm_step: shape mismatch x" + shape_str(state.x.shape) + " eps" +
                      shape_str(eps_hat.shape) + " z" + shape_str(z.shape));
  const int t = state.t;
  const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha[t]);
  const double coef = (1.0 - sched.alpha[t]) / std::sqrt(1.0 - sched.alpha_bar[t]);
  const double sig = sched.sigma[t];
  LatentState out;
  out.t = t - 1;
  out.x = state.x;
  for (size_t i = 0; i < out.x.data.size(); ++i)
    out.x.data[i] = inv_sqrt_a * (out.x.data[i] - coef * eps_hat.data[i]) + sig * z.data[i];
  return out;
}

Tensor sample(const DenoiserFn& denoiser, ConditionEmbedding cond, const ConditionEmbedding& uncond,
              const NoiseSchedule& sched, double cfg_scale, const std::vector<int>& image_shape,
              RngState& rng, const StepHook& hook) {
  LatentState state{rng.gaussian_tensor(image_shape), sched.T};
  for (int t = sched.T; t >= 1; --t) {
    auto [eps_cond, attn] = denoiser(state.x, cond, t);
    auto [eps_uncond, attn_u] = denoiser(state.x, uncond, t);
    const Tensor eps_hat = cfg_noise(eps_cond, eps_uncond, cfg_scale);
    const Tensor z = rng.gaussian_tensor(image_shape);
    LatentState next = ddpm_step(state, eps_hat, z, sched);
    if (hook) {
      StepContext ctx{t, sched.T - t, state.x, z, eps_cond, eps_uncond, eps_hat, attn, sched};
      hook(ctx, next.x, cond);
      detail::require(next.x.shape == image_shape,
                      "sample: hook replaced x with shape " + shape_str(next.x.shape) +
                          ", expected " + shape_str(image_shape));
    }
    state = std::move(next);
  }
  return state.x;
}

}  // namespace actgen
