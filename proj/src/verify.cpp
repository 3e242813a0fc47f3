#include "actgen/verify.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "actgen/active_loop.hpp"
#include "actgen/checkpoint.hpp"
#include "actgen/commands.hpp"
#include "actgen/guidance.hpp"
#include "actgen/image_io.hpp"
#include "actgen/io_util.hpp"

namespace actgen {

namespace {

struct Harness {
  std::ostream& out;
  int failures = 0;

  void check(const char* name, bool ok, const std::string& detail = "") {
    out << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) out << "  (" << detail << ")";
    out << "\n";
    if (!ok) ++failures;
  }

  void must_throw(const char* name, const std::function<void()>& fn) {
    bool threw = false;
    try {
      fn();
    } catch (const std::exception&) {
      threw = true;
    }
    check(name, threw);
  }
};

bool bits_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

double rel_err(const Tensor& a, const Tensor& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    diff += d * d;
    na += a.data[i] * a.data[i];
    nb += b.data[i] * b.data[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  return denom > 0 ? std::sqrt(diff) / denom : std::sqrt(diff);
}

// tiny fixtures shared by the model-level checks
DenoiserConfig tiny_denoiser_cfg() {
  DenoiserConfig c;
  c.channels = 1;
  c.height = 8;
  c.width = 8;
  c.num_classes = 3;
  c.feat = 6;
  c.cond_dim = 6;
  c.heads = 2;
  c.head_dim = 3;
  c.temb_dim = 8;
  return c;
}

ClassifierConfig tiny_classifier_cfg() {
  ClassifierConfig c;
  c.channels = 1;
  c.height = 8;
  c.width = 8;
  c.c1 = 4;
  c.c2 = 6;
  c.num_classes = 3;
  return c;
}

// flattens every parameter tensor into one vector so finite differences can
// walk the whole model
Tensor flatten_params(const std::vector<std::pair<const char*, const Tensor*>>& named) {
  std::vector<double> all;
  for (auto& [n, t] : named) all.insert(all.end(), t->data.begin(), t->data.end());
  return Tensor::vec(std::move(all));
}

void unflatten_params(const Tensor& flat,
                      const std::vector<std::pair<const char*, Tensor*>>& named) {
  size_t off = 0;
  for (auto& [n, t] : named) {
    std::copy(flat.data.begin() + off, flat.data.begin() + off + t->data.size(), t->data.begin());
    off += t->data.size();
  }
}

void run_kernel_checks(Harness& h) {
  RngState rng(11);

  // purity: inputs bit-identical before/after
  {
    Tensor a = rng.gaussian_tensor({3, 4}), b = rng.gaussian_tensor({3, 4});
    const Tensor a0 = a, b0 = b;
    ops::add(a, b);
    ops::hadamard(a, b);
    ops::softmax(a);
    ops::gelu(a);
    ops::matmul(a, rng.gaussian_tensor({4, 2}));
    h.check("numerics: ops are pure", bits_equal(a, a0) && bits_equal(b, b0));
  }

  // rng determinism + stream independence
  {
    RngState r1(42), r2(42);
    bool same = true;
    for (int i = 0; i < 100; ++i) same = same && r1.next_u64() == r2.next_u64();
    RngState f1 = RngState(42).fork("a"), f2 = RngState(42).fork("b");
    h.check("rng: seed-deterministic, forks independent",
            same && f1.next_u64() != f2.next_u64());
  }
  {
    RngState r(7);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double g = r.gaussian();
      sum += g;
      sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    h.check("rng: gaussian moments (1e5 draws)",
            std::abs(mean) < 0.02 && std::abs(var - 1.0) < 0.02,
            "mean=" + std::to_string(mean) + " var=" + std::to_string(var));
  }

  // tape mechanics: each op visited exactly once, unreached leaves get zeros
  {
    ad::Tape t;
    ad::Value x = t.leaf(Tensor::vec({1.0, 2.0}), true);
    ad::Value unused = t.leaf(Tensor::vec({5.0}), true);
    ad::Value a = ad::mul(t, x, x);
    ad::Value b = ad::add(t, a, a);  // fan-out on a
    ad::Value loss = ad::sum(t, b);
    t.backward(loss);
    const Tensor gx = t.grad(x);
    const Tensor gu = t.grad(unused);
    h.check("tape: reverse pass visits each op once",
            t.backward_visits() == 3 && gx.data[0] == 4.0 && gx.data[1] == 8.0);
    h.check("tape: unreached leaf gets zero gradient", gu.data[0] == 0.0);
  }
  {
    ad::Tape t;
    ad::Value x = t.leaf(Tensor::vec({1.0, 2.0}), true);
    h.must_throw("tape: non-scalar loss rejected", [&] { t.backward(x); });
    ad::Tape other;
    h.must_throw("tape: foreign value rejected", [&] { other.val(ad::Value{5}); });
  }

  // autodiff vs central differences on the composite kernel ops
  {
    RngState r(5);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Tensor x0 = r.gaussian_tensor({2, 6, 6});
      Tensor w = ops::scale(r.gaussian_tensor({3, 2, 3, 3}), 0.4);
      Tensor b = ops::scale(r.gaussian_tensor({3}), 0.1);
      auto f = [&](const Tensor& xi) {
        ad::Tape t;
        ad::Value xv = t.leaf(xi, true);
        ad::Value y = ad::gelu(t, ad::conv2d(t, xv, t.leaf(w), t.leaf(b), 1));
        y = ad::softmax(t, ad::global_mean(t, ad::avgpool2(t, y)));
        return t.val(ad::sum(t, ad::mul(t, y, y))).item();
      };
      ad::Tape t;
      ad::Value xv = t.leaf(x0, true);
      ad::Value y = ad::gelu(t, ad::conv2d(t, xv, t.leaf(w), t.leaf(b), 1));
      y = ad::softmax(t, ad::global_mean(t, ad::avgpool2(t, y)));
      ad::Value loss = ad::sum(t, ad::mul(t, y, y));
      t.backward(loss);
      worst = std::max(worst, rel_err(t.grad(xv), ad::finite_diff_grad(f, x0, 1e-6)));
    }
    h.check("autodiff: conv/pool/softmax chain matches finite differences (1e-6)", worst <= 1e-6,
            "worst rel err " + std::to_string(worst));
  }
}

void run_diffusion_checks(Harness& h) {
  // exact product identity and endpoint conventions for both schedule kinds
  for (ScheduleKind kind : {ScheduleKind::linear, ScheduleKind::cosine}) {
    const NoiseSchedule s = build_schedule(kind, 100, 1e-3, 0.6);
    bool ok = s.alpha_bar[0] == 1.0 && s.sigma[1] == 0.0;
    bool monotone = true;
    for (int t = 1; t <= s.T; ++t) {
      ok = ok && s.alpha[t] == 1.0 - s.beta[t] &&
           s.alpha_bar[t] == s.alpha_bar[t - 1] * s.alpha[t] && s.beta[t] > 0.0 &&
           s.beta[t] < 1.0 && s.sigma[t] >= 0.0;
      monotone = monotone && s.alpha_bar[t] < s.alpha_bar[t - 1];
    }
    h.check(kind == ScheduleKind::linear ? "schedule: linear product identity exact"
                                         : "schedule: cosine product identity + monotone",
            ok && monotone);
  }

  // forward marginal, 1e5 draws at 3 timesteps, 3 sigma (seed pinned)
  {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 40, 0.0025, 0.5);
    RngState rng(123);
    Tensor x0 = Tensor({1, 2, 2}, {0.5, -0.3, 0.8, -0.9});
    bool ok = true;
    const int n = 100000;
    for (int t : {5, 20, 40}) {
      Tensor sum = Tensor::zeros(x0.shape), sum2 = Tensor::zeros(x0.shape);
      for (int i = 0; i < n; ++i) {
        const Tensor eps = rng.gaussian_tensor(x0.shape);
        const Tensor xt = forward_sample(x0, t, eps, s);
        for (int j = 0; j < 4; ++j) {
          sum.data[j] += xt.data[j];
          sum2.data[j] += xt.data[j] * xt.data[j];
        }
      }
      const double want_var = 1.0 - s.alpha_bar[t];
      for (int j = 0; j < 4; ++j) {
        const double mean = sum.data[j] / n;
        const double var = sum2.data[j] / n - mean * mean;
        const double want_mean = std::sqrt(s.alpha_bar[t]) * x0.data[j];
        const double mean_tol = 3.0 * std::sqrt(want_var / n);
        const double var_tol = 3.0 * want_var * std::sqrt(2.0 / n);
        ok = ok && std::abs(mean - want_mean) < mean_tol && std::abs(var - want_var) < var_tol;
      }
    }
    h.check("diffusion: forward marginal matches (1e5 draws, 3 timesteps, 3 sigma)", ok);
  }

  // round trip and cfg limits
  {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 40, 0.0025, 0.5);
    RngState rng(9);
    const Tensor x0 = rng.gaussian_tensor({1, 4, 4});
    const Tensor eps = rng.gaussian_tensor({1, 4, 4});
    bool ok = true;
    for (int t : {1, 17, 40}) {
      const Tensor xt = forward_sample(x0, t, eps, s);
      const Tensor rec = x0_estimate({xt, t}, eps, s);
      for (int j = 0; j < 16; ++j) ok = ok && std::abs(rec.data[j] - x0.data[j]) <= 1e-10;
    }
    h.check("diffusion: x0_estimate(forward_sample) round trip <= 1e-10", ok);

    const Tensor ec = rng.gaussian_tensor({1, 4, 4});
    const Tensor eu = rng.gaussian_tensor({1, 4, 4});
    h.check("diffusion: cfg s=1 returns conditional, s=0 unconditional",
            bits_equal(cfg_noise(ec, eu, 1.0), ec) && bits_equal(cfg_noise(ec, eu, 0.0), eu));
  }

  // sampler: s=0 output is bitwise invariant to the condition embedding
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    RngState ir(3);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
    RngState r1(77), r2(77);
    const Tensor a = sample(make_denoiser_fn(dp), embed_class(dp, 0), embed_class(dp, std::nullopt),
                            s, 0.0, dc.image_shape(), r1);
    const Tensor b = sample(make_denoiser_fn(dp), embed_class(dp, 2), embed_class(dp, std::nullopt),
                            s, 0.0, dc.image_shape(), r2);
    h.check("sampler: s=0 invariant to condition (bitwise)", bits_equal(a, b));
  }

  // hook dominance: forcing the latent each step pins the output
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    RngState ir(4);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 6, 0.01, 0.4);
    RngState r(5);
    const Tensor forced = Tensor::full(dc.image_shape(), 0.25);
    const Tensor out = sample(
        make_denoiser_fn(dp), embed_class(dp, 1), embed_class(dp, std::nullopt), s, 2.0,
        dc.image_shape(), r,
        [&](const StepContext&, Tensor& x_prev, ConditionEmbedding&) { x_prev = forced; });
    h.check("sampler: hook replacement dominates", bits_equal(out, forced));
  }

  // denoiser==0, T=1, sigma=0: output is x_T / sqrt(alpha_1)
  {
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 1, 0.1, 0.1);
    DenoiserFn zero = [](const Tensor& x, const ConditionEmbedding&, int) {
      return std::make_pair(Tensor::zeros(x.shape), Tensor::zeros({1, x.shape[1], x.shape[2]}));
    };
    RngState ra(21), rb(21);
    ConditionEmbedding dummy;
    dummy.vec = Tensor({2});
    const Tensor out = sample(zero, dummy, dummy, s, 1.0, {1, 2, 2}, ra);
    const Tensor want = ops::scale(rb.gaussian_tensor({1, 2, 2}), 1.0 / std::sqrt(s.alpha[1]));
    h.check("sampler: T=1 zero-denoiser composition", bits_equal(out, want));
  }

  // determinism of the full pipeline at (seed, config)
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    RngState ir(6);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const NoiseSchedule s = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
    GuidanceConfig g;
    g.s = 3.0;
    g.i = 4.0;
    g.grad_window = 0;
    MemoryBank b1(16), b2(16);
    RngState r1(99), r2(99);
    const Tensor guide = Tensor::full(dc.image_shape(), 0.1);
    const Tensor o1 = guided_generate(dp, nullptr, guide, 0, g, b1, s, r1).image;
    const Tensor o2 = guided_generate(dp, nullptr, guide, 0, g, b2, s, r2).image;
    h.check("determinism: guided generation reproduces bit-identically", bits_equal(o1, o2));
  }
}

void run_gradient_oracle_checks(Harness& h) {
  const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
  const DenoiserConfig dc = tiny_denoiser_cfg();
  const ClassifierConfig cc = tiny_classifier_cfg();

  // denoiser L2 training loss w.r.t. all weights
  {
    RngState r(31);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      RngState ir = r.fork("init/" + std::to_string(trial));
      DenoiserParams p = init_denoiser(dc, ir);
      const Tensor x0 = ir.gaussian_tensor(dc.image_shape());
      const Tensor eps = ir.gaussian_tensor(dc.image_shape());
      const int t = 1 + static_cast<int>(ir.next_u64() % sched.T);
      const Tensor xt = forward_sample(x0, t, eps, sched);
      const int label = static_cast<int>(ir.next_u64() % dc.num_classes);

      auto loss_at = [&](const Tensor& flat) {
        DenoiserParams q = p;
        unflatten_params(flat, q.named_params());
        ad::Tape tape;
        DenoiserLeaves l = denoiser_leaves(tape, q, false);
        ad::Value cond =
            ad::reshape(tape, ad::slice0(tape, l.class_embed, label, 1), {dc.cond_dim});
        DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), cond, t);
        ad::Value diff = ad::sub(tape, out.eps, tape.leaf(eps));
        return tape.val(ad::mean(tape, ad::mul(tape, diff, diff))).item();
      };

      ad::Tape tape;
      DenoiserLeaves l = denoiser_leaves(tape, p, true);
      ad::Value cond = ad::reshape(tape, ad::slice0(tape, l.class_embed, label, 1), {dc.cond_dim});
      DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), cond, t);
      ad::Value diff = ad::sub(tape, out.eps, tape.leaf(eps));
      tape.backward(ad::mean(tape, ad::mul(tape, diff, diff)));
      std::vector<double> gall;
      for (ad::Value v : leaf_list(l)) {
        const Tensor g = tape.grad(v);
        gall.insert(gall.end(), g.data.begin(), g.data.end());
      }
      const Tensor flat = flatten_params(const_cast<const DenoiserParams&>(p).named_params());
      const Tensor gfd = ad::finite_diff_grad(loss_at, flat, 1e-6);
      worst = std::max(worst, rel_err(Tensor::vec(std::move(gall)), gfd));
    }
    h.check("gradient oracle: denoiser L2 loss (10 instances, <=1e-6)", worst <= 1e-6,
            "worst rel err " + std::to_string(worst));
  }

  // classifier CE w.r.t. all weights
  {
    RngState r(32);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      RngState ir = r.fork("init/" + std::to_string(trial));
      ClassifierParams p = init_classifier(cc, ir);
      const Tensor img = ir.gaussian_tensor(cc.image_shape());
      const int label = static_cast<int>(ir.next_u64() % cc.num_classes);
      auto loss_at = [&](const Tensor& flat) {
        ClassifierParams q = p;
        unflatten_params(flat, q.named_params());
        ad::Tape tape;
        ClassifierLeaves l = classifier_leaves(tape, q, false);
        return tape
            .val(ad::cross_entropy(tape, classifier_forward(tape, cc, l, tape.leaf(img)), label))
            .item();
      };
      ad::Tape tape;
      ClassifierLeaves l = classifier_leaves(tape, p, true);
      tape.backward(
          ad::cross_entropy(tape, classifier_forward(tape, cc, l, tape.leaf(img)), label));
      std::vector<double> gall;
      for (ad::Value v : leaf_list(l)) {
        const Tensor g = tape.grad(v);
        gall.insert(gall.end(), g.data.begin(), g.data.end());
      }
      const Tensor flat = flatten_params(const_cast<const ClassifierParams&>(p).named_params());
      const Tensor gfd = ad::finite_diff_grad(loss_at, flat, 1e-6);
      worst = std::max(worst, rel_err(Tensor::vec(std::move(gall)), gfd));
    }
    h.check("gradient oracle: classifier CE (10 instances, <=1e-6)", worst <= 1e-6,
            "worst rel err " + std::to_string(worst));
  }

  // contrastive loss w.r.t. the latent
  {
    RngState r(33);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 24;
      Tensor x = r.gaussian_tensor({n});
      std::vector<Tensor> bank;
      for (int i = 0; i < 3; ++i) bank.push_back(r.gaussian_tensor({n}));
      std::vector<const Tensor*> entries;
      for (const Tensor& t : bank) entries.push_back(&t);
      const double rho = 4.0 + r.uniform();
      auto f = [&](const Tensor& xi) {
        ad::Tape tape;
        return tape.val(contrastive_loss(tape, tape.leaf(xi, true), entries, rho)).item();
      };
      ad::Tape tape;
      ad::Value xv = tape.leaf(x, true);
      tape.backward(contrastive_loss(tape, xv, entries, rho));
      worst = std::max(worst, rel_err(tape.grad(xv), ad::finite_diff_grad(f, x, 1e-6)));
    }
    h.check("gradient oracle: contrastive loss (10 instances, <=1e-6)", worst <= 1e-6,
            "worst rel err " + std::to_string(worst));
  }

  // adversarial loss w.r.t. the condition embedding, through denoiser + decode
  // + classifier
  {
    RngState r(34);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      RngState ir = r.fork("init/" + std::to_string(trial));
      const DenoiserParams dp = init_denoiser(dc, ir);
      const ClassifierParams cp = init_classifier(cc, ir);
      const Tensor xt = ir.gaussian_tensor(dc.image_shape());
      const int t = 1 + static_cast<int>(ir.next_u64() % sched.T);
      const int label = static_cast<int>(ir.next_u64() % cc.num_classes);
      const Tensor eps_u = ir.gaussian_tensor(dc.image_shape());
      const double s = 3.0;
      const ConditionEmbedding base = embed_class(dp, label);

      auto loss_at = [&](const Tensor& cvec) {
        ad::Tape tape;
        DenoiserLeaves l = denoiser_leaves(tape, dp, false);
        DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), tape.leaf(cvec), t);
        ad::Value eps_hat =
            ad::add_const(tape, ad::affine(tape, out.eps, s), ops::scale(eps_u, 1.0 - s));
        return tape.val(adversarial_loss(tape, {xt, t}, eps_hat, sched, cp, label)).item();
      };
      ad::Tape tape;
      DenoiserLeaves l = denoiser_leaves(tape, dp, false);
      ad::Value cv = tape.leaf(base.vec, true);
      DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), cv, t);
      ad::Value eps_hat =
          ad::add_const(tape, ad::affine(tape, out.eps, s), ops::scale(eps_u, 1.0 - s));
      tape.backward(adversarial_loss(tape, {xt, t}, eps_hat, sched, cp, label));
      worst = std::max(worst, rel_err(tape.grad(cv), ad::finite_diff_grad(loss_at, base.vec, 1e-6)));
    }
    h.check("gradient oracle: adversarial loss chain (10 instances, <=1e-6)", worst <= 1e-6,
            "worst rel err " + std::to_string(worst));
  }
}

void run_guidance_checks(Harness& h) {
  // gamma properties; strict monotonicity checked where doubles can still
  // resolve 1 - gamma (for t << i the true value rounds to exactly 1)
  {
    bool ok = gamma_schedule(12.5, 12.5) == 0.5;
    double prev = 1.0;
    for (double d = -30.0; d <= 30.0; d += 0.25) {
      const double g = gamma_schedule(3.0 + d, 3.0);
      ok = ok && g > 0.0 && g < 1.0 && g < prev;
      prev = g;
    }
    ok = ok && std::abs(gamma_schedule(3.0 + std::log(3.0), 3.0) - 0.25) < 1e-12;
    ok = ok && gamma_schedule(40.0, 12.5) > 0.0 && gamma_schedule(40.0, 12.5) < 2e-12;
    ok = ok && gamma_schedule(-500.0, 3.0) <= 1.0 && gamma_schedule(-500.0, 3.0) > 1.0 - 1e-12;
    h.check("guidance: gamma in (0,1), strictly decreasing, midpoint 0.5", ok);
  }

  // masked-guidance identities
  {
    RngState r(41);
    const Tensor x = r.gaussian_tensor({2, 4, 4});
    const Tensor xg = r.gaussian_tensor({2, 4, 4});
    const AttentionMask ones{Tensor::full({1, 4, 4}, 1.0)};
    const AttentionMask zeros{Tensor::zeros({1, 4, 4})};
    const double gamma = 0.37;
    h.check("guidance: mask==1 equals unmasked guidance (bitwise)",
            bits_equal(apply_attentive_guidance(x, xg, gamma, ones),
                       apply_image_guidance(x, xg, gamma)));
    h.check("guidance: mask==0 is the identity (bitwise)",
            bits_equal(apply_attentive_guidance(x, xg, gamma, zeros), x));
  }

  // contrastive hinge cases
  {
    Tensor x = Tensor::vec({0.0, 0.0});
    Tensor far = Tensor::vec({30.0, 40.0});   // distance 50
    Tensor near = Tensor::vec({3.0, 4.0});    // distance 5
    std::vector<const Tensor*> entries{&far, &near};
    const double all_inactive = contrastive_loss_value(x, {&far}, 10.0);
    const double mixed = contrastive_loss_value(x, entries, 10.0);
    const double empty = contrastive_loss_value(x, {}, 10.0);
    h.check("guidance: contrastive hinge zero iff all distances >= rho (or empty)",
            all_inactive == 0.0 && mixed == 2.5 && empty == 0.0 && mixed >= 0.0);
  }

  // normalized embedding step
  {
    RngState r(43);
    ConditionEmbedding c;
    c.vec = r.gaussian_tensor({6});
    const Tensor c0 = c.vec;
    Tensor g = r.gaussian_tensor({6});
    update_embedding(c, g, 0.05);
    const double step = ops::l2_dist(c.vec, c0);
    ConditionEmbedding c2;
    c2.vec = c0;
    update_embedding(c2, ops::scale(g, 10.0), 0.05);
    double dir_diff = ops::l2_dist(c.vec, c2.vec);
    ConditionEmbedding c3;
    c3.vec = c0;
    h.check("guidance: update step length == nu, invariant to gradient scale",
            std::abs(step - 0.05) <= 1e-12 && dir_diff <= 1e-12);
    h.check("guidance: near-zero gradient skips the update",
            update_embedding(c3, Tensor::zeros({6}), 0.05).skipped && bits_equal(c3.vec, c0));
  }

  // first-order ascent: a tiny step along -grad(L_adv) must not decrease CE
  {
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
    const DenoiserConfig dc = tiny_denoiser_cfg();
    const ClassifierConfig cc = tiny_classifier_cfg();
    RngState r(44);
    const DenoiserParams dp = init_denoiser(dc, r);
    const ClassifierParams cp = init_classifier(cc, r);
    const Tensor xt = r.gaussian_tensor(dc.image_shape());
    const Tensor eps_u = r.gaussian_tensor(dc.image_shape());
    const int t = 5, label = 1;
    const double s = 3.0, nu = 1e-3;

    auto ce_at = [&](const Tensor& cvec) {
      ad::Tape tape;
      DenoiserLeaves l = denoiser_leaves(tape, dp, false);
      DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), tape.leaf(cvec), t);
      ad::Value eps_hat =
          ad::add_const(tape, ad::affine(tape, out.eps, s), ops::scale(eps_u, 1.0 - s));
      ad::Value ladv = adversarial_loss(tape, {xt, t}, eps_hat, sched, cp, label);
      return -tape.val(ladv).item();  // CE = -L_adv
    };

    ConditionEmbedding c = embed_class(dp, label);
    const double ce_before = ce_at(c.vec);
    ad::Tape tape;
    DenoiserLeaves l = denoiser_leaves(tape, dp, false);
    ad::Value cv = tape.leaf(c.vec, true);
    DenoiserOut out = denoiser_forward(tape, dc, l, tape.leaf(xt), cv, t);
    ad::Value eps_hat =
        ad::add_const(tape, ad::affine(tape, out.eps, s), ops::scale(eps_u, 1.0 - s));
    tape.backward(adversarial_loss(tape, {xt, t}, eps_hat, sched, cp, label));
    update_embedding(c, tape.grad(cv), nu);
    const double ce_after = ce_at(c.vec);
    h.check("guidance: one normalized step on L_adv is first-order ascent on CE",
            ce_after >= ce_before - 1e-6,
            "before " + std::to_string(ce_before) + " after " + std::to_string(ce_after));
  }

  // memory bank mechanics
  {
    MemoryBank bank(2);
    Tensor a = Tensor::vec({1.0}), b = Tensor::vec({2.0}), c = Tensor::vec({3.0});
    bank.insert(0, a);
    bank.insert(0, b);
    bank.insert(0, c);  // evicts a
    bank.insert(1, a);
    RngState r(45);
    const auto sampled = bank.sample(0, 1024, r);
    bool fifo = bank.size(0) == 2 && sampled.size() == 2;
    for (const Tensor* t : sampled) fifo = fifo && t->data[0] != 1.0;
    h.check("guidance: bank FIFO eviction, class isolation, n_cap sampling",
            fifo && bank.size(1) == 1 && bank.sample(2, 8, r).empty());
  }

  // diversity: contrastive guidance spreads sequential generations apart
  // (gamma disabled so the effect is isolated; rho above typical distances so
  // the hinge stays active)
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
    RngState ir(46);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const Tensor guide = ir.gaussian_tensor(dc.image_shape());
    auto run_arm = [&](int window) {
      GuidanceConfig g;
      g.s = 3.0;
      g.i = -1e9;
      g.grad_window = window;
      g.nu = 0.3;
      g.rho = 60.0;
      g.mask_mode = MaskMode::none;
      MemoryBank bank(64);
      std::vector<Tensor> outs;
      for (int k = 0; k < 12; ++k) {
        RngState r = RngState(500).fork("gen/" + std::to_string(k));
        outs.push_back(guided_generate(dp, nullptr, guide, 0, g, bank, sched, r).image);
      }
      double mean = 0.0;
      int count = 0;
      for (size_t i = 0; i < outs.size(); ++i)
        for (size_t j = i + 1; j < outs.size(); ++j) {
          mean += ops::l2_dist(outs[i], outs[j]);
          ++count;
        }
      return mean / count;
    };
    const double with_contra = run_arm(4);
    const double without = run_arm(0);
    h.check("guidance: contrastive loss increases pairwise diversity", with_contra > without,
            "with " + std::to_string(with_contra) + " vs without " + std::to_string(without));
  }

  // gamma ~ 0 and window 0 reduce to plain conditional sampling
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);
    RngState ir(47);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const Tensor guide = ir.gaussian_tensor(dc.image_shape());
    GuidanceConfig g;
    g.s = 3.0;
    g.i = -1e9;  // gamma underflows to exactly 0
    g.grad_window = 0;
    g.mask_mode = MaskMode::none;
    MemoryBank bank(8);
    RngState r1(321), r2(321);
    const Tensor guided = guided_generate(dp, nullptr, guide, 1, g, bank, sched, r1).image;
    const Tensor plain = plain_generate(dp, 1, g.s, sched, r2);
    h.check("guidance: vanishing interventions reduce to plain sampling (bitwise)",
            bits_equal(guided, plain));
  }

  // model-level invariants: finiteness and attention determinism
  {
    const DenoiserConfig dc = tiny_denoiser_cfg();
    RngState ir(48);
    const DenoiserParams dp = init_denoiser(dc, ir);
    bool ok = true;
    for (double v : {-10.0, 10.0}) {
      auto [eps, attn] = predict_noise(dp, Tensor::full(dc.image_shape(), v), embed_class(dp, 0), 4);
      ok = ok && eps.all_finite() && attn.all_finite();
    }
    RngState rr(49);
    const Tensor x = ops::scale(rr.gaussian_tensor(dc.image_shape()), 10.0);
    auto [e1, a1] = predict_noise(dp, x, embed_class(dp, 1), 3);
    auto [e2, a2] = predict_noise(dp, x, embed_class(dp, 1), 3);
    ok = ok && e1.all_finite() && bits_equal(e1, e2) && bits_equal(a1, a2);
    ok = ok && std::abs(ops::sum(a1) - 1.0) <= 1e-9;
    h.check("denoiser: finite on bounded inputs; attention deterministic, sums to 1", ok);
  }
}

void run_loop_checks(Harness& h) {
  // evaluation purity and the mining subset property
  {
    const ClassifierConfig cc = tiny_classifier_cfg();
    RngState r(51);
    const ClassifierParams cp = init_classifier(cc, r);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) {
      images.push_back(r.gaussian_tensor(cc.image_shape()));
      labels.push_back(static_cast<int>(r.next_u64() % cc.num_classes));
    }
    const std::vector<Tensor> snapshot = images;
    const EvalReport r1 = evaluate(cp, images, labels);
    const EvalReport r2 = evaluate(cp, images, labels);
    bool pure = r1.accuracy == r2.accuracy && r1.per_sample.size() == images.size();
    for (size_t i = 0; i < images.size(); ++i) {
      pure = pure && bits_equal(images[i], snapshot[i]) &&
             r1.per_sample[i].predicted == r2.per_sample[i].predicted &&
             r1.per_sample[i].confidence == r2.per_sample[i].confidence;
    }
    h.check("classifier: evaluate is pure and deterministic", pure);

    const auto mis = find_hard_samples(r1, {SelectionRule::Kind::misclassified, 0.5});
    const auto all_low = find_hard_samples(r1, {SelectionRule::Kind::confidence_below, 1.0});
    bool subset = true;
    for (int i : mis)
      subset = subset && std::find(all_low.begin(), all_low.end(), i) != all_low.end();
    h.check("classifier: misclassified subset of confidence_below(1.0)", subset);
  }

  // stratified partition
  {
    ShapeDatasetSpec spec;
    spec.per_class = 30;
    spec.seed = 5;
    const std::vector<Sample> data = generate_shapes_dataset(spec);
    const Partition p = partition_dataset(data, 24, 7);
    std::vector<char> seen(data.size(), 0);
    for (int i : p.train_indices) seen[i]++;
    for (int i : p.val_indices) seen[i]++;
    bool ok = p.val_indices.size() == 24 &&
              p.train_indices.size() + p.val_indices.size() == data.size();
    for (char c : seen) ok = ok && c == 1;
    std::map<int, int> val_counts;
    for (int i : p.val_indices) val_counts[data[i].label]++;
    for (auto& [cls, count] : val_counts) ok = ok && std::abs(count - 6) <= 1;
    const Partition empty = partition_dataset(data, 0, 7);
    ok = ok && empty.val_indices.empty() && empty.train_indices.size() == data.size();
    h.check("loop: partition disjoint, exhaustive, stratified within one", ok);
  }

  // curriculum probability values and empirical frequency
  {
    bool ok = adversarial_probability(0, 20) == 0.0 && adversarial_probability(20, 20) == 0.5 &&
              adversarial_probability(10, 20) == 0.25;
    const double p = adversarial_probability(7, 20);
    int hits = 0;
    const int n = 2000;
    for (int g = 0; g < n; ++g) {
      RngState r = RngState(900).fork("gen/3/" + std::to_string(g));
      if (r.uniform() < p) ++hits;
    }
    const double freq = static_cast<double>(hits) / n;
    const double tol = 3.0 * std::sqrt(p * (1.0 - p) / n);
    ok = ok && std::abs(freq - p) < tol;
    h.check("loop: adversarial probability values and 3-sigma empirical frequency", ok,
            "freq " + std::to_string(freq) + " want " + std::to_string(p));
  }

  // micro end-to-end: determinism, budget accounting, monotone growth,
  // real_only == gen_per_epoch 0
  {
    ShapeDatasetSpec spec;
    spec.per_class = 12;
    spec.image_size = 8;
    spec.jitter = 0.08;
    spec.scale_min = 0.18;
    spec.scale_max = 0.25;
    spec.seed = 6;
    const std::vector<Sample> data = generate_shapes_dataset(spec);
    const Splits splits = split_dataset(data, 8, 8, 77);

    const DenoiserConfig dc = tiny_denoiser_cfg();
    RngState ir(52);
    const DenoiserParams dp = init_denoiser(dc, ir);
    const NoiseSchedule sched = build_schedule(ScheduleKind::linear, 8, 0.01, 0.4);

    ExperimentConfig ec;
    ec.total_epochs = 4;
    ec.gen_per_epoch = 3;
    ec.gen_stop_fraction = 0.5;
    ec.guidance.s = 3.0;
    ec.guidance.i = 4.0;
    ec.guidance.grad_window = 2;
    ec.guidance.rho = 20.0;
    ec.guidance.adversarial = true;
    ec.batch = 8;
    ec.seed = 13;
    ec.classifier = tiny_classifier_cfg();
    ec.classifier.num_classes = 4;

    const LoopResult a =
        run_active_loop(ec, splits.train, splits.val, splits.test, dp, sched, LoopMode::actgen);
    const LoopResult b =
        run_active_loop(ec, splits.train, splits.val, splits.test, dp, sched, LoopMode::actgen);
    bool det = a.metrics.size() == b.metrics.size() && a.lineage.size() == b.lineage.size();
    for (size_t i = 0; det && i < a.metrics.size(); ++i)
      det = a.metrics[i].train_loss == b.metrics[i].train_loss &&
            a.metrics[i].val_acc == b.metrics[i].val_acc &&
            a.metrics[i].test_acc == b.metrics[i].test_acc;
    for (size_t i = 0; det && i < a.lineage.size(); ++i)
      det = a.lineage[i].guide_index == b.lineage[i].guide_index &&
            a.lineage[i].adversarial == b.lineage[i].adversarial;
    h.check("loop: identical (config, seed) reproduces metrics and lineage", det);

    long prev_cum = 0;
    bool growth = true;
    long sum_increments = 0;
    for (const EpochMetrics& m : a.metrics) {
      const long inc = m.n_generated_cum - prev_cum;
      growth = growth && inc >= 0 && inc <= ec.gen_per_epoch;
      sum_increments += inc;
      prev_cum = m.n_generated_cum;
    }
    growth = growth && sum_increments == a.metrics.back().n_generated_cum &&
             a.metrics.back().n_generated_cum == static_cast<long>(a.lineage.size()) &&
             a.metrics.back().n_generated_cum == 2 * 3;  // first half of 4 epochs, 3 per epoch
    h.check("loop: monotone growth and exact budget accounting", growth);

    bool lineage_ok = true;
    for (const LineageRecord& rec : a.lineage)
      lineage_ok = lineage_ok && rec.guide_index >= 0 &&
                   rec.guide_index < static_cast<int>(splits.val.size()) &&
                   rec.class_id == splits.val[rec.guide_index].label;
    h.check("loop: every generated record points at a validation guide", lineage_ok);

    ExperimentConfig zero = ec;
    zero.gen_per_epoch = 0;
    const LoopResult c =
        run_active_loop(zero, splits.train, splits.val, splits.test, dp, sched, LoopMode::actgen);
    const LoopResult d =
        run_active_loop(zero, splits.train, splits.val, splits.test, dp, sched, LoopMode::real_only);
    bool same = c.metrics.size() == d.metrics.size();
    for (size_t i = 0; same && i < c.metrics.size(); ++i)
      same = c.metrics[i].train_loss == d.metrics[i].train_loss &&
             c.metrics[i].test_acc == d.metrics[i].test_acc;
    h.check("loop: real_only equals gen_per_epoch=0 bitwise", same);

    const LoopResult rg =
        run_active_loop(ec, splits.train, splits.val, splits.test, dp, sched, LoopMode::random_gen);
    h.check("loop: random_gen baseline spends the same budget",
            rg.metrics.back().n_generated_cum == a.metrics.back().n_generated_cum);
  }
}

void run_persistence_checks(Harness& h) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "actgen_verify";
  fs::create_directories(dir);

  // dataset round trip + corruption detection
  {
    ShapeDatasetSpec spec;
    spec.per_class = 4;
    spec.image_size = 8;
    spec.jitter = 0.08;
    spec.scale_min = 0.18;
    spec.scale_max = 0.25;
    spec.seed = 3;
    const std::vector<Sample> data = generate_shapes_dataset(spec);
    const std::string path = (dir / "d.bin").string();
    save_dataset(path, spec, data);
    const LoadedDataset back = load_dataset(path);
    bool ok = back.samples.size() == data.size() && back.spec.seed == spec.seed;
    for (size_t i = 0; ok && i < data.size(); ++i)
      ok = bits_equal(back.samples[i].image, data[i].image) &&
           bits_equal(back.samples[i].gt_mask, data[i].gt_mask) &&
           back.samples[i].label == data[i].label;
    h.check("persistence: dataset round trip is bitwise lossless", ok);

    // flip one byte in the middle: checksum must catch it
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(200);
      char c;
      f.seekg(200);
      f.get(c);
      f.seekp(200);
      f.put(static_cast<char>(c ^ 0x40));
    }
    bool checksum_caught = false;
    try {
      load_dataset(path);
    } catch (const ChecksumError&) {
      checksum_caught = true;
    } catch (const std::exception&) {
    }
    h.check("persistence: corrupted byte raises a checksum error", checksum_caught);

    save_dataset(path, spec, data);
    fs::resize_file(path, fs::file_size(path) / 2);
    bool truncation_caught = false;
    try {
      load_dataset(path);
    } catch (const TruncationError&) {
      truncation_caught = true;
    } catch (const std::exception&) {
    }
    h.check("persistence: truncation raises a truncation error", truncation_caught);

    save_dataset(path, spec, {});
    h.check("persistence: empty dataset round trips", load_dataset(path).samples.empty());
  }

  // checkpoint round trip
  {
    RngState r(61);
    const DenoiserParams p = init_denoiser(tiny_denoiser_cfg(), r);
    const std::string path = (dir / "c.ckpt").string();
    save_denoiser(path, p);
    const DenoiserParams q = load_denoiser(path);
    bool ok = q.cfg.feat == p.cfg.feat && q.cfg.cond_dim == p.cfg.cond_dim;
    auto pa = p.named_params();
    auto qa = q.named_params();
    for (size_t i = 0; ok && i < pa.size(); ++i) ok = bits_equal(*pa[i].second, *qa[i].second);
    h.check("persistence: checkpoint round trip is bitwise lossless", ok);
  }

  // image dump byte mapping
  {
    h.check("image: endpoint byte mapping",
            pixel_byte(-1.0) == 0 && pixel_byte(1.0) == 255 && pixel_byte(0.0) == 128);
    const Tensor t({1, 2, 2}, {-1.0, 1.0, 0.0, 0.5});
    const std::string path = (dir / "img.pgm").string();
    dump_image(t, path);
    std::ifstream f(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string want_header = "P5\n2 2\n255\n";
    const unsigned char want_pixels[4] = {0, 255, 128, 191};
    bool ok = content.size() == want_header.size() + 4 &&
              content.compare(0, want_header.size(), want_header) == 0;
    for (int i = 0; ok && i < 4; ++i)
      ok = static_cast<unsigned char>(content[want_header.size() + i]) == want_pixels[i];
    h.check("image: known 2x2 tensor produces exact file bytes", ok);
  }

  // formula spot values (paper constants)
  {
    h.check("eta: confidence-to-guidance spot values",
            std::abs(confidence_to_guidance(0.5, 30, 10, 5, 0.5) - 20.0) < 1e-12 &&
                std::abs(confidence_to_guidance(1.0, 30, 10, 5, 0.5) - 5.2007) < 1e-3 &&
                std::abs(confidence_to_guidance(0.0, 30, 10, 5, 0.5) - 34.7993) < 1e-3);
  }

  fs::remove_all(dir);
}

}  // namespace

int run_verify(std::ostream& out) {
  Harness h{out};
  const std::pair<const char*, void (*)(Harness&)> sections[] = {
      {"kernel", run_kernel_checks},        {"diffusion", run_diffusion_checks},
      {"gradients", run_gradient_oracle_checks}, {"guidance", run_guidance_checks},
      {"loop", run_loop_checks},            {"persistence", run_persistence_checks}};
  for (const auto& [name, fn] : sections) {
    try {
      fn(h);
    } catch (const std::exception& e) {
      h.check((std::string(name) + ": section aborted").c_str(), false, e.what());
    }
  }
  out << (h.failures == 0 ? "verify: all checks passed\n"
                          : "verify: " + std::to_string(h.failures) + " check(s) FAILED\n");
  return h.failures;
}

}  // namespace actgen
