#include "actgen/denoiser.hpp"

#include <cmath>

#include "actgen/optim.hpp"

namespace actgen {

namespace {

Tensor he_init(std::vector<int> shape, double fan_in, RngState& rng, double gain = 1.0) {
  Tensor t = rng.gaussian_tensor(std::move(shape));
  const double s = gain * std::sqrt(2.0 / fan_in);
  for (auto& v : t.data) v *= s;
  return t;
}

/// Sinusoidal embedding of an integer timestep.
Tensor timestep_embedding(int t, int dim) {
  Tensor e({dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
    e.data[2 * i] = std::sin(t * freq);
    e.data[2 * i + 1] = std::cos(t * freq);
  }
  return e;
}

}  // namespace

std::vector<std::pair<const char*, Tensor*>> DenoiserParams::named_params() {
  return {{"class_embed", &class_embed},
          {"null_embed", &null_embed},
          {"temb_w", &temb_w},
          {"temb_b", &temb_b},
          {"conv1_w", &conv1_w},
          {"conv1_b", &conv1_b},
          {"wq", &wq},
          {"bq", &bq},
          {"wk", &wk},
          {"bk", &bk},
          {"wv", &wv},
          {"bv", &bv},
          {"wo", &wo},
          {"bo", &bo},
          {"conv2_w", &conv2_w},
          {"conv2_b", &conv2_b},
          {"out_w", &out_w},
          {"out_b", &out_b}};
}

std::vector<std::pair<const char*, const Tensor*>> DenoiserParams::named_params() const {
  auto mut = const_cast<DenoiserParams*>(this)->named_params();
  std::vector<std::pair<const char*, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [n, t] : mut) out.emplace_back(n, t);
  return out;
}

DenoiserParams init_denoiser(const DenoiserConfig& cfg, RngState& rng) {
  DenoiserParams p;
  p.cfg = cfg;
  const int F = cfg.feat, C = cfg.channels, D = cfg.cond_dim, A = cfg.heads * cfg.head_dim;
  p.class_embed = rng.gaussian_tensor({cfg.num_classes, D});
  p.null_embed = rng.gaussian_tensor({D});
  p.temb_w = he_init({F, cfg.temb_dim}, cfg.temb_dim, rng);
  p.temb_b = Tensor::zeros({F});
  p.conv1_w = he_init({F, C, 3, 3}, 9.0 * C, rng);
  p.conv1_b = Tensor::zeros({F});
  p.wq = he_init({A, F, 1, 1}, F, rng);
  p.bq = Tensor::zeros({A});
  p.wk = he_init({A, D}, D, rng);
  p.bk = Tensor::zeros({A});
  p.wv = he_init({A, D}, D, rng);
  p.bv = Tensor::zeros({A});
  p.wo = he_init({F, A, 1, 1}, A, rng, 0.5);
  p.bo = Tensor::zeros({F});
  p.conv2_w = he_init({F, F, 3, 3}, 9.0 * F, rng);
  p.conv2_b = Tensor::zeros({F});
  p.out_w = he_init({C, F, 3, 3}, 9.0 * F, rng, 0.2);  // small head keeps early eps_hat tame
  p.out_b = Tensor::zeros({C});
  return p;
}

DenoiserLeaves denoiser_leaves(ad::Tape& tape, const DenoiserParams& p, bool rg) {
  DenoiserLeaves l;
  l.class_embed = tape.leaf(p.class_embed, rg);
  l.null_embed = tape.leaf(p.null_embed, rg);
  l.temb_w = tape.leaf(p.temb_w, rg);
  l.temb_b = tape.leaf(p.temb_b, rg);
  l.conv1_w = tape.leaf(p.conv1_w, rg);
  l.conv1_b = tape.leaf(p.conv1_b, rg);
  l.wq = tape.leaf(p.wq, rg);
  l.bq = tape.leaf(p.bq, rg);
  l.wk = tape.leaf(p.wk, rg);
  l.bk = tape.leaf(p.bk, rg);
  l.wv = tape.leaf(p.wv, rg);
  l.bv = tape.leaf(p.bv, rg);
  l.wo = tape.leaf(p.wo, rg);
  l.bo = tape.leaf(p.bo, rg);
  l.conv2_w = tape.leaf(p.conv2_w, rg);
  l.conv2_b = tape.leaf(p.conv2_b, rg);
  l.out_w = tape.leaf(p.out_w, rg);
  l.out_b = tape.leaf(p.out_b, rg);
  return l;
}

std::vector<ad::Value> leaf_list(const DenoiserLeaves& l) {
  return {l.class_embed, l.null_embed, l.temb_w, l.temb_b, l.conv1_w, l.conv1_b, l.wq, l.bq,
          l.wk,          l.bk,         l.wv,     l.bv,     l.wo,      l.bo,      l.conv2_w,
          l.conv2_b,     l.out_w,      l.out_b};
}

DenoiserOut denoiser_forward(ad::Tape& tape, const DenoiserConfig& cfg, const DenoiserLeaves& l,
                             ad::Value x_t, ad::Value cond_vec, int t) {
  using namespace ad;
  const int H = cfg.height, W = cfg.width, HW = H * W;
  const int heads = cfg.heads, hd = cfg.head_dim;

  detail::require(tape.val(cond_vec).shape == std::vector<int>{cfg.cond_dim},
                  "denoiser_forward: condition dim " + shape_str(tape.val(cond_vec).shape) +
                      " does not match model cond_dim " + std::to_string(cfg.cond_dim));
  detail::require(tape.val(x_t).shape == cfg.image_shape(),
                  "denoiser_forward: x shape " + shape_str(tape.val(x_t).shape) +
                      " does not match model " + shape_str(cfg.image_shape()));

  // stem + timestep bias
  Value temb = tape.leaf(timestep_embedding(t, cfg.temb_dim));
  Value tbias = linear(tape, l.temb_w, l.temb_b, temb);             // (F)
  Value h = conv2d(tape, x_t, l.conv1_w, l.conv1_b, 1);             // (F,H,W)
  h = channel_bias(tape, h, tbias);
  h = gelu(tape, h);

  // cross-attention: queries per pixel, a single key/value token from the
  // condition. The softmax runs over spatial positions, so the map says where
  // the condition attends; the value write-back is concentrated there.
  Value q = conv2d(tape, h, l.wq, l.bq, 0);                         // (heads*hd,H,W)
  Value k = linear(tape, l.wk, l.bk, cond_vec);                     // (heads*hd)
  Value v = linear(tape, l.wv, l.bv, cond_vec);                     // (heads*hd)
  std::vector<Value> head_updates;
  Value attn_sum;
  const double inv_sqrt_hd = 1.0 / std::sqrt(static_cast<double>(hd));
  for (int hh = 0; hh < heads; ++hh) {
    Value qh = reshape(tape, slice0(tape, q, hh * hd, hd), {hd, HW});
    Value kh = reshape(tape, slice0(tape, k, hh * hd, hd), {1, hd});
    Value vh = reshape(tape, slice0(tape, v, hh * hd, hd), {hd, 1});
    Value scores = affine(tape, matmul(tape, kh, qh), inv_sqrt_hd);  // (1,HW)
    Value a = softmax(tape, scores);
    // scale by HW so uniform attention adds v everywhere with weight 1
    Value upd = affine(tape, matmul(tape, vh, a), static_cast<double>(HW));  // (hd,HW)
    head_updates.push_back(reshape(tape, upd, {hd, H, W}));
    attn_sum = hh == 0 ? a : add(tape, attn_sum, a);
  }
  Value attn = reshape(tape, affine(tape, attn_sum, 1.0 / heads), {1, H, W});
  Value u = concat0(tape, head_updates);                            // (heads*hd,H,W)
  h = add(tape, h, conv2d(tape, u, l.wo, l.bo, 0));

  // trunk + head
  h = gelu(tape, conv2d(tape, h, l.conv2_w, l.conv2_b, 1));
  Value eps = conv2d(tape, h, l.out_w, l.out_b, 1);                 // (C,H,W)
  return {eps, attn};
}

std::pair<Tensor, Tensor> predict_noise(const DenoiserParams& p, const Tensor& x_t,
                                        const ConditionEmbedding& cond, int t) {
  ad::Tape tape;
  DenoiserLeaves l = denoiser_leaves(tape, p, false);
  DenoiserOut out =
      denoiser_forward(tape, p.cfg, l, tape.leaf(x_t), tape.leaf(cond.vec), t);
  return {tape.val(out.eps), tape.val(out.attn)};
}

ConditionEmbedding embed_class(const DenoiserParams& p, std::optional<int> y) {
  ConditionEmbedding c;
  if (!y.has_value()) {
    c.class_id = -1;
    c.null_flag = true;
    c.vec = p.null_embed;
    return c;
  }
  detail::require(*y >= 0 && *y < p.cfg.num_classes,
                  "embed_class: label " + std::to_string(*y) + " out of range [0," +
                      std::to_string(p.cfg.num_classes) + ")");
  c.class_id = *y;
  c.null_flag = false;
  c.vec = Tensor({p.cfg.cond_dim});
  for (int i = 0; i < p.cfg.cond_dim; ++i)
    c.vec.data[i] = p.class_embed.data[static_cast<size_t>(*y) * p.cfg.cond_dim + i];
  return c;
}

DenoiserTrainStats train_denoiser(DenoiserParams& p, const std::vector<Tensor>& images,
                                  const std::vector<int>& labels, const NoiseSchedule& sched,
                                  int epochs, double drop_cond_prob, double lr, int batch,
                                  RngState& rng) {
  detail::require(!images.empty(), "train_denoiser: empty dataset");
  detail::require(images.size() == labels.size(), "train_denoiser: images/labels size mismatch");
  detail::require(drop_cond_prob >= 0.0 && drop_cond_prob <= 1.0,
                  "train_denoiser: drop_cond_prob outside [0,1]");
  const size_t n = images.size();
  Adam opt;
  DenoiserTrainStats stats;

  std::vector<Tensor*> param_ptrs;
  for (auto& [name, tp] : p.named_params()) param_ptrs.push_back(tp);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    RngState erng = rng.fork("epoch/" + std::to_string(epoch));
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[erng.next_u64() % i]);

    double loss_sum = 0.0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t b = std::min<size_t>(batch, n - start);
      ad::Tape tape;
      DenoiserLeaves l = denoiser_leaves(tape, p, true);
      ad::Value batch_loss;
      for (size_t i = 0; i < b; ++i) {
        const size_t idx = order[start + i];
        const int t = 1 + static_cast<int>(erng.next_u64() % sched.T);
        const Tensor eps = erng.gaussian_tensor(images[idx].shape);
        const Tensor x_t = forward_sample(images[idx], t, eps, sched);
        const bool drop = erng.uniform() < drop_cond_prob;
        ad::Value cond =
            drop ? l.null_embed
                 : ad::reshape(tape, ad::slice0(tape, l.class_embed, labels[idx], 1),
                               {p.cfg.cond_dim});
        DenoiserOut out = denoiser_forward(tape, p.cfg, l, tape.leaf(x_t), cond, t);
        ad::Value diff = ad::sub(tape, out.eps, tape.leaf(eps));
        ad::Value sample_loss = ad::mean(tape, ad::mul(tape, diff, diff));
        batch_loss = i == 0 ? sample_loss : ad::add(tape, batch_loss, sample_loss);
      }
      batch_loss = ad::affine(tape, batch_loss, 1.0 / static_cast<double>(b));
      tape.backward(batch_loss);
      loss_sum += tape.val(batch_loss).item() * static_cast<double>(b);

      std::vector<Tensor> grads;
      for (ad::Value v : leaf_list(l)) grads.push_back(tape.grad(v));
      opt.step(param_ptrs, grads, lr);
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(n));
  }
  return stats;
}

DenoiserFn make_denoiser_fn(const DenoiserParams& p) {
  return [&p](const Tensor& x_t, const ConditionEmbedding& cond, int t) {
    return predict_noise(p, x_t, cond, t);
  };
}

}  // namespace actgen
