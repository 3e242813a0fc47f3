#include "actgen/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace actgen::ad {

using detail::require;

Value Tape::leaf(Tensor t, bool requires_grad) {
  return emit(std::move(t), requires_grad, nullptr);
}

Value Tape::emit(Tensor value, bool needs_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  grads_.emplace_back();
  return Value{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Value v) const {
  require(v.valid() && v.node < static_cast<int>(nodes_.size()),
          "tape: value does not live on this tape");
}

const Tensor& Tape::val(Value v) const {
  check(v);
  return nodes_[v.node].value;
}

bool Tape::requires_grad(Value v) const {
  check(v);
  return nodes_[v.node].needs_grad;
}

void Tape::accumulate(Value v, const Tensor& g) {
  check(v);
  Tensor& buf = grads_[v.node];
  if (buf.data.empty() && !g.data.empty()) {
    buf = g;
    return;
  }
  require(buf.same_shape(g), "tape: gradient shape mismatch " + shape_str(buf.shape) + " vs " +
                                 shape_str(g.shape));
  for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
}

void Tape::backward(Value loss) {
  check(loss);
  require(!ran_backward_, "tape: backward() already ran");
  require(nodes_[loss.node].value.numel() == 1,
          "tape: loss must be scalar, got shape " + shape_str(nodes_[loss.node].value.shape));
  ran_backward_ = true;
  grads_[loss.node] = Tensor::full(nodes_[loss.node].value.shape, 1.0);
  for (int i = loss.node; i >= 0; --i) {
    if (grads_[i].data.empty() || !nodes_[i].back) continue;
    ++visits_;
    nodes_[i].back(*this, grads_[i]);
  }
}

Tensor Tape::grad(Value v) const {
  check(v);
  if (grads_[v.node].data.empty()) return Tensor::zeros(nodes_[v.node].value.shape);
  return grads_[v.node];
}

namespace {

bool any_grad(const Tape& t, std::initializer_list<Value> vs) {
  for (Value v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}

}  // namespace

Value add(Tape& t, Value a, Value b) {
  Tensor out = ops::add(t.val(a), t.val(b));
  if (!any_grad(t, {a, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, g);
  });
}

Value sub(Tape& t, Value a, Value b) {
  Tensor out = ops::sub(t.val(a), t.val(b));
  if (!any_grad(t, {a, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, ops::scale(g, -1.0));
  });
}

Value mul(Tape& t, Value a, Value b) {
  Tensor out = ops::hadamard(t.val(a), t.val(b));
  if (!any_grad(t, {a, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, ops::hadamard(g, tp.val(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, ops::hadamard(g, tp.val(a)));
  });
}

Value affine(Tape& t, Value x, double k, double c) {
  Tensor out = t.val(x);
  for (auto& v : out.data) v = k * v + c;
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true,
                [x, k](Tape& tp, const Tensor& g) { tp.accumulate(x, ops::scale(g, k)); });
}

Value add_const(Tape& t, Value x, const Tensor& c) {
  Tensor out = ops::add(t.val(x), c);
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true,
                [x](Tape& tp, const Tensor& g) { tp.accumulate(x, g); });
}

Value matmul(Tape& t, Value a, Value b) {
  Tensor out = ops::matmul(t.val(a), t.val(b));
  if (!any_grad(t, {a, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [a, b](Tape& tp, const Tensor& g) {
    const Tensor& A = tp.val(a);
    const Tensor& B = tp.val(b);
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    if (tp.requires_grad(a)) {
      // gA = g * B^T
      Tensor ga({m, k});
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const double gv = g.data[static_cast<size_t>(i) * n + j];
          for (int l = 0; l < k; ++l)
            ga.data[static_cast<size_t>(i) * k + l] += gv * B.data[static_cast<size_t>(l) * n + j];
        }
      tp.accumulate(a, ga);
    }
    if (tp.requires_grad(b)) {
      // gB = A^T * g
      Tensor gb({k, n});
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
          const double av = A.data[static_cast<size_t>(i) * k + l];
          for (int j = 0; j < n; ++j)
            gb.data[static_cast<size_t>(l) * n + j] += av * g.data[static_cast<size_t>(i) * n + j];
        }
      tp.accumulate(b, gb);
    }
  });
}

Value reshape(Tape& t, Value x, std::vector<int> shape) {
  const Tensor& in = t.val(x);
  require(Tensor::numel_of(shape) == in.numel(),
          "reshape: cannot view " + shape_str(in.shape) + " as " + shape_str(shape));
  Tensor out(shape, in.data);
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor(tp.val(x).shape, g.data));
  });
}

Value slice0(Tape& t, Value x, int start, int len) {
  const Tensor& in = t.val(x);
  require(!in.shape.empty() && start >= 0 && len >= 0 && start + len <= in.shape[0],
          "slice0: range [" + std::to_string(start) + "," + std::to_string(start + len) +
              ") out of bounds for " + shape_str(in.shape));
  const std::int64_t stride = in.shape[0] ? in.numel() / in.shape[0] : 0;
  std::vector<int> oshape = in.shape;
  oshape[0] = len;
  Tensor out(oshape);
  std::copy(in.data.begin() + start * stride, in.data.begin() + (start + len) * stride,
            out.data.begin());
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x, start, stride](Tape& tp, const Tensor& g) {
    Tensor gx = Tensor::zeros(tp.val(x).shape);
    std::copy(g.data.begin(), g.data.end(), gx.data.begin() + start * stride);
    tp.accumulate(x, gx);
  });
}

Value concat0(Tape& t, const std::vector<Value>& xs) {
  require(!xs.empty(), "concat0: no inputs");
  std::vector<int> oshape = t.val(xs[0]).shape;
  const std::int64_t stride = oshape[0] ? t.val(xs[0]).numel() / oshape[0] : 0;
  int rows = 0;
  bool needs = false;
  for (Value v : xs) {
    const Tensor& in = t.val(v);
    require(in.shape.size() == oshape.size(), "concat0: rank mismatch");
    for (size_t d = 1; d < oshape.size(); ++d)
      require(in.shape[d] == oshape[d], "concat0: trailing shape mismatch");
    rows += in.shape[0];
    needs = needs || t.requires_grad(v);
  }
  oshape[0] = rows;
  Tensor out(oshape);
  std::int64_t off = 0;
  for (Value v : xs) {
    const Tensor& in = t.val(v);
    std::copy(in.data.begin(), in.data.end(), out.data.begin() + off);
    off += in.numel();
  }
  if (!needs) return t.emit(std::move(out), false, nullptr);
  std::vector<Value> parts = xs;
  return t.emit(std::move(out), true, [parts, stride](Tape& tp, const Tensor& g) {
    std::int64_t off = 0;
    for (Value v : parts) {
      const Tensor& in = tp.val(v);
      if (tp.requires_grad(v)) {
        Tensor gv(in.shape);
        std::copy(g.data.begin() + off, g.data.begin() + off + in.numel(), gv.data.begin());
        tp.accumulate(v, gv);
      }
      off += in.numel();
    }
  });
}

namespace {

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
  const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
  const int F = w.shape[0], K = w.shape[2];
  Tensor out({F, H, W});
  for (int f = 0; f < F; ++f) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double acc = b.data[f];
        for (int c = 0; c < C; ++c) {
          for (int ky = 0; ky < K; ++ky) {
            const int iy = y + ky - pad;
            if (iy < 0 || iy >= H) continue;
            const double* xrow = &x.data[(static_cast<size_t>(c) * H + iy) * W];
            const double* wrow = &w.data[((static_cast<size_t>(f) * C + c) * K + ky) * K];
            for (int kx = 0; kx < K; ++kx) {
              const int ix = xx + kx - pad;
              if (ix < 0 || ix >= W) continue;
              acc += xrow[ix] * wrow[kx];
            }
          }
        }
        out.data[(static_cast<size_t>(f) * H + y) * W + xx] = acc;
      }
    }
  }
  return out;
}

}  // namespace

Value conv2d(Tape& t, Value x, Value w, Value b, int pad) {
  const Tensor& xin = t.val(x);
  const Tensor& win = t.val(w);
  const Tensor& bin = t.val(b);
  require(xin.shape.size() == 3 && win.shape.size() == 4 && bin.shape.size() == 1,
          "conv2d: expected x:(C,H,W) w:(F,C,K,K) b:(F)");
  require(win.shape[1] == xin.shape[0] && win.shape[2] == win.shape[3] &&
              bin.shape[0] == win.shape[0],
          "conv2d: incompatible shapes x" + shape_str(xin.shape) + " w" + shape_str(win.shape));
  Tensor out = conv2d_forward(xin, win, bin, pad);
  if (!any_grad(t, {x, w, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x, w, b, pad](Tape& tp, const Tensor& g) {
    const Tensor& xin = tp.val(x);
    const Tensor& win = tp.val(w);
    const int C = xin.shape[0], H = xin.shape[1], W = xin.shape[2];
    const int F = win.shape[0], K = win.shape[2];
    if (tp.requires_grad(b)) {
      Tensor gb({F});
      for (int f = 0; f < F; ++f) {
        double s = 0.0;
        const double* grow = &g.data[static_cast<size_t>(f) * H * W];
        for (int i = 0; i < H * W; ++i) s += grow[i];
        gb.data[f] = s;
      }
      tp.accumulate(b, gb);
    }
    if (tp.requires_grad(w)) {
      Tensor gw(win.shape);
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < K; ++ky)
            for (int kx = 0; kx < K; ++kx) {
              double s = 0.0;
              for (int y = 0; y < H; ++y) {
                const int iy = y + ky - pad;
                if (iy < 0 || iy >= H) continue;
                const double* grow = &g.data[(static_cast<size_t>(f) * H + y) * W];
                const double* xrow = &xin.data[(static_cast<size_t>(c) * H + iy) * W];
                for (int xx = 0; xx < W; ++xx) {
                  const int ix = xx + kx - pad;
                  if (ix < 0 || ix >= W) continue;
                  s += grow[xx] * xrow[ix];
                }
              }
              gw.data[((static_cast<size_t>(f) * C + c) * K + ky) * K + kx] = s;
            }
      tp.accumulate(w, gw);
    }
    if (tp.requires_grad(x)) {
      Tensor gx(xin.shape);
      for (int f = 0; f < F; ++f)
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < K; ++ky) {
            const double* wrow = &win.data[((static_cast<size_t>(f) * C + c) * K + ky) * K];
            for (int y = 0; y < H; ++y) {
              const int iy = y + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const double* grow = &g.data[(static_cast<size_t>(f) * H + y) * W];
              double* gxrow = &gx.data[(static_cast<size_t>(c) * H + iy) * W];
              for (int kx = 0; kx < K; ++kx) {
                const int shift = kx - pad;
                const int x0 = std::max(0, -shift), x1 = std::min(W, W - shift);
                const double wv = wrow[kx];
                for (int xx = x0; xx < x1; ++xx) gxrow[xx + shift] += wv * grow[xx];
              }
            }
          }
      tp.accumulate(x, gx);
    }
  });
}

Value avgpool2(Tape& t, Value x) {
  const Tensor& in = t.val(x);
  require(in.shape.size() == 3 && in.shape[1] % 2 == 0 && in.shape[2] % 2 == 0,
          "avgpool2: need (C,H,W) with even H,W, got " + shape_str(in.shape));
  const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
  Tensor out({C, H / 2, W / 2});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H / 2; ++y)
      for (int xx = 0; xx < W / 2; ++xx)
        out.at(c, y, xx) = 0.25 * (in.at(c, 2 * y, 2 * xx) + in.at(c, 2 * y, 2 * xx + 1) +
                                   in.at(c, 2 * y + 1, 2 * xx) + in.at(c, 2 * y + 1, 2 * xx + 1));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    const Tensor& in = tp.val(x);
    Tensor gx(in.shape);
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H / 2; ++y)
        for (int xx = 0; xx < W / 2; ++xx) {
          const double gv = 0.25 * g.at(c, y, xx);
          gx.at(c, 2 * y, 2 * xx) += gv;
          gx.at(c, 2 * y, 2 * xx + 1) += gv;
          gx.at(c, 2 * y + 1, 2 * xx) += gv;
          gx.at(c, 2 * y + 1, 2 * xx + 1) += gv;
        }
    tp.accumulate(x, gx);
  });
}

Value channel_bias(Tape& t, Value x, Value b) {
  const Tensor& in = t.val(x);
  const Tensor& bias = t.val(b);
  require(in.shape.size() == 3 && bias.shape.size() == 1 && bias.shape[0] == in.shape[0],
          "channel_bias: x" + shape_str(in.shape) + " b" + shape_str(bias.shape));
  Tensor out = in;
  const int C = in.shape[0];
  const std::int64_t hw = in.numel() / C;
  for (int c = 0; c < C; ++c)
    for (std::int64_t i = 0; i < hw; ++i) out.data[c * hw + i] += bias.data[c];
  if (!any_grad(t, {x, b})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x, b, hw](Tape& tp, const Tensor& g) {
    if (tp.requires_grad(x)) tp.accumulate(x, g);
    if (tp.requires_grad(b)) {
      const int C = tp.val(b).shape[0];
      Tensor gb({C});
      for (int c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) s += g.data[c * hw + i];
        gb.data[c] = s;
      }
      tp.accumulate(b, gb);
    }
  });
}

Value global_mean(Tape& t, Value x) {
  const Tensor& in = t.val(x);
  require(in.shape.size() == 3, "global_mean: need (C,H,W), got " + shape_str(in.shape));
  const int C = in.shape[0];
  const std::int64_t hw = in.numel() / C;
  Tensor out({C});
  for (int c = 0; c < C; ++c) {
    double s = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) s += in.data[c * hw + i];
    out.data[c] = s / static_cast<double>(hw);
  }
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x, hw](Tape& tp, const Tensor& g) {
    Tensor gx(tp.val(x).shape);
    const int C = g.shape[0];
    for (int c = 0; c < C; ++c) {
      const double gv = g.data[c] / static_cast<double>(hw);
      for (std::int64_t i = 0; i < hw; ++i) gx.data[c * hw + i] = gv;
    }
    tp.accumulate(x, gx);
  });
}

Value linear(Tape& t, Value w, Value b, Value x) {
  const Tensor& W = t.val(w);
  const Tensor& bias = t.val(b);
  const Tensor& in = t.val(x);
  require(W.shape.size() == 2 && in.shape.size() == 1 && bias.shape.size() == 1 &&
              W.shape[1] == in.shape[0] && W.shape[0] == bias.shape[0],
          "linear: w" + shape_str(W.shape) + " b" + shape_str(bias.shape) + " x" +
              shape_str(in.shape));
  const int out_n = W.shape[0], in_n = W.shape[1];
  Tensor out({out_n});
  for (int i = 0; i < out_n; ++i) {
    double s = bias.data[i];
    const double* wrow = &W.data[static_cast<size_t>(i) * in_n];
    for (int j = 0; j < in_n; ++j) s += wrow[j] * in.data[j];
    out.data[i] = s;
  }
  if (!any_grad(t, {w, b, x})) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [w, b, x](Tape& tp, const Tensor& g) {
    const Tensor& W = tp.val(w);
    const Tensor& in = tp.val(x);
    const int out_n = W.shape[0], in_n = W.shape[1];
    if (tp.requires_grad(b)) tp.accumulate(b, g);
    if (tp.requires_grad(w)) {
      Tensor gw(W.shape);
      for (int i = 0; i < out_n; ++i)
        for (int j = 0; j < in_n; ++j)
          gw.data[static_cast<size_t>(i) * in_n + j] = g.data[i] * in.data[j];
      tp.accumulate(w, gw);
    }
    if (tp.requires_grad(x)) {
      Tensor gx({in_n});
      for (int i = 0; i < out_n; ++i) {
        const double gv = g.data[i];
        const double* wrow = &W.data[static_cast<size_t>(i) * in_n];
        for (int j = 0; j < in_n; ++j) gx.data[j] += gv * wrow[j];
      }
      tp.accumulate(x, gx);
    }
  });
}

Value sum(Tape& t, Value x) {
  Tensor out = Tensor::scalar(ops::sum(t.val(x)));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor::full(tp.val(x).shape, g.data[0]));
  });
}

Value mean(Tape& t, Value x) {
  const double n = static_cast<double>(t.val(x).numel());
  Tensor out = Tensor::scalar(ops::mean(t.val(x)));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x, n](Tape& tp, const Tensor& g) {
    tp.accumulate(x, Tensor::full(tp.val(x).shape, g.data[0] / n));
  });
}

Value relu(Tape& t, Value x) {
  Tensor out = ops::relu(t.val(x));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    const Tensor& in = tp.val(x);
    Tensor gx = g;
    for (size_t i = 0; i < gx.data.size(); ++i)
      if (in.data[i] <= 0.0) gx.data[i] = 0.0;
    tp.accumulate(x, gx);
  });
}

Value gelu(Tape& t, Value x) {
  Tensor out = ops::gelu(t.val(x));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    const Tensor& in = tp.val(x);
    Tensor gx = g;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
    for (size_t i = 0; i < gx.data.size(); ++i) {
      const double v = in.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      gx.data[i] *= cdf + v * pdf;
    }
    tp.accumulate(x, gx);
  });
}

Value softmax(Tape& t, Value x) {
  Tensor out = ops::softmax(t.val(x));
  if (!t.requires_grad(x)) return t.emit(std::move(out), false, nullptr);
  return t.emit(std::move(out), true, [x](Tape& tp, const Tensor& g) {
    const Tensor y = ops::softmax(tp.val(x));
    double dot = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) dot += g.data[i] * y.data[i];
    Tensor gx = y;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] = y.data[i] * (g.data[i] - dot);
    tp.accumulate(x, gx);
  });
}

Value l2_dist(Tape& t, Value x, const Tensor& ref) {
  const Tensor& in = t.val(x);
  require(in.same_shape(ref), "l2_dist: shape mismatch " + shape_str(in.shape) + " vs " +
                                  shape_str(ref.shape));
  const double d = ops::l2_dist(in, ref);
  if (!t.requires_grad(x)) return t.emit(Tensor::scalar(d), false, nullptr);
  Tensor refc = ref;
  return t.emit(Tensor::scalar(d), true, [x, refc, d](Tape& tp, const Tensor& g) {
    if (d < 1e-300) return;  // subgradient 0 at the origin
    const Tensor& in = tp.val(x);
    Tensor gx = in;
    const double k = g.data[0] / d;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] = k * (in.data[i] - refc.data[i]);
    tp.accumulate(x, gx);
  });
}

Value cross_entropy(Tape& t, Value logits, int label) {
  const Tensor& z = t.val(logits);
  require(z.shape.size() == 1, "cross_entropy: logits must be 1-D, got " + shape_str(z.shape));
  require(label >= 0 && label < z.shape[0],
          "cross_entropy: label " + std::to_string(label) + " out of range for " +
              shape_str(z.shape));
  double m = z.data[0];
  for (double v : z.data) m = std::max(m, v);
  double lse = 0.0;
  for (double v : z.data) lse += std::exp(v - m);
  lse = m + std::log(lse);
  const double loss = lse - z.data[label];
  if (!t.requires_grad(logits)) return t.emit(Tensor::scalar(loss), false, nullptr);
  return t.emit(Tensor::scalar(loss), true, [logits, label](Tape& tp, const Tensor& g) {
    Tensor p = ops::softmax(tp.val(logits));
    p.data[label] -= 1.0;
    tp.accumulate(logits, ops::scale(p, g.data[0]));
  });
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
  require(h > 0.0, "finite_diff_grad: step must be positive");
  Tensor g(x.shape);
  Tensor probe = x;
  for (size_t i = 0; i < x.data.size(); ++i) {
    probe.data[i] = x.data[i] + h;
    const double fp = f(probe);
    probe.data[i] = x.data[i] - h;
    const double fm = f(probe);
    probe.data[i] = x.data[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff_grad: non-finite evaluation at coordinate " +
                               std::to_string(i));
    g.data[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace actgen::ad
