#pragma once

#include <functional>
#include <vector>

#include "actgen/tensor.hpp"

namespace actgen::ad {

class Tape;

/// Handle to a node on a Tape. Invalid (node < 0) until assigned.
struct Value {
  int node = -1;
  bool valid() const { return node >= 0; }
};

/// Define-by-run reverse-mode tape over a small op set. Creation order is a
/// topological order, so the backward pass walks nodes once in reverse index
/// order. Nodes that cannot reach a gradient-requiring leaf record no
/// backward closure and cost only their forward value.
///
/// Tensors entering the tape are copied; a Tape owns every intermediate.
/// Recording is single-threaded per tape; distinct tapes are independent.
class Tape {
 public:
  Value leaf(Tensor t, bool requires_grad = false);

  const Tensor& val(Value v) const;
  bool requires_grad(Value v) const;
  size_t size() const { return nodes_.size(); }

  /// Reverse accumulation from a scalar loss. Errors if the loss is not a
  /// 1-element tensor or does not live on this tape. May be called once.
  void backward(Value loss);

  /// Gradient of the last backward() loss w.r.t. v; zeros if v was never
  /// reached (or not differentiable along any path).
  Tensor grad(Value v) const;

  /// Number of backward closures executed by backward() (each node at most
  /// once).
  int backward_visits() const { return visits_; }

  // --- op-internal API ---
  using BackFn = std::function<void(Tape&, const Tensor& gout)>;
  Value emit(Tensor value, bool needs_grad, BackFn back);
  void accumulate(Value v, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    bool needs_grad = false;
    BackFn back;  // empty when needs_grad is false
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;  // parallel to nodes_, lazily filled
  int visits_ = 0;
  bool ran_backward_ = false;

  void check(Value v) const;
};

// Ops. Forward values are computed eagerly; closures are recorded only when
// an input requires gradients.
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
/// k*x + c elementwise.
Value affine(Tape& t, Value x, double k, double c = 0.0);
Value add_const(Tape& t, Value x, const Tensor& c);
Value matmul(Tape& t, Value a, Value b);
Value reshape(Tape& t, Value x, std::vector<int> shape);
/// Rows [start, start+len) along axis 0 (contiguous slice).
Value slice0(Tape& t, Value x, int start, int len);
Value concat0(Tape& t, const std::vector<Value>& xs);
/// x:(C,H,W) w:(F,C,K,K) b:(F), stride 1, zero padding `pad`.
Value conv2d(Tape& t, Value x, Value w, Value b, int pad);
/// 2x2 average pooling; H and W must be even.
Value avgpool2(Tape& t, Value x);
/// x:(C,H,W) + b:(C) broadcast over spatial positions.
Value channel_bias(Tape& t, Value x, Value b);
/// (C,H,W) -> (C), mean over spatial positions.
Value global_mean(Tape& t, Value x);
/// w:(out,in) x:(in) b:(out) -> (out)
Value linear(Tape& t, Value w, Value b, Value x);
Value sum(Tape& t, Value x);
Value mean(Tape& t, Value x);
Value relu(Tape& t, Value x);
Value gelu(Tape& t, Value x);
/// Softmax over all entries.
Value softmax(Tape& t, Value x);
/// Euclidean distance to a constant; subgradient 0 at the origin.
Value l2_dist(Tape& t, Value x, const Tensor& ref);
/// -log softmax(logits)[label], computed stably.
Value cross_entropy(Tape& t, Value logits, int label);

/// Central-difference gradient oracle: (f(x+h e_i) - f(x-h e_i)) / 2h per
/// coordinate. Errors on non-finite f evaluations. Lives here so acceptance
/// tests check autodiff against an independent code path.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace actgen::ad
