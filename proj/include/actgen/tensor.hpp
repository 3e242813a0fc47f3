#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace actgen {

/// Dense row-major array of 64-bit floats. Small enough at toy scale that a
/// flat std::vector is the whole story; copies are value copies.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vec(std::vector<double> d);
  static std::int64_t numel_of(const std::vector<int>& s);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  double& operator[](std::int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return data[static_cast<size_t>(i)]; }

  // (c,y,x) indexing; shape must be 3-D.
  double& at(int c, int y, int x);
  double at(int c, int y, int x) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double item() const;  // value of a 1-element tensor
};

std::string shape_str(const std::vector<int>& s);

namespace detail {
[[noreturn]] void fail(const std::string& msg);
inline void require(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}
}  // namespace detail

// Elementwise and reduction kernels on plain tensors. All are pure; shape
// mismatches raise std::invalid_argument naming the op and both shapes.
namespace ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor hadamard(const Tensor& a, const Tensor& b);
/// (m,k) x (k,n) -> (m,n)
Tensor matmul(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);
double mean(const Tensor& a);
/// Softmax over all entries (max-shifted).
Tensor softmax(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
double l2_norm(const Tensor& a);
double l2_dist(const Tensor& a, const Tensor& b);

}  // namespace ops

}  // namespace actgen
