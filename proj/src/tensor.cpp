#include "actgen/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace actgen {

namespace detail {
void fail(const std::string& msg) { throw std::invalid_argument(msg); }
}  // namespace detail

std::int64_t Tensor::numel_of(const std::vector<int>& s) {
  std::int64_t n = 1;
  for (int d : s) {
    detail::require(d >= 0, "tensor: negative dimension in " + shape_str(s));
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> s)
    : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  detail::require(numel_of(shape) == static_cast<std::int64_t>(data.size()),
                  "tensor: shape " + shape_str(shape) + " does not match data length " +
                      std::to_string(data.size()));
}

Tensor Tensor::full(std::vector<int> s, double v) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = v;
  return t;
}

Tensor Tensor::vec(std::vector<double> d) {
  const int n = static_cast<int>(d.size());
  return Tensor({n}, std::move(d));
}

double& Tensor::at(int c, int y, int x) {
  return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
}

double Tensor::at(int c, int y, int x) const {
  return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::item() const {
  detail::require(data.size() == 1, "tensor: item() on shape " + shape_str(shape));
  return data[0];
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

namespace ops {

namespace {
void check_same(const char* op, const Tensor& a, const Tensor& b) {
  detail::require(a.same_shape(b), std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                       " vs " + shape_str(b.shape));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same("add", a, b);
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same("sub", a, b);
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
  return r;
}

Tensor scale(const Tensor& a, double k) {
  Tensor r = a;
  for (auto& v : r.data) v *= k;
  return r;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same("hadamard", a, b);
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] *= b.data[i];
  return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require(a.shape.size() == 2 && b.shape.size() == 2 && a.shape[1] == b.shape[0],
                  "matmul: incompatible shapes " + shape_str(a.shape) + " vs " +
                      shape_str(b.shape));
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor r({m, n});
  for (int i = 0; i < m; ++i) {
    for (int l = 0; l < k; ++l) {
      const double av = a.data[static_cast<size_t>(i) * k + l];
      const double* brow = &b.data[static_cast<size_t>(l) * n];
      double* rrow = &r.data[static_cast<size_t>(i) * n];
      for (int j = 0; j < n; ++j) rrow[j] += av * brow[j];
    }
  }
  return r;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v;
  return s;
}

double mean(const Tensor& a) {
  detail::require(!a.data.empty(), "mean: empty tensor");
  return sum(a) / static_cast<double>(a.data.size());
}

Tensor softmax(const Tensor& a) {
  detail::require(!a.data.empty(), "softmax: empty tensor");
  double m = a.data[0];
  for (double v : a.data) m = std::max(m, v);
  Tensor r = a;
  double z = 0.0;
  for (auto& v : r.data) {
    v = std::exp(v - m);
    z += v;
  }
  for (auto& v : r.data) v /= z;
  return r;
}

Tensor relu(const Tensor& a) {
  Tensor r = a;
  for (auto& v : r.data) v = v > 0.0 ? v : 0.0;
  return r;
}

Tensor gelu(const Tensor& a) {
  Tensor r = a;
  for (auto& v : r.data) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  return r;
}

double l2_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

double l2_dist(const Tensor& a, const Tensor& b) {
  check_same("l2_dist", a, b);
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace ops
}  // namespace actgen
