#pragma once

#include <cstdint>
#include <string_view>

#include "actgen/tensor.hpp"

namespace actgen {

/// xoshiro256++ with splitmix64 seed expansion. State is explicit and
/// copyable; the same seed and call sequence reproduce identical bits on any
/// platform with IEEE doubles.
///
/// Streams are split hierarchically: fork(label) derives an independent child
/// generator from the parent's origin seed and the label, regardless of how
/// much the parent has been consumed. All randomness in the repo flows from
/// one root seed through fork() paths.
class RngState {
 public:
  explicit RngState(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0,1) with 53 random mantissa bits.
  double uniform();
  /// Standard normal via the Marsaglia polar method (second value cached).
  double gaussian();
  Tensor gaussian_tensor(std::vector<int> shape);

  RngState fork(std::string_view label) const;
  std::uint64_t origin_seed() const { return origin_; }

 private:
  std::uint64_t origin_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace actgen
