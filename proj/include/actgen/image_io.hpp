#pragma once

#include <string>

#include "actgen/tensor.hpp"

namespace actgen {

/// Writes a (1,H,W) tensor as binary PGM (P5) or a (3,H,W) tensor as binary
/// PPM (P6). Values are clamped to [-1,1] and mapped to bytes as
/// round(127.5 (v+1)), rounding half up, so -1 -> 0, 0 -> 128, 1 -> 255.
void dump_image(const Tensor& t, const std::string& path);

std::uint8_t pixel_byte(double v);

}  // namespace actgen
