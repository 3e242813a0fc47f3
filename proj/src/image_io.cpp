#include "actgen/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "actgen/io_util.hpp"

namespace actgen {

std::uint8_t pixel_byte(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const double mapped = std::floor(127.5 * (v + 1.0) + 0.5);  // round half up
  return static_cast<std::uint8_t>(std::clamp(mapped, 0.0, 255.0));
}

void dump_image(const Tensor& t, const std::string& path) {
  detail::require(t.shape.size() == 3 && (t.shape[0] == 1 || t.shape[0] == 3),
                  "dump_image: need (1,H,W) or (3,H,W), got " + shape_str(t.shape));
  const int C = t.shape[0], H = t.shape[1], W = t.shape[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(W) * C);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) row[static_cast<size_t>(x) * C + c] = pixel_byte(t.at(c, y, x));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace actgen
