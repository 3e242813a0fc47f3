#include "actgen/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "actgen/io_util.hpp"

namespace actgen {

namespace {

constexpr double kPi = 3.14159265358979323846;

// outer extent of each shape relative to its radius r (square measured to the
// corner)
double shape_extent_factor(int label) {
  switch (label) {
    case 0: return 1.0;                  // disk
    case 1: return 0.8 * std::sqrt(2.0); // square, half-side 0.8 r
    case 2: return 1.0;                  // triangle, circumradius r
    default: return 1.0;                 // cross, bar half-length r
  }
}

bool inside_shape(int label, double dx, double dy, double r) {
  switch (label) {
    case 0:
      return dx * dx + dy * dy <= r * r;
    case 1: {
      const double a = 0.8 * r;
      return std::abs(dx) <= a && std::abs(dy) <= a;
    }
    case 2: {
      // equilateral triangle, circumradius r, apex up (-y)
      const double ang[3] = {-kPi / 2, kPi / 6, 5 * kPi / 6};
      double vx[3], vy[3];
      for (int k = 0; k < 3; ++k) {
        vx[k] = r * std::cos(ang[k]);
        vy[k] = r * std::sin(ang[k]);
      }
      for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3;
        const double cross = (vx[j] - vx[k]) * (dy - vy[k]) - (vy[j] - vy[k]) * (dx - vx[k]);
        if (cross < 0.0) return false;
      }
      return true;
    }
    default: {
      const double w = 0.3 * r;  // bar half-width
      const bool vertical = std::abs(dx) <= w && std::abs(dy) <= r;
      const bool horizontal = std::abs(dy) <= w && std::abs(dx) <= r;
      return vertical || horizontal;
    }
  }
}

}  // namespace

double analytic_shape_area(int label, double r) {
  switch (label) {
    case 0: return kPi * r * r;
    case 1: return 2.56 * r * r;                         // (1.6 r)^2
    case 2: return 3.0 * std::sqrt(3.0) / 4.0 * r * r;   // equilateral, circumradius r
    default: {
      const double w = 0.3 * r;
      return 8.0 * w * r - 4.0 * w * w;  // two bars minus the overlap
    }
  }
}

void ShapeDatasetSpec::validate() const {
  detail::require(num_classes >= 1 && num_classes <= 4,
                  "dataset: num_classes must be in [1,4], got " + std::to_string(num_classes));
  detail::require(image_size >= 8, "dataset: image_size must be >= 8");
  detail::require(channels == 1 || channels == 3, "dataset: channels must be 1 or 3");
  detail::require(per_class >= 0, "dataset: per_class must be >= 0");
  detail::require(noise_level >= 0.0, "dataset: noise_level must be >= 0");
  detail::require(jitter >= 0.0 && scale_min > 0.0 && scale_min <= scale_max,
                  "dataset: need jitter >= 0 and 0 < scale_min <= scale_max");
  double worst = 0.0;
  for (int c = 0; c < num_classes; ++c) worst = std::max(worst, shape_extent_factor(c));
  const double s = static_cast<double>(image_size);
  // centers jitter by +-jitter*s around s/2; outermost shape point must stay
  // inside the frame
  const double reach = (jitter + scale_max * worst) * s;
  detail::require(reach <= s / 2.0 - 0.5,
                  "dataset: shape cannot fit frame under jitter (reach " + std::to_string(reach) +
                      " px exceeds " + std::to_string(s / 2.0 - 0.5) + " px)");
}

std::vector<Sample> generate_shapes_dataset(const ShapeDatasetSpec& spec) {
  spec.validate();
  const int S = spec.image_size;
  RngState root(spec.seed);
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(spec.num_classes) * spec.per_class);

  for (int i = 0; i < spec.per_class; ++i) {
    for (int c = 0; c < spec.num_classes; ++c) {
      RngState rng = root.fork("sample/" + std::to_string(c) + "/" + std::to_string(i));
      Sample s;
      s.label = c;
      s.image = Tensor({spec.channels, S, S});
      s.gt_mask = Tensor({1, S, S});

      const double cx = S / 2.0 + spec.jitter * S * (2.0 * rng.uniform() - 1.0);
      const double cy = S / 2.0 + spec.jitter * S * (2.0 * rng.uniform() - 1.0);
      const double r = (spec.scale_min + rng.uniform() * (spec.scale_max - spec.scale_min)) * S;

      const double b0 = -0.75 + 0.4 * rng.uniform();
      double gx = 0.0, gy = 0.0;
      if (spec.background == BackgroundKind::gradient) {
        const double theta = 2.0 * kPi * rng.uniform();
        const double amp = 0.1 + 0.5 * rng.uniform();
        gx = amp * std::cos(theta);
        gy = amp * std::sin(theta);
      }
      const double fg = 0.25 + 0.5 * rng.uniform();

      for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
          const double px = x + 0.5, py = y + 0.5;
          const bool in = inside_shape(c, px - cx, py - cy, r);
          s.gt_mask.at(0, y, x) = in ? 1.0 : 0.0;
          const double bg =
              b0 + 2.0 * (gx * (px / S - 0.5) + gy * (py / S - 0.5));
          const double base = in ? fg : bg;
          for (int ch = 0; ch < spec.channels; ++ch) {
            double v = base + spec.noise_level * rng.gaussian();
            s.image.at(ch, y, x) = std::clamp(v, -1.0, 1.0);
          }
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {
constexpr char kMagic[4] = {'A', 'G', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_dataset(const std::string& path, const ShapeDatasetSpec& spec,
                  const std::vector<Sample>& samples) {
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(spec.num_classes));
  w.u32(static_cast<std::uint32_t>(spec.image_size));
  w.u32(static_cast<std::uint32_t>(spec.channels));
  w.u32(static_cast<std::uint32_t>(spec.per_class));
  w.u32(spec.background == BackgroundKind::gradient ? 1 : 0);
  w.f64(spec.noise_level);
  w.f64(spec.jitter);
  w.f64(spec.scale_min);
  w.f64(spec.scale_max);
  w.u64(spec.seed);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  const int S = spec.image_size;
  for (const Sample& s : samples) {
    detail::require(s.image.shape == std::vector<int>{spec.channels, S, S} &&
                        s.gt_mask.shape == std::vector<int>{1, S, S},
                    "save_dataset: sample shape does not match spec");
    w.u32(static_cast<std::uint32_t>(s.label));
    for (double v : s.image.data) w.f64(v);
    for (double v : s.gt_mask.data) w.u8(v != 0.0 ? 1 : 0);
  }
  w.finish();
}

LoadedDataset load_dataset(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw IoError("not a dataset file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw VersionError("dataset version " + std::to_string(version) + " unsupported (want " +
                       std::to_string(kVersion) + "): " + path);
  LoadedDataset d;
  d.spec.num_classes = static_cast<int>(r.u32());
  d.spec.image_size = static_cast<int>(r.u32());
  d.spec.channels = static_cast<int>(r.u32());
  d.spec.per_class = static_cast<int>(r.u32());
  d.spec.background = r.u32() ? BackgroundKind::gradient : BackgroundKind::flat;
  d.spec.noise_level = r.f64();
  d.spec.jitter = r.f64();
  d.spec.scale_min = r.f64();
  d.spec.scale_max = r.f64();
  d.spec.seed = r.u64();
  const std::uint32_t n = r.u32();
  const int S = d.spec.image_size;
  d.samples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Sample s;
    s.label = static_cast<int>(r.u32());
    s.image = Tensor({d.spec.channels, S, S});
    for (auto& v : s.image.data) v = r.f64();
    s.gt_mask = Tensor({1, S, S});
    for (auto& v : s.gt_mask.data) v = r.u8() ? 1.0 : 0.0;
    d.samples.push_back(std::move(s));
  }
  r.verify_crc();
  return d;
}

}  // namespace actgen
