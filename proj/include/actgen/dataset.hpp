#pragma once

#include <string>
#include <vector>

#include "actgen/rng.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

enum class BackgroundKind { flat, gradient };

/// Synthetic shapes dataset: one bright geometric shape (disk, square,
/// triangle, cross) per image over a per-sample background, with the exact
/// foreground mask kept alongside. Pixel values live in [-1,1].
struct ShapeDatasetSpec {
  int num_classes = 4;   // shape kinds, in the order above; at most 4
  int image_size = 16;   // H = W
  int channels = 1;
  int per_class = 850;
  BackgroundKind background = BackgroundKind::gradient;
  double noise_level = 0.15;  // std of additive Gaussian noise
  double jitter = 0.12;       // center offset, fraction of image size
  double scale_min = 0.20;    // shape radius, fraction of image size
  double scale_max = 0.30;
  std::uint64_t seed = 0;

  void validate() const;  // errors if a jittered shape could leave the frame
};

struct Sample {
  Tensor image;   // (C,H,W)
  int label = 0;
  Tensor gt_mask;  // (1,H,W), exactly 1 on shape-interior pixels
};

/// Deterministic in spec.seed; per-class counts equal spec.per_class; masks
/// agree with the rendered shapes.
std::vector<Sample> generate_shapes_dataset(const ShapeDatasetSpec& spec);

/// Analytic interior area of a class's shape at radius r (pixels); the
/// oracle for rasterized mask areas.
double analytic_shape_area(int label, double r);

void save_dataset(const std::string& path, const ShapeDatasetSpec& spec,
                  const std::vector<Sample>& samples);

struct LoadedDataset {
  ShapeDatasetSpec spec;
  std::vector<Sample> samples;
};

/// Bitwise inverse of save_dataset. Version mismatch, truncation and checksum
/// failure raise VersionError, TruncationError, ChecksumError respectively.
LoadedDataset load_dataset(const std::string& path);

}  // namespace actgen
