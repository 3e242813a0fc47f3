#pragma once

#include <map>
#include <string>
#include <vector>

#include "actgen/classifier.hpp"
#include "actgen/denoiser.hpp"
#include "actgen/tensor.hpp"

namespace actgen {

/// Flat binary checkpoint container: magic, version, kind string, integer
/// metadata, a shape table, then all tensor payloads as row-major 64-bit
/// floats in table order, then a CRC-32. Byte layout is documented in
/// docs/file_formats.md.
struct Checkpoint {
  std::string kind;
  std::map<std::string, std::int64_t> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;  // table order preserved

  const Tensor& tensor(const std::string& name) const;
  std::int64_t meta_value(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::map<std::string, std::int64_t>& meta,
                     const std::vector<std::pair<const char*, const Tensor*>>& tensors);

Checkpoint load_checkpoint(const std::string& path);

void save_denoiser(const std::string& path, const DenoiserParams& p);
DenoiserParams load_denoiser(const std::string& path);

void save_classifier(const std::string& path, const ClassifierParams& p);
ClassifierParams load_classifier(const std::string& path);

}  // namespace actgen
