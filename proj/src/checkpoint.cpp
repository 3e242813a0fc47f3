#include "actgen/checkpoint.hpp"

#include "actgen/io_util.hpp"

namespace actgen {

namespace {
constexpr char kMagic[4] = {'A', 'G', 'C', 'P'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw IoError("checkpoint: missing tensor '" + name + "'");
}

std::int64_t Checkpoint::meta_value(const std::string& name) const {
  auto it = meta.find(name);
  if (it == meta.end()) throw IoError("checkpoint: missing meta '" + name + "'");
  return it->second;
}

void save_checkpoint(const std::string& path, const std::string& kind,
                     const std::map<std::string, std::int64_t>& meta,
                     const std::vector<std::pair<const char*, const Tensor*>>& tensors) {
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.str(kind);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    w.str(k);
    w.i64(v);
  }
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) w.u32(static_cast<std::uint32_t>(d));
  }
  for (const auto& [name, t] : tensors)
    for (double v : t->data) w.f64(v);
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw IoError("not a checkpoint file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported: " + path);
  Checkpoint c;
  c.kind = r.str();
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    c.meta[k] = r.i64();
  }
  const std::uint32_t n_tensors = r.u32();
  std::vector<std::vector<int>> shapes(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint32_t ndim = r.u32();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(r.u32());
    c.tensors.emplace_back(std::move(name), Tensor());
    shapes[i] = std::move(shape);
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    Tensor t(shapes[i]);
    for (auto& v : t.data) v = r.f64();
    c.tensors[i].second = std::move(t);
  }
  r.verify_crc();
  return c;
}

void save_denoiser(const std::string& path, const DenoiserParams& p) {
  std::map<std::string, std::int64_t> meta = {
      {"channels", p.cfg.channels}, {"height", p.cfg.height},     {"width", p.cfg.width},
      {"num_classes", p.cfg.num_classes}, {"feat", p.cfg.feat},   {"cond_dim", p.cfg.cond_dim},
      {"heads", p.cfg.heads},       {"head_dim", p.cfg.head_dim}, {"temb_dim", p.cfg.temb_dim}};
  save_checkpoint(path, "denoiser", meta, p.named_params());
}

DenoiserParams load_denoiser(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "denoiser") throw IoError("checkpoint kind '" + c.kind + "' is not a denoiser");
  DenoiserParams p;
  p.cfg.channels = static_cast<int>(c.meta_value("channels"));
  p.cfg.height = static_cast<int>(c.meta_value("height"));
  p.cfg.width = static_cast<int>(c.meta_value("width"));
  p.cfg.num_classes = static_cast<int>(c.meta_value("num_classes"));
  p.cfg.feat = static_cast<int>(c.meta_value("feat"));
  p.cfg.cond_dim = static_cast<int>(c.meta_value("cond_dim"));
  p.cfg.heads = static_cast<int>(c.meta_value("heads"));
  p.cfg.head_dim = static_cast<int>(c.meta_value("head_dim"));
  p.cfg.temb_dim = static_cast<int>(c.meta_value("temb_dim"));
  for (auto& [name, t] : p.named_params()) *t = c.tensor(name);
  return p;
}

void save_classifier(const std::string& path, const ClassifierParams& p) {
  std::map<std::string, std::int64_t> meta = {{"channels", p.cfg.channels},
                                              {"height", p.cfg.height},
                                              {"width", p.cfg.width},
                                              {"c1", p.cfg.c1},
                                              {"c2", p.cfg.c2},
                                              {"num_classes", p.cfg.num_classes}};
  save_checkpoint(path, "classifier", meta, p.named_params());
}

ClassifierParams load_classifier(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  if (c.kind != "classifier") throw IoError("checkpoint kind '" + c.kind + "' is not a classifier");
  ClassifierParams p;
  p.cfg.channels = static_cast<int>(c.meta_value("channels"));
  p.cfg.height = static_cast<int>(c.meta_value("height"));
  p.cfg.width = static_cast<int>(c.meta_value("width"));
  p.cfg.c1 = static_cast<int>(c.meta_value("c1"));
  p.cfg.c2 = static_cast<int>(c.meta_value("c2"));
  p.cfg.num_classes = static_cast<int>(c.meta_value("num_classes"));
  for (auto& [name, t] : p.named_params()) *t = c.tensor(name);
  return p;
}

}  // namespace actgen
