#include "actgen/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace actgen {

namespace {

enum class Kind { integer, unsigned64, real, boolean, string, enumeration };

struct SchemaEntry {
  const char* key;
  Kind kind;
  const char* def;
  double lo, hi;            // numeric range, inclusive; ignored otherwise
  const char* choices;      // '|'-separated for enumeration
};

// Range bounds are inclusive. Paper-derived defaults: diffusion.steps=40,
// guidance.s=15, guidance.i=12.5, guidance.rho=200, guidance.n_cap=1024,
// guidance.grad_window=10, eta constants L=30 k=10 p=5.
const SchemaEntry kSchema[] = {
    {"seed", Kind::unsigned64, "0", 0, 0, nullptr},
    {"threads", Kind::integer, "1", 1, 4096, nullptr},

    {"data.num_classes", Kind::integer, "4", 1, 4, nullptr},
    {"data.image_size", Kind::integer, "16", 8, 256, nullptr},
    {"data.channels", Kind::integer, "1", 1, 3, nullptr},
    {"data.per_class", Kind::integer, "850", 0, 1000000, nullptr},
    {"data.background", Kind::enumeration, "gradient", 0, 0, "flat|gradient"},
    {"data.noise_level", Kind::real, "0.18", 0.0, 10.0, nullptr},
    {"data.jitter", Kind::real, "0.12", 0.0, 0.5, nullptr},
    {"data.scale_min", Kind::real, "0.20", 1e-6, 1.0, nullptr},
    {"data.scale_max", Kind::real, "0.30", 1e-6, 1.0, nullptr},

    {"io.dataset", Kind::string, "runs/make-data/dataset.bin", 0, 0, nullptr},
    {"io.denoiser", Kind::string, "runs/train-diffusion/denoiser.ckpt", 0, 0, nullptr},
    {"io.classifier", Kind::string, "runs/train-classifier/classifier.ckpt", 0, 0, nullptr},

    {"diffusion.steps", Kind::integer, "40", 1, 100000, nullptr},
    {"diffusion.schedule", Kind::enumeration, "linear", 0, 0, "linear|cosine"},
    {"diffusion.beta_min", Kind::real, "0.0025", 1e-12, 0.999999, nullptr},
    {"diffusion.beta_max", Kind::real, "0.5", 1e-12, 0.999999, nullptr},

    {"denoiser.feat", Kind::integer, "24", 4, 1024, nullptr},
    {"denoiser.cond_dim", Kind::integer, "16", 2, 1024, nullptr},
    {"denoiser.heads", Kind::integer, "2", 1, 16, nullptr},
    {"denoiser.head_dim", Kind::integer, "8", 1, 256, nullptr},
    {"denoiser.temb_dim", Kind::integer, "16", 2, 256, nullptr},
    {"denoiser.epochs", Kind::integer, "30", 1, 100000, nullptr},
    {"denoiser.batch", Kind::integer, "16", 1, 65536, nullptr},
    {"denoiser.lr", Kind::real, "0.002", 1e-12, 10.0, nullptr},
    {"denoiser.drop_cond_prob", Kind::real, "0.1", 0.0, 1.0, nullptr},

    {"classifier.c1", Kind::integer, "12", 1, 1024, nullptr},
    {"classifier.c2", Kind::integer, "24", 1, 1024, nullptr},
    {"classifier.epochs", Kind::integer, "20", 1, 100000, nullptr},
    {"classifier.batch", Kind::integer, "32", 1, 65536, nullptr},
    {"classifier.lr", Kind::real, "0.05", 1e-12, 10.0, nullptr},
    {"classifier.momentum", Kind::real, "0.9", 0.0, 0.999999, nullptr},

    {"guidance.s", Kind::real, "15", 0.0, 1e6, nullptr},
    {"guidance.i", Kind::real, "12.5", -1e9, 1e9, nullptr},
    {"guidance.lambda", Kind::real, "1.0", 0.0, 1e6, nullptr},
    {"guidance.rho", Kind::real, "200", 1e-12, 1e9, nullptr},
    {"guidance.rho_frac", Kind::real, "0", 0.0, 1e6, nullptr},
    {"guidance.n_cap", Kind::integer, "1024", 1, 10000000, nullptr},
    {"guidance.nu", Kind::real, "0.1", 0.0, 1e6, nullptr},
    {"guidance.grad_window", Kind::integer, "10", 0, 100000, nullptr},
    {"guidance.mask_mode", Kind::enumeration, "attention", 0, 0, "attention|ground_truth|none"},
    {"guidance.adversarial", Kind::boolean, "true", 0, 0, nullptr},
    {"guidance.repel_form", Kind::boolean, "false", 0, 0, nullptr},
    {"guidance.bank_capacity", Kind::integer, "4096", 1, 10000000, nullptr},
    {"guidance.few_shot", Kind::boolean, "false", 0, 0, nullptr},
    {"guidance.eta_L", Kind::real, "30", 0.0, 1e6, nullptr},
    {"guidance.eta_k", Kind::real, "10", -1e6, 1e6, nullptr},
    {"guidance.eta_p", Kind::real, "5", 0.0, 1e6, nullptr},
    {"guidance.eta_u", Kind::real, "0.5", 0.0, 2.0, nullptr},

    {"loop.total_epochs", Kind::integer, "20", 1, 100000, nullptr},
    {"loop.val_size", Kind::integer, "400", 0, 100000000, nullptr},
    {"loop.test_size", Kind::integer, "1000", 0, 100000000, nullptr},
    {"loop.gen_per_epoch", Kind::integer, "20", 0, 1000000, nullptr},
    {"loop.gen_stop_fraction", Kind::real, "0.5", 0.0, 1.0, nullptr},
    {"loop.multiplicity", Kind::integer, "1", 1, 1000000, nullptr},
    {"loop.selection", Kind::enumeration, "misclassified", 0, 0, "misclassified|confidence_below"},
    {"loop.theta", Kind::real, "0.5", 1e-12, 1.0, nullptr},
    {"loop.lr", Kind::real, "0.05", 1e-12, 10.0, nullptr},
    {"loop.batch", Kind::integer, "32", 1, 65536, nullptr},

    {"demo.count", Kind::integer, "4", 1, 1000, nullptr},
};

const SchemaEntry* find_entry(const std::string& key) {
  for (const SchemaEntry& e : kSchema)
    if (key == e.key) return &e;
  return nullptr;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0';
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-') return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoull(s.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0';
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end && *end == '\0' && std::isfinite(out);
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void validate(const SchemaEntry& e, const std::string& value) {
  switch (e.kind) {
    case Kind::integer: {
      std::int64_t v;
      if (!parse_i64(value, v))
        throw ConfigError("config: key '" + std::string(e.key) + "' expects an integer, got '" +
                          value + "'");
      if (v < static_cast<std::int64_t>(e.lo) || v > static_cast<std::int64_t>(e.hi))
        throw ConfigError("config: key '" + std::string(e.key) + "' out of range [" +
                          std::to_string(static_cast<std::int64_t>(e.lo)) + "," +
                          std::to_string(static_cast<std::int64_t>(e.hi)) + "]: " + value);
      break;
    }
    case Kind::unsigned64: {
      std::uint64_t v;
      if (!parse_u64(value, v))
        throw ConfigError("config: key '" + std::string(e.key) +
                          "' expects an unsigned integer, got '" + value + "'");
      break;
    }
    case Kind::real: {
      double v;
      if (!parse_f64(value, v))
        throw ConfigError("config: key '" + std::string(e.key) + "' expects a number, got '" +
                          value + "'");
      if (v < e.lo || v > e.hi)
        throw ConfigError("config: key '" + std::string(e.key) + "' out of range [" +
                          std::to_string(e.lo) + "," + std::to_string(e.hi) + "]: " + value);
      break;
    }
    case Kind::boolean:
      if (value != "true" && value != "false")
        throw ConfigError("config: key '" + std::string(e.key) + "' expects true|false, got '" +
                          value + "'");
      break;
    case Kind::string:
      break;
    case Kind::enumeration: {
      std::string choices(e.choices);
      size_t pos = 0;
      while (pos != std::string::npos) {
        const size_t bar = choices.find('|', pos);
        const std::string c =
            bar == std::string::npos ? choices.substr(pos) : choices.substr(pos, bar - pos);
        if (value == c) return;
        pos = bar == std::string::npos ? std::string::npos : bar + 1;
      }
      throw ConfigError("config: key '" + std::string(e.key) + "' expects one of " + choices +
                        ", got '" + value + "'");
    }
  }
}

}  // namespace

Config::Config() {
  for (const SchemaEntry& e : kSchema) values_[e.key] = e.def;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read file: " + path);
  Config cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  const SchemaEntry* e = find_entry(key);
  if (!e) throw ConfigError("config: unknown key '" + key + "'");
  validate(*e, value);
  values_[key] = value;
}

std::int64_t Config::get_int(const std::string& key) const {
  std::int64_t v = 0;
  parse_i64(get_string(key), v);
  return v;
}

std::uint64_t Config::get_u64(const std::string& key) const {
  std::uint64_t v = 0;
  parse_u64(get_string(key), v);
  return v;
}

double Config::get_double(const std::string& key) const {
  double v = 0;
  parse_f64(get_string(key), v);
  return v;
}

bool Config::get_bool(const std::string& key) const { return get_string(key) == "true"; }

const std::string& Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key '" + key + "'");
  return it->second;
}

bool Config::known(const std::string& key) const { return values_.count(key) != 0; }

std::vector<std::pair<std::string, std::string>> Config::entries() const {
  return {values_.begin(), values_.end()};
}

}  // namespace actgen
