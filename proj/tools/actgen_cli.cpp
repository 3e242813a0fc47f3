// actgen command-line front end. Talks to the core exclusively through the
// C API in actgen.h; exit codes are the API status codes (0 ok, 1 usage,
// 2 config, 3 runtime).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "actgen.h"

namespace {

const char* kUsage =
    "usage: actgen <command> [flags]\n"
    "\n"
    "commands:\n"
    "  make-data                    generate the synthetic shapes dataset\n"
    "  train-diffusion              train the conditional denoiser\n"
    "  train-classifier             train a standalone classifier\n"
    "  run-actgen                   the full active-generation training loop\n"
    "  run-baseline <real_only|random_gen>\n"
    "                               comparison arms with the same budget\n"
    "  gen-demo                     dump guided/adversarial sample images\n"
    "  verify                       run the invariant suite (nonzero exit on failure)\n"
    "\n"
    "flags:\n"
    "  --config PATH    key=value configuration file (defaults otherwise)\n"
    "  --seed U64       root seed (overrides config)\n"
    "  --out DIR        output directory (default $ACTGEN_OUT or runs/<command>)\n"
    "  --threads N      parallelism degree (never changes results)\n"
    "  --resume DIR     continue a run from DIR/state.bin\n";

struct Cli {
  std::string command;
  std::string baseline_mode;
  const char* config = nullptr;
  const char* out = nullptr;
  const char* resume = nullptr;
  uint64_t seed = 0;
  int has_seed = 0;
  int threads = 0;
};

int usage_error(const char* msg) {
  if (msg && *msg) std::fprintf(stderr, "actgen: %s\n\n", msg);
  std::fputs(kUsage, stderr);
  return ACTGEN_ERR_USAGE;
}

bool parse_u64(const char* s, uint64_t& out) {
  if (!s || !*s) return false;
  char* end = nullptr;
  out = std::strtoull(s, &end, 10);
  return end && *end == '\0';
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage_error("");
  Cli cli;
  cli.command = argv[1];
  if (cli.command == "-h" || cli.command == "--help") {
    std::fputs(kUsage, stdout);
    return ACTGEN_OK;
  }

  int i = 2;
  if (cli.command == "run-baseline") {
    if (i >= argc || argv[i][0] == '-')
      return usage_error("run-baseline needs a mode: real_only or random_gen");
    cli.baseline_mode = argv[i++];
  }
  for (; i < argc; ++i) {
    const std::string flag = argv[i];
    auto next = [&]() -> const char* { return i + 1 < argc ? argv[++i] : nullptr; };
    if (flag == "--config") {
      if (!(cli.config = next())) return usage_error("--config needs a path");
    } else if (flag == "--seed") {
      const char* v = next();
      if (!v || !parse_u64(v, cli.seed)) return usage_error("--seed needs an unsigned integer");
      cli.has_seed = 1;
    } else if (flag == "--out") {
      if (!(cli.out = next())) return usage_error("--out needs a directory");
    } else if (flag == "--threads") {
      const char* v = next();
      if (!v || (cli.threads = std::atoi(v)) < 1) return usage_error("--threads needs N >= 1");
    } else if (flag == "--resume") {
      if (!(cli.resume = next())) return usage_error("--resume needs a directory");
    } else {
      return usage_error(("unknown flag '" + flag + "'").c_str());
    }
  }

  actgen_options opts{};
  opts.config_path = cli.config;
  opts.out_dir = cli.out;
  opts.resume_dir = cli.resume;
  opts.seed = cli.seed;
  opts.has_seed = cli.has_seed;
  opts.threads = cli.threads;

  actgen_session* session = nullptr;
  int status = actgen_session_create(&opts, &session);
  if (status != ACTGEN_OK) {
    std::fprintf(stderr, "actgen: %s\n", actgen_last_error());
    return status;
  }

  if (cli.command == "make-data") {
    status = actgen_make_data(session);
  } else if (cli.command == "train-diffusion") {
    status = actgen_train_diffusion(session);
  } else if (cli.command == "train-classifier") {
    status = actgen_train_classifier(session);
  } else if (cli.command == "run-actgen") {
    status = actgen_run_active(session);
  } else if (cli.command == "run-baseline") {
    status = actgen_run_baseline(session, cli.baseline_mode.c_str());
  } else if (cli.command == "gen-demo") {
    status = actgen_gen_demo(session);
  } else if (cli.command == "verify") {
    status = actgen_verify(session);
  } else {
    actgen_session_destroy(session);
    return usage_error(("unknown command '" + cli.command + "'").c_str());
  }

  if (status != ACTGEN_OK) std::fprintf(stderr, "actgen: %s\n", actgen_last_error());
  actgen_session_destroy(session);
  return status;
}
