#include "actgen.h"

#include <cstdlib>
#include <iostream>
#include <string>

#include "actgen/commands.hpp"
#include "actgen/io_util.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

int classify_exception() {
  try {
    throw;
  } catch (const actgen::ConfigError& e) {
    set_error(e.what());
    return ACTGEN_ERR_CONFIG;
  } catch (const std::exception& e) {
    set_error(e.what());
    return ACTGEN_ERR_RUNTIME;
  } catch (...) {
    set_error("unknown error");
    return ACTGEN_ERR_RUNTIME;
  }
}

}  // namespace

struct actgen_session {
  actgen::RunOptions opt;
  bool out_dir_explicit = false;
  std::string scratch;  // backs actgen_config_value
};

namespace {

template <typename Fn>
int run_command(actgen_session* s, const char* default_out, Fn&& fn) {
  if (!s) {
    set_error("null session");
    return ACTGEN_ERR_USAGE;
  }
  try {
    actgen::RunOptions opt = s->opt;
    if (!s->out_dir_explicit) opt.out_dir = std::string("runs/") + default_out;
    fn(opt);
    return ACTGEN_OK;
  } catch (...) {
    return classify_exception();
  }
}

}  // namespace

extern "C" {

int actgen_session_create(const actgen_options* options, actgen_session** out) {
  if (!out) return ACTGEN_ERR_USAGE;
  *out = nullptr;
  try {
    auto s = new actgen_session();
    if (options && options->config_path)
      s->opt.config = actgen::Config::from_file(options->config_path);
    s->opt.seed = options && options->has_seed ? options->seed : s->opt.config.get_u64("seed");
    s->opt.threads = options && options->threads > 0
                         ? options->threads
                         : static_cast<int>(s->opt.config.get_int("threads"));
    if (options && options->resume_dir) s->opt.resume_dir = options->resume_dir;
    if (options && options->out_dir && options->out_dir[0]) {
      s->opt.out_dir = options->out_dir;
      s->out_dir_explicit = true;
    } else if (const char* env = std::getenv("ACTGEN_OUT"); env && env[0]) {
      s->opt.out_dir = env;
      s->out_dir_explicit = true;
    }
    *out = s;
    return ACTGEN_OK;
  } catch (...) {
    return classify_exception();
  }
}

void actgen_session_destroy(actgen_session* s) { delete s; }

const char* actgen_config_value(actgen_session* s, const char* key) {
  if (!s || !key || !s->opt.config.known(key)) return nullptr;
  s->scratch = s->opt.config.get_string(key);
  return s->scratch.c_str();
}

int actgen_make_data(actgen_session* s) {
  return run_command(s, "make-data", [](const actgen::RunOptions& o) { actgen::cmd_make_data(o); });
}

int actgen_train_diffusion(actgen_session* s) {
  return run_command(s, "train-diffusion",
                     [](const actgen::RunOptions& o) { actgen::cmd_train_diffusion(o); });
}

int actgen_train_classifier(actgen_session* s) {
  return run_command(s, "train-classifier",
                     [](const actgen::RunOptions& o) { actgen::cmd_train_classifier(o); });
}

int actgen_run_active(actgen_session* s) {
  return run_command(s, "run-actgen", [](const actgen::RunOptions& o) {
    actgen::cmd_run_active(o, actgen::LoopMode::actgen);
  });
}

int actgen_run_baseline(actgen_session* s, const char* mode) {
  const std::string m = mode ? mode : "";
  if (m != "real_only" && m != "random_gen") {
    set_error("run-baseline mode must be real_only or random_gen, got '" + m + "'");
    return ACTGEN_ERR_USAGE;
  }
  return run_command(s, m == "real_only" ? "run-baseline-real" : "run-baseline-random",
                     [&](const actgen::RunOptions& o) {
                       actgen::cmd_run_active(o, m == "real_only"
                                                     ? actgen::LoopMode::real_only
                                                     : actgen::LoopMode::random_gen);
                     });
}

int actgen_gen_demo(actgen_session* s) {
  return run_command(s, "gen-demo", [](const actgen::RunOptions& o) { actgen::cmd_gen_demo(o); });
}

int actgen_verify(actgen_session* s) {
  int failures = 0;
  const int status = run_command(s, "verify", [&](const actgen::RunOptions& o) {
    failures = actgen::cmd_verify(o, std::cout);
  });
  if (status != ACTGEN_OK) return status;
  if (failures != 0) {
    set_error(std::to_string(failures) + " verify check(s) failed");
    return ACTGEN_ERR_RUNTIME;
  }
  return ACTGEN_OK;
}

const char* actgen_last_error(void) { return g_last_error.c_str(); }

const char* actgen_version(void) { return "0.1.0"; }

}  // extern "C"
