#pragma once

#include <iosfwd>
#include <string>

#include "actgen/active_loop.hpp"
#include "actgen/config.hpp"

namespace actgen {

/// Resolved invocation: configuration plus the run-level knobs that arrive as
/// flags. `seed` already reflects any --seed override; `out_dir` is final.
struct RunOptions {
  Config config;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string resume_dir;  // empty = fresh run
  int threads = 1;
};

/// Writes <out>/manifest.txt: command, seed, flags, file-format versions, the
/// full resolved config echo and the output layout; called before any long
/// computation. append_manifest_end stamps the finish time.
void write_manifest(const RunOptions& opt, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& outputs);
void append_manifest_end(const RunOptions& opt);

void cmd_make_data(const RunOptions& opt);
void cmd_train_diffusion(const RunOptions& opt);
void cmd_train_classifier(const RunOptions& opt);
void cmd_run_active(const RunOptions& opt, LoopMode mode);
void cmd_gen_demo(const RunOptions& opt);
/// Runs the invariant suite; returns the number of failed checks.
int cmd_verify(const RunOptions& opt, std::ostream& out);

/// Splits a dataset into train/val/test the way every command does: test
/// first (stratified), then validation from the remainder.
struct Splits {
  std::vector<Sample> train, val, test;
};
Splits split_dataset(const std::vector<Sample>& all, int val_size, int test_size,
                     std::uint64_t seed);

}  // namespace actgen
