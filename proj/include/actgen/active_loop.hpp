#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actgen/classifier.hpp"
#include "actgen/dataset.hpp"
#include "actgen/denoiser.hpp"
#include "actgen/guidance.hpp"
#include "actgen/optim.hpp"

namespace actgen {

/// Seed-deterministic, label-stratified split: per-class shares by largest
/// remainder (within one of proportional), disjoint and exhaustive. Returns
/// index sets into the input.
struct Partition {
  std::vector<int> train_indices;
  std::vector<int> val_indices;
};
Partition partition_dataset(const std::vector<Sample>& dataset, int val_size, std::uint64_t seed);

/// Curriculum probability 0.5 epoch / total_epochs of steering a generation
/// adversarially. epoch counts completed training epochs (1-based inside the
/// loop).
double adversarial_probability(int epoch, int total_epochs);

struct ExperimentConfig {
  int total_epochs = 20;
  int gen_per_epoch = 20;
  double gen_stop_fraction = 0.5;  // generate only while epoch < fraction * total
  int multiplicity = 1;            // consecutive generations per mined guide
  GuidanceConfig guidance;
  double rho_frac = 0.0;  // > 0: rho = rho_frac * mean pairwise latent distance
  SelectionRule selection;
  double lr = 0.05;
  double momentum = 0.9;
  int batch = 32;
  int bank_capacity = 4096;
  bool few_shot = false;  // map guide confidence to image-guidance strength
  double eta_L = 30.0, eta_k = 10.0, eta_p = 5.0, eta_u = 0.5;
  std::uint64_t seed = 0;
  ClassifierConfig classifier;
};

enum class LoopMode { actgen, real_only, random_gen };

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  long n_generated_cum = 0;
  long n_adversarial_cum = 0;
  double wall_seconds = 0.0;  // reserved; kept 0 so metrics replay bit-exactly
};

struct LineageRecord {
  long gen_id = 0;
  int epoch = 0;
  int guide_index = 0;  // index into the validation split
  int class_id = 0;
  bool adversarial = false;
  double final_l_contra = 0.0;
  double final_l_adv = 0.0;
};

/// Everything needed to stop after any epoch and continue bit-exactly:
/// classifier weights, optimizer velocity, the generated tail of the training
/// set, the memory bank, and the logs so far.
struct LoopState {
  int next_epoch = 0;
  ClassifierParams classifier;
  SgdMomentum opt;
  std::vector<Tensor> images;  // real prefix + generated tail
  std::vector<int> labels;
  long n_real = 0;
  MemoryBank bank{4096};
  std::vector<EpochMetrics> metrics;
  std::vector<LineageRecord> lineage;
  long n_generated = 0;
  long n_adversarial = 0;
};

/// Streaming observer; every callback fires in deterministic order. The
/// second on_epoch argument is the measured wall time of the epoch (logged
/// separately from the deterministic metrics).
struct LoopSink {
  virtual ~LoopSink() = default;
  virtual void on_epoch(const EpochMetrics&, double /*measured_wall_seconds*/) {}
  virtual void on_generation(const LineageRecord&, const std::vector<StepEvent>&) {}
  virtual void on_epoch_state(const LoopState&) {}
};

struct LoopResult {
  ClassifierParams classifier;
  std::vector<EpochMetrics> metrics;
  std::vector<LineageRecord> lineage;
  double final_test_acc = 0.0;
};

/// The active training procedure: per epoch train on the current set,
/// evaluate on the validation split, mine hard samples, generate guided
/// variants (cycling round-robin over the mined guides), and extend the
/// training set. real_only skips generation; random_gen keeps the budget and
/// schedule but samples plain conditional images from the mined classes.
LoopResult run_active_loop(const ExperimentConfig& cfg, const std::vector<Sample>& train,
                           const std::vector<Sample>& val, const std::vector<Sample>& test,
                           const DenoiserParams& denoiser, const NoiseSchedule& sched,
                           LoopMode mode, LoopState* resume = nullptr, LoopSink* sink = nullptr);

/// Mean distance between flattened images over at most `cap` samples; the
/// reference scale for rho_frac.
double mean_pairwise_distance(const std::vector<Sample>& samples, int cap = 200);

void save_loop_state(const std::string& path, const LoopState& state);
/// Loads the persisted tail into `state`, whose images/labels must already
/// hold the real prefix the run started from.
void load_loop_state(const std::string& path, LoopState& state);

}  // namespace actgen
