#include "actgen/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "actgen/checkpoint.hpp"
#include "actgen/image_io.hpp"
#include "actgen/io_util.hpp"
#include "actgen/verify.hpp"

namespace actgen {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ShapeDatasetSpec dataset_spec_from(const Config& c, std::uint64_t seed) {
  ShapeDatasetSpec spec;
  spec.num_classes = static_cast<int>(c.get_int("data.num_classes"));
  spec.image_size = static_cast<int>(c.get_int("data.image_size"));
  spec.channels = static_cast<int>(c.get_int("data.channels"));
  spec.per_class = static_cast<int>(c.get_int("data.per_class"));
  spec.background = c.get_string("data.background") == "flat" ? BackgroundKind::flat
                                                              : BackgroundKind::gradient;
  spec.noise_level = c.get_double("data.noise_level");
  spec.jitter = c.get_double("data.jitter");
  spec.scale_min = c.get_double("data.scale_min");
  spec.scale_max = c.get_double("data.scale_max");
  spec.seed = seed;
  return spec;
}

NoiseSchedule schedule_from(const Config& c) {
  return build_schedule(c.get_string("diffusion.schedule") == "cosine" ? ScheduleKind::cosine
                                                                       : ScheduleKind::linear,
                        static_cast<int>(c.get_int("diffusion.steps")),
                        c.get_double("diffusion.beta_min"), c.get_double("diffusion.beta_max"));
}

GuidanceConfig guidance_from(const Config& c) {
  GuidanceConfig g;
  g.s = c.get_double("guidance.s");
  g.i = c.get_double("guidance.i");
  g.lambda = c.get_double("guidance.lambda");
  g.rho = c.get_double("guidance.rho");
  g.n_cap = static_cast<int>(c.get_int("guidance.n_cap"));
  g.nu = c.get_double("guidance.nu");
  g.grad_window = static_cast<int>(c.get_int("guidance.grad_window"));
  const std::string mm = c.get_string("guidance.mask_mode");
  g.mask_mode = mm == "attention"      ? MaskMode::attention
                : mm == "ground_truth" ? MaskMode::ground_truth
                                       : MaskMode::none;
  g.adversarial = c.get_bool("guidance.adversarial");
  g.repel_form = c.get_bool("guidance.repel_form");
  return g;
}

ExperimentConfig experiment_from(const Config& c, std::uint64_t seed, int num_classes,
                                 int image_size, int channels) {
  ExperimentConfig e;
  e.total_epochs = static_cast<int>(c.get_int("loop.total_epochs"));
  e.gen_per_epoch = static_cast<int>(c.get_int("loop.gen_per_epoch"));
  e.gen_stop_fraction = c.get_double("loop.gen_stop_fraction");
  e.multiplicity = static_cast<int>(c.get_int("loop.multiplicity"));
  e.guidance = guidance_from(c);
  e.rho_frac = c.get_double("guidance.rho_frac");
  e.selection.kind = c.get_string("loop.selection") == "misclassified"
                         ? SelectionRule::Kind::misclassified
                         : SelectionRule::Kind::confidence_below;
  e.selection.theta = c.get_double("loop.theta");
  e.lr = c.get_double("loop.lr");
  e.momentum = c.get_double("classifier.momentum");
  e.batch = static_cast<int>(c.get_int("loop.batch"));
  e.bank_capacity = static_cast<int>(c.get_int("guidance.bank_capacity"));
  e.few_shot = c.get_bool("guidance.few_shot");
  e.eta_L = c.get_double("guidance.eta_L");
  e.eta_k = c.get_double("guidance.eta_k");
  e.eta_p = c.get_double("guidance.eta_p");
  e.eta_u = c.get_double("guidance.eta_u");
  e.seed = seed;
  e.classifier.channels = channels;
  e.classifier.height = image_size;
  e.classifier.width = image_size;
  e.classifier.c1 = static_cast<int>(c.get_int("classifier.c1"));
  e.classifier.c2 = static_cast<int>(c.get_int("classifier.c2"));
  e.classifier.num_classes = num_classes;
  return e;
}

void split_images_labels(const std::vector<Sample>& samples, std::vector<Tensor>& images,
                         std::vector<int>& labels) {
  images.clear();
  labels.clear();
  for (const Sample& s : samples) {
    images.push_back(s.image);
    labels.push_back(s.label);
  }
}

}  // namespace

Splits split_dataset(const std::vector<Sample>& all, int val_size, int test_size,
                     std::uint64_t seed) {
  detail::require(val_size + test_size < static_cast<int>(all.size()),
                  "split_dataset: val+test (" + std::to_string(val_size + test_size) +
                      ") must be smaller than the dataset (" + std::to_string(all.size()) + ")");
  RngState root(seed);
  const Partition test_part =
      partition_dataset(all, test_size, root.fork("split-test").origin_seed());
  std::vector<Sample> rest;
  Splits out;
  for (int i : test_part.val_indices) out.test.push_back(all[i]);
  for (int i : test_part.train_indices) rest.push_back(all[i]);
  const Partition val_part =
      partition_dataset(rest, val_size, root.fork("split-val").origin_seed());
  for (int i : val_part.val_indices) out.val.push_back(rest[i]);
  for (int i : val_part.train_indices) out.train.push_back(rest[i]);
  return out;
}

void write_manifest(const RunOptions& opt, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& outputs) {
  fs::create_directories(opt.out_dir);
  std::ofstream out(fs::path(opt.out_dir) / "manifest.txt");
  if (!out) throw IoError("cannot write manifest in " + opt.out_dir);
  out << "command = " << command << "\n";
  out << "seed = " << opt.seed << "\n";
  out << "out = " << opt.out_dir << "\n";
  out << "resume = " << opt.resume_dir << "\n";
  out << "threads = " << opt.threads << "\n";
  out << "format.dataset = 1\n";
  out << "format.checkpoint = 1\n";
  out << "format.state = 1\n";
  out << "started_utc = " << utc_now() << "\n";
  for (const auto& [name, file] : outputs) out << "output." << name << " = " << file << "\n";
  for (const auto& [k, v] : opt.config.entries()) out << "config." << k << " = " << v << "\n";
}

void append_manifest_end(const RunOptions& opt) {
  std::ofstream out(fs::path(opt.out_dir) / "manifest.txt", std::ios::app);
  out << "finished_utc = " << utc_now() << "\n";
}

void cmd_make_data(const RunOptions& opt) {
  write_manifest(opt, "make-data", {{"dataset", "dataset.bin"}});
  const ShapeDatasetSpec spec = dataset_spec_from(opt.config, RngState(opt.seed).fork("data").origin_seed());
  const std::vector<Sample> samples = generate_shapes_dataset(spec);
  save_dataset((fs::path(opt.out_dir) / "dataset.bin").string(), spec, samples);
  append_manifest_end(opt);
}

void cmd_train_diffusion(const RunOptions& opt) {
  write_manifest(opt, "train-diffusion", {{"denoiser", "denoiser.ckpt"}, {"loss", "loss.csv"}});
  const Config& c = opt.config;
  const LoadedDataset data = load_dataset(c.get_string("io.dataset"));
  const NoiseSchedule sched = schedule_from(c);

  DenoiserConfig dcfg;
  dcfg.channels = data.spec.channels;
  dcfg.height = data.spec.image_size;
  dcfg.width = data.spec.image_size;
  dcfg.num_classes = data.spec.num_classes;
  dcfg.feat = static_cast<int>(c.get_int("denoiser.feat"));
  dcfg.cond_dim = static_cast<int>(c.get_int("denoiser.cond_dim"));
  dcfg.heads = static_cast<int>(c.get_int("denoiser.heads"));
  dcfg.head_dim = static_cast<int>(c.get_int("denoiser.head_dim"));
  dcfg.temb_dim = static_cast<int>(c.get_int("denoiser.temb_dim"));

  RngState root(opt.seed);
  RngState init_rng = root.fork("diffusion-init");
  DenoiserParams params = init_denoiser(dcfg, init_rng);

  std::vector<Tensor> images;
  std::vector<int> labels;
  split_images_labels(data.samples, images, labels);

  RngState train_rng = root.fork("diffusion-train");
  const DenoiserTrainStats stats = train_denoiser(
      params, images, labels, sched, static_cast<int>(c.get_int("denoiser.epochs")),
      c.get_double("denoiser.drop_cond_prob"), c.get_double("denoiser.lr"),
      static_cast<int>(c.get_int("denoiser.batch")), train_rng);

  save_denoiser((fs::path(opt.out_dir) / "denoiser.ckpt").string(), params);
  std::ofstream loss(fs::path(opt.out_dir) / "loss.csv");
  loss << "epoch,loss\n";
  for (size_t e = 0; e < stats.epoch_loss.size(); ++e)
    loss << e << "," << fmt(stats.epoch_loss[e]) << "\n";
  append_manifest_end(opt);
}

void cmd_train_classifier(const RunOptions& opt) {
  write_manifest(opt, "train-classifier",
                 {{"classifier", "classifier.ckpt"}, {"loss", "loss.csv"}});
  const Config& c = opt.config;
  const LoadedDataset data = load_dataset(c.get_string("io.dataset"));
  const Splits splits =
      split_dataset(data.samples, static_cast<int>(c.get_int("loop.val_size")),
                    static_cast<int>(c.get_int("loop.test_size")), opt.seed);

  ClassifierConfig ccfg;
  ccfg.channels = data.spec.channels;
  ccfg.height = data.spec.image_size;
  ccfg.width = data.spec.image_size;
  ccfg.c1 = static_cast<int>(c.get_int("classifier.c1"));
  ccfg.c2 = static_cast<int>(c.get_int("classifier.c2"));
  ccfg.num_classes = data.spec.num_classes;

  RngState root(opt.seed);
  RngState init_rng = root.fork("classifier-init");
  ClassifierParams params = init_classifier(ccfg, init_rng);
  SgdMomentum sgd;
  sgd.momentum = c.get_double("classifier.momentum");

  std::vector<Tensor> images, test_images;
  std::vector<int> labels, test_labels;
  split_images_labels(splits.train, images, labels);
  split_images_labels(splits.test, test_images, test_labels);

  const int epochs = static_cast<int>(c.get_int("classifier.epochs"));
  std::ofstream loss(fs::path(opt.out_dir) / "loss.csv");
  loss << "epoch,loss,test_acc\n";
  for (int e = 0; e < epochs; ++e) {
    RngState erng = root.fork("classifier/" + std::to_string(e));
    const double lr = cosine_lr(c.get_double("classifier.lr"), e, epochs);
    const double l = train_classifier_epoch(params, sgd, images, labels, lr,
                                            static_cast<int>(c.get_int("classifier.batch")), erng);
    const double acc = evaluate(params, test_images, test_labels).accuracy;
    loss << e << "," << fmt(l) << "," << fmt(acc) << "\n";
  }
  save_classifier((fs::path(opt.out_dir) / "classifier.ckpt").string(), params);
  append_manifest_end(opt);
}

namespace {

/// Streams csv logs and the resumable state while the loop runs.
class CsvSink : public LoopSink {
 public:
  CsvSink(const std::string& out_dir, const LoopState* pre)
      : state_path_(fs::path(out_dir) / "state.bin") {
    metrics_.open(fs::path(out_dir) / "metrics.csv");
    lineage_.open(fs::path(out_dir) / "lineage.csv");
    events_.open(fs::path(out_dir) / "events.csv");
    timing_.open(fs::path(out_dir) / "timing.csv");
    metrics_ << "epoch,train_loss,val_acc,test_acc,n_generated_cum,n_adversarial_cum,wall_seconds\n";
    lineage_ << "gen_id,epoch,guide_index,class,adversarial_flag,final_l_contra,final_l_adv\n";
    events_ << "gen_id,step,gamma,mask_mean,l_contra,l_adv,grad_norm,skipped_update\n";
    timing_ << "epoch,wall_seconds\n";
    if (pre) {  // resumed run: replay already-completed rows
      for (const EpochMetrics& m : pre->metrics) write_metrics(m);
      for (const LineageRecord& r : pre->lineage) write_lineage(r);
      next_gen_id_ = pre->n_generated;
    }
  }

  void on_epoch(const EpochMetrics& m, double measured) override {
    write_metrics(m);
    timing_ << m.epoch << "," << fmt(measured) << "\n";
    timing_.flush();
    metrics_.flush();
  }

  void on_generation(const LineageRecord& rec, const std::vector<StepEvent>& events) override {
    write_lineage(rec);
    for (const StepEvent& ev : events)
      events_ << rec.gen_id << "," << ev.step << "," << fmt(ev.gamma) << "," << fmt(ev.mask_mean)
              << "," << fmt(ev.l_contra) << "," << fmt(ev.l_adv) << "," << fmt(ev.grad_norm) << ","
              << (ev.skipped_update ? 1 : 0) << "\n";
  }

  void on_epoch_state(const LoopState& state) override { save_loop_state(state_path_, state); }

 private:
  void write_metrics(const EpochMetrics& m) {
    metrics_ << m.epoch << "," << fmt(m.train_loss) << "," << fmt(m.val_acc) << ","
             << fmt(m.test_acc) << "," << m.n_generated_cum << "," << m.n_adversarial_cum << ","
             << fmt(m.wall_seconds) << "\n";
  }
  void write_lineage(const LineageRecord& r) {
    lineage_ << r.gen_id << "," << r.epoch << "," << r.guide_index << "," << r.class_id << ","
             << (r.adversarial ? 1 : 0) << "," << fmt(r.final_l_contra) << ","
             << fmt(r.final_l_adv) << "\n";
    lineage_.flush();
  }

  std::string state_path_;
  std::ofstream metrics_, lineage_, events_, timing_;
  long next_gen_id_ = 0;
};

}  // namespace

void cmd_run_active(const RunOptions& opt, LoopMode mode) {
  const char* cmd_name = mode == LoopMode::actgen ? "run-actgen" : "run-baseline";
  write_manifest(opt, cmd_name,
                 {{"metrics", "metrics.csv"},
                  {"lineage", "lineage.csv"},
                  {"events", "events.csv"},
                  {"timing", "timing.csv"},
                  {"state", "state.bin"},
                  {"classifier", "classifier.ckpt"}});
  const Config& c = opt.config;
  const LoadedDataset data = load_dataset(c.get_string("io.dataset"));
  const Splits splits =
      split_dataset(data.samples, static_cast<int>(c.get_int("loop.val_size")),
                    static_cast<int>(c.get_int("loop.test_size")), opt.seed);
  const DenoiserParams denoiser = load_denoiser(c.get_string("io.denoiser"));
  detail::require(denoiser.cfg.image_shape() ==
                      std::vector<int>({data.spec.channels, data.spec.image_size,
                                        data.spec.image_size}),
                  "run: denoiser checkpoint shape does not match the dataset");
  const NoiseSchedule sched = schedule_from(c);
  const ExperimentConfig ecfg = experiment_from(c, opt.seed, data.spec.num_classes,
                                                data.spec.image_size, data.spec.channels);

  LoopState state;
  LoopState* resume = nullptr;
  if (!opt.resume_dir.empty()) {
    state.images.reserve(splits.train.size());
    for (const Sample& s : splits.train) {
      state.images.push_back(s.image);
      state.labels.push_back(s.label);
    }
    state.n_real = static_cast<long>(splits.train.size());
    load_loop_state((fs::path(opt.resume_dir) / "state.bin").string(), state);
    resume = &state;
  }

  CsvSink sink(opt.out_dir, resume);
  const LoopResult result = run_active_loop(ecfg, splits.train, splits.val, splits.test, denoiser,
                                            sched, mode, resume, &sink);
  save_classifier((fs::path(opt.out_dir) / "classifier.ckpt").string(), result.classifier);
  append_manifest_end(opt);
}

void cmd_gen_demo(const RunOptions& opt) {
  write_manifest(opt, "gen-demo", {{"images", "demo_*.pgm"}});
  const Config& c = opt.config;
  const LoadedDataset data = load_dataset(c.get_string("io.dataset"));
  const DenoiserParams denoiser = load_denoiser(c.get_string("io.denoiser"));
  const ClassifierParams classifier = load_classifier(c.get_string("io.classifier"));
  const NoiseSchedule sched = schedule_from(c);
  const GuidanceConfig base = guidance_from(c);
  base.validate(sched.T);

  // mine guides the same way the loop would: misclassified first, then lowest
  // confidence
  const Splits splits =
      split_dataset(data.samples, static_cast<int>(c.get_int("loop.val_size")),
                    static_cast<int>(c.get_int("loop.test_size")), opt.seed);
  std::vector<Tensor> val_images;
  std::vector<int> val_labels;
  split_images_labels(splits.val, val_images, val_labels);
  const EvalReport report = evaluate(classifier, val_images, val_labels);
  std::vector<int> hard = find_hard_samples(report, {SelectionRule::Kind::misclassified, 0.5});
  {
    std::vector<int> order(splits.val.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return report.per_sample[a].confidence < report.per_sample[b].confidence;
    });
    for (int i : order)
      if (std::find(hard.begin(), hard.end(), i) == hard.end()) hard.push_back(i);
  }

  RngState root(opt.seed);
  const int count = static_cast<int>(c.get_int("demo.count"));
  const fs::path out(opt.out_dir);

  auto arm = [&](GuidanceConfig gcfg, const Sample& guide, MemoryBank& bank, RngState rng) {
    return guided_generate(denoiser, &classifier, guide.image, guide.label, gcfg, bank, sched, rng,
                           &guide.gt_mask)
        .image;
  };

  MemoryBank contra_bank(static_cast<int>(c.get_int("guidance.bank_capacity")));
  for (int k = 0; k < count && k < static_cast<int>(hard.size()); ++k) {
    const Sample& guide = splits.val[hard[k]];
    const std::string stem = "demo_" + std::to_string(k);
    RngState rng = root.fork("demo/" + std::to_string(k));
    dump_image(guide.image, (out / (stem + "_guide.pgm")).string());

    // Fig.2-style arms: random / image guidance / attentive / + contrastive
    dump_image(plain_generate(denoiser, guide.label, base.s, sched, rng),
               (out / (stem + "_random.pgm")).string());

    GuidanceConfig ig = base;
    ig.mask_mode = MaskMode::none;
    ig.grad_window = 0;
    ig.adversarial = false;
    MemoryBank scratch1(16);
    dump_image(arm(ig, guide, scratch1, rng), (out / (stem + "_ig.pgm")).string());

    GuidanceConfig aig = ig;
    aig.mask_mode = MaskMode::attention;
    MemoryBank scratch2(16);
    dump_image(arm(aig, guide, scratch2, rng), (out / (stem + "_aig.pgm")).string());

    GuidanceConfig contra = aig;
    contra.grad_window = base.grad_window;
    dump_image(arm(contra, guide, contra_bank, rng), (out / (stem + "_contra.pgm")).string());

    // Fig.4-style pair: non-adversarial vs adversarial from the same seed
    GuidanceConfig adv = contra;
    adv.adversarial = true;
    MemoryBank scratch3(16);
    dump_image(arm(adv, guide, scratch3, rng), (out / (stem + "_adv.pgm")).string());
    MemoryBank scratch4(16);
    GuidanceConfig nonadv = contra;
    dump_image(arm(nonadv, guide, scratch4, rng), (out / (stem + "_nonadv.pgm")).string());

    // the attention-derived mask around the sigmoid center, for inspection
    const int t_mid = std::max(1, std::min(sched.T, static_cast<int>(base.i)));
    RngState mask_rng = rng.fork("mask");
    const Tensor eps = mask_rng.gaussian_tensor(guide.image.shape);
    const Tensor x_t = forward_sample(guide.image, t_mid, eps, sched);
    auto [eh, attn] = predict_noise(denoiser, x_t, embed_class(denoiser, guide.label), t_mid);
    dump_image(extract_mask(attn, MaskMode::attention).m, (out / (stem + "_mask.pgm")).string());
    dump_image(guide.gt_mask, (out / (stem + "_gtmask.pgm")).string());
  }
  append_manifest_end(opt);
}

int cmd_verify(const RunOptions& opt, std::ostream& out) {
  write_manifest(opt, "verify", {});
  const int failures = run_verify(out);
  append_manifest_end(opt);
  return failures;
}

}  // namespace actgen
