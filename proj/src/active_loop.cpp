#include "actgen/active_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "actgen/io_util.hpp"

namespace actgen {

Partition partition_dataset(const std::vector<Sample>& dataset, int val_size, std::uint64_t seed) {
  detail::require(val_size < static_cast<int>(dataset.size()),
                  "partition_dataset: val_size " + std::to_string(val_size) +
                      " must be smaller than dataset size " + std::to_string(dataset.size()));
  detail::require(val_size >= 0, "partition_dataset: val_size must be >= 0");

  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < dataset.size(); ++i) by_class[dataset[i].label].push_back(static_cast<int>(i));

  RngState rng = RngState(seed).fork("partition");
  const double frac = dataset.empty() ? 0.0 : static_cast<double>(val_size) / dataset.size();

  // largest-remainder allocation of per-class validation counts
  std::vector<std::pair<int, double>> remainders;  // (class, remainder)
  std::map<int, int> takes;
  int allocated = 0;
  for (auto& [cls, idx] : by_class) {
    const double exact = frac * idx.size();
    const int base = static_cast<int>(std::floor(exact));
    takes[cls] = base;
    allocated += base;
    remainders.push_back({cls, exact - base});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (int k = 0; allocated < val_size; ++k, ++allocated) takes[remainders[k % remainders.size()].first]++;

  Partition p;
  for (auto& [cls, idx] : by_class) {
    RngState crng = rng.fork("class/" + std::to_string(cls));
    std::vector<int> shuffled = idx;
    for (size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[crng.next_u64() % i]);
    const int k = std::min<int>(takes[cls], static_cast<int>(shuffled.size()));
    for (int i = 0; i < k; ++i) p.val_indices.push_back(shuffled[i]);
    for (size_t i = k; i < shuffled.size(); ++i) p.train_indices.push_back(shuffled[i]);
  }
  std::sort(p.train_indices.begin(), p.train_indices.end());
  std::sort(p.val_indices.begin(), p.val_indices.end());
  return p;
}

double adversarial_probability(int epoch, int total_epochs) {
  detail::require(total_epochs > 0, "adversarial_probability: total_epochs must be > 0");
  detail::require(epoch >= 0 && epoch <= total_epochs,
                  "adversarial_probability: epoch " + std::to_string(epoch) + " outside [0," +
                      std::to_string(total_epochs) + "]");
  return 0.5 * static_cast<double>(epoch) / static_cast<double>(total_epochs);
}

double mean_pairwise_distance(const std::vector<Sample>& samples, int cap) {
  const int n = std::min<int>(cap, static_cast<int>(samples.size()));
  if (n < 2) return 0.0;
  double sum = 0.0;
  long count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      sum += ops::l2_dist(samples[i].image, samples[j].image);
      ++count;
    }
  return sum / static_cast<double>(count);
}

LoopResult run_active_loop(const ExperimentConfig& cfg, const std::vector<Sample>& train,
                           const std::vector<Sample>& val, const std::vector<Sample>& test,
                           const DenoiserParams& denoiser, const NoiseSchedule& sched,
                           LoopMode mode, LoopState* resume, LoopSink* sink) {
  detail::require(!train.empty(), "run_active_loop: empty training split");

  RngState root(cfg.seed);

  GuidanceConfig guidance = cfg.guidance;
  if (cfg.rho_frac > 0.0) {
    const double mpd = mean_pairwise_distance(train);
    detail::require(mpd > 0.0, "run_active_loop: degenerate dataset, mean pairwise distance 0");
    guidance.rho = cfg.rho_frac * mpd;
  }
  guidance.validate(sched.T);

  std::vector<Tensor> val_images, test_images;
  std::vector<int> val_labels, test_labels;
  for (const Sample& s : val) {
    val_images.push_back(s.image);
    val_labels.push_back(s.label);
  }
  for (const Sample& s : test) {
    test_images.push_back(s.image);
    test_labels.push_back(s.label);
  }

  LoopState local;
  LoopState& state = resume ? *resume : local;
  if (!resume) {
    state.bank = MemoryBank(cfg.bank_capacity);
    state.opt.momentum = cfg.momentum;
    RngState init_rng = root.fork("cls-init");
    state.classifier = init_classifier(cfg.classifier, init_rng);
    state.images.reserve(train.size() +
                         static_cast<size_t>(cfg.gen_per_epoch) * cfg.total_epochs);
    for (const Sample& s : train) {
      state.images.push_back(s.image);
      state.labels.push_back(s.label);
    }
    state.n_real = static_cast<long>(train.size());
  }

  const int gen_cutoff =
      static_cast<int>(cfg.gen_stop_fraction * static_cast<double>(cfg.total_epochs));

  for (int epoch = state.next_epoch; epoch < cfg.total_epochs; ++epoch) {
    const auto wall_start = std::chrono::steady_clock::now();

    const double lr = cosine_lr(cfg.lr, epoch, cfg.total_epochs);
    RngState train_rng = root.fork("cls-train/" + std::to_string(epoch));
    const double train_loss = train_classifier_epoch(state.classifier, state.opt, state.images,
                                                     state.labels, lr, cfg.batch, train_rng);

    const EvalReport val_report = evaluate(state.classifier, val_images, val_labels);
    const EvalReport test_report = evaluate(state.classifier, test_images, test_labels);

    const bool generating = mode != LoopMode::real_only && cfg.gen_per_epoch > 0 &&
                            epoch < gen_cutoff && !val.empty();
    if (generating) {
      std::vector<int> hard = find_hard_samples(val_report, cfg.selection);
      if (hard.empty()) {
        // nothing misclassified: fall back to the lowest-confidence samples so
        // the stated generation budget is always met
        std::vector<int> order(val.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
          return val_report.per_sample[a].confidence < val_report.per_sample[b].confidence;
        });
        order.resize(std::min<size_t>(order.size(), cfg.gen_per_epoch));
        hard = order;
      }
      for (int g = 0; g < cfg.gen_per_epoch; ++g) {
        const int guide_idx = hard[(g / cfg.multiplicity) % hard.size()];
        const Sample& guide = val[guide_idx];
        RngState gen_rng =
            root.fork("gen/" + std::to_string(epoch) + "/" + std::to_string(g));

        bool adversarial = false;
        if (mode == LoopMode::actgen && guidance.adversarial) {
          const double p = adversarial_probability(epoch + 1, cfg.total_epochs);
          adversarial = gen_rng.uniform() < p;
        }

        LineageRecord rec;
        rec.gen_id = state.n_generated;
        rec.epoch = epoch;
        rec.guide_index = guide_idx;
        rec.class_id = guide.label;
        rec.adversarial = adversarial;

        std::vector<StepEvent> events;
        Tensor image;
        if (mode == LoopMode::actgen) {
          GuidanceConfig gcfg = guidance;
          gcfg.adversarial = adversarial;
          if (cfg.few_shot)
            gcfg.i = confidence_to_guidance(val_report.per_sample[guide_idx].confidence, cfg.eta_L,
                                            cfg.eta_k, cfg.eta_p, cfg.eta_u);
          GenerationResult res = guided_generate(denoiser, &state.classifier, guide.image,
                                                 guide.label, gcfg, state.bank, sched, gen_rng,
                                                 &guide.gt_mask);
          image = std::move(res.image);
          events = std::move(res.events);
          for (auto it = events.rbegin(); it != events.rend(); ++it)
            if (it->grad_norm > 0.0 || it->l_contra != 0.0 || it->l_adv != 0.0) {
              rec.final_l_contra = it->l_contra;
              rec.final_l_adv = it->l_adv;
              break;
            }
        } else {  // random_gen: same budget, plain conditional sampling
          image = plain_generate(denoiser, guide.label, guidance.s, sched, gen_rng);
        }

        state.images.push_back(std::move(image));
        state.labels.push_back(guide.label);
        ++state.n_generated;
        if (adversarial) ++state.n_adversarial;
        state.lineage.push_back(rec);
        if (sink) sink->on_generation(rec, events);
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = train_loss;
    m.val_acc = val_report.accuracy;
    m.test_acc = test_report.accuracy;
    m.n_generated_cum = state.n_generated;
    m.n_adversarial_cum = state.n_adversarial;
    state.metrics.push_back(m);
    state.next_epoch = epoch + 1;

    const double measured =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    if (sink) {
      sink->on_epoch(m, measured);
      sink->on_epoch_state(state);
    }
  }

  LoopResult result;
  result.classifier = state.classifier;
  result.metrics = state.metrics;
  result.lineage = state.lineage;
  result.final_test_acc = state.metrics.empty() ? 0.0 : state.metrics.back().test_acc;
  return result;
}

namespace {
constexpr char kMagic[4] = {'A', 'G', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_tensor(BinWriter& w, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data) w.f64(v);
}

Tensor read_tensor(BinReader& r) {
  const std::uint32_t ndim = r.u32();
  std::vector<int> shape(ndim);
  for (auto& d : shape) d = static_cast<int>(r.u32());
  Tensor t(shape);
  for (auto& v : t.data) v = r.f64();
  return t;
}
}  // namespace

void save_loop_state(const std::string& path, const LoopState& state) {
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(state.next_epoch));
  w.i64(state.n_real);
  w.i64(state.n_generated);
  w.i64(state.n_adversarial);

  // classifier config + weights
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.channels));
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.height));
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.width));
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.c1));
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.c2));
  w.u32(static_cast<std::uint32_t>(state.classifier.cfg.num_classes));
  for (const auto& [name, t] : const_cast<LoopState&>(state).classifier.named_params())
    write_tensor(w, *t);

  w.f64(state.opt.momentum);
  w.u32(static_cast<std::uint32_t>(state.opt.velocity.size()));
  for (const Tensor& t : state.opt.velocity) write_tensor(w, t);

  // generated tail of the training set
  const long n_tail = static_cast<long>(state.images.size()) - state.n_real;
  w.i64(n_tail);
  for (long i = 0; i < n_tail; ++i) {
    w.u32(static_cast<std::uint32_t>(state.labels[state.n_real + i]));
    write_tensor(w, state.images[state.n_real + i]);
  }

  w.u32(static_cast<std::uint32_t>(state.bank.capacity_per_class()));
  w.u32(static_cast<std::uint32_t>(state.bank.store().size()));
  for (const auto& [cls, q] : state.bank.store()) {
    w.u32(static_cast<std::uint32_t>(cls));
    w.u32(static_cast<std::uint32_t>(q.size()));
    for (const Tensor& t : q) write_tensor(w, t);
  }

  w.u32(static_cast<std::uint32_t>(state.metrics.size()));
  for (const EpochMetrics& m : state.metrics) {
    w.u32(static_cast<std::uint32_t>(m.epoch));
    w.f64(m.train_loss);
    w.f64(m.val_acc);
    w.f64(m.test_acc);
    w.i64(m.n_generated_cum);
    w.i64(m.n_adversarial_cum);
    w.f64(m.wall_seconds);
  }

  w.u32(static_cast<std::uint32_t>(state.lineage.size()));
  for (const LineageRecord& rec : state.lineage) {
    w.i64(rec.gen_id);
    w.u32(static_cast<std::uint32_t>(rec.epoch));
    w.u32(static_cast<std::uint32_t>(rec.guide_index));
    w.u32(static_cast<std::uint32_t>(rec.class_id));
    w.u8(rec.adversarial ? 1 : 0);
    w.f64(rec.final_l_contra);
    w.f64(rec.final_l_adv);
  }
  w.finish();
}

void load_loop_state(const std::string& path, LoopState& state) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4))
    throw IoError("not a loop-state file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw VersionError("loop-state version " + std::to_string(version) + " unsupported: " + path);
  state.next_epoch = static_cast<int>(r.u32());
  const std::int64_t n_real = r.i64();
  detail::require(n_real == state.n_real,
                  "load_loop_state: state was saved with " + std::to_string(n_real) +
                      " real samples, run provides " + std::to_string(state.n_real));
  state.n_generated = r.i64();
  state.n_adversarial = r.i64();

  state.classifier.cfg.channels = static_cast<int>(r.u32());
  state.classifier.cfg.height = static_cast<int>(r.u32());
  state.classifier.cfg.width = static_cast<int>(r.u32());
  state.classifier.cfg.c1 = static_cast<int>(r.u32());
  state.classifier.cfg.c2 = static_cast<int>(r.u32());
  state.classifier.cfg.num_classes = static_cast<int>(r.u32());
  for (auto& [name, t] : state.classifier.named_params()) *t = read_tensor(r);

  state.opt.momentum = r.f64();
  const std::uint32_t n_vel = r.u32();
  state.opt.velocity.clear();
  for (std::uint32_t i = 0; i < n_vel; ++i) state.opt.velocity.push_back(read_tensor(r));

  const std::int64_t n_tail = r.i64();
  state.images.resize(state.n_real);
  state.labels.resize(state.n_real);
  for (std::int64_t i = 0; i < n_tail; ++i) {
    state.labels.push_back(static_cast<int>(r.u32()));
    state.images.push_back(read_tensor(r));
  }

  const int bank_cap = static_cast<int>(r.u32());
  state.bank = MemoryBank(bank_cap);
  const std::uint32_t n_classes = r.u32();
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    const int cls = static_cast<int>(r.u32());
    const std::uint32_t n_entries = r.u32();
    for (std::uint32_t i = 0; i < n_entries; ++i) state.bank.restore(cls, read_tensor(r));
  }

  const std::uint32_t n_metrics = r.u32();
  state.metrics.clear();
  for (std::uint32_t i = 0; i < n_metrics; ++i) {
    EpochMetrics m;
    m.epoch = static_cast<int>(r.u32());
    m.train_loss = r.f64();
    m.val_acc = r.f64();
    m.test_acc = r.f64();
    m.n_generated_cum = r.i64();
    m.n_adversarial_cum = r.i64();
    m.wall_seconds = r.f64();
    state.metrics.push_back(m);
  }

  const std::uint32_t n_lineage = r.u32();
  state.lineage.clear();
  for (std::uint32_t i = 0; i < n_lineage; ++i) {
    LineageRecord rec;
    rec.gen_id = r.i64();
    rec.epoch = static_cast<int>(r.u32());
    rec.guide_index = static_cast<int>(r.u32());
    rec.class_id = static_cast<int>(r.u32());
    rec.adversarial = r.u8() != 0;
    rec.final_l_contra = r.f64();
    rec.final_l_adv = r.f64();
    state.lineage.push_back(rec);
  }
  r.verify_crc();
}

}  // namespace actgen
