#include "brp/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "brp/io.hpp"
#include "brp/labels.hpp"
#include "brp/losses.hpp"
#include "brp/metrics.hpp"
#include "brp/proposals.hpp"
#include "brp/schedule.hpp"

namespace brp {

namespace fs = std::filesystem;

namespace {

void set_lr(torch::optim::AdamW& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
}

torch::optim::AdamW make_optimizer(const std::vector<torch::Tensor>& params, double lr, double weight_decay,
                                   double beta1, double beta2) {
  return torch::optim::AdamW(
      params, torch::optim::AdamWOptions(lr).weight_decay(weight_decay).betas({beta1, beta2}));
}

void write_image_tensor(const RgbImage& img, float* dst) {
  const int h = img.height(), w = img.width();
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) *dst++ = img(r, c, ch);
    }
  }
}

template <typename Mask>
void write_mask_tensor(const Mask& m, float* dst) {
  for (std::size_t i = 0; i < m.size(); ++i) dst[i] = m[i] ? 1.0f : 0.0f;
}

void require_finite(double loss, const char* stage, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << stage << " training diverged: loss " << loss << " at epoch " << epoch << ", batch " << batch
       << "; lower the learning rate or check the inputs";
    throw std::runtime_error(os.str());
  }
}

double mean_val_aji(Stage1Model& model, const std::vector<Sample>& val) {
  double sum = 0.0;
  for (const auto& s : val) {
    const auto res = infer_image(model, nullptr, s.image, InferOptions{false, std::nullopt, std::nullopt});
    sum += aji(s.instances, res.instances);
  }
  return sum / static_cast<double>(val.size());
}

}  // namespace

std::pair<std::vector<Sample>, std::vector<Sample>> split_train_val(const std::vector<Sample>& samples,
                                                                   double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("split_train_val: fraction in [0, 1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(samples.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (auto i : train_idx) out.first.push_back(samples[i]);
  for (auto i : val_idx) out.second.push_back(samples[i]);
  return out;
}

std::pair<SemanticMask, BoundaryMask> stage1_targets(const InstanceMap& m, int boundary_width) {
  return {instance_to_semantic(m), instance_to_boundary(m, boundary_width)};
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  out << "epoch\tlr\tloss\tval_aji\n";
  for (const auto& r : history) {
    out << r.epoch << '\t' << r.lr << '\t' << r.loss << '\t';
    if (r.val_aji) out << *r.val_aji;
    else out << "nan";
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Stage1Result train_stage1(const std::vector<Sample>& train, const std::vector<Sample>& val,
                          const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_stage1: empty training set");
  const auto& s1 = cfg.stage1;
  const auto schedule = make_restart_schedule(s1.lr0, s1.first_period, s1.epochs);
  if (opts.out_dir) fs::create_directories(*opts.out_dir);

  torch::manual_seed(cfg.seed);
  std::mt19937_64 rng(cfg.seed);

  Stage1Result result;
  Stage1Model& model = result.model;
  model.norm = Normalization::fit(train, s1.stain_normalize);
  model.postproc = s1.postproc;
  model.net = Tafe(s1.tafe);
  model.net->train();

  auto opt = make_optimizer(model.net->parameters(), s1.lr0, s1.weight_decay, s1.beta1, s1.beta2);
  const int crop = s1.augment.crop_size;
  const auto n_batches = (train.size() + static_cast<std::size_t>(s1.batch_size) - 1) /
                         static_cast<std::size_t>(s1.batch_size);

  std::optional<Checkpoint> best_state;
  double best_aji = -1.0;
  auto save_to = [&](const std::string& name) {
    if (opts.out_dir) save_stage1(*opts.out_dir / name, model);
  };

  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < s1.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    model.net->train();
    double loss_sum = 0.0;
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr_at(schedule, epoch);
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto lo = b * static_cast<std::size_t>(s1.batch_size);
      const auto hi = std::min(train.size(), lo + static_cast<std::size_t>(s1.batch_size));
      const auto n = static_cast<int64_t>(hi - lo);
      auto x = torch::empty({n, 3, crop, crop});
      auto seg_t = torch::empty({n, 1, crop, crop});
      auto bnd_t = torch::empty({n, 1, crop, crop});
      for (auto i = lo; i < hi; ++i) {
        const auto k = static_cast<int64_t>(i - lo);
        const auto aug = augment(train[order[i]], s1.augment, rng);
        write_image_tensor(model.norm.apply(aug.image), x[k].data_ptr<float>());
        const auto [seg, bnd] = stage1_targets(aug.instances, s1.boundary_width);
        write_mask_tensor(seg, seg_t[k].data_ptr<float>());
        write_mask_tensor(bnd, bnd_t[k].data_ptr<float>());
      }
      set_lr(opt, lr_at(schedule, epoch + static_cast<double>(b) / static_cast<double>(n_batches)));
      opt.zero_grad();
      auto loss = stage1_loss(model.net->forward(x), seg_t, bnd_t, s1.loss);
      const double v = loss.item<double>();
      require_finite(v, "stage-1", epoch + 1, b);
      loss.backward();
      opt.step();
      loss_sum += v * static_cast<double>(n);
    }
    rec.loss = loss_sum / static_cast<double>(train.size());
    if (!val.empty()) {
      rec.val_aji = mean_val_aji(model, val);
      if (*rec.val_aji > best_aji) {
        best_aji = *rec.val_aji;
        best_state = capture_module(*model.net);
        result.best_epoch = epoch + 1;
        save_to("stage1_best.brpc");
      }
    }
    result.history.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
    const double next = epoch + 1;
    const bool boundary = next == s1.epochs ||
                          std::find(schedule.starts.begin(), schedule.starts.end(), next) != schedule.starts.end();
    if (boundary) save_to("stage1_epoch" + std::to_string(epoch + 1) + ".brpc");
  }
  save_to("stage1_final.brpc");
  if (best_state) {
    restore_module(*model.net, *best_state);
  } else {
    result.best_epoch = s1.epochs;
    save_to("stage1_best.brpc");
  }
  model.net->eval();
  if (opts.out_dir) write_history(*opts.out_dir / "history_stage1.tsv", result.history);
  return result;
}

// ---------------------------------------------------------------------------

std::vector<Stage2Sample> build_stage2_samples(Stage1Model& stage1, const std::vector<Sample>& train,
                                               const TrainConfig& cfg) {
  std::vector<Stage2Sample> out;
  for (const auto& s : train) {
    const auto res = infer_image(stage1, nullptr, s.image, InferOptions{false, cfg.stage1.postproc, std::nullopt});
    const auto normalized = stage1.norm.apply(s.image);
    for (const auto& p : extract_proposals(res.proposals)) {
      Stage2Sample smp;
      smp.stem = s.stem;
      smp.record = extract_patch(normalized, res.probs, p, cfg.stage2.patch);
      auto match = match_proposal(p, s.instances, cfg.stage2.tau, smp.record.window, smp.record.side);
      smp.label = std::move(match.label);
      smp.matched_gt_id = match.matched_gt_id;
      out.push_back(std::move(smp));
    }
  }
  return out;
}

namespace {

void flip_square(float* data, int side, bool h, bool v) {
  if (!h && !v) return;
  std::vector<float> tmp(data, data + static_cast<std::size_t>(side) * side);
  for (int r = 0; r < side; ++r) {
    const int sr = v ? side - 1 - r : r;
    for (int c = 0; c < side; ++c) {
      const int sc = h ? side - 1 - c : c;
      data[r * side + c] = tmp[static_cast<std::size_t>(sr * side + sc)];
    }
  }
}

std::vector<EpochRecord> train_refine(RefineNet& net, const std::vector<const Stage2Sample*>& samples,
                                      const TrainConfig& cfg, std::uint64_t seed) {
  const auto& s2 = cfg.stage2;
  const auto schedule = make_restart_schedule(s2.lr0, s2.epochs, s2.epochs);
  std::mt19937_64 rng(seed);
  auto opt = make_optimizer(net->parameters(), s2.lr0, s2.weight_decay, cfg.stage1.beta1, cfg.stage1.beta2);
  const int side = samples.front()->record.side;
  const auto bs = static_cast<std::size_t>(s2.batch_size);
  const auto n_batches = (samples.size() + bs - 1) / bs;
  std::vector<std::size_t> order(samples.size());
  std::vector<EpochRecord> history;
  net->train();
  for (int epoch = 0; epoch < s2.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr_at(schedule, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto lo = b * bs, hi = std::min(samples.size(), lo + bs);
      const auto n = static_cast<int64_t>(hi - lo);
      auto x = torch::empty({n, kPatchChannels, side, side});
      auto y = torch::empty({n, 1, side, side});
      for (auto i = lo; i < hi; ++i) {
        const auto k = static_cast<int64_t>(i - lo);
        const auto& smp = *samples[order[i]];
        const bool h = std::bernoulli_distribution(0.5)(rng), v = std::bernoulli_distribution(0.5)(rng);
        float* xd = x[k].data_ptr<float>();
        std::copy(smp.record.input.begin(), smp.record.input.end(), xd);
        for (int ch = 0; ch < kPatchChannels; ++ch) flip_square(xd + ch * side * side, side, h, v);
        float* yd = y[k].data_ptr<float>();
        write_mask_tensor(smp.label, yd);
        flip_square(yd, side, h, v);
      }
      set_lr(opt, lr_at(schedule, epoch + static_cast<double>(b) / static_cast<double>(n_batches)));
      opt.zero_grad();
      const auto p = net->forward(x);
      auto loss = s2.loss == Stage2Loss::kFocal
                      ? brp::focal_loss(p, y, cfg.stage1.loss.focal_gamma, cfg.stage1.loss.focal_alpha)
                      : brp::binary_cross_entropy(p, y);
      const double v = loss.item<double>();
      require_finite(v, "stage-2", epoch + 1, b);
      loss.backward();
      opt.step();
      loss_sum += v * static_cast<double>(n);
    }
    rec.loss = loss_sum / static_cast<double>(samples.size());
    history.push_back(rec);
  }
  net->eval();
  return history;
}

}  // namespace

Stage2Result train_stage2(const std::vector<Stage2Sample>& samples, const TrainConfig& cfg,
                          const TrainOptions& opts) {
  cfg.validate();
  if (samples.empty()) {
    throw std::runtime_error("train_stage2: stage 1 produced no proposals on any training image");
  }
  if (opts.out_dir) fs::create_directories(*opts.out_dir);
  torch::manual_seed(cfg.seed + 1);
  Stage2Result res;
  for (SizeClass cls : {SizeClass::kSmall, SizeClass::kLarge}) {
    std::vector<const Stage2Sample*> subset;
    for (const auto& s : samples) {
      if (s.record.size_class == cls) subset.push_back(&s);
    }
    Stage2Model& m = cls == SizeClass::kSmall ? res.nets.small : res.nets.large;
    m.size_class = cls;
    m.patch = cfg.stage2.patch;
    m.net = RefineNet(cfg.stage2.refine);
    m.trained = !subset.empty();
    if (m.trained) {
      auto hist = train_refine(m.net, subset, cfg, cfg.seed + (cls == SizeClass::kSmall ? 11 : 23));
      if (opts.on_epoch) {
        for (const auto& r : hist) opts.on_epoch(r);
      }
      (cls == SizeClass::kSmall ? res.history_small : res.history_large) = std::move(hist);
    }
    m.net->eval();
    (cls == SizeClass::kSmall ? res.n_small : res.n_large) = subset.size();
    if (opts.out_dir) {
      save_stage2(*opts.out_dir / (std::string("stage2_") + to_string(cls) + ".brpc"), m);
    }
  }
  if (opts.out_dir) {
    write_history(*opts.out_dir / "history_stage2_small.tsv", res.history_small);
    write_history(*opts.out_dir / "history_stage2_large.tsv", res.history_large);
  }
  return res;
}

Stage2Result train_stage2(Stage1Model& stage1, const std::vector<Sample>& train, const TrainConfig& cfg,
                          const TrainOptions& opts) {
  return train_stage2(build_stage2_samples(stage1, train, cfg), cfg, opts);
}

}  // namespace brp
