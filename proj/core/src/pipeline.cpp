#include "brp/pipeline.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "brp/imaging.hpp"
#include "brp/io.hpp"
#include "brp/labels.hpp"
#include "brp/patching.hpp"
#include "brp/proposals.hpp"

namespace brp {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double num(const KeyValues& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw IoError("checkpoint is missing metadata key '" + key + "'");
  return std::stod(it->second);
}

KeyValues with_prefix(const KeyValues& kv, const std::string& prefix) {
  KeyValues out;
  for (const auto& [k, v] : kv) {
    if (k.rfind(prefix, 0) == 0) out[k] = v;
  }
  return out;
}

torch::Tensor image_tensor(const RgbImage& img) {
  auto t = torch::empty({img.height(), img.width(), 3});
  std::copy(img.pixels().begin(), img.pixels().end(), t.data_ptr<float>());
  return t.permute({2, 0, 1}).unsqueeze(0).contiguous();
}

ProbMap plane_to_map(const torch::Tensor& plane) {
  const auto p = plane.contiguous();
  ProbMap m(static_cast<int>(p.size(0)), static_cast<int>(p.size(1)), 0.0f);
  std::copy_n(p.data_ptr<float>(), m.size(), m.begin());
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

Normalization Normalization::fit(const std::vector<Sample>& train, bool stain) {
  if (train.empty()) throw std::invalid_argument("Normalization::fit: no images");
  Normalization n;
  n.stain = stain;
  const auto ref = std::min_element(train.begin(), train.end(),
                                    [](const Sample& a, const Sample& b) { return a.stem < b.stem; });
  n.reference_lab = channel_stats(rgb_to_lab(ref->image));
  std::vector<RgbImage> normed;
  normed.reserve(train.size());
  for (const auto& s : train) normed.push_back(stain ? stain_normalize(s.image, n.reference_lab) : s.image);
  const auto st = channel_stats(normed);
  n.mean = st.mean;
  for (std::size_t c = 0; c < 3; ++c) n.std[c] = st.std[c] > 1e-6 ? st.std[c] : 1.0;
  return n;
}

RgbImage Normalization::apply(const RgbImage& img) const {
  return zscore_normalize(stain ? stain_normalize(img, reference_lab) : img, mean, std);
}

void Normalization::store(KeyValues& meta) const {
  meta["norm.stain"] = stain ? "1" : "0";
  for (std::size_t c = 0; c < 3; ++c) {
    const auto i = std::to_string(c);
    meta["norm.ref_mean." + i] = fmt(reference_lab.mean[c]);
    meta["norm.ref_std." + i] = fmt(reference_lab.std[c]);
    meta["norm.mean." + i] = fmt(mean[c]);
    meta["norm.std." + i] = fmt(std[c]);
  }
}

Normalization Normalization::load(const KeyValues& meta) {
  Normalization n;
  n.stain = num(meta, "norm.stain") != 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto i = std::to_string(c);
    n.reference_lab.mean[c] = num(meta, "norm.ref_mean." + i);
    n.reference_lab.std[c] = num(meta, "norm.ref_std." + i);
    n.mean[c] = num(meta, "norm.mean." + i);
    n.std[c] = num(meta, "norm.std." + i);
  }
  return n;
}

// ---------------------------------------------------------------------------

void save_stage1(const fs::path& path, const Stage1Model& model, const KeyValues& extra_meta) {
  if (!model.net) throw std::invalid_argument("save_stage1: no network");
  auto ckpt = capture_module(*model.net);
  TrainConfig cfg;
  cfg.stage1.tafe = model.net->config();
  cfg.stage1.postproc = model.postproc;
  const auto kv = to_key_values(cfg);
  ckpt.meta = extra_meta;
  for (const auto& p : {"stage1.tafe.", "stage1.postproc."}) {
    for (const auto& [k, v] : with_prefix(kv, p)) ckpt.meta[k] = v;
  }
  ckpt.meta["kind"] = "stage1";
  model.norm.store(ckpt.meta);
  ckpt.save(path);
}

Stage1Model load_stage1(const fs::path& path) {
  const auto ckpt = Checkpoint::load(path);
  if (ckpt.require("kind") != "stage1") throw IoError(path.string() + " is not a stage-1 checkpoint");
  TrainConfig cfg;
  KeyValues kv = with_prefix(ckpt.meta, "stage1.tafe.");
  for (const auto& [k, v] : with_prefix(ckpt.meta, "stage1.postproc.")) kv[k] = v;
  apply_key_values(cfg, kv);
  Stage1Model m;
  m.net = Tafe(cfg.stage1.tafe);
  restore_module(*m.net, ckpt);
  m.net->eval();
  m.norm = Normalization::load(ckpt.meta);
  m.postproc = cfg.stage1.postproc;
  return m;
}

void save_stage2(const fs::path& path, const Stage2Model& model, const KeyValues& extra_meta) {
  if (!model.net) throw std::invalid_argument("save_stage2: no network");
  auto ckpt = capture_module(*model.net);
  TrainConfig cfg;
  cfg.stage2.refine = model.net->config();
  cfg.stage2.patch = model.patch;
  const auto kv = to_key_values(cfg);
  ckpt.meta = extra_meta;
  for (const auto& p : {"stage2.refine.", "stage2.patch."}) {
    for (const auto& [k, v] : with_prefix(kv, p)) ckpt.meta[k] = v;
  }
  ckpt.meta["kind"] = "stage2";
  ckpt.meta["size_class"] = to_string(model.size_class);
  ckpt.meta["trained"] = model.trained ? "1" : "0";
  ckpt.save(path);
}

Stage2Model load_stage2(const fs::path& path) {
  const auto ckpt = Checkpoint::load(path);
  if (ckpt.require("kind") != "stage2") throw IoError(path.string() + " is not a stage-2 checkpoint");
  TrainConfig cfg;
  KeyValues kv = with_prefix(ckpt.meta, "stage2.refine.");
  for (const auto& [k, v] : with_prefix(ckpt.meta, "stage2.patch.")) kv[k] = v;
  apply_key_values(cfg, kv);
  Stage2Model m;
  m.net = RefineNet(cfg.stage2.refine);
  restore_module(*m.net, ckpt);
  m.net->eval();
  m.patch = cfg.stage2.patch;
  const auto& cls = ckpt.require("size_class");
  if (cls == "small") m.size_class = SizeClass::kSmall;
  else if (cls == "large") m.size_class = SizeClass::kLarge;
  else throw IoError("unknown size class '" + cls + "' in " + path.string());
  m.trained = ckpt.require("trained") == "1";
  return m;
}

// ---------------------------------------------------------------------------

ProbabilityPair predict_probabilities(Tafe& net, const RgbImage& normalized) {
  const int h = normalized.height(), w = normalized.width();
  const int ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
  torch::NoGradGuard no_grad;
  const bool was_training = net->is_training();
  net->eval();
  auto x = image_tensor(normalized);
  if (ph || pw) {
    namespace F = torch::nn::functional;
    x = F::pad(x, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
  }
  const auto out = net->forward(x);
  net->train(was_training);
  using torch::indexing::Slice;
  ProbabilityPair pp;
  pp.seg = plane_to_map(out.seg_prob.index({0, 0, Slice(0, h), Slice(0, w)}));
  pp.bnd = plane_to_map(out.bnd_prob.index({0, 0, Slice(0, h), Slice(0, w)}));
  return pp;
}

InstanceMap refine_proposals(const RgbImage& normalized, const ProbabilityPair& probs,
                             const InstanceMap& proposals, Stage2Pair& stage2,
                             const std::optional<fs::path>& debug_dir, const std::string& debug_stem) {
  if (!stage2.small.net || !stage2.large.net) throw std::invalid_argument("refine_proposals: missing network");
  if (!(stage2.small.patch.s_small == stage2.large.patch.s_small &&
        stage2.small.patch.s_large == stage2.large.patch.s_large &&
        stage2.small.patch.margin == stage2.large.patch.margin &&
        stage2.small.patch.mask_dilation == stage2.large.patch.mask_dilation)) {
    throw std::invalid_argument("refine_proposals: stage-2 networks disagree on patch geometry");
  }
  const auto& params = stage2.small.patch;
  const auto props = extract_proposals(proposals);
  if (props.empty()) return InstanceMap(proposals.height(), proposals.width(), 0);

  RefineNetworks nets{stage2.small.net, stage2.large.net, params};
  std::vector<PatchRecord> records;
  records.reserve(props.size());
  for (const auto& p : props) records.push_back(extract_patch(normalized, probs, p, params));
  if (debug_dir) {
    fs::create_directories(*debug_dir);
    for (const auto& r : records) {
      write_patch_strip(*debug_dir / (debug_stem + "_p" + std::to_string(r.proposal_id) + "_" +
                                      to_string(r.size_class) + ".png"),
                        r);
    }
  }

  auto trained = [&](SizeClass c) { return c == SizeClass::kSmall ? stage2.small.trained : stage2.large.trained; };
  std::vector<PatchRecord> to_refine;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (trained(records[i].size_class)) {
      to_refine.push_back(records[i]);
      where.push_back(i);
    }
  }
  const auto refined_subset = refine_batch(to_refine, nets);

  std::vector<ProbMap> refined(records.size());
  std::vector<Window> windows;
  windows.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) windows.push_back(records[i].window);
  for (std::size_t k = 0; k < where.size(); ++k) refined[where[k]] = refined_subset[k];
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (trained(records[i].size_class)) continue;
    // Bypass: the proposal's own mask at patch resolution.
    BinaryMask own(proposals.height(), proposals.width(), 0);
    for (std::size_t p = 0; p < own.size(); ++p) own[p] = proposals[p] == props[i].id ? 1 : 0;
    const auto crop = crop_padded(own, records[i].window);
    ProbMap m(crop.height(), crop.width(), 0.0f);
    for (std::size_t p = 0; p < m.size(); ++p) m[p] = crop[p] ? 1.0f : 0.0f;
    refined[i] = m;
  }
  return assemble(props, refined, windows, proposals.height(), proposals.width());
}

ImageInference infer_image(Stage1Model& stage1, Stage2Pair* stage2, const RgbImage& image,
                           const InferOptions& opts, const std::string& stem) {
  if (!stage1.net) throw std::invalid_argument("infer_image: no stage-1 network");
  if (opts.use_stage2 && !stage2) throw std::invalid_argument("infer_image: stage 2 requested without networks");
  const auto normalized = stage1.norm.apply(image);
  ImageInference res;
  res.probs = predict_probabilities(stage1.net, normalized);
  res.proposals = propose(res.probs, opts.postproc.value_or(stage1.postproc));
  res.instances = opts.use_stage2
                      ? refine_proposals(normalized, res.probs, res.proposals, *stage2, opts.debug_patch_dir, stem)
                      : res.proposals;
  return res;
}

std::vector<InstanceMap> infer(Stage1Model& stage1, Stage2Pair* stage2, const std::vector<Sample>& samples,
                               const InferOptions& opts) {
  std::vector<InstanceMap> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(infer_image(stage1, stage2, s.image, opts, s.stem).instances);
  return out;
}

}  // namespace brp
