#include "brp/refine.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "brp/imaging.hpp"
#include "brp/labels.hpp"

namespace brp {

namespace nn = torch::nn;

RefineNetConfig RefineNetConfig::desk_scale() {
  RefineNetConfig c;
  c.growth_rates = {4, 8, 16, 32};
  c.stem_channels = 8;
  return c;
}

void RefineNetConfig::validate() const {
  for (int g : growth_rates) {
    if (g < 1) throw std::invalid_argument("RefineNetConfig: growth rates must be positive");
  }
  if (layers_per_block < 1) throw std::invalid_argument("RefineNetConfig: layers_per_block must be positive");
  if (in_channels < 1 || out_channels < 1 || stem_channels < 1) {
    throw std::invalid_argument("RefineNetConfig: channel counts must be positive");
  }
}

RefineNetImpl::RefineNetImpl(const RefineNetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int layers = cfg_.layers_per_block;
  stem_ = register_module("stem", nn::Conv2d(nn::Conv2dOptions(cfg_.in_channels, cfg_.stem_channels, 3)
                                                 .padding(1).bias(false)));
  std::array<int, 4> skip_channels{};
  int c = cfg_.stem_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    auto block = DenseBlock(c, layers, cfg_.growth_rates[i], 0);
    c = block->out_channels();
    skip_channels[i] = c;
    encoder_.push_back(register_module("enc" + std::to_string(i + 1), block));
    if (i < 3) {
      downs_.push_back(register_module("down" + std::to_string(i + 1), Transition(c, c / 2)));
      c /= 2;
    }
  }
  for (int j = 2; j >= 0; --j) {
    const auto idx = static_cast<std::size_t>(j);
    const int in = c + skip_channels[idx];
    const int reduced = 2 * cfg_.growth_rates[idx];
    const auto name = std::to_string(j + 1);
    reduce_norms_.push_back(register_module("dec_norm" + name, nn::BatchNorm2d(in)));
    reduces_.push_back(register_module(
        "dec_reduce" + name, nn::Conv2d(nn::Conv2dOptions(in, reduced, 1).bias(false))));
    auto block = DenseBlock(reduced, layers, cfg_.growth_rates[idx], 0);
    c = block->out_channels();
    decoder_.push_back(register_module("dec" + name, block));
  }
  head_norm_ = register_module("head_norm", nn::BatchNorm2d(c));
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(c, cfg_.out_channels, 1)));
}

torch::Tensor RefineNetImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != cfg_.in_channels) {
    throw std::invalid_argument("RefineNet: expected N x " + std::to_string(cfg_.in_channels) + " x S x S input");
  }
  if (x.size(2) % 8 != 0 || x.size(3) % 8 != 0) {
    throw std::invalid_argument("RefineNet: input side must be divisible by 8");
  }
  samples_processed_ += x.size(0);
  std::vector<torch::Tensor> skips;
  torch::Tensor h = stem_(x);
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    h = encoder_[i]->forward(h);
    skips.push_back(h);
    if (i < downs_.size()) h = downs_[i]->forward(h);
  }
  for (std::size_t k = 0; k < decoder_.size(); ++k) {
    const auto& skip = skips[2 - k];
    h = upsample_to(h, skip.size(2), skip.size(3));
    h = reduces_[k](torch::relu(reduce_norms_[k](torch::cat({h, skip}, 1))));
    h = decoder_[k]->forward(h);
  }
  return torch::sigmoid(head_(torch::relu(head_norm_(h))));
}

RefineNet build_refine_net(const RefineNetConfig& cfg) { return RefineNet(cfg); }

MatchResult match_proposal(const Proposal& proposal, const InstanceMap& gt, double tau,
                           const Window& window, int patch_side) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("match_proposal: tau must be in [0,1]");
  MatchResult res;
  res.proposal_id = proposal.id;
  res.label = BinaryMask(patch_side, patch_side, 0);

  const auto areas = label_areas(gt);
  std::vector<long> inter(areas.size(), 0);
  long proposal_area = 0;
  for (int r = 0; r < proposal.bbox.height; ++r) {
    for (int c = 0; c < proposal.bbox.width; ++c) {
      if (!proposal.mask(r, c)) continue;
      ++proposal_area;
      const auto g = gt(proposal.bbox.row0 + r, proposal.bbox.col0 + c);
      if (g > 0) ++inter[static_cast<std::size_t>(g)];
    }
  }
  int best = 0;
  double best_iou = 0.0;
  for (std::size_t g = 1; g < inter.size(); ++g) {
    if (inter[g] == 0) continue;
    const double v = static_cast<double>(inter[g]) /
                     static_cast<double>(proposal_area + areas[g] - inter[g]);
    if (v > best_iou) {
      best_iou = v;
      best = static_cast<int>(g);
    }
  }
  res.iou = best_iou;
  if (best == 0 || !(best_iou > tau)) return res;

  res.matched_gt_id = best;
  BinaryMask instance(gt.height(), gt.width(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) instance[i] = gt[i] == best ? 1 : 0;
  res.label = resize_nearest(crop_padded(instance, window), patch_side, patch_side);
  return res;
}

torch::Tensor stack_patches(const std::vector<const PatchRecord*>& records) {
  if (records.empty()) throw std::invalid_argument("stack_patches: no records");
  const int s = records.front()->side;
  auto batch = torch::empty({static_cast<int64_t>(records.size()), kPatchChannels, s, s});
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i]->side != s) throw std::invalid_argument("stack_patches: mixed patch sizes");
    std::copy(records[i]->input.begin(), records[i]->input.end(),
              batch[static_cast<int64_t>(i)].data_ptr<float>());
  }
  return batch;
}

std::vector<ProbMap> refine_batch(const std::vector<PatchRecord>& records, RefineNetworks& nets) {
  constexpr std::size_t kChunk = 16;
  std::vector<ProbMap> out(records.size());
  torch::NoGradGuard no_grad;
  for (SizeClass cls : {SizeClass::kSmall, SizeClass::kLarge}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].size_class != cls) continue;
      if (records[i].side != nets.patch.target_side(cls)) {
        throw std::invalid_argument("refine_batch: record side does not match its size class");
      }
      idx.push_back(i);
    }
    if (idx.empty()) continue;
    auto& net = nets.for_class(cls);
    if (!net) throw std::invalid_argument(std::string("refine_batch: no ") + to_string(cls) + " network");
    const bool was_training = net->is_training();
    net->eval();
    for (std::size_t start = 0; start < idx.size(); start += kChunk) {
      const auto stop = std::min(idx.size(), start + kChunk);
      std::vector<const PatchRecord*> chunk;
      for (auto k = start; k < stop; ++k) chunk.push_back(&records[idx[k]]);
      const auto probs = net->forward(stack_patches(chunk)).contiguous();
      const int s = chunk.front()->side;
      for (auto k = start; k < stop; ++k) {
        ProbMap map(s, s, 0.0f);
        const auto plane = probs[static_cast<int64_t>(k - start)][0];
        std::copy_n(plane.data_ptr<float>(), map.size(), map.begin());
        out[idx[k]] = std::move(map);
      }
    }
    net->train(was_training);
  }
  return out;
}

InstanceMap assemble(const std::vector<Proposal>& proposals, const std::vector<ProbMap>& refined,
                     const std::vector<Window>& windows, int image_height, int image_width) {
  if (proposals.size() != refined.size() || proposals.size() != windows.size()) {
    throw std::invalid_argument("assemble: need one refined map and window per proposal");
  }
  InstanceMap owner(image_height, image_width, 0);
  ProbMap best(image_height, image_width, -1.0f);
  for (std::size_t k = 0; k < proposals.size(); ++k) {
    const auto& w = windows[k];
    const auto map = resize_bilinear(refined[k], w.side, w.side);
    const int id = proposals[k].id;
    for (int r = 0; r < w.side; ++r) {
      const int sr = w.row0 + r;
      if (sr < 0 || sr >= image_height) continue;
      for (int c = 0; c < w.side; ++c) {
        const int sc = w.col0 + c;
        if (sc < 0 || sc >= image_width) continue;
        const float p = map(r, c);
        if (p < 0.5f) continue;
        const float cur = best(sr, sc);
        if (p > cur || (p == cur && id < owner(sr, sc))) {
          best(sr, sc) = p;
          owner(sr, sc) = id;
        }
      }
    }
  }
  return relabel_contiguous(owner);
}

}  // namespace brp
