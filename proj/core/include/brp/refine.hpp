#pragma once

#include <torch/torch.h>

#include <array>
#include <optional>
#include <vector>

#include "brp/grid.hpp"
#include "brp/patching.hpp"
#include "brp/tafe.hpp"

namespace brp {

struct RefineNetConfig {
  std::array<int, 4> growth_rates{16, 32, 64, 128};
  int layers_per_block = 4;
  int in_channels = kPatchChannels;
  int out_channels = 1;
  int stem_channels = 32;

  /// Reduced growth rates for CPU runs.
  static RefineNetConfig desk_scale();
  void validate() const;
  bool operator==(const RefineNetConfig&) const = default;
};

/// U-shaped dense-block encoder-decoder for proposal patches: four encoder
/// blocks with 2x downsampling after the first three, a mirrored decoder
/// with skip connections, and a 1x1 + sigmoid head.
class RefineNetImpl : public torch::nn::Module {
 public:
  explicit RefineNetImpl(const RefineNetConfig& cfg);

  /// N x in_channels x S x S -> N x out_channels x S x S probabilities; S % 8 == 0.
  torch::Tensor forward(const torch::Tensor& x);

  const RefineNetConfig& config() const { return cfg_; }
  /// Number of samples seen by forward() since construction.
  std::int64_t samples_processed() const { return samples_processed_; }

 private:
  RefineNetConfig cfg_;
  torch::nn::Conv2d stem_{nullptr};
  std::vector<DenseBlock> encoder_;
  std::vector<Transition> downs_;
  std::vector<torch::nn::BatchNorm2d> reduce_norms_;
  std::vector<torch::nn::Conv2d> reduces_;
  std::vector<DenseBlock> decoder_;
  torch::nn::BatchNorm2d head_norm_{nullptr};
  torch::nn::Conv2d head_{nullptr};
  std::int64_t samples_processed_ = 0;
};
TORCH_MODULE(RefineNet);

RefineNet build_refine_net(const RefineNetConfig& cfg);

/// The small/large pair together with the patch geometry they expect.
struct RefineNetworks {
  RefineNet small{nullptr};
  RefineNet large{nullptr};
  PatchParams patch;

  RefineNet& for_class(SizeClass c) { return c == SizeClass::kSmall ? small : large; }
};

struct MatchResult {
  int proposal_id = 0;
  std::optional<int> matched_gt_id;
  double iou = 0.0;
  BinaryMask label;  // patch_side x patch_side, all zero when unmatched
};

/// Matches a proposal to the GT instance of maximal IoU; when that IoU is
/// strictly above tau the label is the GT instance cut to `window` and resized
/// (nearest) to patch_side, otherwise all zero.
MatchResult match_proposal(const Proposal& proposal, const InstanceMap& gt, double tau,
                           const Window& window, int patch_side);

/// Deterministic inference, each record routed to the network of its size
/// class. Throws on a record whose side does not match its class.
std::vector<ProbMap> refine_batch(const std::vector<PatchRecord>& records, RefineNetworks& nets);

/// Pastes refined maps back: each map is resized to its window, thresholded
/// at 0.5 and written into the image; contested pixels go to the higher
/// probability (lower proposal id on ties). Result is relabeled contiguous.
InstanceMap assemble(const std::vector<Proposal>& proposals, const std::vector<ProbMap>& refined,
                     const std::vector<Window>& windows, int image_height, int image_width);

/// Packs records of one size class into an N x 5 x S x S tensor.
torch::Tensor stack_patches(const std::vector<const PatchRecord*>& records);

}  // namespace brp
