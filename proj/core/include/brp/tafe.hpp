#pragma once

#include <torch/torch.h>

#include <array>
#include <utility>
#include <vector>

namespace brp {

/// Stage-1 network hyper-parameters. Scales are fixed at 1, 1/2, 1/4, 1/8 and
/// three fusion modules sit at the three coarser scales.
struct TafeConfig {
  static constexpr int kLevels = 4;
  static constexpr int kFusionModules = 3;

  std::array<int, kLevels> block_depths{2, 2, 2, 2};
  int growth_rate = 8;
  int proj_channels = 32;
  int stem_channels = 16;
  /// Bottleneck width multiplier inside dense layers (0 disables the 1x1 bottleneck).
  int bn_size = 4;
  bool use_ffm = true;

  /// DenseNet-121-style backbone with depths (6, 12, 18, 24), growth 32, 256-channel projections.
  static TafeConfig full_scale();
  /// Small CPU-friendly preset.
  static TafeConfig desk_scale();

  void validate() const;
  /// Channel count of each raw backbone level.
  std::array<int, kLevels> backbone_channels() const;
  bool operator==(const TafeConfig&) const = default;
};

struct EncoderFeatures {
  std::vector<torch::Tensor> f_seg;
  std::vector<torch::Tensor> f_bnd;
};

struct TafeOutput {
  torch::Tensor seg_prob;  // N x 1 x H x W
  torch::Tensor bnd_prob;
  std::vector<torch::Tensor> aux_seg;  // one per level, upsampled to H x W
  std::vector<torch::Tensor> aux_bnd;
};

/// BN-ReLU-Conv1x1 bottleneck (optional) followed by BN-ReLU-Conv3x3; returns
/// only the `growth` new channels.
class DenseLayerImpl : public torch::nn::Module {
 public:
  DenseLayerImpl(int in_channels, int growth, int bn_size);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::BatchNorm2d norm1_{nullptr};
  torch::nn::Conv2d conv1_{nullptr};
  torch::nn::BatchNorm2d norm2_{nullptr};
  torch::nn::Conv2d conv2_{nullptr};
};
TORCH_MODULE(DenseLayer);

class DenseBlockImpl : public torch::nn::Module {
 public:
  DenseBlockImpl(int in_channels, int num_layers, int growth, int bn_size);
  torch::Tensor forward(const torch::Tensor& x);
  int out_channels() const { return out_channels_; }

 private:
  torch::nn::ModuleList layers_;
  int out_channels_;
};
TORCH_MODULE(DenseBlock);

/// BN-ReLU-Conv1x1 then 2x average pooling.
class TransitionImpl : public torch::nn::Module {
 public:
  TransitionImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::BatchNorm2d norm_{nullptr};
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(Transition);

/// Dense-block backbone whose stem keeps full resolution (stride-1 7x7, no
/// pooling), so the four block outputs sit at scales 1, 1/2, 1/4 and 1/8.
class DenseBackboneImpl : public torch::nn::Module {
 public:
  explicit DenseBackboneImpl(const TafeConfig& cfg);
  std::vector<torch::Tensor> forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d stem_conv_{nullptr};
  torch::nn::BatchNorm2d stem_norm_{nullptr};
  std::vector<DenseBlock> blocks_;
  std::vector<Transition> transitions_;
};
TORCH_MODULE(DenseBackbone);

/// Four unshared 1x1 convolutions mapping backbone levels to `out_channels`.
class FeatureProjectionImpl : public torch::nn::Module {
 public:
  FeatureProjectionImpl(const std::array<int, TafeConfig::kLevels>& in_channels, int out_channels);
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& raw);
  torch::nn::Conv2d& level(int i) { return convs_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<torch::nn::Conv2d> convs_;
};
TORCH_MODULE(FeatureProjection);

/// Task-specific encoder: E1 = conv(F1), Ei = conv(maxpool2(E{i-1}) + Fi).
class TaskEncoderImpl : public torch::nn::Module {
 public:
  explicit TaskEncoderImpl(int channels);
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& f);
  torch::nn::Conv2d& level(int i) { return convs_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<torch::nn::Conv2d> convs_;
};
TORCH_MODULE(TaskEncoder);

/// Residual fusion: fused = conv1x1([e_seg, e_bnd]); returns
/// (e_seg + fused, e_bnd + fused).
class FeatureFusionImpl : public torch::nn::Module {
 public:
  explicit FeatureFusionImpl(int channels);
  std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& e_seg,
                                                  const torch::Tensor& e_bnd);
  torch::nn::Conv2d& fusion() { return fuse_; }

 private:
  torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(FeatureFusion);

/// Sums the full-resolution feature with the upsampled coarser levels, then
/// three BN-ReLU-Conv3x3 layers and a 1x1 + sigmoid head.
class ShallowDecoderImpl : public torch::nn::Module {
 public:
  explicit ShallowDecoderImpl(int channels);
  torch::Tensor forward(const torch::Tensor& full_res, const std::vector<torch::Tensor>& coarse);

 private:
  std::vector<torch::nn::BatchNorm2d> norms_;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(ShallowDecoder);

/// Deep-supervision classifiers: 1x1 conv + sigmoid per level, upsampled.
class AuxHeadsImpl : public torch::nn::Module {
 public:
  explicit AuxHeadsImpl(int channels);
  std::vector<torch::Tensor> forward(const std::vector<torch::Tensor>& e, int64_t height,
                                     int64_t width);

 private:
  std::vector<torch::nn::Conv2d> heads_;
};
TORCH_MODULE(AuxHeads);

/// Task-aware feature encoding network: shared backbone, per-task
/// projections and encoders, residual fusion at scales 1/2..1/8, one shallow
/// decoder per task.
class TafeImpl : public torch::nn::Module {
 public:
  explicit TafeImpl(const TafeConfig& cfg);

  TafeOutput forward(const torch::Tensor& x);

  std::vector<torch::Tensor> backbone_forward(const torch::Tensor& x);
  EncoderFeatures project_features(const std::vector<torch::Tensor>& raw);

  const TafeConfig& config() const { return cfg_; }
  DenseBackbone& backbone() { return backbone_; }
  FeatureProjection& seg_projection() { return seg_proj_; }
  FeatureProjection& bnd_projection() { return bnd_proj_; }
  TaskEncoder& seg_encoder() { return seg_tse_; }
  TaskEncoder& bnd_encoder() { return bnd_tse_; }
  std::vector<FeatureFusion>& fusion_modules() { return ffms_; }

 private:
  TafeConfig cfg_;
  DenseBackbone backbone_{nullptr};
  FeatureProjection seg_proj_{nullptr};
  FeatureProjection bnd_proj_{nullptr};
  TaskEncoder seg_tse_{nullptr};
  TaskEncoder bnd_tse_{nullptr};
  std::vector<FeatureFusion> ffms_;
  ShallowDecoder seg_decoder_{nullptr};
  ShallowDecoder bnd_decoder_{nullptr};
  AuxHeads seg_aux_{nullptr};
  AuxHeads bnd_aux_{nullptr};
};
TORCH_MODULE(Tafe);

/// Bilinear resize of an N x C x h x w tensor to `height` x `width`.
torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width);

}  // namespace brp
