#include "brp/tafe.hpp"

#include <stdexcept>
#include <string>

namespace brp {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

nn::Conv2d conv(int in, int out, int kernel, bool bias = true) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).padding(kernel / 2).bias(bias));
}

void require_divisible(const torch::Tensor& x) {
  if (x.dim() != 4) throw std::invalid_argument("TAFE expects an N x C x H x W tensor");
  if (x.size(2) % 8 != 0 || x.size(3) % 8 != 0) {
    throw std::invalid_argument("TAFE input height and width must be divisible by 8, got " +
                                std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
  }
}

}  // namespace

TafeConfig TafeConfig::full_scale() {
  TafeConfig c;
  c.block_depths = {6, 12, 18, 24};
  c.growth_rate = 32;
  c.proj_channels = 256;
  c.stem_channels = 64;
  c.bn_size = 4;
  return c;
}

TafeConfig TafeConfig::desk_scale() { return TafeConfig{}; }

void TafeConfig::validate() const {
  for (int d : block_depths) {
    if (d < 1) throw std::invalid_argument("TafeConfig: block depths must be positive");
  }
  if (growth_rate < 1) throw std::invalid_argument("TafeConfig: growth_rate must be positive");
  if (proj_channels < 1) throw std::invalid_argument("TafeConfig: proj_channels must be positive");
  if (stem_channels < 1) throw std::invalid_argument("TafeConfig: stem_channels must be positive");
  if (bn_size < 0) throw std::invalid_argument("TafeConfig: bn_size must be >= 0");
}

std::array<int, TafeConfig::kLevels> TafeConfig::backbone_channels() const {
  std::array<int, kLevels> out{};
  int c = stem_channels;
  for (int i = 0; i < kLevels; ++i) {
    c += block_depths[static_cast<std::size_t>(i)] * growth_rate;
    out[static_cast<std::size_t>(i)] = c;
    c /= 2;  // transition compression
  }
  return out;
}

torch::Tensor upsample_to(const torch::Tensor& x, int64_t height, int64_t width) {
  if (x.size(2) == height && x.size(3) == width) return x;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

DenseLayerImpl::DenseLayerImpl(int in_channels, int growth, int bn_size) {
  int mid = in_channels;
  if (bn_size > 0) {
    mid = bn_size * growth;
    norm1_ = register_module("norm1", nn::BatchNorm2d(in_channels));
    conv1_ = register_module("conv1", conv(in_channels, mid, 1, false));
  }
  norm2_ = register_module("norm2", nn::BatchNorm2d(mid));
  conv2_ = register_module("conv2", conv(mid, growth, 3, false));
}

torch::Tensor DenseLayerImpl::forward(const torch::Tensor& x) {
  torch::Tensor h = x;
  if (conv1_) h = conv1_(torch::relu(norm1_(h)));
  return conv2_(torch::relu(norm2_(h)));
}

DenseBlockImpl::DenseBlockImpl(int in_channels, int num_layers, int growth, int bn_size)
    : out_channels_(in_channels + num_layers * growth) {
  for (int i = 0; i < num_layers; ++i) {
    layers_->push_back(DenseLayer(in_channels + i * growth, growth, bn_size));
  }
  register_module("layers", layers_);
}

torch::Tensor DenseBlockImpl::forward(const torch::Tensor& x) {
  torch::Tensor features = x;
  for (const auto& layer : *layers_) {
    auto fresh = layer->as<DenseLayer>()->forward(features);
    features = torch::cat({features, fresh}, 1);
  }
  return features;
}

TransitionImpl::TransitionImpl(int in_channels, int out_channels) {
  norm_ = register_module("norm", nn::BatchNorm2d(in_channels));
  conv_ = register_module("conv", conv(in_channels, out_channels, 1, false));
}

torch::Tensor TransitionImpl::forward(const torch::Tensor& x) {
  return F::avg_pool2d(conv_(torch::relu(norm_(x))), F::AvgPool2dFuncOptions(2));
}

DenseBackboneImpl::DenseBackboneImpl(const TafeConfig& cfg) {
  cfg.validate();
  stem_conv_ = register_module(
      "stem_conv", nn::Conv2d(nn::Conv2dOptions(3, cfg.stem_channels, 7).padding(3).bias(false)));
  stem_norm_ = register_module("stem_norm", nn::BatchNorm2d(cfg.stem_channels));
  int channels = cfg.stem_channels;
  for (int i = 0; i < TafeConfig::kLevels; ++i) {
    auto block = DenseBlock(channels, cfg.block_depths[static_cast<std::size_t>(i)],
                            cfg.growth_rate, cfg.bn_size);
    channels = block->out_channels();
    blocks_.push_back(register_module("block" + std::to_string(i + 1), block));
    if (i + 1 < TafeConfig::kLevels) {
      transitions_.push_back(register_module("transition" + std::to_string(i + 1),
                                             Transition(channels, channels / 2)));
      channels /= 2;
    }
  }
}

std::vector<torch::Tensor> DenseBackboneImpl::forward(const torch::Tensor& x) {
  require_divisible(x);
  std::vector<torch::Tensor> levels;
  torch::Tensor h = torch::relu(stem_norm_(stem_conv_(x)));
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i]->forward(h);
    levels.push_back(h);
    if (i < transitions_.size()) h = transitions_[i]->forward(h);
  }
  return levels;
}

FeatureProjectionImpl::FeatureProjectionImpl(const std::array<int, TafeConfig::kLevels>& in_channels,
                                             int out_channels) {
  for (int i = 0; i < TafeConfig::kLevels; ++i) {
    convs_.push_back(register_module("level" + std::to_string(i + 1),
                                     conv(in_channels[static_cast<std::size_t>(i)], out_channels, 1)));
  }
}

std::vector<torch::Tensor> FeatureProjectionImpl::forward(const std::vector<torch::Tensor>& raw) {
  if (raw.size() != convs_.size()) throw std::invalid_argument("FeatureProjection: expected 4 levels");
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < raw.size(); ++i) out.push_back(convs_[i](raw[i]));
  return out;
}

TaskEncoderImpl::TaskEncoderImpl(int channels) {
  for (int i = 0; i < TafeConfig::kLevels; ++i) {
    convs_.push_back(register_module("level" + std::to_string(i + 1), conv(channels, channels, 3)));
  }
}

std::vector<torch::Tensor> TaskEncoderImpl::forward(const std::vector<torch::Tensor>& f) {
  if (f.size() != convs_.size()) throw std::invalid_argument("TaskEncoder: expected 4 levels");
  std::vector<torch::Tensor> e;
  e.push_back(convs_[0](f[0]));
  for (std::size_t i = 1; i < f.size(); ++i) {
    auto down = F::max_pool2d(e.back(), F::MaxPool2dFuncOptions(2));
    e.push_back(convs_[i](down + f[i]));
  }
  return e;
}

FeatureFusionImpl::FeatureFusionImpl(int channels) {
  fuse_ = register_module("fuse", conv(2 * channels, channels, 1));
}

std::pair<torch::Tensor, torch::Tensor> FeatureFusionImpl::forward(const torch::Tensor& e_seg,
                                                                   const torch::Tensor& e_bnd) {
  auto fused = fuse_(torch::cat({e_seg, e_bnd}, 1));
  return {e_seg + fused, e_bnd + fused};
}

ShallowDecoderImpl::ShallowDecoderImpl(int channels) {
  for (int i = 0; i < 3; ++i) {
    norms_.push_back(register_module("norm" + std::to_string(i + 1), nn::BatchNorm2d(channels)));
    convs_.push_back(register_module("conv" + std::to_string(i + 1), conv(channels, channels, 3)));
  }
  head_ = register_module("head", conv(channels, 1, 1));
}

torch::Tensor ShallowDecoderImpl::forward(const torch::Tensor& full_res,
                                          const std::vector<torch::Tensor>& coarse) {
  const auto h = full_res.size(2), w = full_res.size(3);
  torch::Tensor x = full_res;
  for (const auto& level : coarse) x = x + upsample_to(level, h, w);
  for (std::size_t i = 0; i < convs_.size(); ++i) x = convs_[i](torch::relu(norms_[i](x)));
  return torch::sigmoid(head_(x));
}

AuxHeadsImpl::AuxHeadsImpl(int channels) {
  for (int i = 0; i < TafeConfig::kLevels; ++i) {
    heads_.push_back(register_module("level" + std::to_string(i + 1), conv(channels, 1, 1)));
  }
}

std::vector<torch::Tensor> AuxHeadsImpl::forward(const std::vector<torch::Tensor>& e,
                                                 int64_t height, int64_t width) {
  std::vector<torch::Tensor> out;
  for (std::size_t i = 0; i < e.size(); ++i) {
    out.push_back(upsample_to(torch::sigmoid(heads_[i](e[i])), height, width));
  }
  return out;
}

TafeImpl::TafeImpl(const TafeConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int p = cfg_.proj_channels;
  backbone_ = register_module("backbone", DenseBackbone(cfg_));
  seg_proj_ = register_module("seg_proj", FeatureProjection(cfg_.backbone_channels(), p));
  bnd_proj_ = register_module("bnd_proj", FeatureProjection(cfg_.backbone_channels(), p));
  seg_tse_ = register_module("seg_tse", TaskEncoder(p));
  bnd_tse_ = register_module("bnd_tse", TaskEncoder(p));
  if (cfg_.use_ffm) {
    for (int i = 0; i < TafeConfig::kFusionModules; ++i) {
      ffms_.push_back(register_module("ffm" + std::to_string(i + 2), FeatureFusion(p)));
    }
  }
  seg_decoder_ = register_module("seg_decoder", ShallowDecoder(p));
  bnd_decoder_ = register_module("bnd_decoder", ShallowDecoder(p));
  seg_aux_ = register_module("seg_aux", AuxHeads(p));
  bnd_aux_ = register_module("bnd_aux", AuxHeads(p));
}

std::vector<torch::Tensor> TafeImpl::backbone_forward(const torch::Tensor& x) {
  return backbone_->forward(x);
}

EncoderFeatures TafeImpl::project_features(const std::vector<torch::Tensor>& raw) {
  EncoderFeatures f{seg_proj_->forward(raw), bnd_proj_->forward(raw)};
  for (std::size_t i = 0; i < f.f_seg.size(); ++i) {
    TORCH_CHECK(f.f_seg[i].size(1) == cfg_.proj_channels && f.f_bnd[i].size(1) == cfg_.proj_channels,
                "projected feature has wrong channel count");
  }
  return f;
}

TafeOutput TafeImpl::forward(const torch::Tensor& x) {
  require_divisible(x);
  const auto h = x.size(2), w = x.size(3);
  const auto features = project_features(backbone_forward(x));
  const auto e_seg = seg_tse_->forward(features.f_seg);
  const auto e_bnd = bnd_tse_->forward(features.f_bnd);

  std::vector<torch::Tensor> a_seg, a_bnd;
  for (int i = 1; i < TafeConfig::kLevels; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (ffms_.empty()) {
      a_seg.push_back(e_seg[idx]);
      a_bnd.push_back(e_bnd[idx]);
    } else {
      auto [s, b] = ffms_[idx - 1]->forward(e_seg[idx], e_bnd[idx]);
      a_seg.push_back(s);
      a_bnd.push_back(b);
    }
  }

  TafeOutput out;
  out.seg_prob = seg_decoder_->forward(e_seg[0], a_seg);
  out.bnd_prob = bnd_decoder_->forward(e_bnd[0], a_bnd);
  out.aux_seg = seg_aux_->forward(e_seg, h, w);
  out.aux_bnd = bnd_aux_->forward(e_bnd, h, w);
  return out;
}

}  // namespace brp
