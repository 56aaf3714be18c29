#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <vector>

#include "brp/checkpoint.hpp"
#include "brp/config.hpp"
#include "brp/data.hpp"
#include "brp/grid.hpp"
#include "brp/refine.hpp"
#include "brp/tafe.hpp"

namespace brp {

/// Colour preprocessing fitted on the training images: optional Reinhard
/// transfer to the l-alpha-beta statistics of the reference image (the
/// lexicographically first training stem), then per-channel z-scoring with
/// the training-set mean and std.
struct Normalization {
  bool stain = true;
  ColorStats reference_lab;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  static Normalization fit(const std::vector<Sample>& train, bool stain);
  RgbImage apply(const RgbImage& img) const;

  void store(KeyValues& meta) const;
  static Normalization load(const KeyValues& meta);
};

struct Stage1Model {
  Tafe net{nullptr};
  Normalization norm;
  PostprocParams postproc;
};

struct Stage2Model {
  RefineNet net{nullptr};
  SizeClass size_class = SizeClass::kSmall;
  PatchParams patch;
  /// False when no training patch of this class existed; such a network is
  /// bypassed at inference and the stage-1 proposal is kept.
  bool trained = false;
};

void save_stage1(const std::filesystem::path& path, const Stage1Model& model,
                 const KeyValues& extra_meta = {});
Stage1Model load_stage1(const std::filesystem::path& path);

void save_stage2(const std::filesystem::path& path, const Stage2Model& model,
                 const KeyValues& extra_meta = {});
Stage2Model load_stage2(const std::filesystem::path& path);

/// Eval-mode forward of an already normalised image. Sides that are not
/// multiples of 8 are edge-replicated and the output cropped back.
ProbabilityPair predict_probabilities(Tafe& net, const RgbImage& normalized);

struct Stage2Pair {
  Stage2Model small;
  Stage2Model large;
};

struct InferOptions {
  bool use_stage2 = true;
  /// Overrides the post-processing stored with the stage-1 model.
  std::optional<PostprocParams> postproc;
  /// When set, every patch is written there as a 5-channel strip.
  std::optional<std::filesystem::path> debug_patch_dir;
};

struct ImageInference {
  ProbabilityPair probs;
  InstanceMap proposals;
  InstanceMap instances;
};

/// Stage-2 refinement of `proposals` on a normalised image. Patches whose
/// class network is untrained keep their stage-1 mask.
InstanceMap refine_proposals(const RgbImage& normalized, const ProbabilityPair& probs,
                             const InstanceMap& proposals, Stage2Pair& stage2,
                             const std::optional<std::filesystem::path>& debug_dir = {},
                             const std::string& debug_stem = "");

ImageInference infer_image(Stage1Model& stage1, Stage2Pair* stage2, const RgbImage& image,
                           const InferOptions& opts = {}, const std::string& stem = "");

std::vector<InstanceMap> infer(Stage1Model& stage1, Stage2Pair* stage2,
                               const std::vector<Sample>& samples, const InferOptions& opts = {});

}  // namespace brp
