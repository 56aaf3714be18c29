#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "brp/config.hpp"
#include "brp/data.hpp"
#include "brp/pipeline.hpp"

namespace brp {

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;  // at the start of the epoch
  double loss = 0.0;  // mean training loss
  std::optional<double> val_aji;
};

struct TrainOptions {
  /// Checkpoints and history land here when set.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Deterministic split: a seeded shuffle, the first round(fraction * n)
/// samples become validation.
std::pair<std::vector<Sample>, std::vector<Sample>> split_train_val(const std::vector<Sample>& samples,
                                                                   double fraction, std::uint64_t seed);

/// Binary seg and boundary targets for one instance map.
std::pair<SemanticMask, BoundaryMask> stage1_targets(const InstanceMap& m, int boundary_width);

struct Stage1Result {
  /// Best validation-AJI weights, or the final weights without a validation set.
  Stage1Model model;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
};

/// AdamW under the restart schedule; raises std::runtime_error on a
/// non-finite loss. Writes stage1_epochN.brpc at every restart boundary,
/// stage1_best.brpc, stage1_final.brpc and history.tsv into out_dir.
Stage1Result train_stage1(const std::vector<Sample>& train, const std::vector<Sample>& val,
                          const TrainConfig& cfg, const TrainOptions& opts = {});

struct Stage2Sample {
  std::string stem;
  PatchRecord record;
  BinaryMask label;
  std::optional<int> matched_gt_id;
};

/// Stage-1 inference over the training images, one patch and one
/// match_proposal label per proposal.
std::vector<Stage2Sample> build_stage2_samples(Stage1Model& stage1, const std::vector<Sample>& train,
                                               const TrainConfig& cfg);

struct Stage2Result {
  Stage2Pair nets;
  std::vector<EpochRecord> history_small;
  std::vector<EpochRecord> history_large;
  std::size_t n_small = 0;
  std::size_t n_large = 0;
};

/// Trains one network per size class on its own patches with a single
/// cosine period from lr0 to zero. Throws std::runtime_error when no image
/// yields a proposal. Writes stage2_small.brpc / stage2_large.brpc.
Stage2Result train_stage2(const std::vector<Stage2Sample>& samples, const TrainConfig& cfg,
                          const TrainOptions& opts = {});
Stage2Result train_stage2(Stage1Model& stage1, const std::vector<Sample>& train, const TrainConfig& cfg,
                          const TrainOptions& opts = {});

void write_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace brp
