#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "brp/config.hpp"
#include "brp/data.hpp"
#include "brp/metrics.hpp"
#include "brp/pipeline.hpp"

namespace brp {

/// Scores predictions against ground truth stem by stem; the two sets of
/// stems must be identical.
MetricReport evaluate_maps(const std::vector<std::pair<std::string, InstanceMap>>& gt,
                           const std::vector<std::pair<std::string, InstanceMap>>& pred,
                           F1Criterion criterion = F1Criterion::kIou);
MetricReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                           F1Criterion criterion = F1Criterion::kIou);

/// Tab-separated "stem aji f1 dice1 dice2" lines, the aggregate last.
std::string format_report(const MetricReport& report);
void write_report(const std::filesystem::path& path, const MetricReport& report);
/// Inverse of format_report.
MetricReport parse_report(const std::string& text);

struct SweepRow {
  std::string value;
  double aji_stage1 = 0.0;
  double aji_pipeline = 0.0;
};

/// Stage-1 probabilities are computed once; only post-processing and the
/// (frozen) stage-2 networks are rerun for each radius.
std::vector<SweepRow> sweep_dilation_radius(Stage1Model& stage1, Stage2Pair& stage2,
                                            const std::vector<Sample>& eval, const std::vector<int>& radii);

/// Retrains stage 2 for each value of "tau" or "stage2_loss" on top of the
/// frozen stage-1 model; aji_stage1 is the same on every row.
std::vector<SweepRow> sweep_stage2_param(Stage1Model& stage1, const std::vector<Sample>& train,
                                         const std::vector<Sample>& eval, const TrainConfig& cfg,
                                         const std::string& param, const std::vector<std::string>& values);

std::string format_sweep(const std::string& param, const std::vector<SweepRow>& rows);

/// max - min of a column.
double spread(const std::vector<SweepRow>& rows, bool pipeline);

}  // namespace brp
