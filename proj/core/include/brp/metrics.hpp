#pragma once

#include <string>
#include <vector>

#include "brp/grid.hpp"

namespace brp {

/// |a & b| / |a | b|, 0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Aggregated Jaccard Index. GT instances are visited in ascending id; each
/// takes the prediction of maximal IoU (lower id on ties), whose intersection
/// and union are accumulated and which is then marked used. A GT instance
/// overlapping no prediction adds only its own area. Predictions never used
/// add their areas to the denominator. Two empty maps score 1.
double aji(const InstanceMap& gt, const InstanceMap& pred);

enum class F1Criterion { kIou, kCentroid };

struct DetectionCounts {
  double f1 = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

/// Instance detection F1. With kIou, pairs of IoU >= iou_thresh are matched
/// greedily one-to-one by descending IoU. With kCentroid, a prediction is a
/// hit when its centroid falls inside a not-yet-matched GT instance.
DetectionCounts detection_f1(const InstanceMap& gt, const InstanceMap& pred,
                             double iou_thresh = 0.5, F1Criterion criterion = F1Criterion::kIou);

/// Overall foreground Dice; 1 when both masks are empty.
double dice1(const SemanticMask& gt, const SemanticMask& pred);

/// Ensemble Dice: mean over GT instances of the Dice with the prediction of
/// largest overlap (zero-overlap instances contribute 0); 1 when both are empty.
double dice2(const InstanceMap& gt, const InstanceMap& pred);

struct ImageMetrics {
  std::string stem;
  double aji = 0.0;
  double f1 = 0.0;
  double dice1 = 0.0;
  double dice2 = 0.0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct MetricReport {
  std::vector<ImageMetrics> images;
  /// Unweighted mean over images; counts are summed.
  ImageMetrics aggregate;
};

ImageMetrics compute_image_metrics(const std::string& stem, const InstanceMap& gt,
                                   const InstanceMap& pred,
                                   F1Criterion criterion = F1Criterion::kIou);

MetricReport make_report(std::vector<ImageMetrics> rows);

}  // namespace brp
