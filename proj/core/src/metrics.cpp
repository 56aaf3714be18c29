#include "brp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "brp/labels.hpp"

namespace brp {

namespace {

// Sparse GT x prediction overlap table over dense label indices.
struct Overlap {
  std::vector<std::int32_t> gt_ids;    // ascending
  std::vector<std::int32_t> pred_ids;  // ascending
  std::vector<long> gt_area;
  std::vector<long> pred_area;
  // per gt index: (pred index, intersection) sorted by pred index
  std::vector<std::vector<std::pair<int, long>>> rows;
};

std::vector<std::int32_t> sorted_ids(const InstanceMap& m) {
  std::vector<std::int32_t> ids;
  std::vector<bool> seen;
  for (auto v : m) {
    if (v < 0) throw std::invalid_argument("metrics: negative label");
    if (v == 0) continue;
    if (static_cast<std::size_t>(v) >= seen.size()) seen.resize(static_cast<std::size_t>(v) + 1, false);
    if (!seen[static_cast<std::size_t>(v)]) {
      seen[static_cast<std::size_t>(v)] = true;
      ids.push_back(v);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

Overlap build_overlap(const InstanceMap& gt, const InstanceMap& pred) {
  require_same_shape(gt, pred, "metrics");
  Overlap o;
  o.gt_ids = sorted_ids(gt);
  o.pred_ids = sorted_ids(pred);
  std::unordered_map<std::int32_t, int> gidx, pidx;
  for (std::size_t i = 0; i < o.gt_ids.size(); ++i) gidx[o.gt_ids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < o.pred_ids.size(); ++i) pidx[o.pred_ids[i]] = static_cast<int>(i);
  o.gt_area.assign(o.gt_ids.size(), 0);
  o.pred_area.assign(o.pred_ids.size(), 0);
  std::vector<std::map<int, long>> inter(o.gt_ids.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i] > 0 ? gidx[gt[i]] : -1;
    const int p = pred[i] > 0 ? pidx[pred[i]] : -1;
    if (g >= 0) ++o.gt_area[static_cast<std::size_t>(g)];
    if (p >= 0) ++o.pred_area[static_cast<std::size_t>(p)];
    if (g >= 0 && p >= 0) ++inter[static_cast<std::size_t>(g)][p];
  }
  o.rows.resize(o.gt_ids.size());
  for (std::size_t g = 0; g < inter.size(); ++g) {
    o.rows[g].assign(inter[g].begin(), inter[g].end());
  }
  return o;
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "iou");
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double aji(const InstanceMap& gt, const InstanceMap& pred) {
  const Overlap o = build_overlap(gt, pred);
  if (o.gt_ids.empty() && o.pred_ids.empty()) return 1.0;

  long numerator = 0, denominator = 0;
  std::vector<bool> used(o.pred_ids.size(), false);
  for (std::size_t g = 0; g < o.gt_ids.size(); ++g) {
    int best = -1;
    double best_iou = 0.0;
    long best_inter = 0;
    for (const auto& [p, inter] : o.rows[g]) {
      const long uni = o.gt_area[g] + o.pred_area[static_cast<std::size_t>(p)] - inter;
      const double v = static_cast<double>(inter) / static_cast<double>(uni);
      if (v > best_iou) {  // rows are in ascending pred id, so ties keep the lower id
        best_iou = v;
        best = p;
        best_inter = inter;
      }
    }
    if (best < 0) {
      denominator += o.gt_area[g];
      continue;
    }
    numerator += best_inter;
    denominator += o.gt_area[g] + o.pred_area[static_cast<std::size_t>(best)] - best_inter;
    used[static_cast<std::size_t>(best)] = true;
  }
  for (std::size_t p = 0; p < used.size(); ++p) {
    if (!used[p]) denominator += o.pred_area[p];
  }
  return denominator == 0 ? 1.0 : static_cast<double>(numerator) / static_cast<double>(denominator);
}

DetectionCounts detection_f1(const InstanceMap& gt, const InstanceMap& pred, double iou_thresh,
                             F1Criterion criterion) {
  DetectionCounts out;
  if (criterion == F1Criterion::kIou) {
    const Overlap o = build_overlap(gt, pred);
    struct Pair {
      double iou;
      int g;
      int p;
    };
    std::vector<Pair> pairs;
    for (std::size_t g = 0; g < o.rows.size(); ++g) {
      for (const auto& [p, inter] : o.rows[g]) {
        const long uni = o.gt_area[g] + o.pred_area[static_cast<std::size_t>(p)] - inter;
        const double v = static_cast<double>(inter) / static_cast<double>(uni);
        if (v >= iou_thresh) pairs.push_back({v, static_cast<int>(g), p});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return std::tie(b.iou, a.g, a.p) < std::tie(a.iou, b.g, b.p);
    });
    std::vector<bool> gt_used(o.gt_ids.size(), false), pred_used(o.pred_ids.size(), false);
    for (const auto& pr : pairs) {
      if (gt_used[static_cast<std::size_t>(pr.g)] || pred_used[static_cast<std::size_t>(pr.p)]) continue;
      gt_used[static_cast<std::size_t>(pr.g)] = true;
      pred_used[static_cast<std::size_t>(pr.p)] = true;
      ++out.tp;
    }
    out.fp = static_cast<int>(o.pred_ids.size()) - out.tp;
    out.fn = static_cast<int>(o.gt_ids.size()) - out.tp;
  } else {
    require_same_shape(gt, pred, "detection_f1");
    const auto proposals = extract_proposals(pred);
    std::unordered_map<std::int32_t, bool> gt_used;
    for (auto id : sorted_ids(gt)) gt_used[id] = false;
    for (const auto& p : proposals) {
      double sr = 0.0, sc = 0.0;
      long n = 0;
      for (int r = 0; r < p.bbox.height; ++r) {
        for (int c = 0; c < p.bbox.width; ++c) {
          if (!p.mask(r, c)) continue;
          sr += r + p.bbox.row0;
          sc += c + p.bbox.col0;
          ++n;
        }
      }
      const int cr = static_cast<int>(std::lround(sr / static_cast<double>(n)));
      const int cc = static_cast<int>(std::lround(sc / static_cast<double>(n)));
      const auto g = gt(cr, cc);
      if (g > 0 && !gt_used[g]) {
        gt_used[g] = true;
        ++out.tp;
      } else {
        ++out.fp;
      }
    }
    out.fn = static_cast<int>(gt_used.size()) - out.tp;
  }
  const int denom = 2 * out.tp + out.fp + out.fn;
  out.f1 = denom == 0 ? 1.0 : 2.0 * out.tp / denom;
  return out;
}

double dice1(const SemanticMask& gt, const SemanticMask& pred) {
  require_same_shape(gt, pred, "dice1");
  long inter = 0, total = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool a = gt[i] != 0, b = pred[i] != 0;
    inter += (a && b) ? 1 : 0;
    total += (a ? 1 : 0) + (b ? 1 : 0);
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

double dice2(const InstanceMap& gt, const InstanceMap& pred) {
  const Overlap o = build_overlap(gt, pred);
  if (o.gt_ids.empty()) return o.pred_ids.empty() ? 1.0 : 0.0;
  double sum = 0.0;
  for (std::size_t g = 0; g < o.gt_ids.size(); ++g) {
    int best = -1;
    long best_inter = 0;
    for (const auto& [p, inter] : o.rows[g]) {
      if (inter > best_inter) {
        best_inter = inter;
        best = p;
      }
    }
    if (best < 0) continue;
    sum += 2.0 * static_cast<double>(best_inter) /
           static_cast<double>(o.gt_area[g] + o.pred_area[static_cast<std::size_t>(best)]);
  }
  return sum / static_cast<double>(o.gt_ids.size());
}

ImageMetrics compute_image_metrics(const std::string& stem, const InstanceMap& gt,
                                   const InstanceMap& pred, F1Criterion criterion) {
  ImageMetrics m;
  m.stem = stem;
  m.aji = aji(gt, pred);
  const auto det = detection_f1(gt, pred, 0.5, criterion);
  m.f1 = det.f1;
  m.tp = det.tp;
  m.fp = det.fp;
  m.fn = det.fn;
  m.dice1 = dice1(instance_to_semantic(gt), instance_to_semantic(pred));
  m.dice2 = dice2(gt, pred);
  return m;
}

MetricReport make_report(std::vector<ImageMetrics> rows) {
  MetricReport report;
  report.images = std::move(rows);
  report.aggregate.stem = "AGGREGATE";
  if (report.images.empty()) return report;
  for (const auto& r : report.images) {
    report.aggregate.aji += r.aji;
    report.aggregate.f1 += r.f1;
    report.aggregate.dice1 += r.dice1;
    report.aggregate.dice2 += r.dice2;
    report.aggregate.tp += r.tp;
    report.aggregate.fp += r.fp;
    report.aggregate.fn += r.fn;
  }
  const auto n = static_cast<double>(report.images.size());
  report.aggregate.aji /= n;
  report.aggregate.f1 /= n;
  report.aggregate.dice1 /= n;
  report.aggregate.dice2 /= n;
  return report;
}

}  // namespace brp
