#include "brp/proposals.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "brp/labels.hpp"

namespace brp {

void PostprocParams::validate() const {
  if (!(seg_thresh > 0.0 && seg_thresh < 1.0)) throw std::invalid_argument("seg_thresh must be in (0,1)");
  if (!(bnd_thresh > 0.0 && bnd_thresh < 1.0)) throw std::invalid_argument("bnd_thresh must be in (0,1)");
  if (min_area < 0) throw std::invalid_argument("min_area must be >= 0");
  if (dilation_radius < 0) throw std::invalid_argument("dilation_radius must be >= 0");
  if (connectivity != 4 && connectivity != 8) throw std::invalid_argument("connectivity must be 4 or 8");
}

BinaryMask binarize(const ProbMap& prob, double threshold) {
  BinaryMask out(prob.height(), prob.width(), 0);
  for (std::size_t i = 0; i < prob.size(); ++i) out[i] = prob[i] >= threshold ? 1 : 0;
  return out;
}

SemanticMask subtract_boundary(const SemanticMask& seg_bin, const BoundaryMask& bnd_bin) {
  require_same_shape(seg_bin, bnd_bin, "subtract_boundary");
  SemanticMask out(seg_bin.height(), seg_bin.width(), 0);
  for (std::size_t i = 0; i < seg_bin.size(); ++i) out[i] = (seg_bin[i] && !bnd_bin[i]) ? 1 : 0;
  return out;
}

InstanceMap connected_components(const BinaryMask& mask, int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
  }
  static constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  const int h = mask.height();
  const int w = mask.width();
  InstanceMap labels(h, w, 0);
  std::vector<std::pair<int, int>> stack;
  std::int32_t next = 0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask(r, c) || labels(r, c) != 0) continue;
      labels(r, c) = ++next;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        const auto [pr, pc] = stack.back();
        stack.pop_back();
        for (int k = 0; k < connectivity; ++k) {
          const int nr = pr + kDr[k], nc = pc + kDc[k];
          if (!mask.in_bounds(nr, nc) || !mask(nr, nc) || labels(nr, nc) != 0) continue;
          labels(nr, nc) = next;
          stack.emplace_back(nr, nc);
        }
      }
    }
  }
  return labels;
}

InstanceMap remove_small(const InstanceMap& m, int min_area) {
  if (min_area < 0) throw std::invalid_argument("remove_small: min_area must be >= 0");
  const auto areas = label_areas(m);
  InstanceMap out = m;
  for (auto& v : out) {
    if (v > 0 && areas[static_cast<std::size_t>(v)] < min_area) v = 0;
  }
  return relabel_contiguous(out);
}

InstanceMap dilate_instances(const InstanceMap& m, int radius) {
  if (radius < 0) throw std::invalid_argument("dilate_instances: radius must be >= 0");
  if (radius == 0) return m;
  const int h = m.height();
  const int w = m.width();
  InstanceMap out = m;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (m(r, c) != 0) continue;
      int best_dist = radius + 1;
      std::int32_t best_id = 0;
      const int r0 = std::max(0, r - radius), r1 = std::min(h - 1, r + radius);
      const int c0 = std::max(0, c - radius), c1 = std::min(w - 1, c + radius);
      for (int rr = r0; rr <= r1; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          const auto id = m(rr, cc);
          if (id == 0) continue;
          const int d = std::max(std::abs(rr - r), std::abs(cc - c));
          if (d < best_dist || (d == best_dist && id < best_id)) {
            best_dist = d;
            best_id = id;
          }
        }
      }
      out(r, c) = best_id;
    }
  }
  return out;
}

InstanceMap propose(const ProbabilityPair& pp, const PostprocParams& params) {
  params.validate();
  require_same_shape(pp.seg, pp.bnd, "propose");
  const SemanticMask seg_bin(binarize(pp.seg, params.seg_thresh));
  const BoundaryMask bnd_bin(binarize(pp.bnd, params.bnd_thresh));
  const auto interior = subtract_boundary(seg_bin, bnd_bin);
  const auto components = connected_components(interior, params.connectivity);
  const auto kept = remove_small(components, params.min_area);
  return dilate_instances(kept, params.dilation_radius);
}

}  // namespace brp
