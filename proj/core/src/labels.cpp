#include "brp/labels.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace brp {

InstanceMap relabel_contiguous(const InstanceMap& m) {
  InstanceMap out(m.height(), m.width(), 0);
  std::unordered_map<std::int32_t, std::int32_t> mapping;
  std::int32_t next = 1;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto v = m[i];
    if (v == 0) continue;
    auto [it, inserted] = mapping.try_emplace(v, next);
    if (inserted) ++next;
    out[i] = it->second;
  }
  return out;
}

SemanticMask instance_to_semantic(const InstanceMap& m) {
  SemanticMask out(m.height(), m.width(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > 0 ? 1 : 0;
  return out;
}

BoundaryMask instance_to_boundary(const InstanceMap& m, int width) {
  if (width < 1) throw std::invalid_argument("instance_to_boundary: width must be >= 1");
  const int h = m.height();
  const int w = m.width();
  BoundaryMask out(h, w, 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto label = m(r, c);
      if (label == 0) continue;
      const int r0 = std::max(0, r - width), r1 = std::min(h - 1, r + width);
      const int c0 = std::max(0, c - width), c1 = std::min(w - 1, c + width);
      bool near_other = false;
      for (int rr = r0; rr <= r1 && !near_other; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          if (m(rr, cc) != label) {
            near_other = true;
            break;
          }
        }
      }
      out(r, c) = near_other ? 1 : 0;
    }
  }
  return out;
}

int max_label(const InstanceMap& m) {
  std::int32_t best = 0;
  for (auto v : m) best = std::max(best, v);
  return best;
}

int count_instances(const InstanceMap& m) {
  std::vector<std::int32_t> ids;
  for (auto v : m) {
    if (v > 0) ids.push_back(v);
  }
  std::sort(ids.begin(), ids.end());
  return static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin());
}

std::vector<long> label_areas(const InstanceMap& m) {
  std::vector<long> areas(static_cast<std::size_t>(max_label(m)) + 1, 0);
  for (auto v : m) {
    if (v < 0) throw std::invalid_argument("label_areas: negative label");
    ++areas[static_cast<std::size_t>(v)];
  }
  return areas;
}

std::vector<Proposal> extract_proposals(const InstanceMap& m) {
  const int n = max_label(m);
  struct Extent {
    int r0, c0, r1, c1;
    bool seen = false;
  };
  std::vector<Extent> ext(static_cast<std::size_t>(n) + 1);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      const auto v = m(r, c);
      if (v == 0) continue;
      auto& e = ext[static_cast<std::size_t>(v)];
      if (!e.seen) {
        e = {r, c, r, c, true};
      } else {
        e.r0 = std::min(e.r0, r);
        e.c0 = std::min(e.c0, c);
        e.r1 = std::max(e.r1, r);
        e.c1 = std::max(e.c1, c);
      }
    }
  }
  std::vector<Proposal> out;
  for (int id = 1; id <= n; ++id) {
    const auto& e = ext[static_cast<std::size_t>(id)];
    if (!e.seen) continue;
    Proposal p;
    p.id = id;
    p.bbox = {e.r0, e.c0, e.r1 - e.r0 + 1, e.c1 - e.c0 + 1};
    p.mask = BinaryMask(p.bbox.height, p.bbox.width, 0);
    for (int r = e.r0; r <= e.r1; ++r) {
      for (int c = e.c0; c <= e.c1; ++c) {
        if (m(r, c) == id) p.mask(r - e.r0, c - e.c0) = 1;
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace brp
