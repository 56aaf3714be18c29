#pragma once

#include <random>
#include <vector>

#include "brp/grid.hpp"
#include "brp/labels.hpp"
#include "oracles.hpp"

namespace fixtures {

inline oracle::Labels to_rows(const brp::InstanceMap& m) {
  oracle::Labels out(static_cast<std::size_t>(m.height()), std::vector<int>(static_cast<std::size_t>(m.width())));
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  }
  return out;
}

inline brp::InstanceMap from_rows(const oracle::Labels& rows) {
  brp::InstanceMap m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()), 0);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return m;
}

// Overlapping random rectangles with sparse, non-contiguous ids plus some
// salt noise; ids need not be connected.
inline brp::InstanceMap random_map(std::mt19937_64& rng, int h, int w, int max_rects = 6) {
  brp::InstanceMap m(h, w, 0);
  std::uniform_int_distribution<int> n_rects(0, max_rects), id(1, 40), row(0, h - 1), col(0, w - 1), ext(1, 7);
  const int n = n_rects(rng);
  for (int k = 0; k < n; ++k) {
    const int v = id(rng), r0 = row(rng), c0 = col(rng), rh = ext(rng), cw = ext(rng);
    for (int r = r0; r < std::min(h, r0 + rh); ++r) {
      for (int c = c0; c < std::min(w, c0 + cw); ++c) m(r, c) = v;
    }
  }
  std::bernoulli_distribution salt(0.03);
  for (auto& v : m) {
    if (salt(rng)) v = id(rng) % 3 == 0 ? 0 : id(rng);
  }
  return m;
}

// A prediction derived from `gt`: dropped, shifted and spurious instances.
inline brp::InstanceMap perturb(const brp::InstanceMap& gt, std::mt19937_64& rng) {
  brp::InstanceMap out(gt.height(), gt.width(), 0);
  std::uniform_int_distribution<int> shift(-2, 2);
  const int dr = shift(rng), dc = shift(rng);
  std::bernoulli_distribution keep(0.8);
  std::vector<int> kept(static_cast<std::size_t>(brp::max_label(gt)) + 1, -1);
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      const int v = gt(r, c);
      if (v == 0) continue;
      auto& k = kept[static_cast<std::size_t>(v)];
      if (k < 0) k = keep(rng) ? 1 : 0;
      if (k && out.in_bounds(r + dr, c + dc)) out(r + dr, c + dc) = v + 100;
    }
  }
  return out;
}

// Axis-aligned ellipses separated by at least `gap` background pixels
// (Chebyshev), labelled 1..N.
inline brp::InstanceMap separated_blobs(std::mt19937_64& rng, int h, int w, int count, int gap,
                                        double rmin = 2.5, double rmax = 5.0) {
  brp::InstanceMap m(h, w, 0);
  std::uniform_real_distribution<double> rad(rmin, rmax), cy(0.0, h), cx(0.0, w);
  int id = 0;
  for (int attempt = 0; attempt < count * 30 && id < count; ++attempt) {
    const double a = rad(rng), b = rad(rng), y0 = cy(rng), x0 = cx(rng);
    std::vector<std::pair<int, int>> px;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const double u = (r - y0) / a, v = (c - x0) / b;
        if (u * u + v * v <= 1.0) px.emplace_back(r, c);
      }
    }
    if (px.size() < 4) continue;
    bool clear = true;
    for (auto [r, c] : px) {
      for (int dr = -gap; dr <= gap && clear; ++dr) {
        for (int dc = -gap; dc <= gap && clear; ++dc) {
          if (m.in_bounds(r + dr, c + dc) && m(r + dr, c + dc) != 0) clear = false;
        }
      }
    }
    if (!clear) continue;
    ++id;
    for (auto [r, c] : px) m(r, c) = id;
  }
  return m;
}

}  // namespace fixtures

namespace fixtures {

// Instances built from one or two overlapping rectangles, each at least
// (2*width + 1) on a side and overlapping by at least that much, so every
// instance equals its opening by a (2*width + 1) square and its interior is
// 4-connected. Instances keep `gap` background pixels between them.
inline brp::InstanceMap open_shapes(std::mt19937_64& rng, int h, int w, int count, int width, int gap = 2) {
  brp::InstanceMap m(h, w, 0);
  const int k = 2 * width + 1;
  std::uniform_int_distribution<int> side(k, k + 6), row(0, h - k), col(0, w - k);
  std::bernoulli_distribution two(0.5);
  int id = 0;
  for (int attempt = 0; attempt < count * 40 && id < count; ++attempt) {
    brp::BinaryMask shape(h, w, 0);
    const int r0 = row(rng), c0 = col(rng);
    const int rh = std::min(side(rng), h - r0), cw = std::min(side(rng), w - c0);
    if (rh < k || cw < k) continue;
    auto paint = [&](int a, int b, int hh, int ww) {
      for (int r = a; r < a + hh; ++r) {
        for (int c = b; c < b + ww; ++c) shape(r, c) = 1;
      }
    };
    paint(r0, c0, rh, cw);
    if (two(rng)) {
      // Second rectangle sharing at least a k x k block with the first.
      std::uniform_int_distribution<int> dr(-(k + 3), rh - k), dc(-(k + 3), cw - k);
      const int a = r0 + dr(rng), b = c0 + dc(rng);
      const int hh = side(rng), ww = side(rng);
      const int ra = std::max(a, 0), cb = std::max(b, 0);
      const int re = std::min(a + hh, h), ce = std::min(b + ww, w);
      const int ov_r = std::min(re, r0 + rh) - std::max(ra, r0);
      const int ov_c = std::min(ce, c0 + cw) - std::max(cb, c0);
      if (re - ra >= k && ce - cb >= k && ov_r >= k && ov_c >= k) paint(ra, cb, re - ra, ce - cb);
    }
    bool clear = true;
    for (int r = 0; r < h && clear; ++r) {
      for (int c = 0; c < w && clear; ++c) {
        if (!shape(r, c)) continue;
        for (int dr = -gap; dr <= gap && clear; ++dr) {
          for (int dc = -gap; dc <= gap && clear; ++dc) {
            if (m.in_bounds(r + dr, c + dc) && m(r + dr, c + dc) != 0) clear = false;
          }
        }
      }
    }
    if (!clear) continue;
    ++id;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i]) m[i] = id;
    }
  }
  return m;
}

}  // namespace fixtures
