#include "testing.hpp"

#include <random>

#include "brp/labels.hpp"
#include "brp/metrics.hpp"
#include "brp/proposals.hpp"
#include "fixtures.hpp"

using namespace brp;

namespace {

ProbabilityPair exact_maps(const InstanceMap& m, int width) {
  const auto sem = instance_to_semantic(m);
  const auto bnd = instance_to_boundary(m, width);
  ProbabilityPair pp{ProbMap(m.height(), m.width(), 0.0f), ProbMap(m.height(), m.width(), 0.0f)};
  for (std::size_t i = 0; i < m.size(); ++i) {
    pp.seg[i] = sem[i] ? 1.0f : 0.0f;
    pp.bnd[i] = bnd[i] ? 1.0f : 0.0f;
  }
  return pp;
}

}  // namespace

TEST_CASE("binarize and subtract_boundary") {
  ProbMap p(2, 2, 0.0f);
  p(0, 0) = 0.5f;
  p(1, 1) = 0.49f;
  const auto b = binarize(p, 0.5);
  CHECK(b(0, 0) == 1);
  CHECK(b(1, 1) == 0);

  SemanticMask seg(3, 3, 1);
  CHECK(subtract_boundary(seg, BoundaryMask(3, 3, 0)) == seg);
  CHECK(subtract_boundary(seg, BoundaryMask(3, 3, 1)) == SemanticMask(3, 3, 0));
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  SemanticMask s(8, 8);
  BoundaryMask d(8, 8);
  for (auto& v : s) v = coin(rng);
  for (auto& v : d) v = coin(rng);
  const auto out = subtract_boundary(s, d);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == (s[i] && !d[i] ? 1 : 0));
  CHECK_THROWS_AS(subtract_boundary(SemanticMask(2, 2), BoundaryMask(2, 3)), std::invalid_argument);
}

TEST_CASE("connected_components") {
  BinaryMask two(2, 5, 0);
  for (int r = 0; r < 2; ++r) {
    two(r, 0) = two(r, 1) = two(r, 3) = two(r, 4) = 1;
  }
  CHECK(max_label(connected_components(two, 4)) == 2);

  BinaryMask diag(4, 4, 0);
  diag(0, 0) = diag(0, 1) = diag(1, 0) = diag(1, 1) = 1;
  diag(2, 2) = diag(2, 3) = diag(3, 2) = diag(3, 3) = 1;
  CHECK(max_label(connected_components(diag, 8)) == 1);
  CHECK(max_label(connected_components(diag, 4)) == 2);
  CHECK(max_label(connected_components(BinaryMask(5, 5, 1), 4)) == 1);
  const auto cc = connected_components(diag, 4);
  CHECK(cc(0, 0) == 1);
  CHECK(cc(3, 3) == 2);
  CHECK_THROWS_AS(connected_components(diag, 6), std::invalid_argument);
}

TEST_CASE("remove_small") {
  InstanceMap m(4, 6, 0);
  m(0, 0) = m(0, 1) = m(0, 2) = 1;  // 3 px
  for (int r = 2; r < 4; ++r) {
    for (int c = 2; c < 6; ++c) m(r, c) = 2;  // 8 px
  }
  CHECK(remove_small(m, 0) == m);
  const auto out = remove_small(m, 4);
  CHECK(out(0, 0) == 0);
  CHECK(out(3, 5) == 1);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 30; ++t) {
    const auto x = relabel_contiguous(fixtures::random_map(rng, 12, 12));
    const auto areas = label_areas(x);
    const auto y = remove_small(x, 6);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool keep = x[i] > 0 && areas[static_cast<std::size_t>(x[i])] >= 6;
      CHECK((y[i] > 0) == keep);
    }
  }
}

TEST_CASE("dilate_instances") {
  InstanceMap m(6, 6, 0);
  m(2, 2) = m(2, 3) = m(3, 2) = m(3, 3) = 1;
  CHECK(dilate_instances(m, 0) == m);
  const auto d = dilate_instances(m, 1);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) CHECK(d(r, c) == ((r >= 1 && r <= 4 && c >= 1 && c <= 4) ? 1 : 0));
  }
  InstanceMap two(1, 7, 0);
  two(0, 0) = 1;
  two(0, 4) = 2;  // three background pixels between
  const auto g = dilate_instances(two, 1);
  CHECK(g(0, 1) == 1);
  CHECK(g(0, 2) == 0);
  CHECK(g(0, 3) == 2);
  InstanceMap tie(1, 3, 0);
  tie(0, 0) = 2;
  tie(0, 2) = 1;
  CHECK(dilate_instances(tie, 1)(0, 1) == 1);  // equidistant, lower id wins
}

TEST_CASE("dilate_instances never merges or reassigns") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 40; ++t) {
    const auto m = relabel_contiguous(fixtures::random_map(rng, 14, 14));
    for (int radius : {1, 2, 3}) {
      const auto d = dilate_instances(m, radius);
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) CHECK(d[i] == m[i]);
      }
      // brute-force nearest-instance oracle
      for (int r = 0; r < 14; ++r) {
        for (int c = 0; c < 14; ++c) {
          if (m(r, c)) continue;
          int best = 0, best_d = radius + 1;
          for (int rr = 0; rr < 14; ++rr) {
            for (int cc = 0; cc < 14; ++cc) {
              if (!m(rr, cc)) continue;
              const int dist = std::max(std::abs(rr - r), std::abs(cc - c));
              if (dist < best_d || (dist == best_d && m(rr, cc) < best)) {
                best_d = dist;
                best = m(rr, cc);
              }
            }
          }
          CHECK(d(r, c) == (best_d <= radius ? best : 0));
        }
      }
    }
  }
}

TEST_CASE("propose") {
  SUBCASE("nothing above threshold") {
    ProbabilityPair pp{ProbMap(8, 8, 0.4f), ProbMap(8, 8, 0.0f)};
    CHECK(max_label(propose(pp, PostprocParams{})) == 0);
  }
  SUBCASE("hand-built 12x12 two-nucleus fixture") {
    // Two 4x5 blocks touching along a column; the shared interface is boundary.
    InstanceMap gt(12, 12, 0);
    for (int r = 3; r < 7; ++r) {
      for (int c = 1; c < 6; ++c) gt(r, c) = 1;
      for (int c = 6; c < 11; ++c) gt(r, c) = 2;
    }
    ProbabilityPair pp = exact_maps(gt, 1);
    PostprocParams params;
    params.min_area = 0;
    params.dilation_radius = 1;
    const auto out = propose(pp, params);
    // interiors are rows 4..5, cols 2..4 and 7..9; dilation by 1 restores
    // both blocks exactly.
    CHECK(max_label(out) == 2);
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) {
        int want = 0;
        if (r >= 3 && r <= 6 && c >= 1 && c <= 5) want = 1;
        if (r >= 3 && r <= 6 && c >= 6 && c <= 10) want = 2;
        CHECK(out(r, c) == want);
      }
    }
  }
  SUBCASE("round trip of separated instances") {
    std::mt19937_64 rng(123);
    for (int t = 0; t < 30; ++t) {
      const int w = 1 + t % 2;
      const auto gt = fixtures::open_shapes(rng, 40, 40, 6, w);
      PostprocParams params;
      params.min_area = 0;
      params.dilation_radius = w;
      const auto out = propose(exact_maps(gt, w), params);
      CHECK(aji(gt, out) == 1.0);
      CHECK(oracle::same_partition(fixtures::to_rows(gt), fixtures::to_rows(out)));
    }
  }
  SUBCASE("more foreground never removes an existing seed") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
      const auto gt = fixtures::open_shapes(rng, 32, 32, 4, 1);
      auto pp = exact_maps(gt, 1);
      PostprocParams params;
      params.min_area = 0;
      const auto before = propose(pp, params);
      std::uniform_int_distribution<int> pos(0, 31);
      for (int k = 0; k < 30; ++k) pp.seg(pos(rng), pos(rng)) = 1.0f;
      const auto after = propose(pp, params);
      const auto seeds = subtract_boundary(SemanticMask(binarize(exact_maps(gt, 1).seg, 0.5)),
                                           BoundaryMask(binarize(pp.bnd, 0.5)));
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (seeds[i]) CHECK(after[i] > 0);
      }
      CHECK(propose(pp, params) == after);
      (void)before;
    }
  }
}
