#include "testing.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "brp/labels.hpp"
#include "brp/metrics.hpp"
#include "fixtures.hpp"

using namespace brp;

namespace {

InstanceMap square(int h, int w, int r0, int c0, int side, int id, InstanceMap m = {}) {
  if (m.empty()) m = InstanceMap(h, w, 0);
  for (int r = r0; r < r0 + side; ++r) {
    for (int c = c0; c < c0 + side; ++c) m(r, c) = id;
  }
  return m;
}

BinaryMask as_mask(const InstanceMap& m) {
  BinaryMask b(m.height(), m.width(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) b[i] = m[i] ? 1 : 0;
  return b;
}

InstanceMap permute_ids(const InstanceMap& m, std::mt19937_64& rng) {
  std::vector<int> ids(static_cast<std::size_t>(max_label(m)) + 1);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin() + 1, ids.end(), rng);
  InstanceMap out = m;
  for (auto& v : out) v = v ? ids[static_cast<std::size_t>(v)] + 1000 : 0;
  return out;
}

}  // namespace

TEST_CASE("iou examples") {
  const auto a = as_mask(square(6, 6, 1, 1, 2, 1));
  const auto b = as_mask(square(6, 6, 1, 2, 2, 1));
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, as_mask(square(6, 6, 4, 4, 2, 1))) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(iou(BinaryMask(3, 3, 0), BinaryMask(3, 3, 0)) == 0.0);
  CHECK_THROWS_AS(iou(BinaryMask(3, 3), BinaryMask(3, 4)), std::invalid_argument);
}

TEST_CASE("aji examples") {
  const auto g = square(8, 8, 1, 1, 2, 1);
  CHECK(aji(g, g) == 1.0);
  CHECK(aji(g, InstanceMap(8, 8, 0)) == 0.0);
  CHECK(aji(InstanceMap(8, 8, 0), InstanceMap(8, 8, 0)) == 1.0);
  CHECK(aji(g, square(8, 8, 1, 2, 2, 1)) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  const auto spurious = square(8, 8, 5, 5, 2, 2, g);
  CHECK(aji(g, spurious) == doctest::Approx(4.0 / 8.0).epsilon(1e-12));
  CHECK_THROWS_AS(aji(InstanceMap(3, 3), InstanceMap(4, 3)), std::invalid_argument);
}

TEST_CASE("detection_f1 examples") {
  auto gt = square(10, 10, 0, 0, 3, 1);
  gt = square(10, 10, 5, 5, 3, 2, gt);
  CHECK(detection_f1(gt, gt).f1 == 1.0);
  const auto none = detection_f1(gt, InstanceMap(10, 10, 0));
  CHECK(none.f1 == 0.0);
  CHECK(none.fn == 2);
  // one prediction of IoU 0.8 against the 3x3 at (0,0): the 3x3 minus... use 5 px overlap
  InstanceMap pred(10, 10, 0);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pred(r, c) = 1;
  }
  pred(2, 2) = 0;
  pred(2, 1) = 0;  // 7 px inside the 9 px GT: IoU 7/9 ~ 0.78
  const auto d = detection_f1(gt, pred);
  CHECK(d.tp == 1);
  CHECK(d.fp == 0);
  CHECK(d.fn == 1);
  CHECK(d.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(detection_f1(InstanceMap(4, 4, 0), InstanceMap(4, 4, 0)).f1 == 1.0);
}

TEST_CASE("centroid criterion") {
  auto gt = square(10, 10, 0, 0, 4, 1);
  auto pred = square(10, 10, 1, 1, 3, 5);  // centroid (2,2) inside gt 1
  pred = square(10, 10, 7, 7, 2, 6, pred);  // centroid on background
  const auto d = detection_f1(gt, pred, 0.5, F1Criterion::kCentroid);
  CHECK(d.tp == 1);
  CHECK(d.fp == 1);
  CHECK(d.fn == 0);
}

TEST_CASE("dice examples") {
  CHECK(dice1(SemanticMask(4, 4, 1), SemanticMask(4, 4, 1)) == 1.0);
  CHECK(dice1(SemanticMask(4, 4, 0), SemanticMask(4, 4, 0)) == 1.0);
  SemanticMask a(4, 4, 0), b(4, 4, 0);
  a(0, 0) = a(0, 1) = a(0, 2) = a(0, 3) = 1;
  b(0, 2) = b(0, 3) = b(1, 0) = b(1, 1) = 1;
  CHECK(dice1(a, b) == 0.5);
  SemanticMask c(4, 4, 0);
  c(3, 0) = c(3, 1) = c(3, 2) = c(3, 3) = 1;
  CHECK(dice1(a, c) == 0.0);

  const auto g = square(8, 8, 0, 0, 2, 1);
  CHECK(dice2(g, g) == 1.0);
  InstanceMap half(8, 8, 0);
  half(0, 0) = half(1, 0) = 3;
  half(0, 2) = half(1, 2) = 3;  // same area 4, overlap 2
  CHECK(dice2(g, half) == doctest::Approx(0.5));
  auto two = square(8, 8, 5, 5, 2, 2, g);
  CHECK(dice2(two, g) == doctest::Approx(0.5));  // second GT unmatched adds 0
}

TEST_CASE("metrics agree with brute-force oracles on random maps") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const auto gt = fixtures::random_map(rng, 16, 16);
    const auto pred = t % 3 == 0 ? fixtures::perturb(gt, rng) : fixtures::random_map(rng, 16, 16);
    const auto G = fixtures::to_rows(gt), P = fixtures::to_rows(pred);
    CHECK(std::abs(aji(gt, pred) - oracle::aji(G, P)) <= 1e-9);
    CHECK(std::abs(dice1(instance_to_semantic(gt), instance_to_semantic(pred)) - oracle::dice1(G, P)) <= 1e-9);
    CHECK(std::abs(dice2(gt, pred) - oracle::dice2(G, P)) <= 1e-9);
    const auto f = detection_f1(gt, pred);
    const auto fo = oracle::detection_f1(G, P);
    CHECK(f.tp == fo.tp);
    CHECK(f.fp == fo.fp);
    CHECK(f.fn == fo.fn);
    CHECK(std::abs(f.f1 - fo.f1) <= 1e-9);
    for (double v : {aji(gt, pred), f.f1, dice2(gt, pred)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(aji(gt, gt) == 1.0);
  }
}

TEST_CASE("metrics see partitions, not ids") {
  std::mt19937_64 rng(77);
  int tested = 0;
  for (int t = 0; t < 100; ++t) {
    // separated shapes give tie-free overlaps
    const auto gt = fixtures::open_shapes(rng, 24, 24, 5, 1);
    const auto pred = fixtures::perturb(gt, rng);
    const auto gp = permute_ids(gt, rng), pp = permute_ids(pred, rng);
    CHECK(aji(gt, pred) == doctest::Approx(aji(gp, pp)).epsilon(1e-12));
    CHECK(dice2(gt, pred) == doctest::Approx(dice2(gp, pp)).epsilon(1e-12));
    CHECK(detection_f1(gt, pred).tp == detection_f1(gp, pp).tp);
    ++tested;
  }
  CHECK(tested == 100);
}

TEST_CASE("report aggregation") {
  const auto g = square(8, 8, 0, 0, 2, 1);
  auto rows = std::vector<ImageMetrics>{compute_image_metrics("a", g, g),
                                        compute_image_metrics("b", g, InstanceMap(8, 8, 0))};
  const auto rep = make_report(rows);
  CHECK(rep.aggregate.stem == "AGGREGATE");
  CHECK(rep.aggregate.aji == doctest::Approx(0.5));
  CHECK(rep.aggregate.fn == 1);
  CHECK(rep.aggregate.tp == 1);
}
