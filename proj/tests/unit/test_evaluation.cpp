#include "testing.hpp"

#include <algorithm>
#include <filesystem>
#include <random>

#include "brp/evaluation.hpp"
#include "brp/labels.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "tiny.hpp"

using namespace brp;
namespace fs = std::filesystem;

using Named = std::vector<std::pair<std::string, InstanceMap>>;

TEST_CASE("perfect and empty predictions") {
  std::mt19937_64 rng(1);
  Named gt{{"a", fixtures::random_map(rng, 24, 24)}, {"b", fixtures::random_map(rng, 24, 24)}};
  for (auto& [s, m] : gt) m(0, 0) = std::max(m(0, 0), 1), m = relabel_contiguous(m);
  const auto perfect = evaluate_maps(gt, gt);
  CHECK(perfect.aggregate.aji == 1.0);
  CHECK(perfect.aggregate.f1 == 1.0);
  CHECK(perfect.aggregate.dice1 == 1.0);
  CHECK(perfect.aggregate.dice2 == 1.0);

  Named empty{{"a", InstanceMap(24, 24, 0)}, {"b", InstanceMap(24, 24, 0)}};
  const auto none = evaluate_maps(gt, empty);
  CHECK(none.aggregate.aji == 0.0);
  CHECK(none.aggregate.f1 == 0.0);
}

TEST_CASE("report equals the metrics composed by hand") {
  std::mt19937_64 rng(2);
  Named gt, pred;
  for (const char* stem : {"x", "y"}) {
    const auto g = fixtures::random_map(rng, 30, 30);
    gt.emplace_back(stem, g);
    pred.emplace_back(stem, fixtures::perturb(g, rng));
  }
  const auto rep = evaluate_maps(gt, pred);
  REQUIRE(rep.images.size() == 2);
  double sum_aji = 0, sum_f1 = 0, sum_d1 = 0, sum_d2 = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto g = fixtures::to_rows(gt[i].second), p = fixtures::to_rows(pred[i].second);
    const double a = oracle::aji(g, p), f = oracle::detection_f1(g, p).f1;
    const double d1 = oracle::dice1(g, p), d2 = oracle::dice2(g, p);
    CHECK(rep.images[i].stem == gt[i].first);
    CHECK(rep.images[i].aji == doctest::Approx(a).epsilon(1e-12));
    CHECK(rep.images[i].f1 == doctest::Approx(f).epsilon(1e-12));
    CHECK(rep.images[i].dice1 == doctest::Approx(d1).epsilon(1e-12));
    CHECK(rep.images[i].dice2 == doctest::Approx(d2).epsilon(1e-12));
    sum_aji += a, sum_f1 += f, sum_d1 += d1, sum_d2 += d2;
  }
  CHECK(rep.aggregate.aji == doctest::Approx(sum_aji / 2));
  CHECK(rep.aggregate.f1 == doctest::Approx(sum_f1 / 2));
  CHECK(rep.aggregate.dice1 == doctest::Approx(sum_d1 / 2));
  CHECK(rep.aggregate.dice2 == doctest::Approx(sum_d2 / 2));

  SUBCASE("report text round trip") {
    const auto text = format_report(rep);
    CHECK(text.find("x\t") == 0);
    CHECK(text.find("AGGREGATE\t") != std::string::npos);
    const auto back = parse_report(text);
    REQUIRE(back.images.size() == 2);
    CHECK(back.images[1].stem == "y");
    CHECK(back.images[1].aji == doctest::Approx(rep.images[1].aji).epsilon(1e-6));
    CHECK(back.aggregate.dice2 == doctest::Approx(rep.aggregate.dice2).epsilon(1e-6));
  }
  SUBCASE("directories") {
    const fs::path dir = fs::temp_directory_path() / "brp_test_eval";
    fs::remove_all(dir);
    std::vector<std::string> stems{"x", "y"};
    save_predictions(dir / "gt", stems, {gt[0].second, gt[1].second});
    save_predictions(dir / "pred", stems, {pred[0].second, pred[1].second});
    const auto from_disk = evaluate_dirs(dir / "pred", dir / "gt");
    CHECK(from_disk.aggregate.aji == doctest::Approx(rep.aggregate.aji).epsilon(1e-12));
    write_report(dir / "r.tsv", rep);
    CHECK(fs::file_size(dir / "r.tsv") == format_report(rep).size());
    fs::remove_all(dir);
  }
}

TEST_CASE("stem mismatches are rejected") {
  const InstanceMap m(4, 4, 0);
  CHECK_THROWS_AS(evaluate_maps({{"a", m}}, {{"b", m}}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_maps({{"a", m}, {"b", m}}, {{"a", m}}), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_maps({{"a", m}, {"a", m}}, {{"a", m}, {"a", m}}), std::invalid_argument);
}

TEST_CASE("dilation sweep table") {
  torch::manual_seed(3);
  const auto cfg = tiny::config();
  const auto eval = tiny::data(2, 4).samples;
  Stage1Model s1{Tafe(cfg.stage1.tafe), Normalization::fit(eval, true), cfg.stage1.postproc};
  {
    torch::NoGradGuard no_grad;
    auto p = s1.net->named_parameters();
    p["seg_decoder.head.bias"].add_(2.0);
  }
  Stage2Pair s2{Stage2Model{RefineNet(cfg.stage2.refine), SizeClass::kSmall, cfg.stage2.patch, true},
                Stage2Model{RefineNet(cfg.stage2.refine), SizeClass::kLarge, cfg.stage2.patch, true}};
  const auto rows = sweep_dilation_radius(s1, s2, eval, {1, 2, 3});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].value == "1");
  CHECK(rows[2].value == "3");

  // stage-1 column equals a direct evaluation at that radius
  for (std::size_t k = 0; k < rows.size(); ++k) {
    InferOptions opts;
    opts.use_stage2 = false;
    opts.postproc = s1.postproc;
    opts.postproc->dilation_radius = static_cast<int>(k) + 1;
    Named gt, pred;
    const auto maps = infer(s1, nullptr, eval, opts);
    for (std::size_t i = 0; i < eval.size(); ++i) {
      gt.emplace_back(eval[i].stem, eval[i].instances);
      pred.emplace_back(eval[i].stem, maps[i]);
    }
    CHECK(rows[k].aji_stage1 == doctest::Approx(evaluate_maps(gt, pred).aggregate.aji).epsilon(1e-12));
  }
  const auto text = format_sweep("dilation_radius", rows);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  std::vector<SweepRow> fake{{"a", 0.5, 0.7}, {"b", 0.8, 0.6}, {"c", 0.6, 0.65}};
  CHECK(spread(fake, false) == doctest::Approx(0.3));
  CHECK(spread(fake, true) == doctest::Approx(0.1));
  CHECK_THROWS(sweep_stage2_param(s1, eval, eval, cfg, "growth", {"1"}));
}
