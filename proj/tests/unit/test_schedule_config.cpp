#include "testing.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "brp/config.hpp"
#include "brp/schedule.hpp"

using namespace brp;

TEST_CASE("learning-rate examples") {
  CHECK(lr_at(0.0, 3e-4, 40, 600) == doctest::Approx(3e-4).epsilon(1e-12));
  CHECK(lr_at(40.0, 3e-4, 40, 600) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(lr_at(20.0, 3e-4, 40, 600) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(lr_at(120.0, 3e-4, 40, 600) == doctest::Approx(7.5e-5).epsilon(1e-12));
  CHECK(lr_at(280.0, 3e-4, 40, 600) == doctest::Approx(3.75e-5).epsilon(1e-12));

  const auto s = make_restart_schedule(3e-4, 40, 600);
  CHECK((s.starts == std::vector<double>{0, 40, 120, 280}));
  CHECK((s.periods == std::vector<double>{40, 80, 160, 320}));
  double total = 0;
  for (double p : s.periods) total += p;
  CHECK(total == 600);
  for (std::size_t k = 1; k < s.start_lrs.size(); ++k) CHECK(s.start_lrs[k] == s.start_lrs[k - 1] / 2);
}

TEST_CASE("learning rate follows the closed form") {
  const auto s = make_restart_schedule(3e-4, 40, 600);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 600.0);
  for (int i = 0; i < 500; ++i) {
    const double e = u(rng);
    double start = 0, period = 40, lr = 3e-4;
    while (e >= start + period) start += period, period *= 2, lr /= 2;
    const double want = lr * (1 + std::cos(std::numbers::pi * (e - start) / period)) / 2;
    CHECK(lr_at(s, e) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("learning rate is continuous and non-increasing within periods") {
  const auto s = make_restart_schedule(3e-4, 40, 600);
  for (std::size_t k = 0; k < s.starts.size(); ++k) {
    double prev = lr_at(s, s.starts[k]);
    const double step = 0.01;
    for (double e = s.starts[k] + step; e < s.starts[k] + s.periods[k]; e += step) {
      const double v = lr_at(s, e);
      CHECK(v <= prev);
      // the cosine's slope is bounded by lr * pi / (2 T)
      CHECK(prev - v <= s.start_lrs[k] * std::numbers::pi / (2 * s.periods[k]) * step * 1.0001);
      prev = v;
    }
  }
}

TEST_CASE("schedule errors") {
  CHECK_THROWS_AS(make_restart_schedule(3e-4, 40, 500), std::invalid_argument);
  CHECK_THROWS_AS(make_restart_schedule(3e-4, 0, 600), std::invalid_argument);
  CHECK_THROWS_AS(make_restart_schedule(-1, 40, 600), std::invalid_argument);
  CHECK_THROWS_AS(lr_at(600.0, 3e-4, 40, 600), std::out_of_range);
  CHECK_THROWS_AS(lr_at(-0.5, 3e-4, 40, 600), std::out_of_range);
  const auto single = make_restart_schedule(3e-4, 20, 20);
  CHECK(single.starts.size() == 1);
  CHECK(lr_at(single, 10.0) == doctest::Approx(1.5e-4));
}

TEST_CASE("presets") {
  const auto full = TrainConfig::full_scale();
  CHECK(full.stage1.epochs == 600);
  CHECK(full.stage1.lr0 == 3e-4);
  CHECK(full.stage1.first_period == 40);
  CHECK(full.stage2.epochs == 10);
  CHECK(full.stage2.lr0 == 3e-4);
  CHECK(full.stage2.tau == 0.5);
  CHECK(full.stage2.patch.s_small == 48);
  CHECK(full.stage2.patch.s_large == 176);
  CHECK(full.stage2.patch.mask_dilation == 2);
  CHECK(full.stage1.tafe == TafeConfig::full_scale());
  CHECK_NOTHROW(full.validate());

  const auto desk = TrainConfig::desk_scale();
  CHECK(desk.stage1.epochs == 20);
  CHECK(desk.stage2.epochs == 5);
  CHECK(desk.stage1.batch_size == 2);
  CHECK(desk.stage1.postproc.min_area == 5);
  CHECK((desk.stage1.tafe.block_depths == std::array<int, 4>{2, 2, 2, 2}));
  CHECK(desk.stage1.tafe.growth_rate == 8);
  CHECK(desk.stage1.tafe.proj_channels == 32);
  CHECK_NOTHROW(desk.validate());

  auto bad = desk;
  bad.stage1.epochs = 30;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("key-value text") {
  const auto kv = parse_key_value_text(
      "# comment\nseed = 7\n\n[stage1]\nepochs = 40   # trailing\nfirst_period=40\n[stage2]\ntau = 0.3\n");
  CHECK(kv.at("seed") == "7");
  CHECK(kv.at("stage1.epochs") == "40");
  CHECK(kv.at("stage1.first_period") == "40");
  CHECK(kv.at("stage2.tau") == "0.3");
  CHECK(kv.size() == 4);
  CHECK(parse_key_value_text(format_key_values(kv)) == kv);
  CHECK_THROWS(parse_key_value_text("no equals sign here\n"));
}

TEST_CASE("config overrides and round trip") {
  auto cfg = TrainConfig::desk_scale();
  apply_key_values(cfg, {{"seed", "9"},
                         {"stage1.tafe.block_depths", "1,2,3,4"},
                         {"stage2.loss", "cross-entropy"},
                         {"stage2.tau", "0.7"},
                         {"stage1.postproc.dilation_radius", "3"}});
  CHECK(cfg.seed == 9);
  CHECK((cfg.stage1.tafe.block_depths == std::array<int, 4>{1, 2, 3, 4}));
  CHECK(cfg.stage2.loss == Stage2Loss::kCrossEntropy);
  CHECK(cfg.stage2.tau == 0.7);
  CHECK(cfg.stage1.postproc.dilation_radius == 3);
  CHECK_THROWS_AS(apply_key_values(cfg, {{"stage1.nonsense", "1"}}), std::invalid_argument);
  CHECK_THROWS(apply_key_values(cfg, {{"stage2.tau", "abc"}}));

  const auto kv = to_key_values(cfg);
  auto back = TrainConfig::full_scale();
  apply_key_values(back, kv);
  CHECK(to_key_values(back) == kv);

  const auto path = std::filesystem::temp_directory_path() / "brp_test_config.txt";
  save_config(path, cfg);
  CHECK(to_key_values(load_config(path)) == kv);
  std::filesystem::remove(path);

  CHECK(parse_stage2_loss("focal") == Stage2Loss::kFocal);
  CHECK(parse_stage2_loss("ce") == Stage2Loss::kCrossEntropy);
  CHECK_THROWS(parse_stage2_loss("hinge"));
}
