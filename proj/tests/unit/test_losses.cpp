#include "testing.hpp"

#include <cmath>

#include "brp/losses.hpp"
#include "gradcheck.hpp"

using namespace brp;

namespace {

torch::Tensor d(std::initializer_list<double> v) { return torch::tensor(std::vector<double>(v), torch::kFloat64); }

// Probabilities in [0.02, 0.98] that avoid a band around `avoid`.
torch::Tensor probs_away_from(const std::vector<int64_t>& shape, double avoid, uint64_t seed) {
  torch::manual_seed(seed);
  auto p = torch::rand(shape, torch::kFloat64) * 0.96 + 0.02;
  auto near = (p - avoid).abs() < 0.01;
  return torch::where(near, p + 0.03, p);
}

torch::Tensor binary_targets(const std::vector<int64_t>& shape, uint64_t seed) {
  torch::manual_seed(seed);
  return (torch::rand(shape, torch::kFloat64) > 0.5).to(torch::kFloat64);
}

}  // namespace

TEST_CASE("smooth truncated loss values") {
  CHECK(smooth_truncated_loss(d({1.0, 0.0}), d({1.0, 0.0}), 0.1).item<double>() == doctest::Approx(0.0));
  const double at_gamma = smooth_truncated_loss(d({0.1}), d({1.0}), 0.1).item<double>();
  CHECK(at_gamma == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
  CHECK(smooth_truncated_loss(d({0.05}), d({1.0}), 0.1).item<double>() == doctest::Approx(2.677585).epsilon(1e-6));
  // negative target uses 1 - p
  CHECK(smooth_truncated_loss(d({0.95}), d({0.0}), 0.1).item<double>() == doctest::Approx(2.677585).epsilon(1e-6));
  CHECK_THROWS_AS(smooth_truncated_loss(d({0.5}), d({1.0, 0.0}), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(smooth_truncated_loss(d({0.5}), d({1.0}), 1.0), std::invalid_argument);
}

TEST_CASE("smooth truncated loss is C1 at gamma") {
  const double g = 0.1, h = 1e-6;
  auto f = [&](double pt) { return smooth_truncated_loss(d({pt}), d({1.0}), g).item<double>(); };
  CHECK(std::abs(f(g) + std::log(g)) < 1e-12);
  const double left = (f(g) - f(g - h)) / h;
  const double right = (f(g + h) - f(g)) / h;
  CHECK(std::abs(left - right) < 1e-4);
  CHECK(std::abs(left + 1.0 / g) < 1e-4);
}

TEST_CASE("soft dice values") {
  CHECK(soft_dice_loss(d({1, 0, 1, 1}), d({1, 0, 1, 1}), 1e-5).item<double>() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(soft_dice_loss(d({0, 0, 0}), d({1, 1, 1}), 1e-5).item<double>() == doctest::Approx(1.0).epsilon(1e-5));
  const auto half = torch::full({100}, 0.5, torch::kFloat64);
  const auto ones = torch::ones({100}, torch::kFloat64);
  CHECK(soft_dice_loss(half, ones, 1e-12).item<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  // rank >= 3: per-map mean
  auto p = torch::stack({torch::ones({1, 2, 2}, torch::kFloat64), torch::zeros({1, 2, 2}, torch::kFloat64)});
  auto t = torch::ones({2, 1, 2, 2}, torch::kFloat64);
  CHECK(soft_dice_loss(p, t, 1e-12).item<double>() == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("focal loss values") {
  CHECK(brp::focal_loss(d({1.0, 0.0}), d({1.0, 0.0}), 2, 1).item<double>() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(brp::focal_loss(d({0.5}), d({1.0}), 2, 1).item<double>() == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-9));
  const auto p = probs_away_from({4, 5}, -1, 3), t = binary_targets({4, 5}, 4);
  CHECK(brp::focal_loss(p, t, 0, 1).item<double>() == doctest::Approx(brp::binary_cross_entropy(p, t).item<double>()).epsilon(1e-12));
}

TEST_CASE("losses are non-negative and monotone in p_t") {
  const auto t = torch::ones({1}, torch::kFloat64);
  double prev_st = 1e300, prev_f = 1e300, prev_bce = 1e300, prev_dice = 1e300;
  for (double p = 0.001; p <= 1.0; p += 0.013) {
    const auto x = d({p});
    const double st = smooth_truncated_loss(x, t, 0.1).item<double>();
    const double fo = brp::focal_loss(x, t, 2, 1).item<double>();
    const double ce = brp::binary_cross_entropy(x, t).item<double>();
    const double di = soft_dice_loss(x, t, 1e-5).item<double>();
    CHECK(st >= 0);
    CHECK(fo >= 0);
    CHECK(st <= prev_st);
    CHECK(fo <= prev_f);
    CHECK(ce <= prev_bce);
    CHECK(di <= prev_dice + 1e-15);
    prev_st = st, prev_f = fo, prev_bce = ce, prev_dice = di;
  }
}

TEST_CASE("loss gradients match central differences") {
  const std::vector<int64_t> shape{2, 1, 3, 4};
  const auto t = binary_targets(shape, 11);
  const auto p = probs_away_from(shape, 0.1, 12);
  // keep p_t away from the truncation point for both target values
  const auto p_safe = torch::where(((1 - p) - 0.1).abs() < 0.01, p - 0.03, p);
  CHECK(gradcheck::relative_error([&](const torch::Tensor& x) { return smooth_truncated_loss(x, t, 0.1); }, p_safe) < 1e-4);
  CHECK(gradcheck::relative_error([&](const torch::Tensor& x) { return soft_dice_loss(x, t, 1e-5); }, p) < 1e-4);
  CHECK(gradcheck::relative_error([&](const torch::Tensor& x) { return brp::focal_loss(x, t, 2, 1); }, p) < 1e-4);
  CHECK(gradcheck::relative_error([&](const torch::Tensor& x) { return brp::binary_cross_entropy(x, t); }, p) < 1e-4);
}

TEST_CASE("stage1_loss composition") {
  LossConfig cfg;
  SUBCASE("perfect predictions give ~0") {
    const auto gt = binary_targets({1, 1, 4, 4}, 5);
    TafeOutput out{gt, gt, {gt, gt, gt, gt}, {gt, gt, gt, gt}};
    CHECK(stage1_loss(out, gt, gt, cfg).item<double>() == doctest::Approx(0.0).epsilon(1e-5));
  }
  SUBCASE("2x2 fixture equals a hand evaluation") {
    const auto seg_gt = d({1, 0, 0, 1}).reshape({1, 1, 2, 2});
    const auto bnd_gt = d({0, 1, 0, 0}).reshape({1, 1, 2, 2});
    const auto sp = d({0.9, 0.2, 0.05, 0.6}).reshape({1, 1, 2, 2});
    const auto bp = d({0.3, 0.7, 0.1, 0.4}).reshape({1, 1, 2, 2});
    const auto aux = d({0.5, 0.5, 0.5, 0.5}).reshape({1, 1, 2, 2});
    TafeOutput out{sp, bp, {aux, sp}, {bp}};
    // smooth truncated, by hand: p_t = p (t=1) or 1-p (t=0); all p_t >= 0.1 except where noted
    auto st = [](std::vector<double> pt) {
      double s = 0;
      for (double v : pt) s += v >= 0.1 ? -std::log(v) : -std::log(0.1) + (1 - (v / 0.1) * (v / 0.1)) / 2;
      return s / static_cast<double>(pt.size());
    };
    auto dice = [](std::vector<double> p, std::vector<double> t) {
      double i = 0, sp = 0, st = 0;
      for (std::size_t k = 0; k < p.size(); ++k) i += p[k] * t[k], sp += p[k], st += t[k];
      return 1 - (2 * i + 1e-5) / (sp + st + 1e-5);
    };
    const std::vector<double> sgt{1, 0, 0, 1}, bgt{0, 1, 0, 0};
    const std::vector<double> spv{0.9, 0.2, 0.05, 0.6}, bpv{0.3, 0.7, 0.1, 0.4}, av{0.5, 0.5, 0.5, 0.5};
    auto term = [&](const std::vector<double>& p, const std::vector<double>& t) {
      std::vector<double> pt;
      for (std::size_t k = 0; k < p.size(); ++k) pt.push_back(t[k] > 0 ? p[k] : 1 - p[k]);
      return st(pt) + 0.5 * dice(p, t);
    };
    const double seg = term(spv, sgt) + 0.25 * (term(av, sgt) + term(spv, sgt)) / 2;
    const double bnd = term(bpv, bgt) + 0.25 * term(bpv, bgt);
    CHECK(stage1_loss(out, seg_gt, bnd_gt, cfg).item<double>() == doctest::Approx(seg + bnd).epsilon(1e-12));
  }
  SUBCASE("gradient") {
    const auto seg_gt = binary_targets({1, 1, 3, 3}, 21), bnd_gt = binary_targets({1, 1, 3, 3}, 22);
    auto p0 = probs_away_from({4, 1, 1, 3, 3}, 0.1, 23);
    p0 = torch::where(((1 - p0) - 0.1).abs() < 0.01, p0 - 0.03, p0);
    auto f = [&](const torch::Tensor& x) {
      TafeOutput out{x[0], x[1], {x[2], x[0]}, {x[3]}};
      return stage1_loss(out, seg_gt, bnd_gt, cfg);
    };
    CHECK(gradcheck::relative_error(f, p0) < 1e-4);
  }
}
