#include "brp/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace brp {

namespace {

void check_pair(const torch::Tensor& probs, const torch::Tensor& targets, const char* what) {
  if (probs.sizes() != targets.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

torch::Tensor target_probability(const torch::Tensor& p, const torch::Tensor& t) {
  return t * p + (1 - t) * (1 - p);
}

constexpr double kClamp = 1e-7;

}  // namespace

void LossConfig::validate() const {
  if (!(st_gamma > 0.0 && st_gamma < 1.0)) throw std::invalid_argument("st_gamma must be in (0,1)");
  if (!(dice_weight >= 0.0)) throw std::invalid_argument("dice_weight must be >= 0");
  if (!(dice_eps > 0.0)) throw std::invalid_argument("dice_eps must be > 0");
  if (!(focal_gamma >= 0.0)) throw std::invalid_argument("focal_gamma must be >= 0");
  if (!(focal_alpha > 0.0 && focal_alpha <= 1.0)) throw std::invalid_argument("focal_alpha must be in (0,1]");
  if (!(aux_weight >= 0.0)) throw std::invalid_argument("aux_weight must be >= 0");
}

torch::Tensor smooth_truncated_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                                    double gamma) {
  check_pair(probs, targets, "smooth_truncated_loss");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("smooth_truncated_loss: gamma must be in (0,1)");
  const auto pt = target_probability(probs, targets);
  // The clamp keeps the unselected branch finite so its zero gradient stays zero.
  const auto log_branch = -torch::log(torch::clamp_min(pt, gamma));
  const auto tail = -std::log(gamma) + (1 - (pt / gamma).pow(2)) / 2;
  return torch::where(pt >= gamma, log_branch, tail).mean();
}

torch::Tensor soft_dice_loss(const torch::Tensor& probs, const torch::Tensor& targets, double eps) {
  check_pair(probs, targets, "soft_dice_loss");
  if (probs.dim() >= 3) {
    const auto p = probs.reshape({probs.size(0), -1});
    const auto t = targets.reshape({targets.size(0), -1});
    const auto inter = (p * t).sum(1);
    const auto dice = (2 * inter + eps) / (p.sum(1) + t.sum(1) + eps);
    return (1 - dice).mean();
  }
  const auto inter = (probs * targets).sum();
  return 1 - (2 * inter + eps) / (probs.sum() + targets.sum() + eps);
}

torch::Tensor focal_loss(const torch::Tensor& probs, const torch::Tensor& targets, double gamma,
                         double alpha) {
  check_pair(probs, targets, "focal_loss");
  const auto p = torch::clamp(probs, kClamp, 1 - kClamp);
  const auto pt = target_probability(p, targets);
  return (-alpha * (1 - pt).pow(gamma) * torch::log(pt)).mean();
}

torch::Tensor binary_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets) {
  check_pair(probs, targets, "binary_cross_entropy");
  const auto p = torch::clamp(probs, kClamp, 1 - kClamp);
  return (-torch::log(target_probability(p, targets))).mean();
}

torch::Tensor stage1_loss(const TafeOutput& out, const torch::Tensor& seg_gt,
                          const torch::Tensor& bnd_gt, const LossConfig& cfg) {
  auto term = [&](const torch::Tensor& p, const torch::Tensor& t) {
    return smooth_truncated_loss(p, t, cfg.st_gamma) + cfg.dice_weight * soft_dice_loss(p, t, cfg.dice_eps);
  };
  auto task = [&](const torch::Tensor& main, const std::vector<torch::Tensor>& aux,
                  const torch::Tensor& gt) {
    auto total = term(main, gt);
    if (!aux.empty() && cfg.aux_weight > 0.0) {
      auto aux_sum = torch::zeros_like(total);
      for (const auto& a : aux) aux_sum = aux_sum + term(a, gt);
      total = total + cfg.aux_weight * aux_sum / static_cast<double>(aux.size());
    }
    return total;
  };
  return task(out.seg_prob, out.aux_seg, seg_gt) + task(out.bnd_prob, out.aux_bnd, bnd_gt);
}

}  // namespace brp
