#pragma once

#include <torch/torch.h>

#include "brp/tafe.hpp"

namespace brp {

struct LossConfig {
  double st_gamma = 0.1;
  double dice_weight = 0.5;
  double dice_eps = 1e-5;
  double focal_gamma = 2.0;
  double focal_alpha = 1.0;
  double aux_weight = 0.25;

  void validate() const;
};

// All losses take probabilities and binary targets of identical shape and
// return the mean over pixels as a 0-d tensor.

/// Cross-entropy on p_t, replaced below p_t = gamma by the quadratic tail
/// -log(gamma) + (1 - (p_t/gamma)^2) / 2. Value and slope are continuous at gamma.
torch::Tensor smooth_truncated_loss(const torch::Tensor& probs, const torch::Tensor& targets,
                                    double gamma);

/// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps). For inputs of rank >= 3 the
/// leading dimension indexes independent maps and their losses are averaged.
torch::Tensor soft_dice_loss(const torch::Tensor& probs, const torch::Tensor& targets, double eps);

/// -alpha (1 - p_t)^gamma log(p_t), probabilities clamped to [1e-7, 1 - 1e-7].
torch::Tensor focal_loss(const torch::Tensor& probs, const torch::Tensor& targets, double gamma,
                         double alpha);

/// Binary cross-entropy with the same clamping as focal_loss.
torch::Tensor binary_cross_entropy(const torch::Tensor& probs, const torch::Tensor& targets);

/// Sum over the two tasks of ST + w*Dice on the main output plus
/// aux_weight * mean over levels of the same on the auxiliary outputs.
torch::Tensor stage1_loss(const TafeOutput& out, const torch::Tensor& seg_gt,
                          const torch::Tensor& bnd_gt, const LossConfig& cfg);

}  // namespace brp
