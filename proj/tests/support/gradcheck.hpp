#pragma once

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace gradcheck {

// Relative error ||analytic - numeric|| / max(||analytic||, ||numeric||, tiny)
// between the autograd gradient of a scalar function of `x` and its central
// finite differences. `x` must be a double tensor.
inline double relative_error(const std::function<torch::Tensor(const torch::Tensor&)>& f, torch::Tensor x,
                             double h = 1e-6) {
  x = x.detach().clone().to(torch::kFloat64).set_requires_grad(true);
  auto y = f(x);
  y.backward();
  const auto analytic = x.grad().detach().clone().reshape({-1});
  auto base = x.detach().clone().reshape({-1});
  auto numeric = torch::zeros_like(base);
  torch::NoGradGuard no_grad;
  auto* b = base.data_ptr<double>();
  for (int64_t i = 0; i < base.numel(); ++i) {
    const double keep = b[i];
    b[i] = keep + h;
    const double up = f(base.reshape(x.sizes())).item<double>();
    b[i] = keep - h;
    const double down = f(base.reshape(x.sizes())).item<double>();
    b[i] = keep;
    numeric[i] = (up - down) / (2 * h);
  }
  const double diff = (analytic - numeric).norm().item<double>();
  const double scale = std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), 1e-12});
  return diff / scale;
}

// Freshly initialised tiny networks have channels that are exactly zero
// before a ReLU (zero BN bias on all-zero features), where autograd and
// finite differences legitimately disagree. Random bias offsets move every
// activation off the kink.
inline void offset_biases(torch::nn::Module& module, double scale) {
  torch::NoGradGuard no_grad;
  for (auto& p : module.named_parameters()) {
    const auto& name = p.key();
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      p.value().add_((torch::rand_like(p.value()) * 2 - 1) * scale);
    }
  }
}

// Same measure over every parameter element of `module`, for a scalar
// function of the module's output. The module must hold double parameters.
inline double module_relative_error(torch::nn::Module& module, const std::function<torch::Tensor()>& f,
                                    double h = 1e-6) {
  module.zero_grad();
  f().backward();
  std::vector<double> analytic, numeric;
  torch::NoGradGuard no_grad;
  for (auto& p : module.parameters()) {
    const auto g = p.grad().defined() ? p.grad().reshape({-1}) : torch::zeros({p.numel()}, p.options());
    auto flat = p.view({-1});
    for (int64_t i = 0; i < flat.numel(); ++i) {
      analytic.push_back(g[i].item<double>());
      const double keep = flat[i].item<double>();
      flat[i] = keep + h;
      const double up = f().item<double>();
      flat[i] = keep - h;
      const double down = f().item<double>();
      flat[i] = keep;
      numeric.push_back((up - down) / (2 * h));
    }
  }
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

}  // namespace gradcheck
