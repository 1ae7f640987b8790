#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pointvig/numerics/ops.hpp"

namespace pointvig {

using TensorFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Central-difference check of the analytic gradient of `fn` with respect to
/// every scalar of every input. Non-scalar outputs are contracted with a fixed
/// random projection first. Returns
///   max |analytic - numeric| / max(1, |analytic|, |numeric|).
inline double grad_check(const TensorFn& fn, std::vector<Tensor<double>> inputs, double eps = 1e-5) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  const Tensor<double> probe = fn(inputs);
  std::vector<double> projection(probe.numel());
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(0.5, 1.5);
  for (auto& w : projection) w = dist(rng);

  auto objective = [&]() {
    NoGradGuard guard;
    const Tensor<double> y = fn(inputs);
    double total = 0.0;
    for (std::size_t i = 0; i < projection.size(); ++i) total += y[i] * projection[i];
    require(std::isfinite(total), ErrorKind::numeric_instability, "grad_check: non-finite objective");
    return total;
  };

  weighted_sum(probe, projection).backward();

  double worst = 0.0;
  for (auto& in : inputs) {
    std::vector<double> analytic(in.grad().begin(), in.grad().end());
    auto values = in.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = objective();
      values[i] = saved - eps;
      const double down = objective();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      require(std::isfinite(a) && std::isfinite(numeric), ErrorKind::numeric_instability,
              "grad_check: non-finite gradient");
      worst = std::max(worst, std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)}));
    }
  }
  return worst;
}

}  // namespace pointvig
