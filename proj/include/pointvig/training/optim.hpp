#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "pointvig/numerics/param_store.hpp"

namespace pointvig {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

/// One bias-corrected Adam update of every parameter in `store`. Moments are
/// kept in double regardless of the parameter type.
template <class T>
void adam_step(ParamStore<T>& store, AdamState& state, double lr, const AdamConfig& cfg = {}) {
  for (const auto& [path, p] : store.params())
    require(p.has_grad(), ErrorKind::incomplete_backward, "parameter '" + path + "' has no gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [path, p] : store.params()) {
    auto& m = state.m[path];
    auto& v = state.v[path];
    m.resize(p.numel(), 0.0);
    v.resize(p.numel(), 0.0);
    auto w = const_cast<Tensor<T>&>(p).mutable_data();
    auto g = p.grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

struct ScheduleConfig {
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  double period_epochs = 25;

  void validate() const {
    require(lr_min < lr_max, ErrorKind::validation, "lr_min must be below lr_max");
    require(period_epochs >= 1, ErrorKind::validation, "period_epochs must be >= 1");
  }
};

/// Cosine annealing with warm restarts every `period_epochs`.
inline double lr_at(double epoch, const ScheduleConfig& cfg) {
  const double phase = std::fmod(epoch, cfg.period_epochs) / cfg.period_epochs;
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

}  // namespace pointvig
