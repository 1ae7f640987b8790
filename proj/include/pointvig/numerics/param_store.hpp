#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "pointvig/numerics/ops.hpp"

namespace pointvig {

/// Flat, lexicographically ordered registry of learnable tensors plus the
/// non-learnable buffers (batch-norm running statistics) that checkpoints
/// must carry alongside them.
template <class T>
class ParamStore {
 public:
  Tensor<T> add_param(const std::string& path, Tensor<T> tensor) {
    require(!params_.count(path) && !buffers_.count(path), ErrorKind::validation,
            "duplicate parameter path '" + path + "'");
    tensor.set_requires_grad(true);
    params_.emplace(path, tensor);
    return tensor;
  }

  Tensor<T> add_buffer(const std::string& path, Tensor<T> tensor) {
    require(!params_.count(path) && !buffers_.count(path), ErrorKind::validation,
            "duplicate buffer path '" + path + "'");
    buffers_.emplace(path, tensor);
    return tensor;
  }

  const Tensor<T>& param(const std::string& path) const {
    auto it = params_.find(path);
    require(it != params_.end(), ErrorKind::validation, "unknown parameter '" + path + "'");
    return it->second;
  }
  Tensor<T>& param(const std::string& path) {
    auto it = params_.find(path);
    require(it != params_.end(), ErrorKind::validation, "unknown parameter '" + path + "'");
    return it->second;
  }
  const Tensor<T>& buffer(const std::string& path) const {
    auto it = buffers_.find(path);
    require(it != buffers_.end(), ErrorKind::validation, "unknown buffer '" + path + "'");
    return it->second;
  }

  bool contains(const std::string& path) const { return params_.count(path) || buffers_.count(path); }

  const std::map<std::string, Tensor<T>>& params() const { return params_; }
  const std::map<std::string, Tensor<T>>& buffers() const { return buffers_; }

  std::size_t count_params() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }

 private:
  std::map<std::string, Tensor<T>> params_;
  std::map<std::string, Tensor<T>> buffers_;
};

using Rng = std::mt19937_64;

template <class T>
Tensor<T> kaiming_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(fan_in * fan_out);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  return Tensor<T>({fan_in, fan_out}, std::move(w));
}

template <class T>
struct Linear {
  Tensor<T> weight;  // [in x out]
  Tensor<T> bias;    // [out]

  std::size_t in() const { return weight.dim(0); }
  std::size_t out() const { return weight.dim(1); }
  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }

  void zero() {
    std::fill(weight.mutable_data().begin(), weight.mutable_data().end(), T(0));
    std::fill(bias.mutable_data().begin(), bias.mutable_data().end(), T(0));
  }
};

template <class T>
Linear<T> make_linear(ParamStore<T>& store, const std::string& path, std::size_t in, std::size_t out,
                      Rng& rng) {
  require(in >= 1 && out >= 1, ErrorKind::validation, path + ": linear widths must be >= 1");
  Linear<T> l;
  l.weight = store.add_param(path + ".weight", kaiming_uniform<T>(in, out, rng));
  l.bias = store.add_param(path + ".bias", Tensor<T>::zeros({out}));
  return l;
}

template <class T>
struct BatchNorm {
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormState<T> state;

  Tensor<T> operator()(const Tensor<T>& x, NormMode mode) {
    return batchnorm(x, gamma, beta, state, mode);
  }
};

template <class T>
BatchNorm<T> make_batchnorm(ParamStore<T>& store, const std::string& path, std::size_t channels) {
  BatchNorm<T> bn;
  bn.gamma = store.add_param(path + ".gamma", Tensor<T>::full({channels}, T(1)));
  bn.beta = store.add_param(path + ".beta", Tensor<T>::zeros({channels}));
  bn.state.running_mean = store.add_buffer(path + ".running_mean", Tensor<T>::zeros({channels}));
  bn.state.running_var = store.add_buffer(path + ".running_var", Tensor<T>::full({channels}, T(1)));
  return bn;
}

/// Linear -> batchnorm -> activation, the unit every MLP here is built from.
template <class T>
struct DenseBlock {
  Linear<T> fc;
  BatchNorm<T> bn;
  Activation act = Activation::gelu;

  Tensor<T> operator()(const Tensor<T>& x, NormMode mode) { return activate(bn(fc(x), mode), act); }
};

template <class T>
DenseBlock<T> make_dense(ParamStore<T>& store, const std::string& path, std::size_t in, std::size_t out,
                         Activation act, Rng& rng) {
  return {make_linear(store, path + ".fc", in, out, rng), make_batchnorm(store, path + ".bn", out), act};
}

}  // namespace pointvig
