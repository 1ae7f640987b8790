#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pointvig/numerics/tensor.hpp"

namespace pointvig {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

inline void expect_rank(const Shape& s, std::size_t rank, const char* op, const char* arg) {
  require(s.size() == rank, ErrorKind::dimension,
          std::string(op) + ": " + arg + " must have rank " + std::to_string(rank) + ", got " +
              shape_str(s));
}

template <class T>
Buffer<T>* grad_of(TensorNode<T>& self, std::size_t parent) {
  auto& p = *self.parents[parent];
  return p.requires_grad ? &p.ensure_grad() : nullptr;
}

}  // namespace detail

/// y = x W + b. x is [N x d_in], W is [d_in x d_out], b is [d_out].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  detail::expect_rank(x.shape(), 2, "linear", "x");
  detail::expect_rank(weight.shape(), 2, "linear", "weight");
  const std::size_t n = x.dim(0), din = x.dim(1), dout = weight.dim(1);
  require(weight.dim(0) == din, ErrorKind::dimension,
          "linear: x axis 1 (" + std::to_string(din) + ") != weight axis 0 (" +
              std::to_string(weight.dim(0)) + ")");
  if (bias.defined())
    require(bias.rank() == 1 && bias.dim(0) == dout, ErrorKind::dimension,
            "linear: bias axis 0 must equal weight axis 1 (" + std::to_string(dout) + "), got " +
                shape_str(bias.shape()));

  Buffer<T> out(n * dout);
  detail::MatMap<T> y(out.data(), n, dout);
  detail::ConstMatMap<T> xm(x.data().data(), n, din);
  detail::ConstMatMap<T> wm(weight.data().data(), din, dout);
  y.noalias() = xm * wm;
  if (bias.defined()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(bias.data().data(), dout);
    y.rowwise() += bm;
  }
  std::vector<Tensor<T>> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  const bool has_bias = bias.defined();
  return make_result<T>({n, dout}, std::move(out), std::move(parents),
                        [n, din, dout, has_bias](detail::TensorNode<T>& self) {
                          detail::ConstMatMap<T> dy(self.grad.data(), n, dout);
                          const auto& xs = *self.parents[0];
                          const auto& ws = *self.parents[1];
                          if (auto* gx = detail::grad_of(self, 0)) {
                            detail::MatMap<T> dx(gx->data(), n, din);
                            dx.noalias() += dy * detail::ConstMatMap<T>(ws.data.data(), din, dout).transpose();
                          }
                          if (auto* gw = detail::grad_of(self, 1)) {
                            detail::MatMap<T> dw(gw->data(), din, dout);
                            dw.noalias() += detail::ConstMatMap<T>(xs.data.data(), n, din).transpose() * dy;
                          }
                          if (has_bias) {
                            if (auto* gb = detail::grad_of(self, 2)) {
                              Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(gb->data(), dout);
                              db += dy.colwise().sum();
                            }
                          }
                        });
}

enum class NormMode { train, eval };

/// Running statistics for batch normalisation. Both tensors are [d] leaves
/// that are updated in place by train-mode forward passes.
template <class T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// Per-channel normalisation over the rows of an [N x d] tensor.
///
/// Train mode normalises with the biased batch variance and folds the
/// unbiased estimate into the running variance; eval mode is the affine map
/// defined by the running statistics.
template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    BatchNormState<T>& state, NormMode mode) {
  detail::expect_rank(x.shape(), 2, "batchnorm", "x");
  const std::size_t n = x.dim(0), d = x.dim(1);
  require(gamma.numel() == d && beta.numel() == d, ErrorKind::dimension,
          "batchnorm: gamma/beta must have " + std::to_string(d) + " channels");
  require(state.running_mean.numel() == d && state.running_var.numel() == d, ErrorKind::dimension,
          "batchnorm: running statistics must have " + std::to_string(d) + " channels");
  const T eps = state.eps;
  auto xs = x.data();
  auto g = gamma.data();
  auto b = beta.data();

  std::vector<T> mean(d, T(0)), inv_std(d);
  if (mode == NormMode::train) {
    require(n >= 2, ErrorKind::degenerate_batch,
            "batchnorm in train mode needs at least 2 rows, got " + std::to_string(n));
    std::vector<T> var(d, T(0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) mean[c] += xs[i * d + c];
    for (auto& m : mean) m /= T(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) {
        const T dev = xs[i * d + c] - mean[c];
        var[c] += dev * dev;
      }
    auto rm = state.running_mean.mutable_data();
    auto rv = state.running_var.mutable_data();
    for (std::size_t c = 0; c < d; ++c) {
      const T biased = var[c] / T(n);
      inv_std[c] = T(1) / std::sqrt(biased + eps);
      rm[c] = (T(1) - state.momentum) * rm[c] + state.momentum * mean[c];
      rv[c] = (T(1) - state.momentum) * rv[c] + state.momentum * (var[c] / T(n - 1));
    }
  } else {
    auto rm = state.running_mean.data();
    auto rv = state.running_var.data();
    for (std::size_t c = 0; c < d; ++c) {
      mean[c] = rm[c];
      inv_std[c] = T(1) / std::sqrt(rv[c] + eps);
    }
  }

  Buffer<T> xhat(n * d), out(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      const T h = (xs[i * d + c] - mean[c]) * inv_std[c];
      xhat[i * d + c] = h;
      out[i * d + c] = g[c] * h + b[c];
    }

  const bool train = mode == NormMode::train;
  return make_result<T>(
      {n, d}, std::move(out), {x, gamma, beta},
      [n, d, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::TensorNode<T>& self) {
        const auto& dy = self.grad;
        const auto& gam = self.parents[1]->data;
        if (auto* gg = detail::grad_of(self, 1))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) (*gg)[c] += dy[i * d + c] * xhat[i * d + c];
        if (auto* gb = detail::grad_of(self, 2))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) (*gb)[c] += dy[i * d + c];
        auto* gx = detail::grad_of(self, 0);
        if (!gx) return;
        if (!train) {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) (*gx)[i * d + c] += dy[i * d + c] * gam[c] * inv_std[c];
          return;
        }
        std::vector<T> sum_dh(d, T(0)), sum_dh_h(d, T(0));
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < d; ++c) {
            const T dh = dy[i * d + c] * gam[c];
            sum_dh[c] += dh;
            sum_dh_h[c] += dh * xhat[i * d + c];
          }
        const T inv_n = T(1) / T(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < d; ++c) {
            const T dh = dy[i * d + c] * gam[c];
            (*gx)[i * d + c] +=
                inv_std[c] * (dh - inv_n * sum_dh[c] - xhat[i * d + c] * inv_n * sum_dh_h[c]);
          }
      });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  Buffer<T> out(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[i] > T(0) ? xs[i] : T(0);
  return make_result<T>(x.shape(), std::move(out), {x}, [](detail::TensorNode<T>& self) {
    auto* gx = detail::grad_of(self, 0);
    if (!gx) return;
    const auto& xs = self.parents[0]->data;
    // Subgradient at exactly 0 is 0.
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (xs[i] > T(0)) (*gx)[i] += self.grad[i];
  });
}

/// Exact (erf-based) GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  Buffer<T> out(x.numel());
  auto xs = x.data();
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(0.5) * xs[i] * (T(1) + std::erf(xs[i] * inv_sqrt2));
  return make_result<T>(x.shape(), std::move(out), {x}, [inv_sqrt2](detail::TensorNode<T>& self) {
    auto* gx = detail::grad_of(self, 0);
    if (!gx) return;
    const auto& xs = self.parents[0]->data;
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const T v = xs[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      (*gx)[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

enum class Activation { gelu, relu };

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation act) {
  return act == Activation::gelu ? gelu(x) : relu(x);
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), ErrorKind::dimension,
          "add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  Buffer<T> out(a.numel());
  auto as = a.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = as[i] + bs[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [](detail::TensorNode<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (auto* g = detail::grad_of(self, p))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Buffer<T> out(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[i] * factor;
  return make_result<T>(x.shape(), std::move(out), {x}, [factor](detail::TensorNode<T>& self) {
    if (auto* g = detail::grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
  });
}

/// Sum of all elements, as a [1] tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.data()) total += v;
  return make_result<T>({1}, {total}, {x}, [](detail::TensorNode<T>& self) {
    if (auto* g = detail::grad_of(self, 0))
      for (auto& v : *g) v += self.grad[0];
  });
}

/// Contraction with a constant weight pattern: sum_i x_i * w_i.
template <class T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::vector<T> weights) {
  require(weights.size() == x.numel(), ErrorKind::dimension, "weighted_sum: weight count mismatch");
  T total = T(0);
  auto xs = x.data();
  for (std::size_t i = 0; i < weights.size(); ++i) total += xs[i] * weights[i];
  return make_result<T>({1}, {total}, {x}, [w = std::move(weights)](detail::TensorNode<T>& self) {
    if (auto* g = detail::grad_of(self, 0))
      for (std::size_t i = 0; i < w.size(); ++i) (*g)[i] += self.grad[0] * w[i];
  });
}

/// Row gather: out[i] = x[rows[i]]. Backward scatter-adds.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const Index> rows) {
  detail::expect_rank(x.shape(), 2, "gather_rows", "x");
  const std::size_t r = x.dim(0), d = x.dim(1);
  Buffer<T> out(rows.size() * d);
  auto xs = x.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= r)
      throw Error(ErrorKind::index,
                  "gather_rows: row " + std::to_string(rows[i]) + " outside [0, " + std::to_string(r) + ")");
    std::copy_n(xs.begin() + rows[i] * d, d, out.begin() + i * d);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make_result<T>({rows.size(), d}, std::move(out), {x},
                        [d, idx = std::move(idx)](detail::TensorNode<T>& self) {
                          auto* g = detail::grad_of(self, 0);
                          if (!g) return;
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (std::size_t c = 0; c < d; ++c)
                              (*g)[idx[i] * d + c] += self.grad[i * d + c];
                        });
}

/// Edge features f[neighbor] - f[center] laid out as [Q x k x d].
/// centers has Q entries, neighbors has Q*k entries (row-major by query).
template <class T>
Tensor<T> edge_differences(const Tensor<T>& f, std::span<const Index> centers,
                           std::span<const Index> neighbors, std::size_t k) {
  detail::expect_rank(f.shape(), 2, "edge_differences", "features");
  const std::size_t r = f.dim(0), d = f.dim(1), q = centers.size();
  require(neighbors.size() == q * k, ErrorKind::dimension,
          "edge_differences: expected " + std::to_string(q * k) + " neighbor entries, got " +
              std::to_string(neighbors.size()));
  auto in_range = [r](Index v) { return v >= 0 && static_cast<std::size_t>(v) < r; };
  Buffer<T> out(q * k * d);
  auto fs = f.data();
  for (std::size_t i = 0; i < q; ++i) {
    if (!in_range(centers[i]))
      throw Error(ErrorKind::index, "edge_differences: center " + std::to_string(centers[i]) + " out of range");
    const T* fc = fs.data() + centers[i] * d;
    for (std::size_t j = 0; j < k; ++j) {
      const Index nb = neighbors[i * k + j];
      if (!in_range(nb))
        throw Error(ErrorKind::index, "edge_differences: neighbor index " + std::to_string(nb) + " outside [0, " +
                                          std::to_string(r) + ")");
      const T* fn = fs.data() + nb * d;
      T* o = out.data() + (i * k + j) * d;
      for (std::size_t c = 0; c < d; ++c) o[c] = fn[c] - fc[c];
    }
  }
  std::vector<Index> ctr(centers.begin(), centers.end());
  std::vector<Index> nbr(neighbors.begin(), neighbors.end());
  return make_result<T>({q, k, d}, std::move(out), {f},
                        [q, k, d, ctr = std::move(ctr), nbr = std::move(nbr)](detail::TensorNode<T>& self) {
                          auto* g = detail::grad_of(self, 0);
                          if (!g) return;
                          for (std::size_t i = 0; i < q; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                              const T* dy = self.grad.data() + (i * k + j) * d;
                              T* gn = g->data() + nbr[i * k + j] * d;
                              T* gc = g->data() + ctr[i] * d;
                              for (std::size_t c = 0; c < d; ++c) {
                                gn[c] += dy[c];
                                gc[c] -= dy[c];
                              }
                            }
                        });
}

template <class T>
struct MaxPoolResult {
  Tensor<T> values;
  /// Winning slot per (row, channel), row-major [N x d].
  std::vector<Index> argmax;
};

/// Channel-wise maximum over the middle axis of an [N x k x d] tensor. Ties
/// resolve to the lowest slot, which alone receives the gradient.
template <class T>
MaxPoolResult<T> neighbor_max(const Tensor<T>& x) {
  detail::expect_rank(x.shape(), 3, "neighbor_max", "x");
  const std::size_t n = x.dim(0), k = x.dim(1), d = x.dim(2);
  require(k >= 1, ErrorKind::empty_input, "neighbor_max: empty neighborhood (k == 0)");
  auto xs = x.data();
  Buffer<T> out(n * d);
  std::vector<Index> arg(n * d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* base = xs.data() + i * k * d;
    std::copy_n(base, d, out.begin() + i * d);
    for (std::size_t j = 1; j < k; ++j)
      for (std::size_t c = 0; c < d; ++c)
        if (base[j * d + c] > out[i * d + c]) {
          out[i * d + c] = base[j * d + c];
          arg[i * d + c] = static_cast<Index>(j);
        }
  }
  auto values = make_result<T>({n, d}, std::move(out), {x},
                               [k, d, arg](detail::TensorNode<T>& self) {
                                 auto* g = detail::grad_of(self, 0);
                                 if (!g) return;
                                 for (std::size_t e = 0; e < arg.size(); ++e) {
                                   const std::size_t i = e / d, c = e % d;
                                   (*g)[(i * k + static_cast<std::size_t>(arg[e])) * d + c] += self.grad[e];
                                 }
                               });
  return {std::move(values), std::move(arg)};
}

/// Channel-wise maximum over variable-length row segments of an [V x d]
/// tensor; segment s spans rows [offsets[s], offsets[s+1]).
template <class T>
Tensor<T> segment_max(const Tensor<T>& x, std::span<const std::size_t> offsets) {
  detail::expect_rank(x.shape(), 2, "segment_max", "x");
  require(!offsets.empty() && offsets.back() == x.dim(0), ErrorKind::dimension,
          "segment_max: offsets must end at the row count");
  const std::size_t d = x.dim(1), s = offsets.size() - 1;
  auto xs = x.data();
  Buffer<T> out(s * d);
  std::vector<std::size_t> arg(s * d);
  for (std::size_t seg = 0; seg < s; ++seg) {
    const std::size_t lo = offsets[seg], hi = offsets[seg + 1];
    if (hi <= lo) throw Error(ErrorKind::empty_input, "segment_max: segment " + std::to_string(seg) + " is empty");
    for (std::size_t c = 0; c < d; ++c) {
      out[seg * d + c] = xs[lo * d + c];
      arg[seg * d + c] = lo;
    }
    for (std::size_t row = lo + 1; row < hi; ++row)
      for (std::size_t c = 0; c < d; ++c)
        if (xs[row * d + c] > out[seg * d + c]) {
          out[seg * d + c] = xs[row * d + c];
          arg[seg * d + c] = row;
        }
  }
  return make_result<T>({s, d}, std::move(out), {x}, [d, arg = std::move(arg)](detail::TensorNode<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    for (std::size_t e = 0; e < arg.size(); ++e) (*g)[arg[e] * d + e % d] += self.grad[e];
  });
}

/// [N x d1] ++ [N x d2] -> [N x (d1 + d2)].
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank(a.shape(), 2, "concat_channels", "a");
  detail::expect_rank(b.shape(), 2, "concat_channels", "b");
  require(a.dim(0) == b.dim(0), ErrorKind::dimension,
          "concat_channels: row counts " + std::to_string(a.dim(0)) + " and " + std::to_string(b.dim(0)) +
              " differ on axis 0");
  const std::size_t n = a.dim(0), d1 = a.dim(1), d2 = b.dim(1), w = d1 + d2;
  Buffer<T> out(n * w);
  auto as = a.data();
  auto bs = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(as.begin() + i * d1, d1, out.begin() + i * w);
    std::copy_n(bs.begin() + i * d2, d2, out.begin() + i * w + d1);
  }
  return make_result<T>({n, w}, std::move(out), {a, b}, [n, d1, d2, w](detail::TensorNode<T>& self) {
    if (auto* ga = detail::grad_of(self, 0))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d1; ++c) (*ga)[i * d1 + c] += self.grad[i * w + c];
    if (auto* gb = detail::grad_of(self, 1))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d2; ++c) (*gb)[i * d2 + c] += self.grad[i * w + d1 + c];
  });
}

/// Means over `segments` equal-length blocks of rows: [S*n x d] -> [S x d].
template <class T>
Tensor<T> segment_mean(const Tensor<T>& x, std::size_t segments) {
  detail::expect_rank(x.shape(), 2, "segment_mean", "x");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  require(segments >= 1 && rows >= segments && rows % segments == 0, ErrorKind::empty_input,
          "segment_mean: " + std::to_string(rows) + " rows cannot form " + std::to_string(segments) +
              " non-empty equal segments");
  const std::size_t per = rows / segments;
  auto xs = x.data();
  Buffer<T> out(segments * d, T(0));
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = 0; i < per; ++i)
      for (std::size_t c = 0; c < d; ++c) out[s * d + c] += xs[(s * per + i) * d + c];
    for (std::size_t c = 0; c < d; ++c) out[s * d + c] /= T(per);
  }
  return make_result<T>({segments, d}, std::move(out), {x}, [segments, per, d](detail::TensorNode<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const T w = T(1) / T(per);
    for (std::size_t s = 0; s < segments; ++s)
      for (std::size_t i = 0; i < per; ++i)
        for (std::size_t c = 0; c < d; ++c) (*g)[(s * per + i) * d + c] += self.grad[s * d + c] * w;
  });
}

/// Arithmetic mean of the rows of [N x d], giving [d].
template <class T>
Tensor<T> mean_pool_rows(const Tensor<T>& x) {
  detail::expect_rank(x.shape(), 2, "mean_pool_rows", "x");
  require(x.dim(0) >= 1, ErrorKind::empty_input, "mean_pool_rows: no rows");
  return segment_mean(x, 1).reshape({x.dim(1)});
}

/// out[i] = sum_t weights[i*taps + t] * x[rows[i*taps + t]]; weights are constants.
template <class T>
Tensor<T> weighted_gather(const Tensor<T>& x, std::span<const Index> rows, std::span<const T> weights,
                          std::size_t taps) {
  detail::expect_rank(x.shape(), 2, "weighted_gather", "x");
  require(taps >= 1 && rows.size() == weights.size() && rows.size() % taps == 0, ErrorKind::dimension,
          "weighted_gather: rows/weights must be [N x taps]");
  const std::size_t n = rows.size() / taps, d = x.dim(1), r = x.dim(0);
  auto xs = x.data();
  Buffer<T> out(n * d, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < taps; ++t) {
      const Index src = rows[i * taps + t];
      require(src >= 0 && static_cast<std::size_t>(src) < r, ErrorKind::index, "weighted_gather: row out of range");
      const T w = weights[i * taps + t];
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += w * xs[src * d + c];
    }
  std::vector<Index> idx(rows.begin(), rows.end());
  std::vector<T> wts(weights.begin(), weights.end());
  return make_result<T>({n, d}, std::move(out), {x},
                        [n, d, taps, idx = std::move(idx), wts = std::move(wts)](detail::TensorNode<T>& self) {
                          auto* g = detail::grad_of(self, 0);
                          if (!g) return;
                          for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t t = 0; t < taps; ++t) {
                              const T w = wts[i * taps + t];
                              T* gs = g->data() + idx[i * taps + t] * d;
                              for (std::size_t c = 0; c < d; ++c) gs[c] += w * self.grad[i * d + c];
                            }
                        });
}

/// Mean negative log-softmax of the labelled class over the rows of [R x C].
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  detail::expect_rank(logits.shape(), 2, "cross_entropy", "logits");
  const std::size_t r = logits.dim(0), c = logits.dim(1);
  require(r >= 1, ErrorKind::empty_input, "cross_entropy: empty batch");
  require(labels.size() == r, ErrorKind::dimension,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(r) + " rows");
  auto ls = logits.data();
  Buffer<T> prob(r * c);
  T loss = T(0);
  for (std::size_t i = 0; i < r; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw Error(ErrorKind::index,
                  "cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    const T* row = ls.data() + i * c;
    const T mx = *std::max_element(row, row + c);
    T z = T(0);
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    const T log_z = std::log(z) + mx;
    for (std::size_t j = 0; j < c; ++j) prob[i * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[labels[i]];
  }
  loss /= T(r);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result<T>({1}, {loss}, {logits},
                        [r, c, prob = std::move(prob), lab = std::move(lab)](detail::TensorNode<T>& self) {
                          auto* g = detail::grad_of(self, 0);
                          if (!g) return;
                          const T s = self.grad[0] / T(r);
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j)
                              (*g)[i * c + j] += s * (prob[i * c + j] - (static_cast<int>(j) == lab[i] ? T(1) : T(0)));
                        });
}

/// Row-wise argmax of [R x C]; ties go to the lowest column.
template <class T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  const std::size_t r = logits.dim(0), c = logits.dim(1);
  std::vector<int> out(r);
  auto ls = logits.data();
  for (std::size_t i = 0; i < r; ++i)
    out[i] = static_cast<int>(std::max_element(ls.begin() + i * c, ls.begin() + (i + 1) * c) - (ls.begin() + i * c));
  return out;
}

template <class To, class From>
Tensor<To> cast(const Tensor<From>& x) {
  std::vector<To> out(x.data().begin(), x.data().end());
  return Tensor<To>(x.shape(), std::move(out));
}

}  // namespace pointvig
