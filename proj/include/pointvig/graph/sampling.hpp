#pragma once

#include <limits>
#include <vector>

#include "pointvig/graph/knn.hpp"
#include "pointvig/numerics/ops.hpp"

namespace pointvig::graph {

/// Farthest-point sampling of ceil(N / ratio) points, seeded at the point
/// nearest the centroid. Indices are returned in selection order; every tie
/// resolves to the lowest index, so the result is deterministic.
template <class T>
std::vector<Index> fps_downsample(const Tensor<T>& points, std::size_t ratio) {
  require(points.rank() == 2 && points.dim(1) == 3, ErrorKind::dimension, "fps_downsample: points must be [N x 3]");
  require(ratio >= 1, ErrorKind::validation, "fps_downsample: ratio must be >= 1");
  const std::size_t n = points.dim(0);
  require(n >= 1, ErrorKind::empty_input, "fps_downsample: empty point set");
  const std::size_t count = (n + ratio - 1) / ratio;
  const T* p = points.data().data();

  std::vector<Index> picked;
  picked.reserve(count);
  if (ratio == 1) {
    for (std::size_t i = 0; i < n; ++i) picked.push_back(static_cast<Index>(i));
    return picked;
  }

  double centroid[3] = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) centroid[a] += static_cast<double>(p[i * 3 + a]);
  for (double& c : centroid) c /= static_cast<double>(n);

  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d2 = detail::squared_distance(p + i * 3, centroid, 3);
    if (d2 < best) {
      best = d2;
      seed = i;
    }
  }

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t current = seed;
  for (std::size_t s = 0; s < count; ++s) {
    picked.push_back(static_cast<Index>(current));
    nearest[current] = -1.0;
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] < 0.0) continue;
      const double d2 = detail::squared_distance(p + i * 3, p + current * 3, 3);
      if (d2 < nearest[i]) nearest[i] = d2;
      if (nearest[i] > far) {
        far = nearest[i];
        next = i;
      }
    }
    current = next;
  }
  return picked;
}

/// Precomputed 3-NN inverse-squared-distance weights from a sparse point set
/// onto a dense one. Weights in each row sum to one.
template <class T>
struct InterpolationPlan {
  std::size_t taps = 0;
  std::vector<Index> rows;  // dense_count * taps, indices into the sparse set
  std::vector<T> weights;   // dense_count * taps
};

inline constexpr double kInterpolationEps = 1e-8;

template <class T>
InterpolationPlan<T> make_interpolation(const Tensor<T>& sparse_pos, const Tensor<T>& dense_pos,
                                        Index sparse_base = 0) {
  require(sparse_pos.rank() == 2 && sparse_pos.dim(1) == 3, ErrorKind::dimension,
          "interpolate: sparse positions must be [S x 3]");
  require(dense_pos.rank() == 2 && dense_pos.dim(1) == 3, ErrorKind::dimension,
          "interpolate: dense positions must be [N x 3]");
  const std::size_t s = sparse_pos.dim(0), n = dense_pos.dim(0);
  require(s >= 1, ErrorKind::empty_input, "interpolate: no sparse points");
  InterpolationPlan<T> plan;
  plan.taps = std::min<std::size_t>(3, s);
  plan.rows.resize(n * plan.taps);
  plan.weights.resize(n * plan.taps);
  const T* sp = sparse_pos.data().data();
  const T* dp = dense_pos.data().data();
  std::vector<detail::Candidate> cand;
  cand.reserve(s);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < s; ++j)
      cand.emplace_back(detail::squared_distance(dp + i * 3, sp + j * 3, 3), static_cast<Index>(j));
    detail::keep_nearest(cand, plan.taps);
    double total = 0.0;
    double w[3];
    for (std::size_t t = 0; t < plan.taps; ++t) {
      w[t] = 1.0 / (cand[t].first + kInterpolationEps);
      total += w[t];
    }
    for (std::size_t t = 0; t < plan.taps; ++t) {
      plan.rows[i * plan.taps + t] = cand[t].second + sparse_base;
      plan.weights[i * plan.taps + t] = static_cast<T>(w[t] / total);
    }
  }
  return plan;
}

/// Features on the dense set as the weighted average of the three nearest
/// sparse points; differentiable with respect to `sparse_feat`.
template <class T>
Tensor<T> interpolate_upsample(const Tensor<T>& sparse_pos, const Tensor<T>& sparse_feat, const Tensor<T>& dense_pos) {
  require(sparse_feat.rank() == 2 && sparse_feat.dim(0) == sparse_pos.dim(0), ErrorKind::dimension,
          "interpolate: one feature row per sparse point required");
  const auto plan = make_interpolation(sparse_pos, dense_pos);
  return weighted_gather<T>(sparse_feat, plan.rows, plan.weights, plan.taps);
}

}  // namespace pointvig::graph
