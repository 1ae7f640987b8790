#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "pointvig/graph/types.hpp"

namespace pointvig::graph {

namespace detail {

using Candidate = std::pair<double, Index>;

inline bool closer(const Candidate& a, const Candidate& b) {
  return a.first < b.first || (a.first == b.first && a.second < b.second);
}

template <class A, class B>
double squared_distance(const A* a, const B* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    const double diff = static_cast<double>(a[c]) - static_cast<double>(b[c]);
    s += diff * diff;
  }
  return s;
}

/// Keeps the `k` smallest candidates (by distance, then index) in order.
inline void keep_nearest(std::vector<Candidate>& cand, std::size_t k) {
  if (cand.size() > k) {
    std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), closer);
    cand.resize(k);
  }
  std::sort(cand.begin(), cand.end(), closer);
}

/// Exact kNN among the n rows starting at `rows` (each of width d); emitted
/// indices are offset by `base`. Distances to all candidates of a query are
/// accumulated side by side in channel order, the same sequence of
/// operations as squared_distance, so results agree bit for bit.
template <class T>
void knn_block(const T* rows, std::size_t n, std::size_t d, std::size_t k, bool exclude_self, Index base,
               Index* out, OpCounter* counter) {
  std::vector<double> cols(n * d);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < d; ++c) cols[c * n + j] = static_cast<double>(rows[j * d + c]);
  std::vector<double> dist(n);
  std::vector<Candidate> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist.begin(), dist.end(), 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      const double q = cols[c * n + i];
      const double* col = cols.data() + c * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = q - col[j];
        dist[j] += diff * diff;
      }
    }
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (!(exclude_self && j == i)) cand.emplace_back(dist[j], static_cast<Index>(j));
    if (counter) counter->distance_ops += static_cast<std::uint64_t>(cand.size()) * d;
    keep_nearest(cand, k);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = cand[j].second + base;
  }
}

}  // namespace detail

/// Exact k nearest neighbors in feature space by squared Euclidean distance,
/// ordered nearest first with ties broken by ascending index.
template <class T>
NeighborIndex knn_feature(const Tensor<T>& features, std::size_t k, bool exclude_self,
                          OpCounter* counter = nullptr) {
  require(features.rank() == 2, ErrorKind::dimension, "knn_feature: features must be [N x d]");
  const std::size_t n = features.dim(0), d = features.dim(1);
  const std::size_t available = n - (exclude_self && n > 0 ? 1 : 0);
  require(k >= 1 && k <= available, ErrorKind::capacity,
          "knn_feature: k=" + std::to_string(k) + " exceeds the " + std::to_string(available) +
              " candidates available");
  NeighborIndex out{n, k, std::vector<Index>(n * k)};
  detail::knn_block(features.data().data(), n, d, k, exclude_self, 0, out.indices.data(), counter);
  return out;
}

/// kNN computed independently inside each of `segments` equal row blocks of
/// [S*n x d]; indices refer to global rows.
template <class T>
NeighborIndex knn_feature_segmented(const Tensor<T>& features, std::size_t segments, std::size_t k,
                                    bool exclude_self, OpCounter* counter = nullptr) {
  require(features.rank() == 2 && segments >= 1 && features.dim(0) % segments == 0, ErrorKind::dimension,
          "knn_feature_segmented: rows must split evenly into segments");
  const std::size_t per = features.dim(0) / segments, d = features.dim(1);
  const std::size_t available = per - (exclude_self && per > 0 ? 1 : 0);
  require(k >= 1 && k <= available, ErrorKind::capacity,
          "knn_feature: k=" + std::to_string(k) + " exceeds the " + std::to_string(available) +
              " candidates available");
  NeighborIndex out{features.dim(0), k, std::vector<Index>(features.dim(0) * k)};
  for (std::size_t s = 0; s < segments; ++s)
    detail::knn_block(features.data().data() + s * per * d, per, d, k, exclude_self,
                      static_cast<Index>(s * per), out.indices.data() + s * per * k, counter);
  return out;
}

}  // namespace pointvig::graph
