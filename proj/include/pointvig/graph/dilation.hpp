#pragma once

#include <random>
#include <vector>

#include "pointvig/graph/knn.hpp"

namespace pointvig::graph {

namespace detail {

inline std::vector<Index> valid_members(const Subgraph& sub, std::size_t row) {
  std::vector<Index> out;
  out.reserve(sub.m);
  for (std::size_t j = 0; j < sub.m; ++j)
    if (sub.valid(row, j)) out.push_back(sub.indices[row * sub.m + j]);
  return out;
}

inline void write_cyclic(const std::vector<Index>& chosen, std::size_t k, Index* out) {
  for (std::size_t j = 0; j < k; ++j) out[j] = chosen[j % chosen.size()];
}

inline void check_select(const Subgraph& sub, std::size_t k) {
  require(k >= 1 && k <= sub.m, ErrorKind::capacity,
          "dilated selection needs 1 <= k <= m (k=" + std::to_string(k) + ", m=" + std::to_string(sub.m) + ")");
}

}  // namespace detail

/// Adaptive dilated selection: per row, the k valid subgraph members nearest
/// to the row's center in feature space. Padded slots are never candidates;
/// when fewer than k members are valid they repeat cyclically, nearest first.
///
/// `center_rows[i]` is the feature row of query i; empty means row i.
template <class T>
NeighborIndex adaptive_select(const Tensor<T>& features, const Subgraph& sub, std::size_t k,
                              std::span<const Index> center_rows = {}, OpCounter* counter = nullptr) {
  detail::check_select(sub, k);
  require(features.rank() == 2, ErrorKind::dimension, "adaptive_select: features must be [N x d]");
  require(center_rows.empty() || center_rows.size() == sub.rows, ErrorKind::dimension,
          "adaptive_select: one center row per subgraph row required");
  const std::size_t d = features.dim(1), n = features.dim(0);
  const T* f = features.data().data();
  NeighborIndex out{sub.rows, k, std::vector<Index>(sub.rows * k)};
  std::vector<detail::Candidate> cand;
  for (std::size_t i = 0; i < sub.rows; ++i) {
    const Index center = center_rows.empty() ? static_cast<Index>(i) : center_rows[i];
    require(center >= 0 && static_cast<std::size_t>(center) < n, ErrorKind::index,
            "adaptive_select: center row out of range");
    cand.clear();
    for (std::size_t j = 0; j < sub.m; ++j) {
      if (!sub.valid(i, j)) continue;
      const Index member = sub.indices[i * sub.m + j];
      require(member >= 0 && static_cast<std::size_t>(member) < n, ErrorKind::index,
              "adaptive_select: subgraph member out of range");
      cand.emplace_back(detail::squared_distance(f + center * d, f + member * d, d), member);
    }
    if (counter) counter->distance_ops += static_cast<std::uint64_t>(cand.size()) * d;
    detail::keep_nearest(cand, k);
    std::vector<Index> chosen;
    chosen.reserve(cand.size());
    for (const auto& c : cand) chosen.push_back(c.second);
    detail::write_cyclic(chosen, k, out.indices.data() + i * k);
  }
  return out;
}

/// Every floor(v/k)-th valid member in distance order.
inline NeighborIndex uniform_select(const Subgraph& sub, std::size_t k) {
  detail::check_select(sub, k);
  NeighborIndex out{sub.rows, k, std::vector<Index>(sub.rows * k)};
  for (std::size_t i = 0; i < sub.rows; ++i) {
    const auto valid = detail::valid_members(sub, i);
    Index* dst = out.indices.data() + i * k;
    if (valid.size() < k) {
      detail::write_cyclic(valid, k, dst);
      continue;
    }
    const std::size_t stride = valid.size() / k;
    for (std::size_t j = 0; j < k; ++j) dst[j] = valid[j * stride];
  }
  return out;
}

/// k distinct valid members drawn with a generator seeded by `seed`.
inline NeighborIndex random_select(const Subgraph& sub, std::size_t k, std::uint64_t seed) {
  detail::check_select(sub, k);
  NeighborIndex out{sub.rows, k, std::vector<Index>(sub.rows * k)};
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sub.rows; ++i) {
    auto valid = detail::valid_members(sub, i);
    Index* dst = out.indices.data() + i * k;
    if (valid.size() < k) {
      detail::write_cyclic(valid, k, dst);
      continue;
    }
    // Partial Fisher-Yates over the first k positions.
    for (std::size_t j = 0; j < k; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, valid.size() - 1);
      std::swap(valid[j], valid[pick(rng)]);
      dst[j] = valid[j];
    }
  }
  return out;
}

template <class T>
NeighborIndex dilated_select(DilationStrategy strategy, const Tensor<T>& features, const Subgraph& sub,
                             std::size_t k, std::uint64_t seed, std::span<const Index> center_rows = {},
                             OpCounter* counter = nullptr) {
  switch (strategy) {
    case DilationStrategy::uniform: return uniform_select(sub, k);
    case DilationStrategy::random: return random_select(sub, k, seed);
    case DilationStrategy::adaptive: break;
  }
  return adaptive_select(features, sub, k, center_rows, counter);
}

}  // namespace pointvig::graph
