#pragma once

#include <array>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "pointvig/graph/knn.hpp"

namespace pointvig::graph {

namespace detail {

/// Uniform hash grid over 3-D points. Cells are a hair wider than the query
/// radius so any in-radius point lies in the 27-cell neighborhood even after
/// rounding in the cell-coordinate computation.
template <class T>
class UniformGrid {
 public:
  UniformGrid(const T* points, std::size_t n, double radius) : points_(points), cell_(radius * (1.0 + 1e-6)) {
    origin_ = {0.0, 0.0, 0.0};
    if (n > 0)
      for (int a = 0; a < 3; ++a) {
        double lo = static_cast<double>(points[a]);
        for (std::size_t i = 1; i < n; ++i) lo = std::min(lo, static_cast<double>(points[i * 3 + a]));
        origin_[a] = lo;
      }
    for (std::size_t i = 0; i < n; ++i) cells_[key(coords(points + i * 3))].push_back(static_cast<Index>(i));
  }

  template <class Fn>
  void for_each_candidate(const T* center, Fn&& fn) const {
    const auto c = coords(center);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (Index j : it->second) fn(j);
        }
  }

 private:
  std::array<std::int64_t, 3> coords(const T* p) const {
    return {static_cast<std::int64_t>(std::floor((static_cast<double>(p[0]) - origin_[0]) / cell_)),
            static_cast<std::int64_t>(std::floor((static_cast<double>(p[1]) - origin_[1]) / cell_)),
            static_cast<std::int64_t>(std::floor((static_cast<double>(p[2]) - origin_[2]) / cell_))};
  }
  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    // 21 bits per axis, offset so small negative coordinates stay distinct.
    auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  const T* points_;
  double cell_;
  std::array<double, 3> origin_;
  std::unordered_map<std::uint64_t, std::vector<Index>> cells_;
};

template <class T>
void fill_row(std::vector<Candidate>& cand, std::size_t m, std::size_t row, Subgraph& out) {
  keep_nearest(cand, m);
  if (cand.empty())
    throw Error(ErrorKind::empty_input,
                "ball_query: center " + std::to_string(row) + " has no point within radius (empty ball)");
  for (std::size_t j = 0; j < m; ++j) {
    const bool valid = j < cand.size();
    out.indices[row * m + j] = valid ? cand[j].second : cand[0].second;
    out.mask[row * m + j] = valid ? 1 : 0;
  }
}

}  // namespace detail

/// Masked ball query: for every center, up to m points within radius r in
/// ascending distance order (the m nearest when more qualify). Remaining
/// slots repeat the first valid index with mask false. Both backends return
/// identical results; the grid is only faster.
template <class T>
Subgraph ball_query(const Tensor<T>& points, const Tensor<T>& centers, double r, std::size_t m,
                    SearchBackend backend = SearchBackend::grid, OpCounter* counter = nullptr) {
  require(points.rank() == 2 && points.dim(1) == 3, ErrorKind::dimension, "ball_query: points must be [N x 3]");
  require(centers.rank() == 2 && centers.dim(1) == 3, ErrorKind::dimension, "ball_query: centers must be [S x 3]");
  require(r > 0.0, ErrorKind::validation, "ball_query: radius must be > 0");
  require(m >= 1, ErrorKind::validation, "ball_query: capacity m must be >= 1");
  const std::size_t n = points.dim(0), s = centers.dim(0);
  const T* p = points.data().data();
  const T* c = centers.data().data();
  const double r2 = r * r;

  Subgraph out{s, m, r, std::vector<Index>(s * m), std::vector<std::uint8_t>(s * m)};
  std::vector<detail::Candidate> cand;
  if (backend == SearchBackend::brute_force) {
    for (std::size_t i = 0; i < s; ++i) {
      cand.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const double d2 = detail::squared_distance(c + i * 3, p + j * 3, 3);
        if (d2 <= r2) cand.emplace_back(d2, static_cast<Index>(j));
      }
      if (counter) counter->distance_ops += static_cast<std::uint64_t>(n) * 3;
      detail::fill_row<T>(cand, m, i, out);
    }
    return out;
  }
  detail::UniformGrid<T> grid(p, n, r);
  for (std::size_t i = 0; i < s; ++i) {
    cand.clear();
    std::uint64_t visited = 0;
    grid.for_each_candidate(c + i * 3, [&](Index j) {
      ++visited;
      const double d2 = detail::squared_distance(c + i * 3, p + j * 3, 3);
      if (d2 <= r2) cand.emplace_back(d2, j);
    });
    if (counter) counter->distance_ops += visited * 3;
    detail::fill_row<T>(cand, m, i, out);
  }
  return out;
}

template <class T>
Subgraph ball_query(const Tensor<T>& points, const Tensor<T>& centers, const DilationConfig& cfg,
                    SearchBackend backend = SearchBackend::grid, OpCounter* counter = nullptr) {
  return ball_query(points, centers, cfg.r, cfg.m, backend, counter);
}

}  // namespace pointvig::graph
