#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pointvig/numerics/tensor.hpp"

namespace pointvig::graph {

/// Ordered neighbor lists: row i holds k source indices, nearest first.
struct NeighborIndex {
  std::size_t rows = 0;
  std::size_t k = 0;
  std::vector<Index> indices;  // rows * k, row-major

  std::span<const Index> row(std::size_t i) const { return {indices.data() + i * k, k}; }
  Index at(std::size_t i, std::size_t j) const { return indices[i * k + j]; }
};

/// Ball-query result: m candidate slots per center plus a validity mask.
/// Padded slots repeat the row's first valid index and are masked false.
struct Subgraph {
  std::size_t rows = 0;
  std::size_t m = 0;
  double radius = 0.0;
  std::vector<Index> indices;         // rows * m
  std::vector<std::uint8_t> mask;     // rows * m, 1 = in-radius member

  std::span<const Index> row(std::size_t i) const { return {indices.data() + i * m, m}; }
  bool valid(std::size_t i, std::size_t j) const { return mask[i * m + j] != 0; }

  std::size_t valid_count(std::size_t i) const {
    std::size_t v = 0;
    for (std::size_t j = 0; j < m; ++j) v += mask[i * m + j];
    return v;
  }
};

enum class DilationStrategy { adaptive, uniform, random };

inline std::string_view to_string(DilationStrategy s) {
  switch (s) {
    case DilationStrategy::adaptive: return "adaptive";
    case DilationStrategy::uniform: return "uniform";
    case DilationStrategy::random: return "random";
  }
  return "adaptive";
}

inline DilationStrategy parse_strategy(std::string_view s) {
  if (s == "adaptive") return DilationStrategy::adaptive;
  if (s == "uniform") return DilationStrategy::uniform;
  if (s == "random") return DilationStrategy::random;
  throw Error(ErrorKind::parse, "unknown dilation strategy '" + std::string(s) + "'");
}

struct DilationConfig {
  double r = 0.2;
  std::size_t m = 64;
  std::size_t k = 32;
  DilationStrategy strategy = DilationStrategy::adaptive;

  void validate() const {
    require(r > 0.0, ErrorKind::validation, "dilation radius must be > 0");
    require(m >= 1, ErrorKind::validation, "subgraph capacity m must be >= 1");
    require(k >= 1 && k <= m, ErrorKind::validation,
            "dilation k must satisfy 1 <= k <= m (k=" + std::to_string(k) + ", m=" + std::to_string(m) + ")");
  }
};

/// Tally of scalar operations spent on distance evaluation. A distance over a
/// d-dimensional vector counts d operations.
struct OpCounter {
  std::uint64_t distance_ops = 0;
};

enum class SearchBackend { brute_force, grid };

}  // namespace pointvig::graph
