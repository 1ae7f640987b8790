#pragma once

#include <string>
#include <vector>

#include "pointvig/graph/types.hpp"
#include "pointvig/io/csv.hpp"

// Golden-file layout for neighbor lists and subgraphs: one CSV record per
// slot with columns (row, slot, index, mask). Neighbor lists write mask 1.
namespace pointvig::graph {

inline const io::CsvRow kFixtureHeader{"row", "slot", "index", "mask"};

inline std::vector<io::CsvRow> to_csv_rows(const NeighborIndex& nb) {
  std::vector<io::CsvRow> rows;
  rows.reserve(nb.indices.size());
  for (std::size_t i = 0; i < nb.rows; ++i)
    for (std::size_t j = 0; j < nb.k; ++j)
      rows.push_back({std::to_string(i), std::to_string(j), std::to_string(nb.at(i, j)), "1"});
  return rows;
}

inline std::vector<io::CsvRow> to_csv_rows(const Subgraph& sub) {
  std::vector<io::CsvRow> rows;
  rows.reserve(sub.indices.size());
  for (std::size_t i = 0; i < sub.rows; ++i)
    for (std::size_t j = 0; j < sub.m; ++j)
      rows.push_back({std::to_string(i), std::to_string(j), std::to_string(sub.indices[i * sub.m + j]),
                      sub.valid(i, j) ? "1" : "0"});
  return rows;
}

/// Rebuilds a subgraph from fixture records; slots must be dense per row.
inline Subgraph subgraph_from_csv(const std::vector<io::CsvRow>& records, double radius) {
  require(!records.empty() && records.front() == kFixtureHeader, ErrorKind::parse,
          "fixture CSV must start with header row,slot,index,mask");
  Subgraph sub;
  sub.radius = radius;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    require(rec.size() == 4, ErrorKind::parse, "fixture record " + std::to_string(r) + " needs 4 fields");
    const std::size_t row = std::stoul(rec[0]), slot = std::stoul(rec[1]);
    sub.rows = std::max(sub.rows, row + 1);
    sub.m = std::max(sub.m, slot + 1);
  }
  sub.indices.assign(sub.rows * sub.m, -1);
  sub.mask.assign(sub.rows * sub.m, 0);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t at = std::stoul(rec[0]) * sub.m + std::stoul(rec[1]);
    sub.indices[at] = std::stoll(rec[2]);
    sub.mask[at] = rec[3] == "1" ? 1 : 0;
  }
  for (Index v : sub.indices) require(v >= 0, ErrorKind::parse, "fixture has missing slots");
  return sub;
}

inline NeighborIndex neighbors_from_csv(const std::vector<io::CsvRow>& records) {
  const Subgraph sub = subgraph_from_csv(records, 0.0);
  return {sub.rows, sub.m, sub.indices};
}

}  // namespace pointvig::graph
