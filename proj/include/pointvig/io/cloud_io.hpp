#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "pointvig/networks/point_cloud.hpp"
#include "pointvig/numerics/pvtn.hpp"

namespace pointvig::io {

/// Seeded uniform resampling to `count` points: a subset without
/// replacement when shrinking, every point plus random repeats when growing.
inline std::vector<Index> resample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  require(n >= 1, ErrorKind::empty_input, "resample: empty cloud");
  std::mt19937_64 rng(seed);
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (count <= n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
  }
  std::uniform_int_distribution<Index> pick(0, static_cast<Index>(n) - 1);
  while (idx.size() < count) idx.push_back(pick(rng));
  return idx;
}

namespace detail {

/// Columns: 3 = xyz, 4 = xyz label, 6 = xyz rgb, 7 = xyz rgb label.
inline void append_row(PointCloud& c, const double* v, std::size_t cols) {
  c.xyz.insert(c.xyz.end(), v, v + 3);
  if (cols >= 6) c.rgb.insert(c.rgb.end(), v + 3, v + 6);
  if (cols == 4 || cols == 7) c.point_labels.push_back(static_cast<int>(v[cols - 1]));
}

inline void normalize_colors(PointCloud& c) {
  if (c.rgb.empty()) return;
  if (*std::max_element(c.rgb.begin(), c.rgb.end()) > 1.0)
    for (auto& v : c.rgb) v /= 255.0;
}

}  // namespace detail

inline PointCloud parse_xyz(std::istream& is, const std::string& source = "<stream>") {
  PointCloud c;
  std::string line;
  std::size_t n = 0, cols = 0;
  double v[8];
  while (std::getline(is, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::size_t k = 0;
    std::string tok;
    while (ls >> tok) {
      if (k == 8) throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": too many columns");
      char* end = nullptr;
      v[k] = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size())
        throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": '" + tok + "' is not a number");
      ++k;
    }
    if (k == 0) continue;
    if (k != 3 && k != 4 && k != 6 && k != 7)
      throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": expected 3, 4, 6 or 7 columns, got " +
                                        std::to_string(k));
    if (cols == 0) cols = k;
    if (k != cols)
      throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": " + std::to_string(k) +
                                        " columns where earlier lines have " + std::to_string(cols));
    detail::append_row(c, v, k);
  }
  require(c.size() > 0, ErrorKind::empty_input, source + ": no points");
  detail::normalize_colors(c);
  return c;
}

/// [N x c] PVTN tensor with the same column meaning as the text format.
inline PointCloud cloud_from_tensor(const Tensor<float>& t, const std::string& source) {
  require(t.rank() == 2, ErrorKind::parse, source + ": point tensor must be [N x c]");
  const std::size_t cols = t.dim(1);
  require(cols == 3 || cols == 4 || cols == 6 || cols == 7, ErrorKind::parse,
          source + ": expected 3, 4, 6 or 7 columns, got " + std::to_string(cols));
  require(t.dim(0) > 0, ErrorKind::empty_input, source + ": no points");
  PointCloud c;
  double v[7];
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < cols; ++j) v[j] = t.at(i, j);
    detail::append_row(c, v, cols);
  }
  detail::normalize_colors(c);
  return c;
}

struct LoadOptions {
  std::size_t resample_to = 0;  // 0 keeps every point
  std::uint64_t seed = 0;
};

/// ASCII XYZ or PVTN, detected from the leading magic bytes.
inline PointCloud load_cloud(const std::string& path, const LoadOptions& opt = {}) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorKind::io, "cannot open point cloud '" + path + "'");
  char head[4] = {};
  f.read(head, 4);
  const bool binary = f.gcount() == 4 && std::equal(head, head + 4, pvtn::kMagic.begin());
  f.clear();
  f.seekg(0);
  PointCloud c = binary ? cloud_from_tensor(pvtn::read_tensor(f), path) : parse_xyz(f, path);
  if (opt.resample_to > 0) c = c.subset(resample_indices(c.size(), opt.resample_to, opt.seed));
  return c;
}

inline Tensor<float> cloud_to_tensor(const PointCloud& c) {
  const std::size_t cols = 3 + (c.has_color() ? 3 : 0) + (c.has_point_labels() ? 1 : 0);
  std::vector<float> v;
  v.reserve(c.size() * cols);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (int a = 0; a < 3; ++a) v.push_back(static_cast<float>(c.xyz[i * 3 + a]));
    if (c.has_color())
      for (int a = 0; a < 3; ++a) v.push_back(static_cast<float>(c.rgb[i * 3 + a]));
    if (c.has_point_labels()) v.push_back(static_cast<float>(c.point_labels[i]));
  }
  return Tensor<float>({c.size(), cols}, std::move(v));
}

inline void save_cloud_xyz(const std::string& path, const PointCloud& c) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot write '" + path + "'");
  f.precision(9);
  for (std::size_t i = 0; i < c.size(); ++i) {
    f << c.xyz[i * 3] << ' ' << c.xyz[i * 3 + 1] << ' ' << c.xyz[i * 3 + 2];
    if (c.has_color()) f << ' ' << c.rgb[i * 3] << ' ' << c.rgb[i * 3 + 1] << ' ' << c.rgb[i * 3 + 2];
    if (c.has_point_labels()) f << ' ' << c.point_labels[i];
    f << '\n';
  }
}

}  // namespace pointvig::io
