#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pointvig/io/csv.hpp"
#include "pointvig/networks/model.hpp"

namespace pointvig {

enum class DiversityMean { scalar, per_channel };

/// ||X - mean(X)||_F / (M * N * d) for X of shape [M x N x d]. The norm
/// itself, not its square, is divided by the element count, so this is not
/// an RMS deviation. The mean is a single scalar unless `per_channel`.
template <class T>
double diversity(const Tensor<T>& x, DiversityMean mean_mode = DiversityMean::scalar) {
  require(x.rank() == 3, ErrorKind::dimension, "diversity: expected [M x N x d], got " + shape_str(x.shape()));
  require(x.numel() >= 1, ErrorKind::empty_input, "diversity: empty tensor");
  const std::size_t d = x.dim(2), n = x.numel();
  auto xs = x.data();
  std::vector<double> mean(mean_mode == DiversityMean::scalar ? 1 : d, 0.0);
  for (std::size_t i = 0; i < n; ++i) mean[mean.size() == 1 ? 0 : i % d] += static_cast<double>(xs[i]);
  for (auto& m : mean) m /= static_cast<double>(mean.size() == 1 ? n : n / d);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dev = static_cast<double>(xs[i]) - mean[mean.size() == 1 ? 0 : i % d];
    ss += dev * dev;
  }
  return std::sqrt(ss) / static_cast<double>(n);
}

struct DiversityEntry {
  std::size_t module = 0;
  std::string layer;
  double value = 0;
  std::size_t M = 0, N = 0, d = 0;
};

struct DiversityReport {
  std::vector<DiversityEntry> entries;  // execution order

  const DiversityEntry& at(std::size_t module, const std::string& layer) const {
    for (const auto& e : entries)
      if (e.module == module && e.layer == layer) return e;
    throw Error(ErrorKind::validation, "no diversity entry for module " + std::to_string(module) + " layer " + layer);
  }
  std::size_t modules() const { return entries.empty() ? 0 : entries.back().module + 1; }
};

/// Eval-mode diversity of every captured layer of every PointViG block over
/// the whole dataset; each sample contributes the N rows it owns.
template <class T>
DiversityReport diversity_profile(Model<T>& m, const std::vector<PointCloud>& data, std::size_t batch_size = 32,
                                  DiversityMean mean_mode = DiversityMean::scalar) {
  require(!data.empty(), ErrorKind::empty_input, "diversity_profile: empty dataset");
  NoGradGuard guard;
  // Gathered per (module, layer) as [M x N x d] in sample order.
  std::vector<std::vector<std::vector<T>>> values;
  std::vector<std::vector<Shape>> shapes;  // {N, d} per entry
  std::size_t samples = 0;
  for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
    std::vector<const PointCloud*> group;
    for (std::size_t i = lo; i < std::min(data.size(), lo + batch_size); ++i) group.push_back(&data[i]);
    NetworkTrace<T> trace;
    ForwardContext<T> ctx;
    ctx.trace = &trace;
    forward(m, make_batch<T>(group, m.spec.input_width), ctx);
    if (values.empty()) {
      values.resize(trace.modules.size());
      shapes.resize(trace.modules.size());
    }
    require(trace.modules.size() == values.size(), ErrorKind::validation, "diversity_profile: module count changed");
    for (std::size_t mod = 0; mod < trace.modules.size(); ++mod) {
      const auto& layers = trace.modules[mod].layers;
      require(layers.size() == kTapNames.size(), ErrorKind::validation, "diversity_profile: tap mismatch");
      values[mod].resize(layers.size());
      shapes[mod].resize(layers.size());
      for (std::size_t l = 0; l < layers.size(); ++l) {
        require(layers[l].first == kTapNames[l], ErrorKind::validation,
                "diversity_profile: tap '" + layers[l].first + "' out of order");
        const auto& t = layers[l].second;
        const Shape nd{t.dim(0) / group.size(), t.dim(1)};
        require(shapes[mod][l].empty() || shapes[mod][l] == nd, ErrorKind::validation,
                "diversity_profile: layer shape changed between batches");
        shapes[mod][l] = nd;
        values[mod][l].insert(values[mod][l].end(), t.data().begin(), t.data().end());
      }
    }
    samples += group.size();
  }
  DiversityReport r;
  for (std::size_t mod = 0; mod < values.size(); ++mod)
    for (std::size_t l = 0; l < values[mod].size(); ++l) {
      const auto& s = shapes[mod][l];
      Tensor<T> x({samples, s[0], s[1]}, std::move(values[mod][l]));
      r.entries.push_back({mod, kTapNames[l], diversity(x, mean_mode), samples, s[0], s[1]});
    }
  return r;
}

inline const io::CsvRow kDiversityHeader{"module", "layer", "diversity", "M", "N", "d"};

inline std::vector<io::CsvRow> diversity_rows(const DiversityReport& r) {
  std::vector<io::CsvRow> rows;
  for (const auto& e : r.entries) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", e.value);
    rows.push_back({std::to_string(e.module), e.layer, buf, std::to_string(e.M), std::to_string(e.N),
                    std::to_string(e.d)});
  }
  return rows;
}

}  // namespace pointvig
