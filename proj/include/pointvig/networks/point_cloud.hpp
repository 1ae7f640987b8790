#pragma once

#include <vector>

#include "pointvig/numerics/tensor.hpp"

namespace pointvig {

/// N points with optional rgb attributes and labels. Coordinates and colors
/// are stored row-major, three per point.
struct PointCloud {
  std::vector<double> xyz;
  std::vector<double> rgb;          // empty or 3 per point
  std::vector<int> point_labels;    // empty or one per point
  int label = -1;                   // shape class, -1 when unlabelled

  std::size_t size() const { return xyz.size() / 3; }
  bool has_color() const { return !rgb.empty(); }
  bool has_point_labels() const { return !point_labels.empty(); }

  double coord(std::size_t i, int axis) const { return xyz[i * 3 + axis]; }

  void check() const {
    require(xyz.size() % 3 == 0, ErrorKind::dimension, "point cloud coordinates must come in triples");
    require(rgb.empty() || rgb.size() == xyz.size(), ErrorKind::dimension, "point cloud rgb must be 3 per point");
    require(point_labels.empty() || point_labels.size() == size(), ErrorKind::dimension,
            "point cloud labels must be one per point");
  }

  PointCloud subset(const std::vector<Index>& rows) const {
    PointCloud out;
    out.label = label;
    for (Index r : rows) {
      for (int a = 0; a < 3; ++a) out.xyz.push_back(xyz[r * 3 + a]);
      if (has_color())
        for (int a = 0; a < 3; ++a) out.rgb.push_back(rgb[r * 3 + a]);
      if (has_point_labels()) out.point_labels.push_back(point_labels[r]);
    }
    return out;
  }
};

/// B equally sized clouds stacked as [B*N x .] row blocks.
template <class T>
struct Batch {
  std::size_t samples = 0;
  std::size_t points = 0;
  Tensor<T> positions;  // [B*N x 3]
  Tensor<T> features;   // [B*N x input_width]
  std::vector<int> labels;        // per sample
  std::vector<int> point_labels;  // per row, empty when unlabelled

  std::size_t rows() const { return samples * points; }
};

template <class T>
Batch<T> make_batch(const std::vector<const PointCloud*>& clouds, std::size_t input_width) {
  require(!clouds.empty(), ErrorKind::empty_input, "make_batch: no clouds");
  require(input_width == 3 || input_width == 6, ErrorKind::validation, "make_batch: input width must be 3 or 6");
  Batch<T> b;
  b.samples = clouds.size();
  b.points = clouds.front()->size();
  std::vector<T> pos, feat;
  pos.reserve(b.rows() * 3);
  feat.reserve(b.rows() * input_width);
  bool labelled = true;
  for (const auto* c : clouds) {
    c->check();
    require(c->size() == b.points, ErrorKind::dimension, "make_batch: clouds in a batch must have equal size");
    require(input_width == 3 || c->has_color(), ErrorKind::dimension, "make_batch: input width 6 needs rgb");
    labelled = labelled && c->has_point_labels();
    for (std::size_t i = 0; i < b.points; ++i) {
      for (int a = 0; a < 3; ++a) {
        pos.push_back(static_cast<T>(c->xyz[i * 3 + a]));
        feat.push_back(static_cast<T>(c->xyz[i * 3 + a]));
      }
      if (input_width == 6)
        for (int a = 0; a < 3; ++a) feat.push_back(static_cast<T>(c->rgb[i * 3 + a]));
    }
    b.labels.push_back(c->label);
  }
  if (labelled)
    for (const auto* c : clouds) b.point_labels.insert(b.point_labels.end(), c->point_labels.begin(), c->point_labels.end());
  b.positions = Tensor<T>({b.rows(), 3}, std::move(pos));
  b.features = Tensor<T>({b.rows(), input_width}, std::move(feat));
  return b;
}

}  // namespace pointvig
