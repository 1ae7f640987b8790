#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pointvig/graph/types.hpp"
#include "pointvig/module/pointvig_module.hpp"

namespace pointvig {

enum class Task { classification, part_segmentation, scene_segmentation };
enum class NeighborMode { global_knn, adaptive_dilated };

inline std::string_view to_string(Task t) {
  switch (t) {
    case Task::classification: return "classification";
    case Task::part_segmentation: return "part_segmentation";
    case Task::scene_segmentation: return "scene_segmentation";
  }
  return "classification";
}

inline Task parse_task(std::string_view s) {
  if (s == "classification") return Task::classification;
  if (s == "part_segmentation") return Task::part_segmentation;
  if (s == "scene_segmentation") return Task::scene_segmentation;
  throw Error(ErrorKind::parse, "unknown task '" + std::string(s) + "'");
}

inline std::string_view to_string(NeighborMode m) {
  return m == NeighborMode::global_knn ? "global_knn" : "adaptive_dilated";
}

inline NeighborMode parse_neighbor_mode(std::string_view s) {
  if (s == "global_knn") return NeighborMode::global_knn;
  if (s == "adaptive_dilated") return NeighborMode::adaptive_dilated;
  throw Error(ErrorKind::parse, "unknown neighbor mode '" + std::string(s) + "'");
}

struct StageSpec {
  std::size_t channels = 64;
  std::size_t downsample_ratio = 1;
  std::size_t num_blocks = 1;
  NeighborMode neighbor_mode = NeighborMode::global_knn;
  std::size_t k = 8;
  std::optional<graph::DilationConfig> dilation;
};

/// Architecture description. Segmentation models treat stage 0 as the
/// grouping stem (ball query, shared MLP, max pool) and every later stage as
/// dilated graph-convolution blocks; `decoder_widths[s]` is the width of the
/// decoder level that restores stage s's resolution.
struct ModelSpec {
  Task task = Task::classification;
  std::vector<StageSpec> stages;
  std::vector<std::size_t> head_widths;     // hidden widths before the C-way output layer
  std::vector<std::size_t> decoder_widths;  // segmentation only, one per stage
  std::vector<std::size_t> stem_hidden;     // segmentation stem hidden widths
  std::size_t input_width = 3;              // 3 = xyz, 6 = xyz + rgb
  std::size_t num_classes = 40;
  std::size_t ffn_expansion = 2;
  Activation act = Activation::gelu;
  ModuleToggles toggles;

  bool segmentation() const { return task != Task::classification; }

  PointViGConfig module_config(std::size_t stage) const {
    PointViGConfig c;
    c.channels = stages[stage].channels;
    c.k = stages[stage].k;
    c.ffn_expansion = ffn_expansion;
    c.act = act;
    c.toggles = toggles;
    return c;
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    auto need = [&](bool ok, std::string msg) {
      if (!ok) v.push_back(std::move(msg));
    };
    need(!stages.empty(), "at least one stage is required");
    need(input_width == 3 || input_width == 6, "input_width must be 3 (xyz) or 6 (xyz+rgb)");
    need(num_classes >= 2, "num_classes must be >= 2");
    need(ffn_expansion >= 1, "ffn_expansion must be >= 1");
    for (std::size_t i = 0; i < head_widths.size(); ++i)
      need(head_widths[i] >= 1, "head width " + std::to_string(i) + " must be >= 1");
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const auto& st = stages[s];
      const std::string at = "stage " + std::to_string(s) + ": ";
      need(st.channels >= 1, at + "channels must be >= 1");
      need(st.downsample_ratio >= 1, at + "downsample_ratio must be >= 1");
      need(st.num_blocks >= 1, at + "num_blocks must be >= 1");
      need(st.k >= 1, at + "k must be >= 1");
      if (!segmentation()) {
        need(st.neighbor_mode == NeighborMode::global_knn, at + "classification stages use global_knn");
        continue;
      }
      need(st.neighbor_mode == NeighborMode::adaptive_dilated, at + "segmentation stages use adaptive_dilated");
      need(st.dilation.has_value(), at + "segmentation stages need a dilation config");
      if (st.dilation) {
        need(st.dilation->r > 0.0, at + "dilation radius must be > 0");
        need(st.dilation->m >= 1, at + "dilation m must be >= 1");
        if (s > 0) need(st.k >= 1 && st.k <= st.dilation->m, at + "k must not exceed the subgraph capacity m");
      }
      if (s == 0) {
        need(st.num_blocks == 1, at + "the grouping stem has exactly one block");
        need(st.downsample_ratio == 1, at + "the grouping stem keeps full resolution");
      }
    }
    if (segmentation()) {
      need(decoder_widths.size() == stages.size(),
           "decoder stage count (" + std::to_string(decoder_widths.size()) + ") must equal encoder stage count (" +
               std::to_string(stages.size()) + ")");
      for (std::size_t i = 0; i < decoder_widths.size(); ++i)
        need(decoder_widths[i] >= 1, "decoder width " + std::to_string(i) + " must be >= 1");
      for (auto w : stem_hidden) need(w >= 1, "stem widths must be >= 1");
    } else {
      need(decoder_widths.empty(), "classification models have no decoder");
    }
    return v;
  }

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid model spec (" + std::to_string(v.size()) + " violation" + (v.size() > 1 ? "s" : "") + ")";
    for (const auto& s : v) msg += "\n  - " + s;
    throw Error(ErrorKind::validation, msg);
  }

  /// Point count at the output of every stage for an N-point input.
  std::vector<std::size_t> stage_points(std::size_t n) const {
    std::vector<std::size_t> out;
    for (const auto& st : stages) {
      n = (n + st.downsample_ratio - 1) / st.downsample_ratio;
      out.push_back(n);
    }
    return out;
  }

  /// Throws a capacity error when an N-point cloud is too small for the
  /// deepest stage's neighbor search.
  void check_points(std::size_t n) const {
    require(n >= 8, ErrorKind::capacity, "clouds need at least 8 points, got " + std::to_string(n));
    const auto pts = stage_points(n);
    for (std::size_t s = 0; s < stages.size(); ++s) {
      if (!segmentation())
        require(pts[s] > stages[s].k, ErrorKind::capacity,
                "a " + std::to_string(n) + "-point cloud leaves " + std::to_string(pts[s]) + " points at stage " +
                    std::to_string(s) + ", too few for k=" + std::to_string(stages[s].k));
      else
        require(pts[s] >= 1, ErrorKind::capacity, "stage " + std::to_string(s) + " keeps no points");
    }
  }
};

namespace presets {

inline StageSpec knn_stage(std::size_t channels, std::size_t ratio, std::size_t k, std::size_t blocks = 1) {
  return {channels, ratio, blocks, NeighborMode::global_knn, k, std::nullopt};
}

inline StageSpec dilated_stage(std::size_t channels, std::size_t ratio, std::size_t blocks, double r, std::size_t m,
                               std::size_t k, graph::DilationStrategy strategy = graph::DilationStrategy::adaptive) {
  return {channels, ratio, blocks, NeighborMode::adaptive_dilated, k, graph::DilationConfig{r, m, k, strategy}};
}

/// Three stages (64/128/256, downsampling 1/2/2, k = 8). The head widths are
/// an assumption sized for the published 1.5 M parameter budget.
inline ModelSpec published_classification(std::size_t classes = 40) {
  ModelSpec s;
  s.task = Task::classification;
  s.stages = {knn_stage(64, 1, 8), knn_stage(128, 2, 8), knn_stage(256, 2, 8)};
  s.head_widths = {512, 512};
  s.num_classes = classes;
  return s;
}

inline ModelSpec desk_classification(std::size_t classes = 6) {
  ModelSpec s;
  s.task = Task::classification;
  s.stages = {knn_stage(32, 1, 8), knn_stage(64, 2, 8), knn_stage(128, 2, 8)};
  s.head_widths = {128};
  s.num_classes = classes;
  return s;
}

/// Five stages, downsampling (1,4,4,4,4), blocks (1,2,3,2,2). Channel widths
/// are an assumption; the radius doubles at each stage.
inline ModelSpec published_scene_segmentation(std::size_t classes = 13,
                                          graph::DilationStrategy strategy = graph::DilationStrategy::adaptive) {
  ModelSpec s;
  s.task = Task::scene_segmentation;
  const std::size_t ch[] = {64, 64, 128, 256, 512}, ds[] = {1, 4, 4, 4, 4}, nb[] = {1, 2, 3, 2, 2};
  double r = 0.2;
  for (int i = 0; i < 5; ++i, r *= 2) s.stages.push_back(dilated_stage(ch[i], ds[i], nb[i], r, 64, 32, strategy));
  s.decoder_widths = {64, 64, 128, 256, 512};
  s.stem_hidden = {32};
  s.head_widths = {64};
  s.input_width = 6;
  s.num_classes = classes;
  return s;
}

inline ModelSpec published_part_segmentation(std::size_t classes = 50) {
  ModelSpec s;
  s.task = Task::part_segmentation;
  double r = 0.1;
  const std::size_t ch[] = {64, 128, 256}, ds[] = {1, 4, 4};
  for (int i = 0; i < 3; ++i, r *= 2) s.stages.push_back(dilated_stage(ch[i], ds[i], 1, r, 64, 32));
  s.decoder_widths = {64, 128, 256};
  s.stem_hidden = {32};
  s.head_widths = {64};
  s.num_classes = classes;
  return s;
}

/// Narrow five-stage pyramid for the synthetic scenes. Radii past the stem
/// are wide enough that each ball holds more than k candidates.
inline ModelSpec desk_scene_segmentation(std::size_t classes = 4,
                                         graph::DilationStrategy strategy = graph::DilationStrategy::adaptive) {
  ModelSpec s;
  s.task = Task::scene_segmentation;
  const std::size_t ch[] = {16, 32, 32, 64, 64}, ds[] = {1, 4, 4, 4, 4}, nb[] = {1, 2, 3, 2, 2};
  const double radius[] = {0.1, 0.4, 0.8, 1.6, 3.2};
  s.stages.push_back(dilated_stage(ch[0], 1, 1, radius[0], 16, 16, strategy));
  for (int i = 1; i < 5; ++i) s.stages.push_back(dilated_stage(ch[i], ds[i], nb[i], radius[i], 32, 16, strategy));
  s.decoder_widths = {32, 32, 32, 64, 64};
  s.stem_hidden = {16};
  s.head_widths = {32};
  s.input_width = 6;
  s.num_classes = classes;
  return s;
}

}  // namespace presets

}  // namespace pointvig
