#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pointvig/graph/ball_query.hpp"
#include "pointvig/graph/dilation.hpp"
#include "pointvig/graph/knn.hpp"
#include "pointvig/graph/sampling.hpp"
#include "pointvig/module/pointvig_module.hpp"
#include "pointvig/networks/point_cloud.hpp"
#include "pointvig/networks/spec.hpp"

namespace pointvig {

template <class T>
struct EncoderStage {
  std::size_t ratio = 1;
  DenseBlock<T> lift;
  std::vector<PointViGModule<T>> blocks;
};

/// Intermediate values recorded by a forward pass.
template <class T>
struct NetworkTrace {
  std::vector<LayerTap<T>> modules;             // one per PointViG block, execution order
  std::vector<Tensor<T>> encoder_outputs;       // one per stage
  std::vector<Tensor<T>> encoder_positions;     // point coordinates of each stage output
  std::vector<Tensor<T>> decoder_inputs;        // segmentation: concat(upsampled, skip), deepest first
  std::vector<std::size_t> decoder_skip_width;  // trailing skip columns of each decoder input
};

template <class T>
struct ForwardContext {
  NormMode mode = NormMode::eval;
  std::uint64_t seed = 0;  // drives random dilation; fixed for eval
  NetworkTrace<T>* trace = nullptr;
  graph::OpCounter* counter = nullptr;
};

/// A built network: its model spec, parameters and the layer objects that
/// alias them.
template <class T>
struct Model {
  ModelSpec spec;
  ParamStore<T> store;
  std::vector<DenseBlock<T>> stem;  // segmentation grouping MLP
  std::vector<EncoderStage<T>> stages;
  std::vector<DenseBlock<T>> decoder;
  std::vector<DenseBlock<T>> seg_head;
  std::vector<Linear<T>> cls_head;
  Linear<T> out;

  Model() = default;
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

template <class T>
Model<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Model<T> m;
  m.spec = spec;
  Rng rng(seed);
  auto& st = m.store;
  std::size_t width = spec.input_width;

  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& ss = spec.stages[s];
    const std::string prefix = "stage" + std::to_string(s);
    if (spec.segmentation() && s == 0) {
      std::size_t in = 3 + spec.input_width;
      int layer = 0;
      for (auto w : spec.stem_hidden) {
        m.stem.push_back(make_dense(st, prefix + ".stem.layer" + std::to_string(layer++), in, w, spec.act, rng));
        in = w;
      }
      m.stem.push_back(make_dense(st, prefix + ".stem.layer" + std::to_string(layer), in, ss.channels, spec.act, rng));
      width = ss.channels;
      m.stages.emplace_back();
      continue;
    }
    EncoderStage<T> stage;
    stage.ratio = ss.downsample_ratio;
    stage.lift = make_dense(st, prefix + ".lift", width, ss.channels, spec.act, rng);
    for (std::size_t b = 0; b < ss.num_blocks; ++b)
      stage.blocks.emplace_back(st, prefix + ".block" + std::to_string(b), spec.module_config(s), rng);
    m.stages.push_back(std::move(stage));
    width = ss.channels;
  }

  if (spec.segmentation()) {
    const std::size_t last = spec.stages.size() - 1;
    m.decoder.resize(spec.stages.size());
    m.decoder[last] = make_dense(st, "decoder" + std::to_string(last), spec.stages[last].channels,
                                 spec.decoder_widths[last], spec.act, rng);
    for (std::size_t s = last; s-- > 0;)
      m.decoder[s] = make_dense(st, "decoder" + std::to_string(s), spec.decoder_widths[s + 1] + spec.stages[s].channels,
                                spec.decoder_widths[s], spec.act, rng);
    width = spec.decoder_widths[0];
    int layer = 0;
    for (auto w : spec.head_widths) {
      m.seg_head.push_back(make_dense(st, "head.layer" + std::to_string(layer++), width, w, spec.act, rng));
      width = w;
    }
    m.out = make_linear(st, "head.layer" + std::to_string(layer), width, spec.num_classes, rng);
  } else {
    int layer = 0;
    for (auto w : spec.head_widths) {
      m.cls_head.push_back(make_linear(st, "head.layer" + std::to_string(layer++), width, w, rng));
      width = w;
    }
    m.out = make_linear(st, "head.layer" + std::to_string(layer), width, spec.num_classes, rng);
  }
  return m;
}

namespace detail {

template <class T>
Tensor<T> rows_of(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  const std::size_t d = x.dim(1);
  auto xs = x.data();
  return Tensor<T>({count, d}, std::vector<T>(xs.begin() + begin * d, xs.begin() + (begin + count) * d));
}

/// FPS inside each of `samples` blocks of `n` rows; returns global rows.
template <class T>
std::vector<Index> batched_fps(const Tensor<T>& pos, std::size_t samples, std::size_t n, std::size_t ratio) {
  std::vector<Index> out;
  for (std::size_t s = 0; s < samples; ++s)
    for (Index i : graph::fps_downsample(rows_of(pos, s * n, n), ratio)) out.push_back(i + static_cast<Index>(s * n));
  return out;
}

/// Ball query of every point against its own sample's points.
template <class T>
graph::Subgraph batched_ball_query(const Tensor<T>& pos, std::size_t samples, std::size_t n,
                                   const graph::DilationConfig& cfg, graph::OpCounter* counter) {
  graph::Subgraph all{samples * n, cfg.m, cfg.r, {}, {}};
  all.indices.reserve(samples * n * cfg.m);
  all.mask.reserve(samples * n * cfg.m);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto local = rows_of(pos, s * n, n);
    auto sub = graph::ball_query(local, local, cfg, graph::SearchBackend::grid, counter);
    for (Index i : sub.indices) all.indices.push_back(i + static_cast<Index>(s * n));
    all.mask.insert(all.mask.end(), sub.mask.begin(), sub.mask.end());
  }
  return all;
}

template <class T>
Tensor<T> batched_upsample(const Tensor<T>& sparse_pos, const Tensor<T>& sparse_feat, std::size_t ns,
                           const Tensor<T>& dense_pos, std::size_t nd, std::size_t samples) {
  graph::InterpolationPlan<T> plan;
  for (std::size_t s = 0; s < samples; ++s) {
    auto p = graph::make_interpolation(rows_of(sparse_pos, s * ns, ns), rows_of(dense_pos, s * nd, nd),
                                       static_cast<Index>(s * ns));
    plan.taps = p.taps;
    plan.rows.insert(plan.rows.end(), p.rows.begin(), p.rows.end());
    plan.weights.insert(plan.weights.end(), p.weights.begin(), p.weights.end());
  }
  return weighted_gather<T>(sparse_feat, plan.rows, plan.weights, plan.taps);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t block) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stage * 131 + block + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Grouping stem: every valid member j of center i contributes the row
/// [p_j - c_i, f_j]; the rows pass through the shared MLP and are max-pooled
/// per center. Padded slots are never materialised.
template <class T>
Tensor<T> stage1_group_mlp_pool(const Tensor<T>& positions, const Tensor<T>& features, const Tensor<T>& centers,
                                const graph::Subgraph& sub, std::vector<DenseBlock<T>>& mlp, NormMode mode) {
  require(sub.rows == centers.dim(0), ErrorKind::dimension, "stem: one subgraph row per center required");
  require(positions.dim(0) == features.dim(0), ErrorKind::dimension, "stem: positions and features must align");
  std::vector<Index> member, owner;
  std::vector<std::size_t> offsets{0};
  for (std::size_t i = 0; i < sub.rows; ++i) {
    for (std::size_t j = 0; j < sub.m; ++j)
      if (sub.valid(i, j)) {
        member.push_back(sub.indices[i * sub.m + j]);
        owner.push_back(static_cast<Index>(i));
      }
    require(member.size() > offsets.back(), ErrorKind::empty_input,
            "stem: center " + std::to_string(i) + " has no valid members");
    offsets.push_back(member.size());
  }
  auto rel = add(gather_rows<T>(positions, member), scale(gather_rows<T>(centers, owner), T(-1)));
  Tensor<T> x = concat_channels(rel, gather_rows<T>(features, member));
  for (auto& layer : mlp) x = layer(x, mode);
  return segment_max<T>(x, offsets);
}

/// Per-sample global kNN graph convolution encoder, mean pool and MLP head:
/// [B*N x input] -> [B x C] logits.
template <class T>
Tensor<T> cls_forward(Model<T>& m, const Batch<T>& batch, const ForwardContext<T>& ctx = {}) {
  require(!m.spec.segmentation(), ErrorKind::validation, "cls_forward needs a classification model");
  require(batch.features.dim(1) == m.spec.input_width, ErrorKind::dimension, "cls_forward: input width mismatch");
  m.spec.check_points(batch.points);
  Tensor<T> pos = batch.positions, f = batch.features;
  std::size_t n = batch.points;
  for (std::size_t s = 0; s < m.stages.size(); ++s) {
    auto& stage = m.stages[s];
    if (stage.ratio > 1) {
      const auto idx = detail::batched_fps(pos, batch.samples, n, stage.ratio);
      pos = gather_rows<T>(pos, idx);
      f = gather_rows<T>(f, idx);
      n = idx.size() / batch.samples;
    }
    f = stage.lift(f, ctx.mode);
    for (auto& block : stage.blocks) {
      const auto nbrs = graph::knn_feature_segmented(f, batch.samples, m.spec.stages[s].k, true, ctx.counter);
      LayerTap<T>* tap = nullptr;
      if (ctx.trace) tap = &ctx.trace->modules.emplace_back();
      f = block.forward(pos, f, nbrs, ctx.mode, tap);
    }
    if (ctx.trace) {
      ctx.trace->encoder_outputs.push_back(f);
      ctx.trace->encoder_positions.push_back(pos);
    }
  }
  Tensor<T> h = segment_mean(f, batch.samples);
  for (auto& layer : m.cls_head) h = activate(layer(h), m.spec.act);
  return m.out(h);
}

/// Encoder-decoder: grouping stem, dilated graph-convolution stages, then
/// interpolation with skip connections back to full resolution.
/// [B*N x input] -> [B*N x C] logits.
template <class T>
Tensor<T> seg_forward(Model<T>& m, const Batch<T>& batch, const ForwardContext<T>& ctx = {}) {
  require(m.spec.segmentation(), ErrorKind::validation, "seg_forward needs a segmentation model");
  require(batch.features.dim(1) == m.spec.input_width, ErrorKind::dimension, "seg_forward: input width mismatch");
  m.spec.check_points(batch.points);
  const std::size_t depth = m.stages.size(), B = batch.samples;
  std::vector<Tensor<T>> enc_pos, enc_feat;
  std::vector<std::size_t> enc_n;

  const auto& stem_cfg = *m.spec.stages[0].dilation;
  const auto sub0 = detail::batched_ball_query(batch.positions, B, batch.points, stem_cfg, ctx.counter);
  Tensor<T> f = stage1_group_mlp_pool(batch.positions, batch.features, batch.positions, sub0, m.stem, ctx.mode);
  Tensor<T> pos = batch.positions;
  std::size_t n = batch.points;
  enc_pos.push_back(pos);
  enc_feat.push_back(f);
  enc_n.push_back(n);
  if (ctx.trace) {
    ctx.trace->encoder_outputs.push_back(f);
    ctx.trace->encoder_positions.push_back(pos);
  }

  for (std::size_t s = 1; s < depth; ++s) {
    auto& stage = m.stages[s];
    const auto& ss = m.spec.stages[s];
    if (stage.ratio > 1) {
      const auto idx = detail::batched_fps(pos, B, n, stage.ratio);
      pos = gather_rows<T>(pos, idx);
      f = gather_rows<T>(f, idx);
      n = idx.size() / B;
    }
    f = stage.lift(f, ctx.mode);
    const auto sub = detail::batched_ball_query(pos, B, n, *ss.dilation, ctx.counter);
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto nbrs = graph::dilated_select(ss.dilation->strategy, f, sub, ss.k, detail::mix_seed(ctx.seed, s, b),
                                              {}, ctx.counter);
      LayerTap<T>* tap = nullptr;
      if (ctx.trace) tap = &ctx.trace->modules.emplace_back();
      f = stage.blocks[b].forward(pos, f, nbrs, ctx.mode, tap);
    }
    enc_pos.push_back(pos);
    enc_feat.push_back(f);
    enc_n.push_back(n);
    if (ctx.trace) {
      ctx.trace->encoder_outputs.push_back(f);
      ctx.trace->encoder_positions.push_back(pos);
    }
  }

  Tensor<T> g = m.decoder[depth - 1](enc_feat[depth - 1], ctx.mode);
  for (std::size_t s = depth - 1; s-- > 0;) {
    Tensor<T> up = detail::batched_upsample(enc_pos[s + 1], g, enc_n[s + 1], enc_pos[s], enc_n[s], B);
    Tensor<T> cat = concat_channels(up, enc_feat[s]);
    if (ctx.trace) {
      ctx.trace->decoder_inputs.push_back(cat);
      ctx.trace->decoder_skip_width.push_back(enc_feat[s].dim(1));
    }
    g = m.decoder[s](cat, ctx.mode);
  }
  for (auto& layer : m.seg_head) g = layer(g, ctx.mode);
  return m.out(g);
}

template <class T>
Tensor<T> forward(Model<T>& m, const Batch<T>& batch, const ForwardContext<T>& ctx = {}) {
  return m.spec.segmentation() ? seg_forward(m, batch, ctx) : cls_forward(m, batch, ctx);
}

/// Single-cloud conveniences.
template <class T>
Tensor<T> cls_forward(Model<T>& m, const PointCloud& cloud, const ForwardContext<T>& ctx = {}) {
  return cls_forward(m, make_batch<T>({&cloud}, m.spec.input_width), ctx).reshape({m.spec.num_classes});
}

template <class T>
Tensor<T> seg_forward(Model<T>& m, const PointCloud& cloud, const ForwardContext<T>& ctx = {}) {
  return seg_forward(m, make_batch<T>({&cloud}, m.spec.input_width), ctx);
}

}  // namespace pointvig
