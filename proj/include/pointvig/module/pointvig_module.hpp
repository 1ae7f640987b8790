#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pointvig/graph/types.hpp"
#include "pointvig/numerics/param_store.hpp"

namespace pointvig {

/// Names of the captured intermediate outputs, in forward order.
inline const std::vector<std::string> kTapNames{"pos_en", "fc1", "max", "mlp2", "concat", "fc2_res", "ffn"};

template <class T>
struct LayerTap {
  std::vector<std::pair<std::string, Tensor<T>>> layers;

  void capture(const std::string& name, const Tensor<T>& value) { layers.emplace_back(name, value); }
  const Tensor<T>& at(const std::string& name) const {
    for (const auto& [n, t] : layers)
      if (n == name) return t;
    throw Error(ErrorKind::validation, "no tap named '" + name + "'");
  }
};

/// Component switches for ablations. Disabling `fc` drops the learned
/// projections: FC1 becomes the identity and, without FC2 to fold the fused
/// 2d-wide feature back to d, fusion reduces to the channel-wise sum of the
/// two branches.
struct ModuleToggles {
  bool pos_enc = true;
  bool fc = true;
  bool ffn = true;
  bool concat = true;
};

struct PointViGConfig {
  std::size_t channels = 64;
  std::size_t k = 8;
  std::vector<std::size_t> posenc_hidden;  // empty -> {d/2, d/2}; output width is always d
  std::vector<std::size_t> mlp2_widths;    // empty -> {d, d}
  std::size_t ffn_expansion = 2;
  Activation act = Activation::gelu;
  ModuleToggles toggles;

  std::vector<std::size_t> resolved_posenc_hidden() const {
    if (!posenc_hidden.empty()) return posenc_hidden;
    const std::size_t h = std::max<std::size_t>(1, channels / 2);
    return {h, h};
  }
  std::vector<std::size_t> resolved_mlp2() const {
    return mlp2_widths.empty() ? std::vector<std::size_t>{channels, channels} : mlp2_widths;
  }

  void validate() const {
    require(channels >= 1 && k >= 1 && ffn_expansion >= 1, ErrorKind::validation,
            "PointViG widths, k and ffn expansion must be >= 1");
    for (auto w : resolved_posenc_hidden()) require(w >= 1, ErrorKind::validation, "posenc widths must be >= 1");
    for (auto w : resolved_mlp2()) require(w >= 1, ErrorKind::validation, "mlp2 widths must be >= 1");
    if (!toggles.fc || !toggles.concat)
      require(resolved_mlp2().back() == channels, ErrorKind::validation,
              "sum fusion needs the mlp2 output width to equal the channel count");
  }
};

/// One PointViG block: position encoding, graph-convolution kernel, FFN.
///
///   f1   = f_in + MLP1(p)
///   fi   = BN(FC1(f1))
///   fmax = max_j (fi[j] - fi[i])          over the graph neighbors j of i
///   f2   = FC2(concat(MLP2(fmax), fi)) + f1
///   fout = MLP3(f2) + f2
///
/// Batch norm follows FC1, each MLP2 layer and the first FFN layer; FC2 and
/// the last position/FFN layers are plain linear maps.
template <class T>
class PointViGModule {
 public:
  PointViGModule() = default;

  PointViGModule(ParamStore<T>& store, const std::string& prefix, PointViGConfig cfg, Rng& rng)
      : cfg_(std::move(cfg)) {
    cfg_.validate();
    const std::size_t d = cfg_.channels;
    if (cfg_.toggles.pos_enc) {
      std::size_t in = 3;
      int layer = 0;
      for (auto w : cfg_.resolved_posenc_hidden()) {
        posenc_hidden_.push_back(make_dense(store, prefix + ".posenc.layer" + std::to_string(layer++), in, w, cfg_.act, rng));
        in = w;
      }
      posenc_out_ = make_linear(store, prefix + ".posenc.layer" + std::to_string(layer), in, d, rng);
    }
    if (cfg_.toggles.fc) {
      fc1_ = make_linear(store, prefix + ".kernel.fc1", d, d, rng);
      fc1_bn_ = make_batchnorm(store, prefix + ".kernel.fc1_bn", d);
    }
    std::size_t in = d;
    int layer = 0;
    for (auto w : cfg_.resolved_mlp2()) {
      mlp2_.push_back(make_dense(store, prefix + ".kernel.mlp2.layer" + std::to_string(layer++), in, w, cfg_.act, rng));
      in = w;
    }
    if (cfg_.toggles.fc) fc2_ = make_linear(store, prefix + ".kernel.fc2", cfg_.toggles.concat ? in + d : d, d, rng);
    if (cfg_.toggles.ffn) {
      ffn_hidden_ = make_dense(store, prefix + ".ffn.layer0", d, cfg_.ffn_expansion * d, cfg_.act, rng);
      ffn_out_ = make_linear(store, prefix + ".ffn.layer1", cfg_.ffn_expansion * d, d, rng);
    }
  }

  const PointViGConfig& config() const { return cfg_; }

  /// f1 = f_in + MLP1(p).
  Tensor<T> pos_encode(const Tensor<T>& positions, const Tensor<T>& f_in, NormMode mode) {
    require(f_in.rank() == 2 && f_in.dim(1) == cfg_.channels, ErrorKind::dimension,
            "pos_encode: features must have " + std::to_string(cfg_.channels) + " channels, got " +
                shape_str(f_in.shape()));
    require(positions.rank() == 2 && positions.dim(0) == f_in.dim(0) && positions.dim(1) == 3, ErrorKind::dimension,
            "pos_encode: positions must be [N x 3] matching the feature rows");
    if (!cfg_.toggles.pos_enc) return f_in;
    Tensor<T> h = positions;
    for (auto& layer : posenc_hidden_) h = layer(h, mode);
    return add(f_in, posenc_out_(h));
  }

  /// Graph-convolution kernel with residual: f2 = FC2(concat(MLP2(fmax), fi)) + f1.
  /// Row i of `nbrs` lists the neighbor rows of node i in `f1`.
  Tensor<T> graphconv_kernel(const Tensor<T>& f1, const graph::NeighborIndex& nbrs, NormMode mode,
                             LayerTap<T>* tap = nullptr) {
    require(nbrs.rows == f1.dim(0), ErrorKind::dimension,
            "graphconv_kernel: " + std::to_string(nbrs.rows) + " neighbor rows for " + std::to_string(f1.dim(0)) +
                " nodes");
    Tensor<T> fi = cfg_.toggles.fc ? fc1_bn_(fc1_(f1), mode) : f1;
    if (tap) tap->capture("fc1", fi);

    const std::vector<Index> centers = identity_rows(f1.dim(0));
    Tensor<T> fmax = neighbor_max(edge_differences<T>(fi, centers, nbrs.indices, nbrs.k)).values;
    if (tap) tap->capture("max", fmax);

    Tensor<T> local = fmax;
    for (auto& layer : mlp2_) local = layer(local, mode);
    if (tap) tap->capture("mlp2", local);

    Tensor<T> fused = cfg_.toggles.concat && cfg_.toggles.fc ? concat_channels(local, fi) : add(local, fi);
    if (tap) tap->capture("concat", fused);

    Tensor<T> f2 = add(cfg_.toggles.fc ? fc2_(fused) : fused, f1);
    if (tap) tap->capture("fc2_res", f2);
    return f2;
  }

  /// fout = MLP3(f2) + f2.
  Tensor<T> ffn(const Tensor<T>& f2, NormMode mode) {
    require(f2.rank() == 2 && f2.dim(1) == cfg_.channels, ErrorKind::dimension,
            "ffn: expected " + std::to_string(cfg_.channels) + " channels, got " + shape_str(f2.shape()));
    if (!cfg_.toggles.ffn) return f2;
    return add(ffn_out_(ffn_hidden_(f2, mode)), f2);
  }

  Tensor<T> forward(const Tensor<T>& positions, const Tensor<T>& f_in, const graph::NeighborIndex& nbrs,
                    NormMode mode, LayerTap<T>* tap = nullptr) {
    Tensor<T> f1 = pos_encode(positions, f_in, mode);
    if (tap) tap->capture("pos_en", f1);
    Tensor<T> f2 = graphconv_kernel(f1, nbrs, mode, tap);
    Tensor<T> out = ffn(f2, mode);
    if (tap) tap->capture("ffn", out);
    return out;
  }

  // Zeroing the last layer of a residual branch turns that branch into an
  // exact identity; tests and warm starts use these.
  void zero_pos_encoding_output() { if (cfg_.toggles.pos_enc) posenc_out_.zero(); }
  void zero_fc2() { if (cfg_.toggles.fc) fc2_.zero(); }
  void zero_ffn_output() { if (cfg_.toggles.ffn) ffn_out_.zero(); }

  // Parameter access for transcription oracles.
  const std::vector<DenseBlock<T>>& posenc_hidden() const { return posenc_hidden_; }
  const Linear<T>& posenc_out() const { return posenc_out_; }
  const Linear<T>& fc1() const { return fc1_; }
  const BatchNorm<T>& fc1_bn() const { return fc1_bn_; }
  const std::vector<DenseBlock<T>>& mlp2() const { return mlp2_; }
  const Linear<T>& fc2() const { return fc2_; }
  const DenseBlock<T>& ffn_hidden() const { return ffn_hidden_; }
  const Linear<T>& ffn_out() const { return ffn_out_; }

 private:
  static std::vector<Index> identity_rows(std::size_t n) {
    std::vector<Index> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<Index>(i);
    return v;
  }

  PointViGConfig cfg_;
  std::vector<DenseBlock<T>> posenc_hidden_;
  Linear<T> posenc_out_;
  Linear<T> fc1_;
  BatchNorm<T> fc1_bn_;
  std::vector<DenseBlock<T>> mlp2_;
  Linear<T> fc2_;
  DenseBlock<T> ffn_hidden_;
  Linear<T> ffn_out_;
};

}  // namespace pointvig
