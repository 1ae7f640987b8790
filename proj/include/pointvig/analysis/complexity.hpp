#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pointvig/networks/model.hpp"

namespace pointvig {

/// Cost of the dilated search relative to a global feature-space kNN:
/// alpha = 3/d + m/N.
inline double complexity_ratio(std::size_t n, std::size_t d, std::size_t m) {
  require(n >= 1 && d >= 1 && m >= 1, ErrorKind::validation, "complexity_ratio: N, d, m must be >= 1");
  return 3.0 / static_cast<double>(d) + static_cast<double>(m) / static_cast<double>(n);
}

template <class T>
std::size_t count_params(const ParamStore<T>& store) {
  return store.count_params();
}

/// Parameter count derived from the model spec alone, independent of build_model.
inline std::size_t expected_param_count(const ModelSpec& spec) {
  auto lin = [](std::size_t i, std::size_t o) { return i * o + o; };
  auto dense = [&](std::size_t i, std::size_t o) { return lin(i, o) + 2 * o; };
  auto block = [&](std::size_t d) {
    std::size_t p = 0;
    const std::size_t h = std::max<std::size_t>(1, d / 2);
    if (spec.toggles.pos_enc) p += dense(3, h) + dense(h, h) + lin(h, d);
    if (spec.toggles.fc) p += lin(d, d) + 2 * d + lin(spec.toggles.concat ? 2 * d : d, d);
    p += 2 * dense(d, d);
    if (spec.toggles.ffn) p += dense(d, spec.ffn_expansion * d) + lin(spec.ffn_expansion * d, d);
    return p;
  };
  std::size_t total = 0, width = spec.input_width;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& st = spec.stages[s];
    if (spec.segmentation() && s == 0) {
      std::size_t in = 3 + spec.input_width;
      for (auto w : spec.stem_hidden) {
        total += dense(in, w);
        in = w;
      }
      total += dense(in, st.channels);
    } else {
      total += dense(width, st.channels) + st.num_blocks * block(st.channels);
    }
    width = st.channels;
  }
  if (spec.segmentation()) {
    const std::size_t last = spec.stages.size() - 1;
    total += dense(spec.stages[last].channels, spec.decoder_widths[last]);
    for (std::size_t s = 0; s < last; ++s)
      total += dense(spec.decoder_widths[s + 1] + spec.stages[s].channels, spec.decoder_widths[s]);
    width = spec.decoder_widths[0];
    for (auto w : spec.head_widths) {
      total += dense(width, w);
      width = w;
    }
  } else {
    for (auto w : spec.head_widths) {
      total += lin(width, w);
      width = w;
    }
  }
  return total + lin(width, spec.num_classes);
}

/// FLOPs of an affine map over `rows` rows: one multiply-accumulate is two.
inline std::uint64_t linear_flops(std::size_t rows, std::size_t in, std::size_t out) {
  return 2ULL * rows * in * out;
}

struct FlopEntry {
  std::string name;
  std::string kind;  // linear | edge | pool | search
  std::uint64_t flops = 0;
};

/// Per-layer forward cost for one cloud. Linear layers count 2 per MAC,
/// edge differences one per subtraction, max pooling one per comparison.
/// Search distance work (d per distance) is listed but kept out of
/// `network_flops`; batch norm, activations and residual additions are
/// elementwise and excluded.
struct FlopReport {
  std::vector<FlopEntry> layers;

  std::uint64_t sum(const std::string& kind) const {
    std::uint64_t s = 0;
    for (const auto& l : layers)
      if (l.kind == kind) s += l.flops;
    return s;
  }
  std::uint64_t network_flops() const { return sum("linear") + sum("edge") + sum("pool"); }
  std::uint64_t search_flops() const { return sum("search"); }
};

inline FlopReport count_flops(const ModelSpec& spec, std::size_t n_points) {
  spec.validate();
  FlopReport r;
  auto add = [&](std::string name, std::string kind, std::uint64_t f) { r.layers.push_back({std::move(name), std::move(kind), f}); };
  auto block = [&](const std::string& p, std::size_t n, std::size_t d, std::size_t k) {
    const std::size_t h = std::max<std::size_t>(1, d / 2);
    if (spec.toggles.pos_enc) {
      add(p + ".posenc.layer0", "linear", linear_flops(n, 3, h));
      add(p + ".posenc.layer1", "linear", linear_flops(n, h, h));
      add(p + ".posenc.layer2", "linear", linear_flops(n, h, d));
    }
    if (spec.toggles.fc) add(p + ".kernel.fc1", "linear", linear_flops(n, d, d));
    add(p + ".kernel.edges", "edge", 1ULL * n * k * d);
    add(p + ".kernel.max", "pool", 1ULL * n * (k - 1) * d);
    add(p + ".kernel.mlp2.layer0", "linear", linear_flops(n, d, d));
    add(p + ".kernel.mlp2.layer1", "linear", linear_flops(n, d, d));
    if (spec.toggles.fc) add(p + ".kernel.fc2", "linear", linear_flops(n, spec.toggles.concat ? 2 * d : d, d));
    if (spec.toggles.ffn) {
      add(p + ".ffn.layer0", "linear", linear_flops(n, d, spec.ffn_expansion * d));
      add(p + ".ffn.layer1", "linear", linear_flops(n, spec.ffn_expansion * d, d));
    }
  };
  const auto pts = spec.stage_points(n_points);
  std::size_t n = n_points, width = spec.input_width;
  for (std::size_t s = 0; s < spec.stages.size(); ++s) {
    const auto& st = spec.stages[s];
    const std::string p = "stage" + std::to_string(s);
    if (st.downsample_ratio > 1) add(p + ".fps", "search", 3ULL * n * pts[s]);
    n = pts[s];
    if (spec.segmentation() && s == 0) {
      // Every center is charged its full capacity m of grouped rows.
      const std::size_t m = st.dilation->m, rows = n * m;
      add(p + ".ball_query", "search", 3ULL * n * n);
      std::size_t in = 3 + spec.input_width, layer = 0;
      for (auto w : spec.stem_hidden) {
        add(p + ".stem.layer" + std::to_string(layer++), "linear", linear_flops(rows, in, w));
        in = w;
      }
      add(p + ".stem.layer" + std::to_string(layer), "linear", linear_flops(rows, in, st.channels));
      add(p + ".stem.max", "pool", 1ULL * n * (m - 1) * st.channels);
      width = st.channels;
      continue;
    }
    add(p + ".lift", "linear", linear_flops(n, width, st.channels));
    if (spec.segmentation()) add(p + ".ball_query", "search", 3ULL * n * n);
    for (std::size_t b = 0; b < st.num_blocks; ++b) {
      const std::string bp = p + ".block" + std::to_string(b);
      if (spec.segmentation())
        add(bp + ".select", "search", 1ULL * n * st.dilation->m * st.channels);
      else
        add(bp + ".knn", "search", 1ULL * n * (n - 1) * st.channels);
      block(bp, n, st.channels, st.k);
    }
    width = st.channels;
  }
  if (spec.segmentation()) {
    const std::size_t last = spec.stages.size() - 1;
    add("decoder" + std::to_string(last), "linear", linear_flops(pts[last], spec.stages[last].channels, spec.decoder_widths[last]));
    for (std::size_t s = last; s-- > 0;) {
      add("decoder" + std::to_string(s) + ".interpolate", "search", 3ULL * pts[s] * pts[s + 1]);
      add("decoder" + std::to_string(s), "linear",
          linear_flops(pts[s], spec.decoder_widths[s + 1] + spec.stages[s].channels, spec.decoder_widths[s]));
    }
    width = spec.decoder_widths[0];
    std::size_t layer = 0;
    for (auto w : spec.head_widths) {
      add("head.layer" + std::to_string(layer++), "linear", linear_flops(n_points, width, w));
      width = w;
    }
    add("head.layer" + std::to_string(layer), "linear", linear_flops(n_points, width, spec.num_classes));
  } else {
    std::size_t layer = 0;
    for (auto w : spec.head_widths) {
      add("head.layer" + std::to_string(layer++), "linear", linear_flops(1, width, w));
      width = w;
    }
    add("head.layer" + std::to_string(layer), "linear", linear_flops(1, width, spec.num_classes));
  }
  return r;
}

template <class T>
FlopReport count_flops(const Model<T>& m, std::size_t n_points) {
  return count_flops(m.spec, n_points);
}

struct ComplexityReference {
  double params = 1.5e6;
  double flops = 0.6e9;
  double params_lo = 1.2e6, params_hi = 1.8e6;
  double flops_lo = 0.3e9, flops_hi = 0.9e9;
};

/// Structured-text report: totals against the reference budget, then the
/// per-layer breakdown.
inline std::string complexity_report(const ModelSpec& spec, std::size_t n_points, std::size_t params,
                                     const ComplexityReference& ref = {}) {
  const auto fr = count_flops(spec, n_points);
  std::ostringstream os;
  char buf[256];
  auto line = [&](const char* fmt, auto... v) {
    std::snprintf(buf, sizeof buf, fmt, v...);
    os << buf << '\n';
  };
  line("task: %s", std::string(to_string(spec.task)).c_str());
  line("points: %zu", n_points);
  line("params: %zu", params);
  line("params_closed_form: %zu", expected_param_count(spec));
  line("params_reference: %.0f", ref.params);
  line("params_within_band: %s", params >= ref.params_lo && params <= ref.params_hi ? "yes" : "no");
  line("params_deviation: %+.1f%%", 100.0 * (static_cast<double>(params) - ref.params) / ref.params);
  line("network_flops: %llu", static_cast<unsigned long long>(fr.network_flops()));
  line("search_flops: %llu", static_cast<unsigned long long>(fr.search_flops()));
  line("flops_reference: %.0f", ref.flops);
  const double nf = static_cast<double>(fr.network_flops());
  line("flops_within_band: %s", nf >= ref.flops_lo && nf <= ref.flops_hi ? "yes" : "no");
  line("flops_deviation: %+.1f%%", 100.0 * (nf - ref.flops) / ref.flops);
  os << "layers:\n";
  for (const auto& l : fr.layers)
    line("  %-32s %-7s %llu", l.name.c_str(), l.kind.c_str(), static_cast<unsigned long long>(l.flops));
  return os.str();
}

}  // namespace pointvig
