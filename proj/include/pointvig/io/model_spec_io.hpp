#pragma once

#include <sstream>
#include <string>

#include "pointvig/io/config.hpp"
#include "pointvig/networks/spec.hpp"

namespace pointvig::io {

inline std::vector<FieldSpec> model_spec_schema() {
  return {
      {"task", FieldType::text, true, {"classification", "part_segmentation", "scene_segmentation"}},
      {"input_width", FieldType::integer, true, {}},
      {"num_classes", FieldType::integer, true, {}},
      {"stage.channels", FieldType::int_list, true, {}},
      {"stage.downsample", FieldType::int_list, true, {}},
      {"stage.blocks", FieldType::int_list, true, {}},
      {"stage.k", FieldType::int_list, true, {}},
      {"stage.neighbor_mode", FieldType::text_list, true, {"global_knn", "adaptive_dilated"}},
      {"stage.radius", FieldType::real_list, false, {}},
      {"stage.m", FieldType::int_list, false, {}},
      {"dilation.strategy", FieldType::text, false, {"adaptive", "uniform", "random"}},
      {"head_widths", FieldType::int_list, true, {}},
      {"decoder_widths", FieldType::int_list, false, {}},
      {"stem_hidden", FieldType::int_list, false, {}},
      {"ffn_expansion", FieldType::integer, true, {}},
      {"activation", FieldType::text, true, {"gelu", "relu"}},
      {"toggle.pos_enc", FieldType::boolean, false, {}},
      {"toggle.fc", FieldType::boolean, false, {}},
      {"toggle.ffn", FieldType::boolean, false, {}},
      {"toggle.concat", FieldType::boolean, false, {}},
  };
}

namespace detail {

template <class V>
std::string join(const std::vector<V>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  return os.str();
}

inline std::vector<std::size_t> counts(const std::vector<long long>& v) {
  std::vector<std::size_t> out;
  for (auto x : v) out.push_back(x < 0 ? 0 : static_cast<std::size_t>(x));
  return out;
}

}  // namespace detail

/// Builds a ModelSpec from a validated document; every structural problem
/// (list lengths, spec invariants) is reported in one validation error.
inline ModelSpec spec_from_doc(const KvDoc& doc) {
  const Config c(doc, model_spec_schema());
  ModelSpec s;
  s.task = parse_task(c.text("task"));
  s.input_width = static_cast<std::size_t>(c.integer("input_width"));
  s.num_classes = static_cast<std::size_t>(c.integer("num_classes"));
  s.head_widths = detail::counts(c.int_list("head_widths"));
  s.decoder_widths = detail::counts(c.int_list("decoder_widths"));
  s.stem_hidden = detail::counts(c.int_list("stem_hidden"));
  s.ffn_expansion = static_cast<std::size_t>(c.integer("ffn_expansion"));
  s.act = c.text("activation") == "relu" ? Activation::relu : Activation::gelu;
  s.toggles = {c.boolean("toggle.pos_enc", true), c.boolean("toggle.fc", true), c.boolean("toggle.ffn", true),
               c.boolean("toggle.concat", true)};

  const auto ch = detail::counts(c.int_list("stage.channels"));
  const auto ds = detail::counts(c.int_list("stage.downsample"));
  const auto nb = detail::counts(c.int_list("stage.blocks"));
  const auto ks = detail::counts(c.int_list("stage.k"));
  const auto modes = c.text_list("stage.neighbor_mode");
  const auto radius = c.real_list("stage.radius");
  const auto ms = detail::counts(c.int_list("stage.m"));
  const auto strategy = graph::parse_strategy(c.text("dilation.strategy", "adaptive"));

  std::vector<std::string> v;
  const std::size_t n = ch.size();
  auto same = [&](std::size_t got, const char* key, bool optional = false) {
    if (optional && got == 0) return;
    if (got != n && got != 1)
      v.push_back(std::string(key) + " lists " + std::to_string(got) + " values for " + std::to_string(n) + " stages");
  };
  same(ds.size(), "stage.downsample");
  same(nb.size(), "stage.blocks");
  same(ks.size(), "stage.k");
  same(modes.size(), "stage.neighbor_mode");
  same(radius.size(), "stage.radius", true);
  same(ms.size(), "stage.m", true);
  auto pick = [](const auto& list, std::size_t i) { return list.size() == 1 ? list[0] : list[i]; };
  if (v.empty())
    for (std::size_t i = 0; i < n; ++i) {
      StageSpec st{ch[i], pick(ds, i), pick(nb, i), parse_neighbor_mode(pick(modes, i)), pick(ks, i), std::nullopt};
      if (!radius.empty() && !ms.empty())
        st.dilation = graph::DilationConfig{pick(radius, i), pick(ms, i), st.k, strategy};
      s.stages.push_back(st);
    }
  const auto rest = s.violations();
  if (v.empty()) v = rest;
  if (!v.empty()) {
    std::string msg = doc.source + ": invalid model spec (" + std::to_string(v.size()) + " problem" +
                      (v.size() > 1 ? "s" : "") + ")";
    for (const auto& x : v) msg += "\n  - " + x;
    throw Error(ErrorKind::validation, msg);
  }
  return s;
}

inline ModelSpec load_model_spec(const std::string& path) { return spec_from_doc(load_kv(path)); }

inline std::string spec_to_text(const ModelSpec& s) {
  std::ostringstream os;
  std::vector<std::size_t> ch, ds, nb, ks, ms;
  std::vector<double> radius;
  std::vector<std::string> modes;
  for (const auto& st : s.stages) {
    ch.push_back(st.channels);
    ds.push_back(st.downsample_ratio);
    nb.push_back(st.num_blocks);
    ks.push_back(st.k);
    modes.emplace_back(to_string(st.neighbor_mode));
    if (st.dilation) {
      radius.push_back(st.dilation->r);
      ms.push_back(st.dilation->m);
    }
  }
  os.precision(17);
  os << "schema_version = 1\n"
     << "task = " << to_string(s.task) << "\n"
     << "input_width = " << s.input_width << "\n"
     << "num_classes = " << s.num_classes << "\n"
     << "stage.channels = " << detail::join(ch) << "\n"
     << "stage.downsample = " << detail::join(ds) << "\n"
     << "stage.blocks = " << detail::join(nb) << "\n"
     << "stage.k = " << detail::join(ks) << "\n"
     << "stage.neighbor_mode = " << detail::join(modes) << "\n";
  if (radius.size() == s.stages.size()) {
    os << "stage.radius = " << detail::join(radius) << "\n"
       << "stage.m = " << detail::join(ms) << "\n"
       << "dilation.strategy = " << graph::to_string(s.stages.front().dilation->strategy) << "\n";
  }
  os << "head_widths = " << detail::join(s.head_widths) << "\n";
  if (!s.decoder_widths.empty()) os << "decoder_widths = " << detail::join(s.decoder_widths) << "\n";
  if (!s.stem_hidden.empty()) os << "stem_hidden = " << detail::join(s.stem_hidden) << "\n";
  os << "ffn_expansion = " << s.ffn_expansion << "\n"
     << "activation = " << (s.act == Activation::relu ? "relu" : "gelu") << "\n"
     << "toggle.pos_enc = " << (s.toggles.pos_enc ? "true" : "false") << "\n"
     << "toggle.fc = " << (s.toggles.fc ? "true" : "false") << "\n"
     << "toggle.ffn = " << (s.toggles.ffn ? "true" : "false") << "\n"
     << "toggle.concat = " << (s.toggles.concat ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace pointvig::io
