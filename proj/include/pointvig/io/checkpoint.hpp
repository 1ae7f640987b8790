#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "pointvig/io/model_spec_io.hpp"
#include "pointvig/networks/model.hpp"
#include "pointvig/numerics/pvtn.hpp"

namespace pointvig::io {

inline constexpr std::string_view kCheckpointFormat = "pointvig-checkpoint";

/// Archive header: `format`, `seed`, `epoch` lines, a `[model]` marker,
/// then the model spec text. Entries hold every parameter and buffer.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  long long epoch = -1;
  ModelSpec spec;
};

template <class T>
pvtn::Archive checkpoint_archive(const Model<T>& model, std::uint64_t seed, long long epoch) {
  pvtn::Archive a;
  a.header = "format = " + std::string(kCheckpointFormat) + "\nseed = " + std::to_string(seed) +
             "\nepoch = " + std::to_string(epoch) + "\n[model]\n" + spec_to_text(model.spec);
  auto put = [&](const std::map<std::string, Tensor<T>>& m) {
    for (const auto& [path, t] : m) {
      std::vector<float> v(t.data().begin(), t.data().end());
      a.entries.emplace(path, Tensor<float>(t.shape(), std::move(v)));
    }
  };
  put(model.store.params());
  put(model.store.buffers());
  return a;
}

template <class T>
void save_checkpoint(const std::string& path, const Model<T>& model, std::uint64_t seed, long long epoch) {
  pvtn::save_archive(path, checkpoint_archive(model, seed, epoch));
}

inline CheckpointInfo parse_checkpoint_header(const std::string& header, const std::string& source) {
  const auto marker = header.find("[model]\n");
  std::istringstream meta(header.substr(0, marker));
  const KvDoc doc = parse_kv(meta, source);
  require(doc.has("format") && doc.entries.at("format").value == kCheckpointFormat, ErrorKind::bad_magic,
          source + ": not a pointvig checkpoint");
  require(marker != std::string::npos, ErrorKind::parse, source + ": checkpoint header has no model section");
  CheckpointInfo info;
  long long v = 0;
  require(doc.has("seed") && detail::parse_int(doc.entries.at("seed").value, v), ErrorKind::parse,
          source + ": checkpoint header lacks a seed");
  info.seed = static_cast<std::uint64_t>(v);
  require(doc.has("epoch") && detail::parse_int(doc.entries.at("epoch").value, info.epoch), ErrorKind::parse,
          source + ": checkpoint header lacks an epoch");
  std::istringstream body(header.substr(marker + 8));
  info.spec = spec_from_doc(parse_kv(body, source + " [model]"));
  return info;
}

/// Rebuilds the model from the stored spec and overwrites every tensor.
/// The stored set of paths and shapes must match the rebuilt model exactly.
template <class T>
Model<T> model_from_archive(const pvtn::Archive& a, CheckpointInfo* info_out = nullptr,
                            const std::string& source = "<archive>") {
  const CheckpointInfo info = parse_checkpoint_header(a.header, source);
  Model<T> model = build_model<T>(info.spec, info.seed);
  std::size_t used = 0;
  auto take = [&](const std::map<std::string, Tensor<T>>& m) {
    for (const auto& [path, t] : m) {
      auto it = a.entries.find(path);
      require(it != a.entries.end(), ErrorKind::parse, source + ": checkpoint lacks '" + path + "'");
      require(it->second.shape() == t.shape(), ErrorKind::dimension, source + ": shape mismatch for '" + path + "'");
      auto dst = const_cast<Tensor<T>&>(t).mutable_data();
      const auto src = it->second.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(src[i]);
      ++used;
    }
  };
  take(model.store.params());
  take(model.store.buffers());
  require(used == a.entries.size(), ErrorKind::parse,
          source + ": checkpoint holds " + std::to_string(a.entries.size() - used) + " unknown tensors");
  if (info_out) *info_out = info;
  return model;
}

template <class T>
Model<T> load_checkpoint(const std::string& path, CheckpointInfo* info_out = nullptr) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open checkpoint '" + path + "'");
  pvtn::Archive a;
  try {
    a = pvtn::read_archive(is);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::bad_magic) throw Error(ErrorKind::bad_magic, path + ": bad container magic");
    throw;
  }
  return model_from_archive<T>(a, info_out, path);
}

}  // namespace pointvig::io
