#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointvig/io/config.hpp"
#include "pointvig/numerics/pvtn.hpp"

namespace pointvig::io {

inline constexpr std::string_view kVersion = "0.1.0";

/// Run record written next to every artifact: the resolved configuration
/// (after overrides), the seed, tool and format versions, and the outputs.
struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  bool strict_deterministic = true;
  std::vector<std::pair<std::string, std::string>> config;  // key, value in key order
  std::vector<std::string> artifacts;
  nlohmann::json extra = nlohmann::json::object();
};

inline nlohmann::json manifest_json(const Manifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["strict_deterministic"] = m.strict_deterministic;
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = cfg;
  j["versions"] = {{"pointvig", std::string(kVersion)},
                   {"config_schema", 1},
                   {"pvtn_tensor", pvtn::kTensorVersion},
                   {"pvtn_archive", pvtn::kArchiveVersion},
                   {"compiler", __VERSION__},
                   {"cxx_standard", __cplusplus}};
  j["artifacts"] = m.artifacts;
  if (!m.extra.empty()) j["results"] = m.extra;
  return j;
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot write manifest '" + path + "'");
  f << manifest_json(m).dump(2) << '\n';
}

/// The config echo of a manifest as a KvDoc, so a run can be repeated from it.
inline KvDoc manifest_config(const std::string& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, path + ": " + e.what());
  }
  require(j.contains("config") && j["config"].is_object(), ErrorKind::parse, path + ": manifest has no config");
  KvDoc doc;
  doc.source = path;
  for (const auto& [k, v] : j["config"].items()) doc.set(k, v.get<std::string>());
  return doc;
}

inline std::vector<std::pair<std::string, std::string>> config_echo(const KvDoc& doc) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, e] : doc.entries) out.emplace_back(k, e.value);
  return out;
}

}  // namespace pointvig::io
