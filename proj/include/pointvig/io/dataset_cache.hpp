#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pointvig/io/cloud_io.hpp"

namespace pointvig::io {

/// A list of clouds in one PVTN archive. Entry `cloud.<i>` holds the
/// [N x c] point tensor; the header carries the count and the cloud labels.
inline pvtn::Archive dataset_archive(const std::vector<PointCloud>& data, const std::string& description) {
  pvtn::Archive a;
  a.header = "format = pointvig-dataset\ndescription = " + description + "\ncount = " + std::to_string(data.size()) +
             "\nlabels = ";
  for (std::size_t i = 0; i < data.size(); ++i) {
    a.header += (i ? ", " : "") + std::to_string(data[i].label);
    char name[32];
    std::snprintf(name, sizeof name, "cloud.%06zu", i);
    a.entries.emplace(name, cloud_to_tensor(data[i]));
  }
  a.header += "\n";
  return a;
}

inline void save_dataset(const std::string& path, const std::vector<PointCloud>& data, const std::string& description) {
  pvtn::save_archive(path, dataset_archive(data, description));
}

inline std::vector<PointCloud> load_dataset(const std::string& path) {
  const auto a = pvtn::load_archive(path);
  std::istringstream hs(a.header);
  const KvDoc doc = parse_kv(hs, path);
  require(doc.has("format") && doc.entries.at("format").value == "pointvig-dataset", ErrorKind::bad_magic,
          path + ": not a pointvig dataset cache");
  const auto labels = split_list(doc.entries.at("labels").value);
  require(labels.size() == a.entries.size(), ErrorKind::parse, path + ": label count does not match cloud count");
  std::vector<PointCloud> out;
  std::size_t i = 0;
  for (const auto& [name, t] : a.entries) {  // map order equals index order
    PointCloud c = cloud_from_tensor(t, path + ":" + name);
    long long label = -1;
    require(detail::parse_int(labels[i++], label), ErrorKind::parse, path + ": bad label");
    c.label = static_cast<int>(label);
    out.push_back(std::move(c));
  }
  return out;
}

/// Loads `path` when it exists, otherwise builds the data and stores it there.
template <class Make>
std::vector<PointCloud> cached_dataset(const std::string& path, const std::string& description, Make make) {
  if (!path.empty() && std::filesystem::exists(path)) return load_dataset(path);
  auto data = make();
  if (!path.empty()) save_dataset(path, data, description);
  return data;
}

}  // namespace pointvig::io
