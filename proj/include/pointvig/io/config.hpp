#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pointvig/error.hpp"

namespace pointvig::io {

/// `key = value` text with `#` comments. Keys are dotted identifiers; lists
/// are comma separated.
struct KvDoc {
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry> entries;
  std::string source = "<string>";

  bool has(const std::string& key) const { return entries.count(key) != 0; }
  void set(const std::string& key, std::string value) { entries[key] = {std::move(value), 0}; }
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline KvDoc parse_kv(std::istream& is, const std::string& source = "<string>") {
  KvDoc doc;
  doc.source = source;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": empty key");
    if (doc.entries.count(key))
      throw Error(ErrorKind::parse, source + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    doc.entries[key] = {value, n};
  }
  return doc;
}

inline KvDoc parse_kv_string(const std::string& text) {
  std::istringstream is(text);
  return parse_kv(is);
}

inline KvDoc load_kv(const std::string& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), ErrorKind::io, "cannot open config '" + path + "'");
  return parse_kv(f, path);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

enum class FieldType { integer, real, boolean, text, path, int_list, real_list, text_list };

struct FieldSpec {
  std::string key;
  FieldType type;
  bool required = false;
  std::vector<std::string> choices;  // text fields only; empty = free text
};

namespace detail {

inline bool parse_int(const std::string& s, long long& v) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, v);
  return r.ec == std::errc() && r.ptr == e;
}

inline bool parse_real(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline bool parse_bool(const std::string& s, bool& v) {
  if (s == "true" || s == "1" || s == "yes") return v = true, true;
  if (s == "false" || s == "0" || s == "no") return v = false, true;
  return false;
}

}  // namespace detail

/// A KvDoc checked against a fixed set of fields. Construction collects
/// every violation (unknown key, missing key, bad value) before throwing.
/// `extra` carries caller checks (conditional keys, missing files) so they
/// are reported in the same error.
class Config {
 public:
  Config(KvDoc doc, std::vector<FieldSpec> schema, int schema_version = 1, std::vector<std::string> extra = {})
      : doc_(std::move(doc)), schema_(std::move(schema)) {
    schema_.push_back({"schema_version", FieldType::integer, true, {}});
    std::vector<std::string> v;
    auto where = [&](const std::string& key) {
      const auto line = doc_.entries.at(key).line;
      return line ? doc_.source + ":" + std::to_string(line) + ": " : doc_.source + ": ";
    };
    for (const auto& [key, entry] : doc_.entries)
      if (!find(key)) v.push_back(where(key) + "unknown key '" + key + "'");
    for (const auto& f : schema_) {
      if (!doc_.has(f.key)) {
        if (f.required) v.push_back(doc_.source + ": missing required key '" + f.key + "'");
        continue;
      }
      const std::string& val = doc_.entries.at(f.key).value;
      if (!check(f, val)) v.push_back(where(f.key) + "bad value '" + val + "' for '" + f.key + "' (" + describe(f) + ")");
    }
    if (doc_.has("schema_version") && doc_.entries.at("schema_version").value != std::to_string(schema_version))
      v.push_back(doc_.source + ": unsupported schema_version '" + doc_.entries.at("schema_version").value +
                  "' (expected " + std::to_string(schema_version) + ")");
    for (auto& x : extra) v.push_back(doc_.source + ": " + x);
    if (!v.empty()) {
      std::string msg = "config has " + std::to_string(v.size()) + " problem" + (v.size() > 1 ? "s" : "");
      for (const auto& s : v) msg += "\n  - " + s;
      throw Error(ErrorKind::validation, msg);
    }
  }

  bool has(const std::string& key) const { return doc_.has(key); }
  const KvDoc& doc() const { return doc_; }

  const std::string& text(const std::string& key) const { return raw(key); }
  std::string text(const std::string& key, const std::string& fallback) const { return has(key) ? raw(key) : fallback; }

  long long integer(const std::string& key) const {
    long long v = 0;
    detail::parse_int(raw(key), v);
    return v;
  }
  long long integer(const std::string& key, long long fallback) const { return has(key) ? integer(key) : fallback; }

  double real(const std::string& key) const {
    double v = 0;
    detail::parse_real(raw(key), v);
    return v;
  }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  bool boolean(const std::string& key, bool fallback = false) const {
    bool v = fallback;
    if (has(key)) detail::parse_bool(raw(key), v);
    return v;
  }

  std::vector<long long> int_list(const std::string& key) const {
    std::vector<long long> out;
    if (!has(key)) return out;
    for (const auto& s : split_list(raw(key))) {
      long long v = 0;
      detail::parse_int(s, v);
      out.push_back(v);
    }
    return out;
  }
  std::vector<double> real_list(const std::string& key) const {
    std::vector<double> out;
    if (!has(key)) return out;
    for (const auto& s : split_list(raw(key))) {
      double v = 0;
      detail::parse_real(s, v);
      out.push_back(v);
    }
    return out;
  }
  std::vector<std::string> text_list(const std::string& key) const { return has(key) ? split_list(raw(key)) : std::vector<std::string>{}; }

 private:
  const FieldSpec* find(const std::string& key) const {
    for (const auto& f : schema_)
      if (f.key == key) return &f;
    return nullptr;
  }

  const std::string& raw(const std::string& key) const {
    auto it = doc_.entries.find(key);
    require(it != doc_.entries.end(), ErrorKind::validation, "config key '" + key + "' is not set");
    return it->second.value;
  }

  static bool check(const FieldSpec& f, const std::string& s) {
    long long i;
    double r;
    bool b;
    auto in_choices = [&](const std::string& v) {
      return f.choices.empty() || std::find(f.choices.begin(), f.choices.end(), v) != f.choices.end();
    };
    switch (f.type) {
      case FieldType::integer: return detail::parse_int(s, i);
      case FieldType::real: return detail::parse_real(s, r);
      case FieldType::boolean: return detail::parse_bool(s, b);
      case FieldType::text: return !s.empty() && in_choices(s);
      case FieldType::path: return !s.empty();
      case FieldType::int_list:
        for (const auto& x : split_list(s))
          if (!detail::parse_int(x, i)) return false;
        return true;
      case FieldType::real_list:
        for (const auto& x : split_list(s))
          if (!detail::parse_real(x, r)) return false;
        return true;
      case FieldType::text_list:
        for (const auto& x : split_list(s))
          if (x.empty() || !in_choices(x)) return false;
        return true;
    }
    return false;
  }

  static std::string describe(const FieldSpec& f) {
    static const char* names[] = {"integer", "real",          "true/false", "text",
                                  "path",    "integer list",  "real list",  "text list"};
    std::string d = names[static_cast<int>(f.type)];
    if (!f.choices.empty()) {
      d += ": one of ";
      for (std::size_t i = 0; i < f.choices.size(); ++i) d += (i ? ", " : "") + f.choices[i];
    }
    return d;
  }

  KvDoc doc_;
  std::vector<FieldSpec> schema_;
};

}  // namespace pointvig::io
