#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pointvig/error.hpp"

namespace pointvig::io {

using CsvRow = std::vector<std::string>;

/// Quotes a field when it contains a delimiter, quote, or line break.
inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_csv_row(std::ostream& os, const CsvRow& row) {
  for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_escape(row[i]);
  os << "\r\n";
}

inline void write_csv(std::ostream& os, const CsvRow& header, const std::vector<CsvRow>& rows) {
  write_csv_row(os, header);
  for (const auto& r : rows) write_csv_row(os, r);
}

inline void write_csv_file(const std::string& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot open '" + path + "' for writing");
  write_csv(os, header, rows);
}

/// RFC 4180 reader; accepts CRLF or bare LF record separators.
inline std::vector<CsvRow> read_csv(std::istream& is) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    any = false;
  };
  while (is.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (is.peek() == '"') {
          is.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (is.peek() == '\n') is.get(c);
      end_row();
    } else if (c == '\n') {
      end_row();
    } else {
      field += c;
      field_started = true;
    }
  }
  require(!quoted, ErrorKind::parse, "unterminated quoted CSV field");
  if (any || !row.empty() || !field.empty()) end_row();
  return rows;
}

inline std::vector<CsvRow> read_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::io, "cannot open '" + path + "'");
  return read_csv(is);
}

}  // namespace pointvig::io
