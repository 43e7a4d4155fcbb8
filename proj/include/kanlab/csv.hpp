#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kanlab/common.hpp"

namespace kanlab {

/// RFC 4180 CSV: comma-separated, optional double-quoted fields with ""
/// escapes; quoted fields may contain commas and newlines. CRLF tolerated.
namespace csv {

struct Table {
  std::vector<std::vector<std::string>> records;  // including the header row
};

inline Table parse(const std::string& text) {
  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;

  const auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    // Skip records that are completely empty (trailing newline).
    if (!(record.size() == 1 && record[0].empty()))
      table.records.push_back(record);
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
    } else {
      switch (c) {
        case '"':
          if (!field.empty() || field_was_quoted)
            throw DataError("csv: stray quote at line " + std::to_string(line));
          in_quotes = true;
          field_was_quoted = true;
          break;
        case ',':
          end_field();
          break;
        case '\r':
          break;
        case '\n':
          end_record();
          ++line;
          break;
        default:
          field += c;
      }
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quote at end of file");
  if (!field.empty() || !record.empty() || field_was_quoted) end_record();
  return table;
}

inline Table parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing or unreadable file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string write_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  out += '\n';
  return out;
}

}  // namespace csv

}  // namespace kanlab
