#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clustcube/error.hpp"

namespace clustcube::csv {

/// One parsed field. `quoted` distinguishes `""` (empty text) from an empty
/// unquoted field (null).
struct Field {
  std::string text;
  bool quoted = false;

  bool is_null() const { return text.empty() && !quoted; }
};

using Record = std::vector<Field>;

/// RFC 4180 reader. Accepts LF or CRLF line endings and quoted fields with
/// embedded separators, quotes, and newlines. A trailing newline does not
/// produce an extra record.
inline std::vector<Record> parse(std::string_view data) {
  std::vector<Record> records;
  Record current;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field = Field{};
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.text.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.quoted) {
          throw SyntaxError("csv line " + std::to_string(line) + ": stray quote inside unquoted field", i);
        }
        if (field.quoted) {
          throw SyntaxError("csv line " + std::to_string(line) + ": text after closing quote", i);
        }
        in_quotes = true;
        field.quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < data.size() && data[i + 1] == '\n') break;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field.quoted) {
          throw SyntaxError("csv line " + std::to_string(line) + ": text after closing quote", i);
        }
        field.text.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw SyntaxError("csv: unterminated quoted field", data.size());
  if (field_started || !current.empty()) end_record();
  return records;
}

/// Quotes only when needed; empty non-null text is always written as `""`.
inline void write_field(std::string& out, std::optional<std::string_view> text) {
  if (!text) return;
  bool needs = text->empty() || text->find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) {
    out.append(*text);
    return;
  }
  out.push_back('"');
  for (char c : *text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

inline void write_record(std::string& out, const std::vector<std::optional<std::string>>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    if (fields[i]) {
      write_field(out, std::string_view(*fields[i]));
    }
  }
  out.append("\r\n");
}

}  // namespace clustcube::csv
