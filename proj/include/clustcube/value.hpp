#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

#include "clustcube/error.hpp"

namespace clustcube {

enum class ColumnType { kInteger, kReal, kText, kBoolean };

inline std::string_view to_string(ColumnType t) {
  switch (t) {
    case ColumnType::kInteger: return "integer";
    case ColumnType::kReal: return "real";
    case ColumnType::kText: return "text";
    case ColumnType::kBoolean: return "boolean";
  }
  return "?";
}

inline ColumnType parse_column_type(std::string_view s) {
  if (s == "integer") return ColumnType::kInteger;
  if (s == "real") return ColumnType::kReal;
  if (s == "text") return ColumnType::kText;
  if (s == "boolean") return ColumnType::kBoolean;
  throw DataError("unknown column type '" + std::string(s) + "'");
}

inline bool is_numeric(ColumnType t) { return t == ColumnType::kInteger || t == ColumnType::kReal; }

/// A single typed cell. std::monostate is the null marker.
using Value = std::variant<std::monostate, std::int64_t, double, bool, std::string>;

inline bool is_null(const Value& v) { return std::holds_alternative<std::monostate>(v); }

/// Shortest text that parses back to the same double.
inline std::string format_real(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Canonical text of a value. Keys, join values, and cell coordinates are all
/// compared through this form. Null renders as the empty string.
inline std::string to_text(const Value& v) {
  struct Visitor {
    std::string operator()(std::monostate) const { return {}; }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(double x) const { return format_real(x); }
    std::string operator()(bool x) const { return x ? "true" : "false"; }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, v);
}

/// Numeric view of integer/real values; nullopt for anything else.
inline std::optional<double> as_double(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

/// Coerces non-null text into a value of the given type; nullopt when the text
/// does not conform.
inline std::optional<Value> coerce(std::string_view text, ColumnType type) {
  switch (type) {
    case ColumnType::kInteger: {
      std::int64_t x = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
      if (ec != std::errc() || p != text.data() + text.size() || text.empty()) return std::nullopt;
      return Value(x);
    }
    case ColumnType::kReal: {
      double x = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
      if (ec != std::errc() || p != text.data() + text.size() || text.empty()) return std::nullopt;
      return Value(x);
    }
    case ColumnType::kBoolean:
      if (text == "true" || text == "1") return Value(true);
      if (text == "false" || text == "0") return Value(false);
      return std::nullopt;
    case ColumnType::kText:
      return Value(std::string(text));
  }
  return std::nullopt;
}

inline bool conforms(const Value& v, ColumnType type) {
  if (is_null(v)) return true;
  switch (type) {
    case ColumnType::kInteger: return std::holds_alternative<std::int64_t>(v);
    case ColumnType::kReal: return std::holds_alternative<double>(v);
    case ColumnType::kText: return std::holds_alternative<std::string>(v);
    case ColumnType::kBoolean: return std::holds_alternative<bool>(v);
  }
  return false;
}

}  // namespace clustcube
