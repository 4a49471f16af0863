#pragma once

// Star-schema storage: manifest loading, typed CSV ingestion, export, and
// referential validation. Tables are immutable once ingested.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "clustcube/csv.hpp"
#include "clustcube/error.hpp"
#include "clustcube/value.hpp"

namespace clustcube {

struct ColumnDef {
  std::string name;
  ColumnType type = ColumnType::kText;

  bool operator==(const ColumnDef&) const = default;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;

  std::optional<std::size_t> column_index(std::string_view col) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == col) return i;
    }
    return std::nullopt;
  }
  bool operator==(const TableDef&) const = default;
};

using Row = std::vector<Value>;

struct TableData {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<Row> rows;

  std::optional<std::size_t> column_index(std::string_view col) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == col) return i;
    }
    return std::nullopt;
  }
  bool operator==(const TableData&) const = default;
};

/// Levels are ordered finest to coarsest.
struct Hierarchy {
  std::string dimension;
  std::vector<std::string> levels;

  bool operator==(const Hierarchy&) const = default;
};

struct DimensionRef {
  std::string table;
  std::string fact_fk;
  std::string dim_key;

  bool operator==(const DimensionRef&) const = default;
};

struct StarSchema {
  std::string fact;
  std::vector<DimensionRef> dimensions;
  std::vector<Hierarchy> hierarchies;
  std::vector<std::string> measures;
  std::vector<TableDef> tables;

  const TableDef* find_table(std::string_view name) const {
    for (const auto& t : tables) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
  const DimensionRef* find_dimension(std::string_view table) const {
    for (const auto& d : dimensions) {
      if (d.table == table) return &d;
    }
    return nullptr;
  }
  const Hierarchy* find_hierarchy(std::string_view dimension) const {
    for (const auto& h : hierarchies) {
      if (h.dimension == dimension) return &h;
    }
    return nullptr;
  }
  bool operator==(const StarSchema&) const = default;
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

inline std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline void require_column(const StarSchema& s, const std::string& table, const std::string& column,
                           const char* what) {
  const TableDef* t = s.find_table(table);
  if (!t) throw ReferenceError(std::string(what) + ": unknown table '" + table + "'");
  if (!t->column_index(column)) {
    throw ReferenceError(std::string(what) + ": unknown column '" + table + "." + column + "'");
  }
}

}  // namespace detail

/// Checks every name the manifest mentions against its own table declarations.
inline void check_schema_references(const StarSchema& s) {
  std::set<std::string> names;
  for (const auto& t : s.tables) {
    if (!names.insert(t.name).second) throw ReferenceError("table '" + t.name + "' declared twice");
    std::set<std::string> cols;
    for (const auto& c : t.columns) {
      if (!cols.insert(c.name).second) {
        throw ReferenceError("column '" + t.name + "." + c.name + "' declared twice");
      }
    }
  }
  if (!s.find_table(s.fact)) throw ReferenceError("fact: unknown table '" + s.fact + "'");
  std::set<std::string> dims, fks;
  for (const auto& d : s.dimensions) {
    if (d.table == s.fact) throw ReferenceError("dimension '" + d.table + "' is the fact table");
    if (!dims.insert(d.table).second) {
      throw ReferenceError("dimension '" + d.table + "' referenced more than once");
    }
    if (!fks.insert(d.fact_fk).second) {
      throw ReferenceError("foreign key '" + d.fact_fk + "' used for more than one dimension");
    }
    detail::require_column(s, s.fact, d.fact_fk, "dimension foreign key");
    detail::require_column(s, d.table, d.dim_key, "dimension key");
  }
  for (const auto& h : s.hierarchies) {
    if (!s.find_dimension(h.dimension)) {
      throw ReferenceError("hierarchy: unknown dimension '" + h.dimension + "'");
    }
    if (h.levels.empty()) throw ReferenceError("hierarchy '" + h.dimension + "' has no levels");
    for (const auto& l : h.levels) detail::require_column(s, h.dimension, l, "hierarchy level");
  }
  for (const auto& m : s.measures) detail::require_column(s, s.fact, m, "measure");
}

inline StarSchema parse_schema_manifest(std::string_view text) {
  using json = nlohmann::ordered_json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw SyntaxError("manifest syntax error at line " + std::to_string(line) + ", column " +
                          std::to_string(col) + ": " + e.what(),
                      e.byte);
  }
  StarSchema s;
  try {
    s.fact = doc.at("fact").get<std::string>();
    for (const auto& d : doc.value("dimensions", json::array())) {
      s.dimensions.push_back({d.at("table").get<std::string>(), d.at("fact_fk").get<std::string>(),
                              d.at("dim_key").get<std::string>()});
    }
    for (const auto& h : doc.value("hierarchies", json::array())) {
      s.hierarchies.push_back(
          {h.at("dimension").get<std::string>(), h.at("levels").get<std::vector<std::string>>()});
    }
    s.measures = doc.value("measures", std::vector<std::string>{});
    for (const auto& [name, def] : doc.at("tables").items()) {
      TableDef t{name, {}};
      for (const auto& c : def.at("columns")) {
        t.columns.push_back({c.at("name").get<std::string>(),
                             parse_column_type(c.at("type").get<std::string>())});
      }
      s.tables.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw SyntaxError(std::string("manifest structure error: ") + e.what(), 0);
  }
  check_schema_references(s);
  return s;
}

inline StarSchema load_schema_manifest(const std::filesystem::path& path) {
  return parse_schema_manifest(detail::read_file(path));
}

/// Manifest text in the format parse_schema_manifest reads. Table declarations
/// are emitted in schema order.
inline std::string write_schema_manifest(const StarSchema& s) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["fact"] = s.fact;
  doc["dimensions"] = ordered_json::array();
  for (const auto& d : s.dimensions) {
    doc["dimensions"].push_back({{"table", d.table}, {"fact_fk", d.fact_fk}, {"dim_key", d.dim_key}});
  }
  doc["hierarchies"] = ordered_json::array();
  for (const auto& h : s.hierarchies) {
    doc["hierarchies"].push_back({{"dimension", h.dimension}, {"levels", h.levels}});
  }
  doc["measures"] = s.measures;
  doc["tables"] = ordered_json::object();
  for (const auto& t : s.tables) {
    ordered_json cols = ordered_json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    doc["tables"][t.name] = {{"columns", cols}};
  }
  return doc.dump(2) + "\n";
}

/// Columns that must never hold nulls: the key of a dimension table, or every
/// foreign key of the fact table.
inline std::vector<std::string> key_columns(const StarSchema& s, std::string_view table) {
  std::vector<std::string> keys;
  if (table == s.fact) {
    for (const auto& d : s.dimensions) keys.push_back(d.fact_fk);
  }
  if (const DimensionRef* d = s.find_dimension(table)) keys.push_back(d->dim_key);
  return keys;
}

inline TableData ingest_csv_text(const StarSchema& schema, const std::string& table, std::string_view text) {
  const TableDef* def = schema.find_table(table);
  if (!def) throw ReferenceError("table '" + table + "' is not declared in the schema");
  auto records = csv::parse(text);
  if (records.empty()) throw DataError(table + ": missing header row");

  const auto& header = records.front();
  bool header_ok = header.size() == def->columns.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) {
    header_ok = header[i].text == def->columns[i].name;
  }
  if (!header_ok) {
    std::string got;
    for (const auto& f : header) got += (got.empty() ? "" : ",") + f.text;
    throw DataError(table + ": header mismatch (got '" + got + "')");
  }

  std::vector<bool> non_null(def->columns.size(), false);
  for (const auto& k : key_columns(schema, table)) non_null[*def->column_index(k)] = true;

  TableData out{def->name, def->columns, {}};
  out.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != def->columns.size()) {
      throw DataError(table + ": row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                      " fields, expected " + std::to_string(def->columns.size()));
    }
    Row row;
    row.reserve(rec.size());
    for (std::size_t c = 0; c < rec.size(); ++c) {
      const auto& col = def->columns[c];
      if (rec[c].is_null()) {
        if (non_null[c]) {
          throw DataError(table + ": null in key column '" + col.name + "' at row " + std::to_string(r));
        }
        row.emplace_back(std::monostate{});
        continue;
      }
      auto v = coerce(rec[c].text, col.type);
      if (!v) {
        throw DataError(table + ": cannot read '" + rec[c].text + "' as " + std::string(to_string(col.type)) +
                        " at row " + std::to_string(r) + ", column '" + col.name + "'");
      }
      row.push_back(std::move(*v));
    }
    out.rows.push_back(std::move(row));
  }

  if (const DimensionRef* d = schema.find_dimension(table)) {
    std::size_t key = *def->column_index(d->dim_key);
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
      if (!seen.insert(to_text(out.rows[r][key])).second) {
        throw DataError(table + ": duplicate primary key '" + to_text(out.rows[r][key]) + "' at row " +
                        std::to_string(r + 1));
      }
    }
  }
  return out;
}

inline TableData ingest_csv(const StarSchema& schema, const std::string& table,
                            const std::filesystem::path& path) {
  return ingest_csv_text(schema, table, detail::read_file(path));
}

/// CSV text that ingest_csv reads back to an equal TableData.
inline std::string export_csv(const TableData& t) {
  std::string out;
  std::vector<std::optional<std::string>> fields;
  for (const auto& c : t.columns) fields.emplace_back(c.name);
  csv::write_record(out, fields);
  for (const auto& row : t.rows) {
    fields.clear();
    for (const auto& v : row) {
      if (is_null(v)) {
        fields.emplace_back(std::nullopt);
      } else {
        fields.emplace_back(to_text(v));
      }
    }
    csv::write_record(out, fields);
  }
  return out;
}

/// A schema plus every declared table, ingested. Shared read-only.
struct Database {
  StarSchema schema;
  std::map<std::string, TableData, std::less<>> tables;

  const TableData& table(std::string_view name) const {
    auto it = tables.find(name);
    if (it == tables.end()) throw ReferenceError("table '" + std::string(name) + "' is not loaded");
    return it->second;
  }
};

/// Reads `schema.json` and `<Table>.csv` for every declared table from a
/// directory.
inline std::shared_ptr<const Database> load_database(const std::filesystem::path& dir) {
  auto db = std::make_shared<Database>();
  db->schema = load_schema_manifest(dir / "schema.json");
  for (const auto& t : db->schema.tables) {
    db->tables.emplace(t.name, ingest_csv(db->schema, t.name, dir / (t.name + ".csv")));
  }
  return db;
}

struct Violation {
  enum class Kind { kForeignKey, kHierarchy, kMeasureType, kMissingTable };
  Kind kind;
  std::string table;
  std::string column;
  std::size_t row = 0;  // 1-based data row, 0 when not row-specific
  std::string detail;
};

inline std::string_view to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::kForeignKey: return "foreign_key";
    case Violation::Kind::kHierarchy: return "hierarchy";
    case Violation::Kind::kMeasureType: return "measure_type";
    case Violation::Kind::kMissingTable: return "missing_table";
  }
  return "?";
}

struct ValidationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  std::size_t count(Violation::Kind k) const {
    return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                  [k](const Violation& v) { return v.kind == k; }));
  }
};

inline ValidationReport validate_star(const StarSchema& schema,
                                      const std::map<std::string, TableData, std::less<>>& tables) {
  ValidationReport report;
  auto find = [&](const std::string& name) -> const TableData* {
    auto it = tables.find(name);
    if (it == tables.end()) {
      report.violations.push_back({Violation::Kind::kMissingTable, name, "", 0, "table not loaded"});
      return nullptr;
    }
    return &it->second;
  };

  const TableData* fact = find(schema.fact);
  for (const auto& m : schema.measures) {
    const TableDef* def = schema.find_table(schema.fact);
    auto idx = def ? def->column_index(m) : std::nullopt;
    if (!idx || !is_numeric(def->columns[*idx].type)) {
      report.violations.push_back({Violation::Kind::kMeasureType, schema.fact, m, 0, "measure is not numeric"});
    }
  }

  for (const auto& d : schema.dimensions) {
    const TableData* dim = find(d.table);
    if (!dim || !fact) continue;
    std::unordered_set<std::string> keys;
    std::size_t key = *dim->column_index(d.dim_key);
    for (const auto& row : dim->rows) keys.insert(to_text(row[key]));
    std::size_t fk = *fact->column_index(d.fact_fk);
    for (std::size_t r = 0; r < fact->rows.size(); ++r) {
      const Value& v = fact->rows[r][fk];
      if (is_null(v) || !keys.count(to_text(v))) {
        report.violations.push_back({Violation::Kind::kForeignKey, schema.fact, d.fact_fk, r + 1,
                                     "no " + d.table + " row with key '" + to_text(v) + "'"});
      }
    }
  }

  for (const auto& h : schema.hierarchies) {
    auto it = tables.find(h.dimension);
    if (it == tables.end()) continue;
    const TableData& dim = it->second;
    for (std::size_t l = 0; l + 1 < h.levels.size(); ++l) {
      std::size_t fine = *dim.column_index(h.levels[l]);
      std::size_t coarse = *dim.column_index(h.levels[l + 1]);
      std::unordered_map<std::string, std::string> seen;
      std::set<std::string> reported;
      for (std::size_t r = 0; r < dim.rows.size(); ++r) {
        const auto& f = dim.rows[r][fine];
        const auto& c = dim.rows[r][coarse];
        if (is_null(f) || is_null(c)) continue;
        auto [pos, inserted] = seen.emplace(to_text(f), to_text(c));
        if (!inserted && pos->second != to_text(c) && reported.insert(pos->first).second) {
          report.violations.push_back({Violation::Kind::kHierarchy, h.dimension, h.levels[l], r + 1,
                                       "'" + pos->first + "' maps to both '" + pos->second + "' and '" +
                                           to_text(c) + "' at level " + h.levels[l + 1]});
        }
      }
    }
  }
  return report;
}

inline ValidationReport validate_star(const Database& db) { return validate_star(db.schema, db.tables); }

inline nlohmann::ordered_json to_json(const ValidationReport& r) {
  nlohmann::ordered_json out;
  out["valid"] = r.empty();
  out["violations"] = nlohmann::ordered_json::array();
  for (const auto& v : r.violations) {
    out["violations"].push_back({{"kind", to_string(v.kind)},
                                 {"table", v.table},
                                 {"column", v.column},
                                 {"row", v.row},
                                 {"detail", v.detail}});
  }
  return out;
}

}  // namespace clustcube
