#pragma once

// Complex Object Definition Queries.
//
// Grammar (keywords case-insensitive):
//
//   query      := SELECT proj (',' proj)* FROM ident ident join*
//   join       := JOIN ident ident ON colref '=' colref
//   proj       := colref AS ident ':' role
//   colref     := ident '.' ident
//   role       := coordinate | feature | target | carry
//   ident      := [A-Za-z_][A-Za-z0-9_]*
//
// A parsed CodqSpec is purely structural. compose_global merges several specs
// over one fact table, derive_object_schema resolves names against a star
// schema, and materialize_objects runs the inner joins.

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clustcube/error.hpp"
#include "clustcube/star_store.hpp"

namespace clustcube {

enum class Role { kCoordinate, kFeature, kTarget, kCarry };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::kCoordinate: return "coordinate";
    case Role::kFeature: return "feature";
    case Role::kTarget: return "target";
    case Role::kCarry: return "carry";
  }
  return "?";
}

struct ColumnRef {
  std::string alias;
  std::string column;

  bool operator==(const ColumnRef&) const = default;
};

struct JoinClause {
  std::string table;
  std::string alias;
  ColumnRef left;
  ColumnRef right;

  bool operator==(const JoinClause&) const = default;

  /// The side of the ON condition that names this join's own alias.
  const ColumnRef& own_side() const { return right.alias == alias ? right : left; }
  const ColumnRef& bound_side() const { return right.alias == alias ? left : right; }
};

struct Projection {
  ColumnRef source;
  std::string name;
  Role role = Role::kCarry;

  bool operator==(const Projection&) const = default;
};

struct CodqSpec {
  std::string fact;
  std::string fact_alias;
  std::vector<JoinClause> joins;
  std::vector<Projection> projections;

  bool operator==(const CodqSpec&) const = default;
};

class CodqSyntaxError : public SyntaxError {
 public:
  CodqSyntaxError(std::size_t offset, std::vector<std::string> expected, std::string found)
      : SyntaxError(make_message(offset, expected, found), offset), expected_(std::move(expected)) {}

  const std::vector<std::string>& expected() const { return expected_; }

 private:
  static std::string make_message(std::size_t offset, const std::vector<std::string>& expected,
                                  const std::string& found) {
    std::string msg = "codq syntax error at offset " + std::to_string(offset) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    return msg + ", found " + found;
  }

  std::vector<std::string> expected_;
};

namespace detail {

class CodqParser {
 public:
  explicit CodqParser(std::string_view text) : text_(text) {}

  CodqSpec parse() {
    CodqSpec spec;
    keyword("SELECT");
    spec.projections.push_back(projection());
    while (peek_char(',')) {
      ++pos_;
      spec.projections.push_back(projection());
    }
    keyword("FROM");
    spec.fact = ident("table name");
    spec.fact_alias = ident("alias");
    while (peek_keyword("JOIN")) {
      keyword("JOIN");
      JoinClause j;
      j.table = ident("table name");
      j.alias = ident("alias");
      keyword("ON");
      j.left = colref();
      punct('=');
      j.right = colref();
      spec.joins.push_back(std::move(j));
    }
    skip_ws();
    if (pos_ != text_.size()) {
      fail({"JOIN", "end of query"});
    }
    return spec;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  std::string_view peek_word() {
    skip_ws();
    std::size_t end = pos_;
    if (end < text_.size() && ident_start(text_[end])) {
      while (end < text_.size() && ident_char(text_[end])) ++end;
    }
    return text_.substr(pos_, end - pos_);
  }

  static bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
             return std::toupper(static_cast<unsigned char>(x)) == std::toupper(static_cast<unsigned char>(y));
           });
  }

  bool peek_keyword(std::string_view kw) { return iequals(peek_word(), kw); }

  bool peek_char(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::string found() {
    skip_ws();
    if (pos_ >= text_.size()) return "end of query";
    auto w = peek_word();
    if (!w.empty()) return "'" + std::string(w) + "'";
    return "'" + std::string(1, text_[pos_]) + "'";
  }

  [[noreturn]] void fail(std::vector<std::string> expected) {
    auto f = found();
    throw CodqSyntaxError(pos_, std::move(expected), f);
  }

  void keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail({std::string(kw)});
    pos_ += kw.size();
  }

  void punct(char c) {
    if (!peek_char(c)) fail({"'" + std::string(1, c) + "'"});
    ++pos_;
  }

  std::string ident(const char* what) {
    auto w = peek_word();
    if (w.empty() || is_reserved(w)) fail({what});
    pos_ += w.size();
    return std::string(w);
  }

  static bool is_reserved(std::string_view w) {
    for (auto kw : {"SELECT", "FROM", "JOIN", "ON", "AS"}) {
      if (iequals(w, kw)) return true;
    }
    return false;
  }

  ColumnRef colref() {
    ColumnRef r;
    r.alias = ident("alias");
    punct('.');
    r.column = ident("column name");
    return r;
  }

  Projection projection() {
    Projection p;
    p.source = colref();
    keyword("AS");
    p.name = ident("attribute name");
    punct(':');
    auto w = peek_word();
    if (iequals(w, "coordinate")) {
      p.role = Role::kCoordinate;
    } else if (iequals(w, "feature")) {
      p.role = Role::kFeature;
    } else if (iequals(w, "target")) {
      p.role = Role::kTarget;
    } else if (iequals(w, "carry")) {
      p.role = Role::kCarry;
    } else {
      fail({"coordinate", "feature", "target", "carry"});
    }
    pos_ += w.size();
    return p;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Alias scoping and output-name uniqueness. Throws ReferenceError.
inline void check_codq_structure(const CodqSpec& spec) {
  std::set<std::string> aliases{spec.fact_alias};
  for (const auto& j : spec.joins) {
    if (!aliases.insert(j.alias).second) throw ReferenceError("alias '" + j.alias + "' declared twice");
    bool left_own = j.left.alias == j.alias, right_own = j.right.alias == j.alias;
    if (left_own == right_own) {
      throw ReferenceError("join on '" + j.alias + "' must relate it to exactly one earlier alias");
    }
    if (!aliases.count(j.bound_side().alias) || j.bound_side().alias == j.alias) {
      throw ReferenceError("join on '" + j.alias + "' references undeclared alias '" + j.bound_side().alias +
                           "'");
    }
  }
  if (spec.projections.empty()) throw ReferenceError("query projects nothing");
  std::set<std::string> names;
  for (const auto& p : spec.projections) {
    if (!aliases.count(p.source.alias)) {
      throw ReferenceError("projection '" + p.name + "' references undeclared alias '" + p.source.alias + "'");
    }
    if (!names.insert(p.name).second) throw ReferenceError("duplicate output attribute '" + p.name + "'");
  }
}

inline CodqSpec parse_codq(std::string_view text) {
  CodqSpec spec = detail::CodqParser(text).parse();
  check_codq_structure(spec);
  return spec;
}

inline std::string print_codq(const CodqSpec& spec) {
  std::string out = "SELECT ";
  for (std::size_t i = 0; i < spec.projections.size(); ++i) {
    const auto& p = spec.projections[i];
    if (i) out += ",\n       ";
    out += p.source.alias + "." + p.source.column + " AS " + p.name + ":" + std::string(to_string(p.role));
  }
  out += "\nFROM " + spec.fact + " " + spec.fact_alias;
  for (const auto& j : spec.joins) {
    out += "\nJOIN " + j.table + " " + j.alias + " ON " + j.left.alias + "." + j.left.column + " = " +
           j.right.alias + "." + j.right.column;
  }
  return out + "\n";
}

/// The composed query. Aliases are global: edges that several parts share are
/// merged onto one alias.
struct GlobalCodq {
  std::string fact;
  std::string fact_alias;
  std::vector<JoinClause> joins;
  std::vector<Projection> projections;
  std::vector<CodqSpec> parts;

  std::string table_of(std::string_view alias) const {
    if (alias == fact_alias) return fact;
    for (const auto& j : joins) {
      if (j.alias == alias) return j.table;
    }
    throw ReferenceError("unknown alias '" + std::string(alias) + "'");
  }

  CodqSpec as_spec() const { return {fact, fact_alias, joins, projections}; }
};

inline GlobalCodq compose_global(const std::vector<CodqSpec>& specs) {
  if (specs.empty()) throw DomainError("compose_global needs at least one query");
  GlobalCodq g;
  g.fact = specs.front().fact;
  g.fact_alias = specs.front().fact_alias;
  g.parts = specs;

  // edge identity: joined table + bound global alias + both columns
  std::map<std::string, std::string> edge_alias;
  std::set<std::string> used{g.fact_alias};
  std::set<std::string> names;

  for (const auto& spec : specs) {
    check_codq_structure(spec);
    if (spec.fact != g.fact) {
      throw DomainError("fact table mismatch: '" + spec.fact + "' vs '" + g.fact + "'");
    }
    std::map<std::string, std::string> rename{{spec.fact_alias, g.fact_alias}};
    for (const auto& j : spec.joins) {
      const ColumnRef& bound = j.bound_side();
      const ColumnRef& own = j.own_side();
      std::string bound_alias = rename.at(bound.alias);
      std::string key = j.table + "|" + bound_alias + "." + bound.column + "|" + own.column;
      auto it = edge_alias.find(key);
      if (it != edge_alias.end()) {
        rename[j.alias] = it->second;
        continue;
      }
      std::string alias = j.alias;
      for (int n = 2; used.count(alias); ++n) alias = j.alias + "_" + std::to_string(n);
      used.insert(alias);
      edge_alias.emplace(key, alias);
      rename[j.alias] = alias;
      g.joins.push_back({j.table, alias, {bound_alias, bound.column}, {alias, own.column}});
    }
    for (const auto& p : spec.projections) {
      if (!names.insert(p.name).second) throw DomainError("duplicate output attribute '" + p.name + "'");
      g.projections.push_back({{rename.at(p.source.alias), p.source.column}, p.name, p.role});
    }
  }
  return g;
}

struct Attribute {
  std::string name;
  ColumnType type = ColumnType::kText;
  Role role = Role::kCarry;
  std::string source_table;
  std::string source_column;

  bool operator==(const Attribute&) const = default;
};

struct ObjectSchema {
  std::vector<Attribute> attributes;

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (attributes[i].name == name) return i;
    }
    return std::nullopt;
  }
  std::vector<std::size_t> with_role(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (attributes[i].role == r) out.push_back(i);
    }
    return out;
  }
  bool operator==(const ObjectSchema&) const = default;
};

struct ObjectSet {
  ObjectSchema schema;
  std::vector<Row> objects;

  std::size_t size() const { return objects.size(); }
};

inline ObjectSchema derive_object_schema(const GlobalCodq& q, const StarSchema& s) {
  auto resolve = [&](const ColumnRef& ref) -> std::pair<std::string, ColumnType> {
    std::string table = q.table_of(ref.alias);
    const TableDef* t = s.find_table(table);
    if (!t) throw ReferenceError("unresolved table '" + table + "'");
    auto idx = t->column_index(ref.column);
    if (!idx) throw ReferenceError("unresolved column '" + table + "." + ref.column + "'");
    return {table, t->columns[*idx].type};
  };
  if (!s.find_table(q.fact)) throw ReferenceError("unresolved table '" + q.fact + "'");
  for (const auto& j : q.joins) {
    resolve(j.left);
    resolve(j.right);
  }
  ObjectSchema out;
  for (const auto& p : q.projections) {
    auto [table, type] = resolve(p.source);
    out.attributes.push_back({p.name, type, p.role, table, p.source.column});
  }
  return out;
}

/// Inner-join evaluation with a hash index on each joined table's key column.
/// Objects come out in fact-row order; several matches for one join expand in
/// ascending row order of the joined table.
inline ObjectSet materialize_objects(const GlobalCodq& q, const Database& db) {
  ObjectSet out;
  out.schema = derive_object_schema(q, db.schema);

  std::map<std::string, std::size_t> slot{{q.fact_alias, 0}};
  std::vector<const TableData*> tables{&db.table(q.fact)};
  for (const auto& j : q.joins) {
    slot[j.alias] = tables.size();
    tables.push_back(&db.table(j.table));
  }

  struct Step {
    std::size_t bound_slot;
    std::size_t bound_col;
    std::size_t own_slot;
    std::unordered_map<std::string, std::vector<std::size_t>> index;
  };
  std::vector<Step> steps;
  for (const auto& j : q.joins) {
    Step st;
    st.bound_slot = slot.at(j.bound_side().alias);
    st.bound_col = *tables[st.bound_slot]->column_index(j.bound_side().column);
    st.own_slot = slot.at(j.alias);
    const TableData& own = *tables[st.own_slot];
    std::size_t own_col = *own.column_index(j.own_side().column);
    for (std::size_t r = 0; r < own.rows.size(); ++r) {
      const Value& v = own.rows[r][own_col];
      if (!is_null(v)) st.index[to_text(v)].push_back(r);
    }
    steps.push_back(std::move(st));
  }

  std::vector<std::pair<std::size_t, std::size_t>> proj;  // (slot, column)
  for (const auto& p : q.projections) {
    std::size_t s = slot.at(p.source.alias);
    proj.emplace_back(s, *tables[s]->column_index(p.source.column));
  }

  std::vector<std::size_t> bound(tables.size(), 0);
  std::function<void(std::size_t)> expand = [&](std::size_t step) {
    if (step == steps.size()) {
      Row obj;
      obj.reserve(proj.size());
      for (auto [s, c] : proj) obj.push_back(tables[s]->rows[bound[s]][c]);
      out.objects.push_back(std::move(obj));
      return;
    }
    const Step& st = steps[step];
    const Value& key = tables[st.bound_slot]->rows[bound[st.bound_slot]][st.bound_col];
    if (is_null(key)) return;
    auto it = st.index.find(to_text(key));
    if (it == st.index.end()) return;
    for (std::size_t r : it->second) {
      bound[st.own_slot] = r;
      expand(step + 1);
    }
  };

  const TableData& fact = *tables[0];
  for (std::size_t r = 0; r < fact.rows.size(); ++r) {
    bound[0] = r;
    expand(0);
  }
  return out;
}

}  // namespace clustcube
