#pragma once

// Random star instances with a CODQ over them, and a nested-loop join
// evaluator to check materialize_objects against.

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "clustcube/codq.hpp"
#include "clustcube/star_store.hpp"

namespace testing_support {

struct JoinInstance {
  clustcube::Database db;
  clustcube::CodqSpec spec;
};

/// Fact table F with up to `max_joins` joined tables T0..; each join binds to
/// the fact or an earlier joined table. Joined tables are not dimension tables
/// of the schema, so their join columns may repeat values or hold nulls.
inline JoinInstance random_join_instance(std::mt19937_64& rng, std::size_t max_fact_rows, std::size_t max_joins) {
  using namespace clustcube;
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  JoinInstance inst;
  StarSchema& s = inst.db.schema;
  s.fact = "F";
  const std::size_t joins = pick(max_joins + 1);
  const std::size_t key_space = 1 + pick(6);

  auto key_value = [&](ColumnType t) -> Value {
    if (pick(12) == 0) return Value{};
    auto k = static_cast<std::int64_t>(pick(key_space));
    if (t == ColumnType::kInteger) return k;
    return std::to_string(k);
  };
  auto key_type = [&] { return pick(3) == 0 ? ColumnType::kText : ColumnType::kInteger; };

  // every table: k0..k{joins} key-ish columns plus a payload
  std::vector<std::string> names{"F"};
  for (std::size_t j = 0; j < joins; ++j) names.push_back("T" + std::to_string(j));
  for (std::size_t t = 0; t < names.size(); ++t) {
    TableDef def{names[t], {}};
    for (std::size_t c = 0; c <= joins; ++c) def.columns.push_back({"k" + std::to_string(c), key_type()});
    def.columns.push_back({"v", ColumnType::kReal});
    s.tables.push_back(def);
    std::size_t rows = t == 0 ? pick(max_fact_rows + 1) : pick(7);
    TableData data{def.name, def.columns, {}};
    for (std::size_t r = 0; r < rows; ++r) {
      Row row;
      for (std::size_t c = 0; c <= joins; ++c) row.push_back(key_value(def.columns[c].type));
      row.push_back(pick(10) == 0 ? Value{} : Value{static_cast<double>(pick(1000)) / 8.0});
      data.rows.push_back(std::move(row));
    }
    inst.db.tables.emplace(def.name, std::move(data));
  }

  CodqSpec& q = inst.spec;
  q.fact = "F";
  q.fact_alias = "f";
  std::vector<std::string> aliases{"f"};
  for (std::size_t j = 0; j < joins; ++j) {
    std::string alias = "t" + std::to_string(j);
    ColumnRef bound{aliases[pick(aliases.size())], "k" + std::to_string(pick(joins + 1))};
    ColumnRef own{alias, "k" + std::to_string(pick(joins + 1))};
    JoinClause jc{names[j + 1], alias, bound, own};
    if (pick(2)) std::swap(jc.left, jc.right);
    q.joins.push_back(jc);
    aliases.push_back(alias);
  }
  std::size_t n_proj = 1 + pick(4);
  for (std::size_t p = 0; p < n_proj; ++p) {
    const std::string& alias = aliases[pick(aliases.size())];
    std::string col = pick(2) ? "v" : "k" + std::to_string(pick(joins + 1));
    q.projections.push_back({{alias, col}, "a" + std::to_string(p), static_cast<Role>(pick(4))});
  }
  return inst;
}

/// Nested-loop evaluation: for each fact row, scan every row of each joined
/// table in turn and keep the combinations whose ON conditions hold.
inline std::vector<clustcube::Row> nested_loop_join(const clustcube::CodqSpec& q, const clustcube::Database& db) {
  using namespace clustcube;
  std::vector<std::string> alias{q.fact_alias};
  std::vector<const TableData*> table{&db.table(q.fact)};
  for (const auto& j : q.joins) {
    alias.push_back(j.alias);
    table.push_back(&db.table(j.table));
  }
  auto slot = [&](const std::string& a) {
    return static_cast<std::size_t>(std::find(alias.begin(), alias.end(), a) - alias.begin());
  };
  std::vector<std::size_t> row(alias.size());
  auto value = [&](const ColumnRef& ref) -> const Value& {
    std::size_t s = slot(ref.alias);
    return table[s]->rows[row[s]][*table[s]->column_index(ref.column)];
  };
  std::vector<Row> out;
  std::function<void(std::size_t)> loop = [&](std::size_t level) {
    if (level == alias.size()) {
      Row obj;
      for (const auto& p : q.projections) obj.push_back(value(p.source));
      out.push_back(std::move(obj));
      return;
    }
    for (std::size_t r = 0; r < table[level]->rows.size(); ++r) {
      row[level] = r;
      if (level > 0) {
        const auto& j = q.joins[level - 1];
        const Value& a = value(j.left);
        const Value& b = value(j.right);
        if (is_null(a) || is_null(b) || to_text(a) != to_text(b)) continue;
      }
      loop(level + 1);
    }
  };
  loop(0);
  return out;
}

inline std::vector<std::string> render_multiset(const std::vector<clustcube::Row>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    std::string s;
    for (const auto& v : r) s += (clustcube::is_null(v) ? std::string("\x01") : clustcube::to_text(v)) + '\x02';
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace testing_support
