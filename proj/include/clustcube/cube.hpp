#pragma once

// ClustCube cubes: cells keyed by coordinate members, each holding the
// indices of its complex objects, a k-means clustering of them, and a
// regression fit over mergeable statistics. Cells are formed by grouping on
// coordinates first and clustering within each cell second.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clustcube/codq.hpp"
#include "clustcube/csv.hpp"
#include "clustcube/lattice.hpp"
#include "clustcube/mdclust.hpp"
#include "clustcube/mdregress.hpp"
#include "clustcube/planner.hpp"
#include "clustcube/star_store.hpp"

namespace clustcube {

/// One cube dimension: the coordinate attribute that feeds it and the
/// hierarchy levels reachable upward from that attribute's column.
struct CubeDimension {
  std::string name;
  std::size_t attribute = 0;
  std::vector<std::string> levels;
  /// members[l][i]: interned member of object i at level l, -1 for null.
  std::vector<std::vector<int>> members;
  /// dictionary[l][id]: text of member id at level l.
  std::vector<std::vector<std::string>> dictionary;
  /// up[l][id]: member id at level l+1 of member id at level l.
  std::vector<std::vector<int>> up;
};

/// Design matrix for per-cell regressions: a leading 1, numeric features as
/// they are, categorical features one-hot with the last category dropped.
struct RegressionDesign {
  std::string target;
  std::vector<std::string> predictor_names;
  std::vector<double> x;   // n * d row-major
  std::vector<double> y;
  std::vector<bool> usable;  // false when the target or a predictor is null

  std::size_t d() const { return predictor_names.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * d(), d()}; }
};

/// Everything a cube needs that does not depend on the cuboid: objects, the
/// dimension/level structure with members resolved through hierarchies, and
/// the global feature encoding. Shared by every cube derived from it.
struct CubeSpace {
  ObjectSet objects;
  std::vector<CubeDimension> dims;
  std::optional<CuboidLattice> lattice;
  std::optional<FeatureMatrix> features;
  std::vector<bool> placeable;

  const CuboidLattice& cuboid_lattice() const { return *lattice; }
  std::size_t placeable_count() const { return static_cast<std::size_t>(std::count(placeable.begin(), placeable.end(), true)); }
};

namespace detail {

inline int intern(std::unordered_map<std::string, int>& ids, std::vector<std::string>& dict, const std::string& s) {
  auto [it, inserted] = ids.emplace(s, static_cast<int>(dict.size()));
  if (inserted) dict.push_back(s);
  return it->second;
}

}  // namespace detail

/// Resolves each coordinate attribute to a dimension and walks the dimension
/// table's hierarchy (if the attribute's column is one of its levels) to map
/// members to every coarser level. An object is placeable when it has a
/// member at every level of every dimension.
inline std::shared_ptr<const CubeSpace> make_cube_space(ObjectSet objects, const Database& db, bool impute = true) {
  auto space = std::make_shared<CubeSpace>();
  space->objects = std::move(objects);
  const ObjectSet& os = space->objects;
  const std::size_t n = os.size();

  std::set<std::string> dim_names;
  for (std::size_t a : os.schema.with_role(Role::kCoordinate)) {
    const Attribute& attr = os.schema.attributes[a];
    CubeDimension dim;
    dim.name = attr.source_table == db.schema.fact ? attr.name : attr.source_table;
    dim.attribute = a;
    if (!dim_names.insert(dim.name).second) {
      throw ReferenceError("dimension '" + dim.name + "' has more than one coordinate attribute");
    }
    dim.levels = {attr.source_column};
    if (const Hierarchy* h = db.schema.find_hierarchy(attr.source_table)) {
      auto it = std::find(h->levels.begin(), h->levels.end(), attr.source_column);
      if (it != h->levels.end()) dim.levels.assign(it, h->levels.end());
    }

    const std::size_t L = dim.levels.size();
    dim.members.assign(L, std::vector<int>(n, -1));
    dim.dictionary.assign(L, {});
    dim.up.assign(L > 0 ? L - 1 : 0, {});
    std::vector<std::unordered_map<std::string, int>> ids(L);
    for (std::size_t i = 0; i < n; ++i) {
      const Value& v = os.objects[i][a];
      if (!is_null(v)) dim.members[0][i] = detail::intern(ids[0], dim.dictionary[0], to_text(v));
    }
    if (L > 1) {
      const TableData& table = db.table(attr.source_table);
      std::vector<std::size_t> cols;
      for (const auto& l : dim.levels) {
        auto c = table.column_index(l);
        if (!c) throw ReferenceError("hierarchy level '" + attr.source_table + "." + l + "' missing");
        cols.push_back(*c);
      }
      // level l -> l+1 from the dimension table; a fine member must map to one coarse member
      std::vector<std::unordered_map<std::string, std::string>> step(L - 1);
      for (const auto& row : table.rows) {
        for (std::size_t l = 0; l + 1 < L; ++l) {
          if (is_null(row[cols[l]])) continue;
          std::string fine = to_text(row[cols[l]]);
          std::string coarse = is_null(row[cols[l + 1]]) ? std::string() : to_text(row[cols[l + 1]]);
          auto [it, inserted] = step[l].emplace(fine, coarse);
          if (!inserted && it->second != coarse) {
            throw DataError("hierarchy " + attr.source_table + ": '" + fine + "' maps to both '" + it->second +
                            "' and '" + coarse + "' at level " + dim.levels[l + 1]);
          }
        }
      }
      for (std::size_t l = 0; l + 1 < L; ++l) {
        dim.up[l].assign(dim.dictionary[l].size(), -1);
        for (std::size_t id = 0; id < dim.dictionary[l].size(); ++id) {
          auto it = step[l].find(dim.dictionary[l][id]);
          if (it == step[l].end()) {
            throw DataError("hierarchy level missing: " + attr.source_table + "." + dim.levels[l] + " '" +
                            dim.dictionary[l][id] + "' has no " + dim.levels[l + 1]);
          }
          if (!it->second.empty()) {
            dim.up[l][id] = detail::intern(ids[l + 1], dim.dictionary[l + 1], it->second);
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          int m = dim.members[l][i];
          dim.members[l + 1][i] = m < 0 ? -1 : dim.up[l][static_cast<std::size_t>(m)];
        }
      }
    }
    space->dims.push_back(std::move(dim));
  }

  std::vector<DimensionSpec> specs;
  for (const auto& d : space->dims) specs.push_back({d.name, d.levels});
  space->lattice.emplace(std::move(specs), false);

  space->placeable.assign(n, true);
  for (const auto& d : space->dims) {
    for (const auto& lvl : d.members) {
      for (std::size_t i = 0; i < n; ++i) {
        if (lvl[i] < 0) space->placeable[i] = false;
      }
    }
  }
  if (!os.schema.with_role(Role::kFeature).empty()) space->features = featurize(os, {impute});
  return space;
}

inline RegressionDesign make_regression_design(const ObjectSet& os, const std::string& target) {
  auto t = os.schema.index_of(target);
  if (!t) throw ReferenceError("unknown regression target '" + target + "'");
  if (!is_numeric(os.schema.attributes[*t].type)) throw DomainError("regression target '" + target + "' is not numeric");

  RegressionDesign design;
  design.target = target;
  design.predictor_names.push_back("intercept");
  const std::size_t n = os.size();

  struct Column {
    std::size_t attribute;
    std::optional<std::string> category;  // nullopt: numeric
  };
  std::vector<Column> columns;
  for (std::size_t a : os.schema.with_role(Role::kFeature)) {
    if (a == *t) continue;
    const Attribute& attr = os.schema.attributes[a];
    if (is_numeric(attr.type)) {
      columns.push_back({a, std::nullopt});
      design.predictor_names.push_back(attr.name);
      continue;
    }
    std::vector<std::string> cats;
    std::set<std::string> seen;
    for (const auto& obj : os.objects) {
      if (!is_null(obj[a]) && seen.insert(to_text(obj[a])).second) cats.push_back(to_text(obj[a]));
    }
    if (!cats.empty()) cats.pop_back();  // reference category
    for (const auto& c : cats) {
      columns.push_back({a, c});
      design.predictor_names.push_back(attr.name + "=" + c);
    }
  }

  const std::size_t d = design.d();
  design.x.assign(n * d, 0.0);
  design.y.assign(n, 0.0);
  design.usable.assign(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    const Row& obj = os.objects[i];
    auto y = as_double(obj[*t]);
    if (!y) {
      design.usable[i] = false;
      continue;
    }
    design.y[i] = *y;
    design.x[i * d] = 1.0;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const Value& v = obj[columns[c].attribute];
      if (is_null(v)) {
        design.usable[i] = false;
        break;
      }
      design.x[i * d + c + 1] = columns[c].category ? (to_text(v) == *columns[c].category ? 1.0 : 0.0) : *as_double(v);
    }
  }
  return design;
}

using CellKey = std::vector<std::string>;

/// Roll-up summary of one child cell's clustering, without reclustering.
struct MergedClusterSummary {
  CellKey child;
  std::size_t count = 0;
  std::optional<std::vector<double>> centroid;  // size-weighted mean of child centroids
};

struct Cell {
  CellKey key;
  std::vector<std::size_t> object_indices;  // ascending
  std::optional<Clustering> clustering;
  std::optional<double> silhouette;
  std::optional<RegressionStats> reg_stats;
  std::optional<RegressionFit> regression;
  bool insufficient_rows = false;
  std::vector<MergedClusterSummary> merged_clusters;

  std::size_t count() const { return object_indices.size(); }
};

enum class RecomputeMode { kRecluster, kMergeStats };

inline RecomputeMode parse_recompute_mode(std::string_view s) {
  if (s == "recluster") return RecomputeMode::kRecluster;
  if (s == "merge_stats") return RecomputeMode::kMergeStats;
  throw DomainError("unknown mode '" + std::string(s) + "' (expected recluster or merge_stats)");
}

struct CubeConfig {
  std::size_t k = 3;
  std::uint64_t seed = 0;
  std::size_t max_iter = kDefaultMaxIter;
  double tol = kDefaultTol;
  std::size_t min_cell_size = 3;
  std::optional<std::string> target;  // defaults to the first target-role attribute
  double lambda = 0.0;
  bool cluster = true;
  bool regress = true;
  /// Silhouette costs O(n²) per cell; larger cells skip it.
  std::size_t silhouette_limit = 5000;
  ProcessingMode mode = ProcessingMode::concurrent_auto();
};

struct ClustCube {
  std::shared_ptr<const CubeSpace> space;
  std::shared_ptr<const RegressionDesign> design;  // null when no target
  CuboidId cuboid;
  std::map<CellKey, Cell> cells;
  std::vector<std::size_t> unplaced;
  CubeConfig config;

  const CuboidLattice& lattice() const { return space->cuboid_lattice(); }
  std::string cuboid_name() const { return lattice().format(cuboid); }

  /// Dimension indices that appear in cell keys, in dimension order.
  std::vector<std::size_t> key_dims() const {
    std::vector<std::size_t> out;
    for (std::size_t d = 0; d < cuboid.choices.size(); ++d) {
      if (!cuboid.is_all(d)) out.push_back(d);
    }
    return out;
  }
  std::size_t object_count() const {
    std::size_t s = 0;
    for (const auto& [k, c] : cells) s += c.count();
    return s;
  }
};

namespace detail {

inline std::shared_ptr<const RegressionDesign> design_for(const CubeSpace& space, const CubeConfig& config) {
  if (!config.regress) return nullptr;
  std::optional<std::string> target = config.target;
  if (!target) {
    auto targets = space.objects.schema.with_role(Role::kTarget);
    if (targets.empty()) return nullptr;
    target = space.objects.schema.attributes[targets.front()].name;
  }
  return std::make_shared<RegressionDesign>(make_regression_design(space.objects, *target));
}

inline RegressionStats cell_stats(const RegressionDesign& design, const std::vector<std::size_t>& objects) {
  RegressionStats s(design.d());
  for (std::size_t i : objects) {
    if (design.usable[i]) accumulate_into(s, design.row(i), design.y[i]);
  }
  return s;
}

inline void fit_cell(Cell& cell, const RegressionStats& stats, double lambda) {
  cell.reg_stats = stats;
  cell.regression.reset();
  cell.insufficient_rows = stats.n == 0 || stats.n < stats.d;
  if (!cell.insufficient_rows) cell.regression = fit(stats, lambda);
}

inline void cluster_cell(const CubeSpace& space, const CubeConfig& config, Cell& cell) {
  cell.clustering.reset();
  cell.silhouette.reset();
  if (!config.cluster || !space.features || cell.count() < config.min_cell_size || cell.count() == 0) return;
  FeatureMatrix m = space.features->select(cell.object_indices);
  std::size_t k = std::min(config.k, cell.count());
  cell.clustering = kmeans(m, k, config.seed, config.max_iter, config.tol);
  if (k >= 2 && cell.count() <= config.silhouette_limit) {
    auto sizes = cell.clustering->sizes();
    if (std::find(sizes.begin(), sizes.end(), 0) == sizes.end()) cell.silhouette = silhouette(m, *cell.clustering);
  }
}

/// Full per-cell analysis from raw objects.
inline void analyze_cells(ClustCube& cube) {
  std::vector<Cell*> cells;
  for (auto& [k, c] : cube.cells) cells.push_back(&c);
  parallel_for(cells.size(), cube.config.mode.resolved_limit(), [&](std::size_t i) {
    Cell& cell = *cells[i];
    cluster_cell(*cube.space, cube.config, cell);
    if (cube.design) {
      fit_cell(cell, cell_stats(*cube.design, cell.object_indices), cube.config.lambda);
    }
  });
}

inline CellKey key_for(const CubeSpace& space, const CuboidId& cuboid, std::size_t object) {
  CellKey key;
  for (std::size_t d = 0; d < cuboid.choices.size(); ++d) {
    if (cuboid.is_all(d)) continue;
    auto level = static_cast<std::size_t>(cuboid.choices[d]);
    int m = space.dims[d].members[level][object];
    key.push_back(space.dims[d].dictionary[level][static_cast<std::size_t>(m)]);
  }
  return key;
}

/// Groups objects into cells at `cuboid` without running analyses.
inline void group(ClustCube& cube, const std::vector<std::size_t>& objects) {
  for (std::size_t i : objects) {
    CellKey key = key_for(*cube.space, cube.cuboid, i);
    auto [it, inserted] = cube.cells.try_emplace(key);
    if (inserted) it->second.key = key;
    it->second.object_indices.push_back(i);
  }
}

inline std::size_t dimension_or_throw(const ClustCube& cube, std::string_view dim) {
  auto d = cube.lattice().dimension_index(dim);
  if (!d) throw ReferenceError("unknown dimension '" + std::string(dim) + "'");
  return *d;
}

}  // namespace detail

/// Groups placeable objects by their members at `cuboid`, then clusters and
/// fits every cell. Cells below config.min_cell_size keep their objects but
/// get no clustering; k is clamped to the cell size.
inline ClustCube build(std::shared_ptr<const CubeSpace> space, const CuboidId& cuboid, const CubeConfig& config) {
  if (!space->cuboid_lattice().contains(cuboid)) throw ReferenceError("cuboid is not in this cube's lattice");
  if (config.k < 1) throw DomainError("k must be at least 1");
  ClustCube cube;
  cube.space = std::move(space);
  cube.cuboid = cuboid;
  cube.config = config;
  cube.design = detail::design_for(*cube.space, config);

  std::vector<std::size_t> placed;
  for (std::size_t i = 0; i < cube.space->objects.size(); ++i) {
    if (cube.space->placeable[i]) {
      placed.push_back(i);
    } else {
      cube.unplaced.push_back(i);
    }
  }
  detail::group(cube, placed);
  detail::analyze_cells(cube);
  return cube;
}

/// Cell sizes at `cuboid` without analyses; input to cuboid selection.
inline std::vector<std::size_t> occupancy(const CubeSpace& space, const CuboidId& cuboid) {
  std::map<CellKey, std::size_t> counts;
  for (std::size_t i = 0; i < space.objects.size(); ++i) {
    if (space.placeable[i]) ++counts[detail::key_for(space, cuboid, i)];
  }
  std::vector<std::size_t> out;
  for (const auto& [k, c] : counts) out.push_back(c);
  return out;
}

namespace detail {

/// Moves cells to `target` (one step away along `dim`) and recomputes per
/// `mode`. Object membership is carried over exactly.
inline ClustCube regroup(const ClustCube& cube, const CuboidId& target, RecomputeMode mode, bool coarser) {
  ClustCube out;
  out.space = cube.space;
  out.design = cube.design;
  out.cuboid = target;
  out.config = cube.config;
  out.unplaced = cube.unplaced;

  std::vector<std::size_t> objects;
  std::map<CellKey, std::vector<const Cell*>> children_of;
  for (const auto& [key, cell] : cube.cells) {
    objects.insert(objects.end(), cell.object_indices.begin(), cell.object_indices.end());
    if (coarser && !cell.object_indices.empty()) {
      children_of[key_for(*cube.space, target, cell.object_indices.front())].push_back(&cell);
    }
  }
  std::sort(objects.begin(), objects.end());
  group(out, objects);

  if (mode == RecomputeMode::kRecluster) {
    analyze_cells(out);
    return out;
  }

  for (auto& [key, cell] : out.cells) {
    if (coarser) {
      std::vector<RegressionStats> parts;
      for (const Cell* child : children_of[key]) {
        MergedClusterSummary summary{child->key, child->count(), std::nullopt};
        if (child->clustering) {
          const Clustering& c = *child->clustering;
          auto sizes = c.sizes();
          std::vector<double> centroid(c.centroids.empty() ? 0 : c.centroids.front().size(), 0.0);
          for (std::size_t j = 0; j < c.k; ++j) {
            for (std::size_t f = 0; f < centroid.size(); ++f) centroid[f] += static_cast<double>(sizes[j]) * c.centroids[j][f];
          }
          for (double& v : centroid) v /= static_cast<double>(child->count());
          summary.centroid = std::move(centroid);
        }
        cell.merged_clusters.push_back(std::move(summary));
        if (child->reg_stats) parts.push_back(*child->reg_stats);
      }
      if (out.design) fit_cell(cell, merge_all(parts, out.design->d()), out.config.lambda);
    } else if (out.design) {
      // nothing finer to merge from: the finer cells' statistics come from their rows
      fit_cell(cell, cell_stats(*out.design, cell.object_indices), out.config.lambda);
    }
  }
  return out;
}

}  // namespace detail

inline ClustCube roll_up(const ClustCube& cube, std::string_view dim, RecomputeMode mode) {
  std::size_t d = detail::dimension_or_throw(cube, dim);
  auto parent = cube.lattice().coarsen(cube.cuboid, d);
  if (!parent) throw DomainError("dimension '" + std::string(dim) + "' is already rolled up to ALL");
  return detail::regroup(cube, *parent, mode, true);
}

inline ClustCube drill_down(const ClustCube& cube, std::string_view dim, RecomputeMode mode) {
  std::size_t d = detail::dimension_or_throw(cube, dim);
  auto child = cube.lattice().refine(cube.cuboid, d);
  if (!child) throw DomainError("dimension '" + std::string(dim) + "' is already at its finest level");
  return detail::regroup(cube, *child, mode, false);
}

/// Conjunctive restriction: a cell survives when, for every (dim, members)
/// pair, its member on dim is in members. Analyses are carried over as-is.
inline ClustCube dice(const ClustCube& cube, const std::vector<std::pair<std::string, std::set<std::string>>>& predicate) {
  std::vector<std::pair<std::size_t, const std::set<std::string>*>> tests;
  auto keys = cube.key_dims();
  for (const auto& [dim, members] : predicate) {
    std::size_t d = detail::dimension_or_throw(cube, dim);
    auto pos = std::find(keys.begin(), keys.end(), d);
    if (pos == keys.end()) throw DomainError("dimension '" + dim + "' is rolled up to ALL in this cuboid");
    tests.emplace_back(static_cast<std::size_t>(pos - keys.begin()), &members);
  }
  ClustCube out;
  out.space = cube.space;
  out.design = cube.design;
  out.cuboid = cube.cuboid;
  out.config = cube.config;
  out.unplaced = cube.unplaced;
  for (const auto& [key, cell] : cube.cells) {
    bool keep = std::all_of(tests.begin(), tests.end(), [&](const auto& t) { return t.second->count(key[t.first]) > 0; });
    if (keep) out.cells.emplace(key, cell);
  }
  return out;
}

inline ClustCube slice(const ClustCube& cube, const std::string& dim, const std::string& member) {
  return dice(cube, {{dim, {member}}});
}

/// Same cells, clustering rerun with a new k and seed. Regressions are kept.
inline ClustCube with_clustering(const ClustCube& cube, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw DomainError("k must be at least 1");
  ClustCube out = cube;
  out.config.k = k;
  out.config.seed = seed;
  std::vector<Cell*> cells;
  for (auto& [key, c] : out.cells) {
    c.merged_clusters.clear();
    cells.push_back(&c);
  }
  parallel_for(cells.size(), out.config.mode.resolved_limit(),
               [&](std::size_t i) { detail::cluster_cell(*out.space, out.config, *cells[i]); });
  return out;
}

/// Same cells, regressions refitted against `target` with ridge `lambda`.
/// Clusterings are kept.
inline ClustCube with_regression(const ClustCube& cube, const std::string& target, double lambda) {
  ClustCube out = cube;
  out.config.target = target;
  out.config.lambda = lambda;
  out.config.regress = true;
  out.design = std::make_shared<RegressionDesign>(make_regression_design(out.space->objects, target));
  for (auto& [key, c] : out.cells) detail::fit_cell(c, detail::cell_stats(*out.design, c.object_indices), lambda);
  return out;
}

// ---------------------------------------------------------------------------
// Export

inline nlohmann::ordered_json cell_to_json(const ClustCube& cube, const Cell& cell) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["key"] = cell.key;
  j["count"] = cell.count();
  j["objects"] = cell.object_indices;
  if (cell.clustering) {
    ordered_json c = to_json(*cell.clustering);
    c.erase("encoding_report");
    c["silhouette"] = cell.silhouette ? ordered_json(*cell.silhouette) : ordered_json(nullptr);
    j["clustering"] = std::move(c);
  }
  if (cell.regression) j["regression"] = to_json(*cell.regression, cube.design->predictor_names);
  if (cube.design && cell.reg_stats) {
    j["regression_rows"] = cell.reg_stats->n;
    if (cell.insufficient_rows) j["insufficient_rows"] = true;
  }
  if (!cell.merged_clusters.empty()) {
    ordered_json merged = ordered_json::array();
    for (const auto& m : cell.merged_clusters) {
      ordered_json e{{"child", m.child}, {"count", m.count}};
      e["centroid"] = m.centroid ? ordered_json(*m.centroid) : ordered_json(nullptr);
      merged.push_back(std::move(e));
    }
    j["merged_clusters"] = std::move(merged);
  }
  return j;
}

inline nlohmann::ordered_json config_to_json(const CubeConfig& c, const ClustCube* cube = nullptr) {
  nlohmann::ordered_json j;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["max_iter"] = c.max_iter;
  j["tol"] = c.tol;
  j["min_cell_size"] = c.min_cell_size;
  j["lambda"] = c.lambda;
  if (cube && cube->design) {
    j["target"] = cube->design->target;
  } else if (c.target) {
    j["target"] = *c.target;
  } else {
    j["target"] = nullptr;
  }
  return j;
}

/// Cube export: cuboid name, key dimensions and levels, every cell with its
/// object indices, the placed/unplaced counts, the configuration, and the feature encoding report.
inline nlohmann::ordered_json to_json(const ClustCube& cube) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["cuboid"] = cube.cuboid_name();
  ordered_json dims = ordered_json::array();
  for (std::size_t d : cube.key_dims()) {
    const auto& dim = cube.space->dims[d];
    dims.push_back({{"dimension", dim.name}, {"level", dim.levels[static_cast<std::size_t>(cube.cuboid.choices[d])]}});
  }
  j["dims"] = std::move(dims);
  j["cells"] = ordered_json::array();
  for (const auto& [key, cell] : cube.cells) j["cells"].push_back(cell_to_json(cube, cell));
  j["object_count"] = cube.space->objects.size();
  j["placeable_count"] = cube.space->placeable_count();
  j["unplaced_count"] = cube.unplaced.size();
  j["config"] = config_to_json(cube.config, &cube);
  j["encoding_report"] = ordered_json::array();
  if (cube.space->features) {
    for (const auto& e : cube.space->features->encoding) j["encoding_report"].push_back(to_json(e));
  }
  return j;
}

/// One row per cell: key members, count, clustering k/SSE/silhouette, and
/// regression R²/RMSE/rows. Missing analyses are empty fields.
inline std::string to_csv(const ClustCube& cube) {
  std::string out;
  std::vector<std::optional<std::string>> header;
  for (std::size_t d : cube.key_dims()) header.emplace_back(cube.space->dims[d].name);
  for (const char* h : {"count", "k", "sse", "silhouette", "r2", "rmse", "regression_rows"}) header.emplace_back(h);
  csv::write_record(out, header);
  auto num = [](std::optional<double> v) -> std::optional<std::string> {
    if (!v) return std::nullopt;
    return format_real(*v);
  };
  for (const auto& [key, cell] : cube.cells) {
    std::vector<std::optional<std::string>> row(key.begin(), key.end());
    row.emplace_back(std::to_string(cell.count()));
    row.push_back(cell.clustering ? std::optional<std::string>(std::to_string(cell.clustering->k)) : std::nullopt);
    row.push_back(num(cell.clustering ? std::optional<double>(cell.clustering->sse) : std::nullopt));
    row.push_back(num(cell.silhouette));
    row.push_back(num(cell.regression ? std::optional<double>(cell.regression->r2) : std::nullopt));
    row.push_back(num(cell.regression ? std::optional<double>(cell.regression->rmse) : std::nullopt));
    row.push_back(cell.reg_stats ? std::optional<std::string>(std::to_string(cell.reg_stats->n)) : std::nullopt);
    csv::write_record(out, row);
  }
  return out;
}

}  // namespace clustcube
