#pragma once

// Snapshot-based engine shared by the CLI and the HTTP service. A snapshot
// bundles the star data, the cuboid definitions with their resolved cube
// spaces, and every built cube. Snapshots are immutable; writers build the
// next one off to the side and swap it in under a short lock.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "clustcube/codq.hpp"
#include "clustcube/cube.hpp"
#include "clustcube/star_store.hpp"
#include "clustcube/tourism_gen.hpp"

namespace clustcube {

inline constexpr std::string_view kEngineVersion = "1.0.0";

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& what) : Error(Kind::kConflict, what) {}
};

/// A named cuboid: its CODQ, the resolved objects, and the cube space.
struct CuboidDef {
  std::string name;
  std::string codq;
  bool preset = false;
  std::shared_ptr<const CubeSpace> space;
};

inline std::shared_ptr<const CuboidDef> define_cuboid(const Database& db, std::string name, std::string codq,
                                                      bool preset) {
  auto def = std::make_shared<CuboidDef>();
  def->name = std::move(name);
  def->codq = std::move(codq);
  def->preset = preset;
  GlobalCodq q = compose_global({parse_codq(def->codq)});
  def->space = make_cube_space(materialize_objects(q, db), db);
  return def;
}

struct Snapshot {
  std::uint64_t id = 0;
  std::shared_ptr<const Database> db;
  std::map<std::string, std::shared_ptr<const CuboidDef>> defs;
  std::map<std::string, std::shared_ptr<const ClustCube>> cubes;

  const CuboidDef& def(const std::string& name) const {
    auto it = defs.find(name);
    if (it == defs.end()) throw ReferenceError("unknown cuboid '" + name + "'");
    return *it->second;
  }
  std::shared_ptr<const ClustCube> cube(const std::string& name) const {
    def(name);
    auto it = cubes.find(name);
    if (it == cubes.end()) throw ReferenceError("cuboid '" + name + "' has not been built");
    return it->second;
  }
};

/// Parses `dim:member` filters into a dice predicate; repeated dims union
/// their members.
inline std::vector<std::pair<std::string, std::set<std::string>>> parse_slices(const std::vector<std::string>& specs) {
  std::map<std::string, std::set<std::string>> grouped;
  std::vector<std::string> order;
  for (const auto& s : specs) {
    auto colon = s.find(':');
    if (colon == std::string::npos || colon == 0) throw SyntaxError("slice '" + s + "' is not dim:member", 0);
    std::string dim = s.substr(0, colon);
    if (!grouped.count(dim)) order.push_back(dim);
    grouped[dim].insert(s.substr(colon + 1));
  }
  std::vector<std::pair<std::string, std::set<std::string>>> out;
  for (const auto& d : order) out.emplace_back(d, grouped[d]);
  return out;
}

class Engine {
 public:
  /// Registers the five tourism presets whose tables and columns all resolve
  /// against `db`.
  explicit Engine(std::shared_ptr<const Database> db) {
    auto snap = std::make_shared<Snapshot>();
    snap->id = 1;
    snap->db = db;
    for (const auto& p : tourism::presets()) {
      try {
        snap->defs[p.name] = define_cuboid(*db, p.name, p.codq, true);
      } catch (const ReferenceError&) {
      }
    }
    snap_ = std::move(snap);
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard lock(snap_mutex_);
    return snap_;
  }

  /// Builds `name` at cuboid `at` and publishes it. `at` is a cuboid name,
  /// "base", or "apex"; absent means base.
  /// A new `codq` defines or replaces a user cuboid first. With wait=false a
  /// concurrent build of the same cuboid fails with ConflictError.
  std::shared_ptr<const ClustCube> build(const std::string& name, const CubeConfig& config,
                                         const std::optional<std::string>& at = std::nullopt,
                                         const std::optional<std::string>& codq = std::nullopt, bool wait = true) {
    auto guard = lock_cuboid(name, wait);
    auto snap = snapshot();
    std::shared_ptr<const CuboidDef> def;
    if (codq) {
      auto existing = snap->defs.find(name);
      if (existing != snap->defs.end() && existing->second->preset) {
        throw DomainError("preset cuboid '" + name + "' cannot be redefined");
      }
      def = define_cuboid(*snap->db, name, *codq, false);
    } else {
      def = snap->defs.count(name) ? snap->defs.at(name) : nullptr;
      if (!def) throw ReferenceError("unknown cuboid '" + name + "'");
    }
    const CuboidLattice& lattice = def->space->cuboid_lattice();
    CuboidId cuboid = !at || *at == "base" ? lattice.base() : *at == "apex" ? lattice.apex() : lattice.parse(*at);
    auto cube = std::make_shared<const ClustCube>(clustcube::build(def->space, cuboid, config));
    publish(name, def, cube);
    return cube;
  }

  std::shared_ptr<const ClustCube> cluster(const std::string& name, std::size_t k, std::uint64_t seed, bool wait = true) {
    auto guard = lock_cuboid(name, wait);
    auto snap = snapshot();
    auto cube = std::make_shared<const ClustCube>(with_clustering(*snap->cube(name), k, seed));
    publish(name, snap->defs.at(name), cube);
    return cube;
  }

  std::shared_ptr<const ClustCube> regress(const std::string& name, const std::string& target, double lambda,
                                           bool wait = true) {
    auto guard = lock_cuboid(name, wait);
    auto snap = snapshot();
    auto cube = std::make_shared<const ClustCube>(with_regression(*snap->cube(name), target, lambda));
    publish(name, snap->defs.at(name), cube);
    return cube;
  }

  /// TourismDB -> Tables, and TourismDC -> Measures, Dimensions, cuboids.
  nlohmann::ordered_json tree() const {
    using nlohmann::ordered_json;
    auto snap = snapshot();
    const StarSchema& s = snap->db->schema;
    auto node = [](std::string label, std::string kind) {
      return ordered_json{{"label", std::move(label)}, {"kind", std::move(kind)}, {"children", ordered_json::array()}};
    };
    ordered_json db = node("TourismDB", "database");
    ordered_json tables = node("Tables", "table");
    for (const auto& t : s.tables) {
      ordered_json leaf = node(t.name, "table");
      leaf["rows"] = snap->db->table(t.name).rows.size();
      tables["children"].push_back(std::move(leaf));
    }
    db["children"].push_back(std::move(tables));

    ordered_json cube = node("TourismDC", "cube");
    ordered_json measures = node("Measures", "measures");
    for (const auto& m : s.measures) measures["children"].push_back(node(m, "measures"));
    ordered_json dims = node("Dimensions", "dimensions");
    for (const auto& d : s.dimensions) {
      ordered_json leaf = node(d.table, "dimensions");
      if (const Hierarchy* h = s.find_hierarchy(d.table)) leaf["levels"] = h->levels;
      dims["children"].push_back(std::move(leaf));
    }
    cube["children"].push_back(std::move(measures));
    cube["children"].push_back(std::move(dims));
    for (const auto& [name, def] : snap->defs) {
      ordered_json leaf = node(name, "cuboid");
      leaf["preset"] = def->preset;
      leaf["built"] = snap->cubes.count(name) > 0;
      cube["children"].push_back(std::move(leaf));
    }
    return ordered_json::array({std::move(db), std::move(cube)});
  }

  nlohmann::ordered_json cuboids() const {
    using nlohmann::ordered_json;
    auto snap = snapshot();
    ordered_json out = ordered_json::array();
    for (const auto& [name, def] : snap->defs) {
      ordered_json dims = ordered_json::array();
      for (const auto& d : def->space->dims) dims.push_back({{"dimension", d.name}, {"levels", d.levels}});
      ordered_json e{{"name", name}, {"preset", def->preset}, {"objects", def->space->objects.size()},
                     {"dimensions", std::move(dims)}, {"built", snap->cubes.count(name) > 0}};
      if (auto it = snap->cubes.find(name); it != snap->cubes.end()) e["cuboid"] = it->second->cuboid_name();
      out.push_back(std::move(e));
    }
    return out;
  }

 private:
  std::unique_lock<std::mutex> lock_cuboid(const std::string& name, bool wait) {
    std::mutex* m = nullptr;
    {
      std::lock_guard lock(locks_mutex_);
      auto& slot = build_locks_[name];
      if (!slot) slot = std::make_unique<std::mutex>();
      m = slot.get();
    }
    if (wait) return std::unique_lock(*m);
    std::unique_lock lock(*m, std::try_to_lock);
    if (!lock.owns_lock()) throw ConflictError("a build for cuboid '" + name + "' is in progress");
    return lock;
  }

  void publish(const std::string& name, std::shared_ptr<const CuboidDef> def, std::shared_ptr<const ClustCube> cube) {
    std::lock_guard lock(snap_mutex_);
    auto next = std::make_shared<Snapshot>(*snap_);
    next->id = snap_->id + 1;
    next->defs[name] = std::move(def);
    next->cubes[name] = std::move(cube);
    snap_ = std::move(next);
  }

  mutable std::mutex snap_mutex_;
  std::shared_ptr<const Snapshot> snap_;
  std::mutex locks_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> build_locks_;
};

}  // namespace clustcube
