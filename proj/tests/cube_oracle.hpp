#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "clustcube/cube.hpp"
#include "clustcube/engine.hpp"
#include "clustcube/tourism_gen.hpp"

namespace testing_support {

using Partition = std::map<clustcube::CellKey, std::vector<std::size_t>>;

/// Coordinate tuples looked up straight from the dimension tables: the
/// object's coordinate value is found in its level column, then the same
/// row's coarser column is read. Objects with any null along the way are
/// left out, matching the unplaced rule.
inline Partition group_by(const clustcube::CubeSpace& space, const clustcube::Database& db,
                          const clustcube::CuboidId& cuboid) {
  using namespace clustcube;
  const ObjectSet& os = space.objects;
  Partition out;
  for (std::size_t i = 0; i < os.size(); ++i) {
    CellKey key;
    bool placed = true;
    for (std::size_t d = 0; d < space.dims.size() && placed; ++d) {
      const auto& dim = space.dims[d];
      const Value& v = os.objects[i][dim.attribute];
      if (is_null(v)) {
        placed = false;
        break;
      }
      std::string fine = to_text(v);
      std::vector<std::string> path{fine};
      if (dim.levels.size() > 1) {
        const auto& attr = os.schema.attributes[dim.attribute];
        const TableData& t = db.table(attr.source_table);
        std::size_t col0 = *t.column_index(dim.levels[0]);
        const Row* hit = nullptr;
        for (const auto& row : t.rows) {
          if (!is_null(row[col0]) && to_text(row[col0]) == fine) {
            hit = &row;
            break;
          }
        }
        for (std::size_t l = 1; l < dim.levels.size(); ++l) {
          const Value& c = (*hit)[*t.column_index(dim.levels[l])];
          if (is_null(c)) {
            placed = false;
            break;
          }
          path.push_back(to_text(c));
        }
      }
      if (placed && !cuboid.is_all(d)) key.push_back(path[static_cast<std::size_t>(cuboid.choices[d])]);
    }
    if (placed) out[key].push_back(i);
  }
  return out;
}

inline Partition partition_of(const clustcube::ClustCube& cube) {
  Partition p;
  for (const auto& [key, cell] : cube.cells) p[key] = cell.object_indices;
  return p;
}

inline clustcube::CuboidId random_cuboid(std::mt19937_64& rng, const clustcube::CuboidLattice& lattice) {
  clustcube::CuboidId c = lattice.apex();
  for (std::size_t d = 0; d < c.choices.size(); ++d) {
    std::size_t levels = lattice.dimensions()[d].levels.size();
    std::size_t pick = rng() % (levels + 1);
    c.choices[d] = pick == levels ? clustcube::kAll : static_cast<int>(pick);
  }
  return c;
}

inline std::shared_ptr<const clustcube::CuboidDef> preset_def(const clustcube::Database& db, const std::string& name) {
  return clustcube::define_cuboid(db, name, clustcube::tourism::find_preset(name)->codq, true);
}

}  // namespace testing_support
