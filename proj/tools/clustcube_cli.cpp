// clustcube: command-line front end for the engine.
//
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "clustcube/codq.hpp"
#include "clustcube/cube.hpp"
#include "clustcube/engine.hpp"
#include "clustcube/lattice.hpp"
#include "clustcube/service.hpp"
#include "clustcube/star_store.hpp"
#include "clustcube/tourism_gen.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace clustcube;

namespace {

struct Globals {
  std::string data_dir = "data";
  std::optional<std::uint64_t> seed;
  std::string scale = "tiny";
  bool json = false;
  std::string bind = "127.0.0.1:8080";
  std::string auth_token;
};

struct CubeArgs {
  std::string cuboid;
  std::string codq_file;
  std::string at;
  std::optional<std::size_t> k;
  std::optional<std::size_t> min_cell_size;
  std::optional<std::string> target;
  std::optional<double> lambda;
};

void emit(const Globals& g, const ordered_json& j, const std::string& text) {
  if (g.json) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
  }
}

fs::path cube_file(const Globals& g, const std::string& name) { return fs::path(g.data_dir) / "cubes" / (name + ".json"); }
fs::path codq_file(const Globals& g, const std::string& name) { return fs::path(g.data_dir) / "cuboids" / (name + ".codq"); }

/// Presets come from the generator; other names need --codq once, after
/// which the query is kept under <data-dir>/cuboids.
std::shared_ptr<const CuboidDef> resolve_cuboid(const Globals& g, const Database& db, const CubeArgs& a) {
  if (!a.codq_file.empty()) {
    if (tourism::find_preset(a.cuboid)) throw DomainError("preset cuboid '" + a.cuboid + "' cannot be redefined");
    std::string text = clustcube::detail::read_file(a.codq_file);
    auto def = define_cuboid(db, a.cuboid, text, false);
    fs::create_directories(codq_file(g, a.cuboid).parent_path());
    clustcube::detail::write_file(codq_file(g, a.cuboid), text);
    return def;
  }
  if (const auto* p = tourism::find_preset(a.cuboid)) return define_cuboid(db, p->name, p->codq, true);
  if (fs::exists(codq_file(g, a.cuboid))) {
    return define_cuboid(db, a.cuboid, clustcube::detail::read_file(codq_file(g, a.cuboid)), false);
  }
  throw ReferenceError("unknown cuboid '" + a.cuboid + "' (not a preset; define it with --codq)");
}

/// Settings of the last `build` of this cuboid, if any, overridden by flags.
struct BuildSettings {
  CubeConfig config;
  std::optional<std::string> at;  // nullopt: base cuboid
};

BuildSettings settings_for(const Globals& g, const CubeArgs& a) {
  BuildSettings s;
  if (const auto* p = tourism::find_preset(a.cuboid)) s.config.k = p->default_k;
  if (fs::exists(cube_file(g, a.cuboid))) {
    auto j = nlohmann::json::parse(clustcube::detail::read_file(cube_file(g, a.cuboid)));
    const auto& c = j.at("config");
    s.config.k = c.at("k").get<std::size_t>();
    s.config.seed = c.at("seed").get<std::uint64_t>();
    s.config.max_iter = c.at("max_iter").get<std::size_t>();
    s.config.tol = c.at("tol").get<double>();
    s.config.min_cell_size = c.at("min_cell_size").get<std::size_t>();
    s.config.lambda = c.at("lambda").get<double>();
    if (!c.at("target").is_null()) s.config.target = c.at("target").get<std::string>();
    s.at = j.at("cuboid").get<std::string>();
  }
  if (a.k) s.config.k = *a.k;
  if (g.seed) s.config.seed = *g.seed;
  if (a.min_cell_size) s.config.min_cell_size = *a.min_cell_size;
  if (a.target) s.config.target = *a.target;
  if (a.lambda) s.config.lambda = *a.lambda;
  if (a.at == "base") {
    s.at.reset();
  } else if (a.at == "apex") {
    s.at = "";
  } else if (!a.at.empty()) {
    s.at = a.at;
  }
  return s;
}

void save_cube(const Globals& g, const std::string& name, const ordered_json& j) {
  fs::create_directories(cube_file(g, name).parent_path());
  clustcube::detail::write_file(cube_file(g, name), j.dump(1) + "\n");
}

std::string cube_summary(const ClustCube& cube) {
  std::string out = "cuboid: " + (cube.cuboid.choices.empty() ? std::string() : cube.cuboid_name()) + "\n";
  out += "cells: " + std::to_string(cube.cells.size()) + ", placed objects: " + std::to_string(cube.object_count()) +
         ", unplaced: " + std::to_string(cube.unplaced.size()) + "\n";
  out += to_csv(cube);
  return out;
}

void add_cube_options(CLI::App* sub, CubeArgs& a, bool analysis) {
  sub->add_option("--cuboid", a.cuboid, "Preset or user-defined cuboid name")->required();
  sub->add_option("--codq", a.codq_file, "File with a CODQ defining a user cuboid");
  sub->add_option("--at", a.at, "Cuboid in the lattice, e.g. Ferry=vessel_type,GeographicalArea=region ('base' for finest, 'apex' for ALL)");
  if (analysis) {
    sub->add_option("--k", a.k, "Clusters per cell");
    sub->add_option("--min-cell-size", a.min_cell_size, "Cells smaller than this are not clustered");
    sub->add_option("--target", a.target, "Regression target attribute");
    sub->add_option("--lambda", a.lambda, "Ridge penalty");
  }
}

int run(int argc, char** argv) {
  Globals g;
  if (const char* env = std::getenv("CLUSTCUBE_TOKEN")) g.auth_token = env;

  CLI::App app{"clustcube: multidimensional clustering and regression over star-schema cuboids"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--data-dir", g.data_dir, "Dataset directory (schema.json + <Table>.csv)");
  app.add_option("--seed", g.seed, "Seed for generation and clustering");
  app.add_option("--scale", g.scale, "Generator scale: tiny, small, medium");
  app.add_flag("--json", g.json, "Machine-readable JSON on stdout");
  app.add_option("--bind", g.bind, "host:port for serve");
  app.add_option("--auth-token", g.auth_token, "Bearer login token for serve (default: generated)");

  std::string out_dir;
  auto* generate = app.add_subcommand("generate", "Write the synthetic tourism dataset");
  generate->add_option("--out", out_dir, "Output directory (default: --data-dir)");

  auto* ingest = app.add_subcommand("ingest", "Load and type-check every table of a dataset");

  auto* validate = app.add_subcommand("validate", "Check foreign keys, hierarchies and measure types");

  CubeArgs oa;
  std::size_t limit = 10;
  auto* objects = app.add_subcommand("objects", "Materialize the objects of a cuboid");
  objects->add_option("--cuboid", oa.cuboid, "Preset or user-defined cuboid name")->required();
  objects->add_option("--codq", oa.codq_file, "File with a CODQ defining a user cuboid");
  objects->add_option("--limit", limit, "Objects to print");

  std::optional<std::size_t> flat_dims;
  std::vector<std::size_t> level_counts;
  std::string lattice_preset;
  bool list = false;
  auto* lattice = app.add_subcommand("lattice", "Count (and list) the cuboids of a lattice");
  auto* dims_opt = lattice->add_option("--dims", flat_dims, "Flat dimensions, one level each");
  auto* levels_opt = lattice->add_option("--levels", level_counts, "Levels per dimension, e.g. 3,2,1")->delimiter(',');
  auto* preset_opt = lattice->add_option("--preset", lattice_preset, "Lattice of a preset cuboid over --data-dir");
  dims_opt->excludes(levels_opt)->excludes(preset_opt);
  levels_opt->excludes(preset_opt);
  lattice->add_flag("--list", list, "List cuboid names");

  CubeArgs sa;
  std::size_t select_k = 5;
  std::vector<std::string> pins;
  auto* select = app.add_subcommand("select", "Pick cuboids to materialize by balanced occupancy");
  select->add_option("--cuboid", sa.cuboid, "Preset or user-defined cuboid name")->required();
  select->add_option("--codq", sa.codq_file, "File with a CODQ defining a user cuboid");
  select->add_option("--k", select_k, "Cuboids to select");
  select->add_option("--pin", pins, "Pinned cuboid names (replaces balanced selection)");

  CubeArgs ba;
  auto* build_cmd = app.add_subcommand("build", "Build a cube: cells, per-cell clustering and regression");
  add_cube_options(build_cmd, ba, true);

  CubeArgs ra;
  std::string roll_dim, roll_mode = "merge_stats";
  auto* rollup = app.add_subcommand("rollup", "Roll the last built cube up one level along a dimension");
  add_cube_options(rollup, ra, false);
  rollup->add_option("--dim", roll_dim, "Dimension to coarsen")->required();
  rollup->add_option("--mode", roll_mode, "recluster or merge_stats")->check(CLI::IsMember({"recluster", "merge_stats"}));

  CubeArgs ca;
  auto* cluster = app.add_subcommand("cluster", "Recluster every cell of the cube");
  add_cube_options(cluster, ca, false);
  cluster->add_option("--k", ca.k, "Clusters per cell")->required();
  cluster->add_option("--min-cell-size", ca.min_cell_size, "Cells smaller than this are not clustered");

  CubeArgs ga;
  auto* regress = app.add_subcommand("regress", "Refit every cell's regression");
  add_cube_options(regress, ga, false);
  regress->add_option("--target", ga.target, "Regression target attribute")->required();
  regress->add_option("--lambda", ga.lambda, "Ridge penalty");

  CubeArgs ea;
  std::string format = "json", export_out;
  auto* export_cmd = app.add_subcommand("export", "Export the last built cube");
  add_cube_options(export_cmd, ea, false);
  export_cmd->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  export_cmd->add_option("--out", export_out, "Write to a file instead of stdout");

  auto* serve = app.add_subcommand("serve", "Run the HTTP JSON service");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*generate) {
    tourism::GenConfig cfg;
    cfg.seed = g.seed.value_or(cfg.seed);
    cfg.scale = tourism::parse_scale(g.scale);
    cfg.out_dir = out_dir.empty() ? fs::path(g.data_dir) : fs::path(out_dir);
    auto r = tourism::generate(cfg);
    ordered_json j{{"out", cfg.out_dir.string()}, {"seed", cfg.seed}, {"scale", tourism::to_string(cfg.scale)},
                   {"row_counts", r.row_counts}, {"files", r.files.size()}};
    emit(g, j, "wrote " + std::to_string(r.files.size()) + " files to " + cfg.out_dir.string());
    return 0;
  }

  if (*ingest) {
    auto db = load_database(g.data_dir);
    ordered_json tables = ordered_json::object();
    std::string text;
    for (const auto& t : db->schema.tables) {
      tables[t.name] = db->table(t.name).rows.size();
      text += t.name + ": " + std::to_string(db->table(t.name).rows.size()) + " rows\n";
    }
    emit(g, {{"fact", db->schema.fact}, {"tables", tables}}, text);
    return 0;
  }

  if (*validate) {
    auto db = load_database(g.data_dir);
    auto report = validate_star(*db);
    std::string text = report.empty() ? "no violations\n" : "";
    for (const auto& v : report.violations) {
      text += std::string(to_string(v.kind)) + " " + v.table + "." + v.column + " row " + std::to_string(v.row) + ": " +
              v.detail + "\n";
    }
    emit(g, to_json(report), text);
    return report.empty() ? 0 : 1;
  }

  if (*objects) {
    auto db = load_database(g.data_dir);
    auto def = resolve_cuboid(g, *db, oa);
    const ObjectSet& os = def->space->objects;
    ordered_json schema = ordered_json::array();
    for (const auto& a : os.schema.attributes) {
      schema.push_back({{"name", a.name}, {"type", to_string(a.type)}, {"role", to_string(a.role)},
                        {"source", a.source_table + "." + a.source_column}});
    }
    ordered_json rows = ordered_json::array();
    std::string text;
    for (std::size_t i = 0; i < std::min(limit, os.size()); ++i) {
      ordered_json r = ordered_json::object();
      for (std::size_t c = 0; c < os.schema.attributes.size(); ++c) {
        const Value& v = os.objects[i][c];
        r[os.schema.attributes[c].name] = is_null(v) ? ordered_json(nullptr) : ordered_json(to_text(v));
        text += (c ? "," : "") + (is_null(v) ? std::string() : to_text(v));
      }
      text += "\n";
      rows.push_back(std::move(r));
    }
    emit(g, {{"count", os.size()}, {"placeable", def->space->placeable_count()}, {"schema", schema}, {"objects", rows}},
         std::to_string(os.size()) + " objects\n" + text);
    return 0;
  }

  if (*lattice) {
    std::vector<DimensionSpec> dims;
    if (flat_dims) {
      dims = flat_dimensions(*flat_dims);
    } else if (!level_counts.empty()) {
      for (std::size_t i = 0; i < level_counts.size(); ++i) {
        DimensionSpec d{"D" + std::to_string(i), {}};
        for (std::size_t l = 0; l < level_counts[i]; ++l) d.levels.push_back("L" + std::to_string(l));
        dims.push_back(std::move(d));
      }
    } else if (!lattice_preset.empty()) {
      auto db = load_database(g.data_dir);
      CubeArgs a;
      a.cuboid = lattice_preset;
      dims = resolve_cuboid(g, *db, a)->space->cuboid_lattice().dimensions();
    } else {
      std::cerr << "lattice: one of --dims, --levels, --preset is required\n";
      return 2;
    }
    CuboidLattice l(dims, CuboidLattice(dims, false).count() <= CuboidLattice::kMaxEnumerated);
    std::uint64_t n = l.cuboids().empty() ? l.count() : l.cuboids().size();
    ordered_json j{{"cuboids", n}};
    std::string text = std::to_string(n) + " cuboids\n";
    if (list) {
      ordered_json names = ordered_json::array();
      for (const auto& c : l.cuboids()) {
        names.push_back(l.format(c));
        text += (l.format(c).empty() ? "(apex)" : l.format(c)) + "\n";
      }
      j["names"] = std::move(names);
    }
    emit(g, j, text);
    return 0;
  }

  if (*select) {
    auto db = load_database(g.data_dir);
    auto def = resolve_cuboid(g, *db, sa);
    const CuboidLattice& l = def->space->cuboid_lattice();
    std::vector<CuboidId> chosen;
    std::vector<Occupancy> candidates;
    if (!pins.empty()) {
      std::vector<CuboidId> ids;
      for (const auto& p : pins) ids.push_back(l.parse(p == "apex" ? "" : p));
      chosen = select_cuboids(l, {}, SelectionPolicy::pin(ids), select_k);
    } else {
      CuboidLattice full(l.dimensions(), true);
      for (const auto& c : full.cuboids()) candidates.push_back({c, occupancy(*def->space, c)});
      chosen = select_cuboids(l, candidates, SelectionPolicy::balanced(), select_k);
    }
    ordered_json out = ordered_json::array();
    std::string text;
    for (const auto& c : chosen) {
      auto counts = occupancy(*def->space, c);
      double h = occupancy_entropy(counts);
      out.push_back({{"cuboid", l.format(c)}, {"level", CuboidLattice::level(c)}, {"cells", counts.size()},
                     {"entropy", h}});
      text += l.format(c) + "\tcells=" + std::to_string(counts.size()) + "\tentropy=" + format_real(h) + "\n";
    }
    emit(g, {{"selected", out}, {"candidates", candidates.size()}}, text);
    return 0;
  }

  if (*build_cmd) {
    // a fresh build starts from defaults, not from the previous build
    BuildSettings s;
    if (const auto* p = tourism::find_preset(ba.cuboid)) s.config.k = p->default_k;
    if (ba.k) s.config.k = *ba.k;
    if (g.seed) s.config.seed = *g.seed;
    if (ba.min_cell_size) s.config.min_cell_size = *ba.min_cell_size;
    if (ba.target) s.config.target = *ba.target;
    if (ba.lambda) s.config.lambda = *ba.lambda;
    if (ba.at == "apex") {
      s.at = "";
    } else if (!ba.at.empty() && ba.at != "base") {
      s.at = ba.at;
    }
    auto db = load_database(g.data_dir);
    auto def = resolve_cuboid(g, *db, ba);
    const CuboidLattice& l = def->space->cuboid_lattice();
    ClustCube cube = build(def->space, s.at ? l.parse(*s.at) : l.base(), s.config);
    ordered_json j = to_json(cube);
    save_cube(g, ba.cuboid, j);
    emit(g, j, cube_summary(cube));
    return 0;
  }

  // The remaining cube commands start from the last build of --cuboid
  // (rebuilt deterministically from its saved settings) or from defaults.
  auto last_build = [&](const CubeArgs& a) {
    BuildSettings s = settings_for(g, a);
    auto db = load_database(g.data_dir);
    auto def = resolve_cuboid(g, *db, a);
    const CuboidLattice& l = def->space->cuboid_lattice();
    return build(def->space, s.at ? l.parse(*s.at) : l.base(), s.config);
  };

  if (*rollup) {
    ClustCube child = last_build(ra);
    ClustCube parent = roll_up(child, roll_dim, parse_recompute_mode(roll_mode));
    ordered_json j = to_json(parent);
    j["child_cuboid"] = child.cuboid_name();
    j["mode"] = roll_mode;
    emit(g, j, cube_summary(parent));
    return 0;
  }

  if (*cluster) {
    ClustCube cube = last_build(ca);
    cube = with_clustering(cube, *ca.k, cube.config.seed);
    ordered_json j = to_json(cube);
    save_cube(g, ca.cuboid, j);
    emit(g, j, cube_summary(cube));
    return 0;
  }

  if (*regress) {
    ClustCube cube = last_build(ga);
    cube = with_regression(cube, *ga.target, cube.config.lambda);
    ordered_json j = to_json(cube);
    save_cube(g, ga.cuboid, j);
    emit(g, j, cube_summary(cube));
    return 0;
  }

  if (*export_cmd) {
    ClustCube cube = last_build(ea);
    std::string body = format == "csv" ? to_csv(cube) : to_json(cube).dump() + "\n";
    if (!export_out.empty()) {
      clustcube::detail::write_file(export_out, body);
      emit(g, {{"out", export_out}, {"format", format}}, "wrote " + export_out);
    } else {
      std::cout << body;
    }
    return 0;
  }

  if (*serve) {
    auto colon = g.bind.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "--bind expects host:port\n";
      return 2;
    }
    std::string host = g.bind.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(g.bind.substr(colon + 1));
    } catch (const std::exception&) {
      std::cerr << "--bind expects host:port\n";
      return 2;
    }
    if (g.auth_token.empty()) g.auth_token = random_token();
    Engine engine(load_database(g.data_dir));
    Service service(engine, g.auth_token);
    std::cout << "clustcube " << kEngineVersion << " listening on " << host << ":" << port << "\n"
              << "auth token: " << g.auth_token << std::endl;
    if (!service.server().listen(host, port)) {
      std::cerr << "cannot listen on " << g.bind << "\n";
      return 1;
    }
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const clustcube::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
