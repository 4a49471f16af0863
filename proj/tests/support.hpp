#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "clustcube/star_store.hpp"
#include "clustcube/tourism_gen.hpp"

namespace testing_support {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("clustcube_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<const clustcube::Database> tourism_db(std::uint64_t seed, clustcube::tourism::Scale scale) {
  auto [result, tables] = clustcube::tourism::generate_tables(seed, scale);
  auto db = std::make_shared<clustcube::Database>();
  db->schema = result.schema;
  for (auto& [name, t] : tables) db->tables.emplace(name, std::move(t));
  return db;
}

inline std::shared_ptr<const clustcube::Database> tiny_db() {
  static auto db = tourism_db(42, clustcube::tourism::Scale::kTiny);
  return db;
}

}  // namespace testing_support
