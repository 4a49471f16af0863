#pragma once

// Cuboid lattice over a cube's dimensions. Each dimension contributes one
// choice per cuboid: a hierarchy level index (0 = finest) or ALL. The lattice
// is graded by one-step coarsening; base has every dimension at its finest
// level and apex has every dimension rolled away.

#include <algorithm>
#include <climits>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "clustcube/error.hpp"

namespace clustcube {

struct DimensionSpec {
  std::string name;
  std::vector<std::string> levels;  // finest -> coarsest

  bool operator==(const DimensionSpec&) const = default;
};

/// ALL sorts after every level index, so lexicographic order on choices walks
/// from fine to coarse within each dimension.
inline constexpr int kAll = INT_MAX;

struct CuboidId {
  std::vector<int> choices;

  auto operator<=>(const CuboidId&) const = default;
  bool operator==(const CuboidId&) const = default;

  bool is_all(std::size_t dim) const { return choices[dim] == kAll; }
};

class CuboidLattice {
 public:
  static constexpr std::uint64_t kMaxEnumerated = std::uint64_t{1} << 20;

  /// Validates dimensions. Enumeration is eager only when requested, so a
  /// lattice can be navigated without materializing every cuboid.
  explicit CuboidLattice(std::vector<DimensionSpec> dims, bool enumerate = true) : dims_(std::move(dims)) {
    std::set<std::string> names;
    for (const auto& d : dims_) {
      if (!names.insert(d.name).second) throw DomainError("duplicate dimension name '" + d.name + "'");
      if (d.levels.empty()) throw DomainError("dimension '" + d.name + "' has no levels");
      std::set<std::string> levels(d.levels.begin(), d.levels.end());
      if (levels.size() != d.levels.size()) throw DomainError("dimension '" + d.name + "' repeats a level");
    }
    if (enumerate) enumerate_all();
  }

  const std::vector<DimensionSpec>& dimensions() const { return dims_; }
  const std::vector<CuboidId>& cuboids() const { return cuboids_; }

  /// Closed-form lattice size: product of (levels + 1). Saturates at UINT64_MAX.
  std::uint64_t count() const {
    std::uint64_t n = 1;
    for (const auto& d : dims_) {
      std::uint64_t f = d.levels.size() + 1;
      if (n > UINT64_MAX / f) return UINT64_MAX;
      n *= f;
    }
    return n;
  }

  std::optional<std::size_t> dimension_index(std::string_view name) const {
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (dims_[i].name == name) return i;
    }
    return std::nullopt;
  }

  bool contains(const CuboidId& c) const {
    if (c.choices.size() != dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      int ch = c.choices[i];
      if (ch != kAll && (ch < 0 || ch >= static_cast<int>(dims_[i].levels.size()))) return false;
    }
    return true;
  }

  CuboidId base() const { return CuboidId{std::vector<int>(dims_.size(), 0)}; }
  CuboidId apex() const { return CuboidId{std::vector<int>(dims_.size(), kAll)}; }

  /// Number of non-ALL choices.
  static std::size_t level(const CuboidId& c) {
    return static_cast<std::size_t>(std::count_if(c.choices.begin(), c.choices.end(), [](int x) { return x != kAll; }));
  }

  /// Steps from base along one-step coarsening; base = 0, apex = sum of levels.
  std::size_t rank(const CuboidId& c) const {
    std::size_t r = 0;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      r += c.choices[i] == kAll ? dims_[i].levels.size() : static_cast<std::size_t>(c.choices[i]);
    }
    return r;
  }

  /// One dimension coarsened one step; nullopt when already ALL.
  std::optional<CuboidId> coarsen(const CuboidId& c, std::size_t dim) const {
    if (c.choices[dim] == kAll) return std::nullopt;
    CuboidId p = c;
    int next = c.choices[dim] + 1;
    p.choices[dim] = next >= static_cast<int>(dims_[dim].levels.size()) ? kAll : next;
    return p;
  }

  /// One dimension refined one step; nullopt when already at the finest level.
  std::optional<CuboidId> refine(const CuboidId& c, std::size_t dim) const {
    if (c.choices[dim] == 0) return std::nullopt;
    CuboidId p = c;
    p.choices[dim] = c.choices[dim] == kAll ? static_cast<int>(dims_[dim].levels.size()) - 1 : c.choices[dim] - 1;
    return p;
  }

  std::vector<CuboidId> parents(const CuboidId& c) const {
    require(c);
    std::vector<CuboidId> out;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (auto p = coarsen(c, d)) out.push_back(std::move(*p));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<CuboidId> children(const CuboidId& c) const {
    require(c);
    std::vector<CuboidId> out;
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (auto p = refine(c, d)) out.push_back(std::move(*p));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// `Dim=level` pairs joined by ',' in dimension order; ALL dimensions are
  /// omitted, so the apex formats as the empty string.
  std::string format(const CuboidId& c) const {
    require(c);
    std::string out;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (c.choices[i] == kAll) continue;
      if (!out.empty()) out += ',';
      out += dims_[i].name + "=" + dims_[i].levels[static_cast<std::size_t>(c.choices[i])];
    }
    return out;
  }

  CuboidId parse(std::string_view text) const {
    CuboidId c = apex();
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string_view::npos) end = text.size();
      auto pair = text.substr(pos, end - pos);
      auto eq = pair.find('=');
      if (eq == std::string_view::npos) throw SyntaxError("cuboid name: expected dim=level in '" + std::string(pair) + "'", pos);
      auto dim = pair.substr(0, eq);
      auto lvl = pair.substr(eq + 1);
      auto d = dimension_index(dim);
      if (!d) throw ReferenceError("unknown dimension '" + std::string(dim) + "'");
      const auto& levels = dims_[*d].levels;
      auto it = std::find(levels.begin(), levels.end(), lvl);
      if (it == levels.end()) {
        throw ReferenceError("dimension '" + std::string(dim) + "' has no level '" + std::string(lvl) + "'");
      }
      if (c.choices[*d] != kAll) throw SyntaxError("cuboid name repeats dimension '" + std::string(dim) + "'", pos);
      c.choices[*d] = static_cast<int>(it - levels.begin());
      pos = end + 1;
    }
    return c;
  }

 private:
  void require(const CuboidId& c) const {
    if (!contains(c)) throw ReferenceError("cuboid is not in the lattice");
  }

  void enumerate_all() {
    std::uint64_t n = count();
    if (n > kMaxEnumerated) {
      throw DomainError("lattice has " + (n == UINT64_MAX ? std::string("too many") : std::to_string(n)) +
                        " cuboids; eager enumeration is limited to 2^20");
    }
    cuboids_.reserve(static_cast<std::size_t>(n));
    // odometer over per-dimension choice indices; the last dimension varies fastest
    std::vector<std::size_t> idx(dims_.size(), 0);
    while (true) {
      CuboidId c;
      c.choices.resize(dims_.size());
      for (std::size_t i = 0; i < dims_.size(); ++i) {
        c.choices[i] = idx[i] == dims_[i].levels.size() ? kAll : static_cast<int>(idx[i]);
      }
      cuboids_.push_back(std::move(c));
      std::size_t d = dims_.size();
      while (d > 0) {
        --d;
        if (++idx[d] <= dims_[d].levels.size()) break;
        idx[d] = 0;
        if (d == 0) return;
      }
      if (dims_.empty()) return;
    }
  }

  std::vector<DimensionSpec> dims_;
  std::vector<CuboidId> cuboids_;
};

inline CuboidLattice enumerate_lattice(std::vector<DimensionSpec> dims) { return CuboidLattice(std::move(dims), true); }

/// `count` flat dimensions named D0..D{n-1}, each with a single level `value`.
inline std::vector<DimensionSpec> flat_dimensions(std::size_t count) {
  std::vector<DimensionSpec> dims;
  for (std::size_t i = 0; i < count; ++i) dims.push_back({"D" + std::to_string(i), {"value"}});
  return dims;
}

// ---------------------------------------------------------------------------
// Cuboid selection

struct Occupancy {
  CuboidId cuboid;
  std::vector<std::size_t> cell_counts;
};

struct SelectionPolicy {
  enum class Kind { kPinned, kBalancedOccupancy };
  Kind kind = Kind::kBalancedOccupancy;
  std::vector<CuboidId> pinned;

  static SelectionPolicy balanced() { return {}; }
  static SelectionPolicy pin(std::vector<CuboidId> cs) { return {Kind::kPinned, std::move(cs)}; }
};

/// Shannon entropy (nats) of the cell-occupancy distribution. Zero for an
/// empty or single-cell cuboid.
inline double occupancy_entropy(const std::vector<std::size_t>& counts) {
  double total = 0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0) return 0.0;
  double h = 0;
  for (auto c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

/// Scores closer than this are ties.
inline constexpr double kEntropyTieTolerance = 1e-12;

inline std::vector<CuboidId> select_cuboids(const CuboidLattice& lattice, const std::vector<Occupancy>& candidates,
                                            const SelectionPolicy& policy, std::size_t k) {
  if (policy.kind == SelectionPolicy::Kind::kPinned) {
    for (const auto& c : policy.pinned) {
      if (!lattice.contains(c)) throw ReferenceError("pinned cuboid is not in the lattice");
    }
    std::vector<CuboidId> out(policy.pinned.begin(),
                              policy.pinned.begin() + static_cast<std::ptrdiff_t>(std::min(k, policy.pinned.size())));
    return out;
  }
  if (k == 0) return {};

  struct Scored {
    const CuboidId* id;
    double score;
    std::size_t level;
  };
  std::vector<Scored> scored;
  for (const auto& cand : candidates) {
    if (!lattice.contains(cand.cuboid)) throw ReferenceError("candidate cuboid is not in the lattice");
    scored.push_back({&cand.cuboid, occupancy_entropy(cand.cell_counts), CuboidLattice::level(cand.cuboid)});
  }
  auto better = [](const Scored& a, const Scored& b) {
    if (std::abs(a.score - b.score) > kEntropyTieTolerance) return a.score > b.score;
    if (a.level != b.level) return a.level < b.level;
    return *a.id < *b.id;
  };
  std::sort(scored.begin(), scored.end(), better);

  std::vector<Scored> chosen(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(std::min(k, scored.size())));
  std::set<std::size_t> candidate_levels;
  for (const auto& s : scored) candidate_levels.insert(s.level);
  if (k >= 2 && chosen.size() >= 2 && candidate_levels.size() >= 2) {
    std::set<std::size_t> chosen_levels;
    for (const auto& s : chosen) chosen_levels.insert(s.level);
    if (chosen_levels.size() == 1) {
      for (const auto& s : scored) {
        if (!chosen_levels.count(s.level)) {
          chosen.back() = s;
          break;
        }
      }
      std::sort(chosen.begin(), chosen.end(), better);
    }
  }
  std::vector<CuboidId> out;
  for (const auto& s : chosen) out.push_back(*s.id);
  return out;
}

}  // namespace clustcube
