#pragma once

// Feature encoding and deterministic k-means for the objects of a cube cell.
//
// Random draws come from std::mt19937_64 (its output sequence is fixed by the
// standard) mapped to doubles through the top 53 bits, so a (matrix, k, seed,
// max_iter, tol) tuple produces the same clustering on every platform with
// IEEE doubles. All sums run row-major in ascending index order.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clustcube/codq.hpp"
#include "clustcube/error.hpp"

namespace clustcube {

inline constexpr std::string_view kNullCategory = "⟨null⟩";

struct Encoding {
  enum class Kind { kZScore, kOneHot };
  std::string attribute;
  Kind kind = Kind::kZScore;
  double mean = 0;
  double stddev = 0;
  std::vector<std::string> categories;  // first-appearance order
};

/// Dense row-major real matrix with the object index behind every row.
struct FeatureMatrix {
  std::vector<std::size_t> rows;
  std::vector<std::string> columns;
  std::vector<double> values;
  std::vector<Encoding> encoding;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return columns.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * columns.size(), columns.size()};
  }

  /// Rows `positions` (indices into this matrix) in the given order.
  FeatureMatrix select(std::span<const std::size_t> positions) const {
    FeatureMatrix out;
    out.columns = columns;
    out.encoding = encoding;
    out.rows.reserve(positions.size());
    out.values.reserve(positions.size() * columns.size());
    for (std::size_t p : positions) {
      out.rows.push_back(rows[p]);
      auto r = row(p);
      out.values.insert(out.values.end(), r.begin(), r.end());
    }
    return out;
  }
};

struct FeaturizeConfig {
  bool impute = false;
};

inline FeatureMatrix featurize(const ObjectSet& objects, FeaturizeConfig config = {}) {
  auto features = objects.schema.with_role(Role::kFeature);
  if (features.empty()) throw DomainError("object set has no feature attributes");
  const std::size_t n = objects.size();

  // one block of output columns per source attribute
  std::vector<std::vector<double>> blocks;
  FeatureMatrix m;
  for (std::size_t a : features) {
    const Attribute& attr = objects.schema.attributes[a];
    Encoding enc;
    enc.attribute = attr.name;
    if (!config.impute) {
      for (std::size_t i = 0; i < n; ++i) {
        if (is_null(objects.objects[i][a])) {
          throw DomainError("null value in feature '" + attr.name + "' at object " + std::to_string(i));
        }
      }
    }
    if (is_numeric(attr.type)) {
      enc.kind = Encoding::Kind::kZScore;
      std::vector<double> col(n, 0.0);
      double sum = 0;
      std::size_t present = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (auto x = as_double(objects.objects[i][a])) {
          col[i] = *x;
          sum += *x;
          ++present;
        }
      }
      double fill = present ? sum / static_cast<double>(present) : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (is_null(objects.objects[i][a])) col[i] = fill;
      }
      double mean = 0;
      for (double x : col) mean += x;
      mean = n ? mean / static_cast<double>(n) : 0.0;
      double var = 0;
      for (double x : col) var += (x - mean) * (x - mean);
      var = n ? var / static_cast<double>(n) : 0.0;
      double sd = std::sqrt(var);
      enc.mean = mean;
      enc.stddev = sd;
      // constant column: relative spread at rounding level counts as constant
      bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
      for (double& x : col) x = constant ? 0.0 : (x - mean) / sd;
      m.columns.push_back(attr.name);
      blocks.push_back(std::move(col));
    } else {
      enc.kind = Encoding::Kind::kOneHot;
      std::unordered_map<std::string, std::size_t> index;
      std::vector<std::size_t> code(n);
      for (std::size_t i = 0; i < n; ++i) {
        const Value& v = objects.objects[i][a];
        std::string key = is_null(v) ? std::string(kNullCategory) : to_text(v);
        auto [it, inserted] = index.emplace(key, enc.categories.size());
        if (inserted) enc.categories.push_back(key);
        code[i] = it->second;
      }
      for (std::size_t c = 0; c < enc.categories.size(); ++c) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) col[i] = code[i] == c ? 1.0 : 0.0;
        m.columns.push_back(attr.name + "=" + enc.categories[c]);
        blocks.push_back(std::move(col));
      }
    }
    m.encoding.push_back(std::move(enc));
  }

  m.rows.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.rows[i] = i;
  m.values.resize(n * blocks.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < blocks.size(); ++c) m.values[i * blocks.size() + c] = blocks[c][i];
  }
  return m;
}

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centroids;
  double sse = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t max_iter = 0;
  double tol = 0;
  std::vector<double> sse_history;

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (auto a : assignment) ++s[a];
    return s;
  }
  bool operator==(const Clustering&) const = default;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<std::vector<double>> kmeanspp_init(const FeatureMatrix& m, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = m.n_rows();
  std::vector<std::vector<double>> centers;
  std::vector<bool> chosen(n, false);
  std::size_t first = std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
  centers.emplace_back(m.row(first).begin(), m.row(first).end());
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(m.row(i), centers[0]);
  while (centers.size() < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) total += d2[i];
    std::size_t pick = n;
    if (total > 0) {
      double r = unit(rng) * total;
      double cum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0) continue;
        cum += d2[i];
        pick = i;
        if (cum > r) break;
      }
    } else {
      // every remaining point coincides with a center
      (void)rng();
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
          pick = i;
          break;
        }
      }
    }
    chosen[pick] = true;
    centers.emplace_back(m.row(pick).begin(), m.row(pick).end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(m.row(i), centers.back()));
  }
  return centers;
}

inline std::size_t nearest(std::span<const double> x, const std::vector<std::vector<double>>& centers, double* dist) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    double d = sq_dist(x, centers[j]);
    if (d < best_d) {  // strict: equidistant centers resolve to the lowest index
      best_d = d;
      best = j;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

inline void update_means(const FeatureMatrix& m, const std::vector<std::size_t>& assignment,
                         std::vector<std::vector<double>>& centers) {
  const std::size_t d = m.n_cols();
  std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(centers.size(), 0);
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    auto r = m.row(i);
    auto& s = sums[assignment[i]];
    for (std::size_t c = 0; c < d; ++c) s[c] += r[c];
    ++counts[assignment[i]];
  }
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if (counts[j] == 0) continue;
    for (std::size_t c = 0; c < d; ++c) centers[j][c] = sums[j][c] / static_cast<double>(counts[j]);
  }
}

inline double total_sse(const FeatureMatrix& m, const std::vector<std::size_t>& assignment,
                        const std::vector<std::vector<double>>& centers) {
  double s = 0;
  for (std::size_t i = 0; i < m.n_rows(); ++i) s += sq_dist(m.row(i), centers[assignment[i]]);
  return s;
}

}  // namespace detail

inline constexpr std::size_t kDefaultMaxIter = 100;
inline constexpr double kDefaultTol = 1e-6;

/// Lloyd iterations from k-means++ seeding. Each iteration assigns, repairs
/// empty clusters, recomputes means, and records the SSE. Iteration stops when
/// the relative SSE improvement is at most `tol`, the SSE reaches zero, or
/// `max_iter` is hit. An iteration that would raise the SSE (possible only by
/// rounding) is discarded and ends the run, so the history never increases.
inline Clustering kmeans(const FeatureMatrix& m, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter = kDefaultMaxIter, double tol = kDefaultTol) {
  const std::size_t n = m.n_rows();
  if (k < 1) throw DomainError("k must be at least 1");
  if (k > n) throw DomainError("k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " objects");
  if (max_iter < 1) throw DomainError("max_iter must be at least 1");
  if (!(tol >= 0)) throw DomainError("tol must be non-negative");

  std::mt19937_64 rng(seed);
  Clustering c;
  c.k = k;
  c.seed = seed;
  c.max_iter = max_iter;
  c.tol = tol;
  c.centroids = detail::kmeanspp_init(m, k, rng);
  c.assignment.assign(n, 0);

  std::vector<std::size_t> assignment(n);
  std::vector<double> dist(n);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    auto centers = c.centroids;
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      assignment[i] = detail::nearest(m.row(i), centers, &dist[i]);
      ++sizes[assignment[i]];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (sizes[j] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assignment[i]] > 1 && (far == n || dist[i] > dist[far])) far = i;
      }
      --sizes[assignment[far]];
      assignment[far] = j;
      dist[far] = 0;
      sizes[j] = 1;
      centers[j].assign(m.row(far).begin(), m.row(far).end());
    }
    detail::update_means(m, assignment, centers);
    double sse = detail::total_sse(m, assignment, centers);
    if (sse > prev) break;
    c.centroids = std::move(centers);
    c.assignment = assignment;
    c.sse = sse;
    c.iterations = it;
    c.sse_history.push_back(sse);
    if (sse == 0 || prev - sse <= tol * prev) break;
    prev = sse;
  }
  return c;
}

/// Mean silhouette with Euclidean distance. Objects in singleton clusters, and
/// objects whose a and b are both zero, contribute 0.
inline double silhouette(const FeatureMatrix& m, const Clustering& c) {
  if (c.k < 2) throw DomainError("silhouette needs k >= 2");
  const std::size_t n = m.n_rows();
  auto sizes = c.sizes();
  for (auto s : sizes) {
    if (s == 0) throw DomainError("silhouette needs every cluster non-empty");
  }
  double total = 0;
  std::vector<double> sum_to(c.k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(sum_to.begin(), sum_to.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      sum_to[c.assignment[j]] += std::sqrt(detail::sq_dist(m.row(i), m.row(j)));
    }
    std::size_t own = c.assignment[i];
    if (sizes[own] == 1) continue;
    double a = sum_to[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c.k; ++j) {
      if (j != own) b = std::min(b, sum_to[j] / static_cast<double>(sizes[j]));
    }
    double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

inline nlohmann::ordered_json to_json(const Encoding& e) {
  nlohmann::ordered_json j;
  j["attribute"] = e.attribute;
  if (e.kind == Encoding::Kind::kZScore) {
    j["encoding"] = "z-score";
    j["mean"] = e.mean;
    j["stddev"] = e.stddev;
  } else {
    j["encoding"] = "one-hot";
    j["categories"] = e.categories;
  }
  return j;
}

/// Clustering export. The encoding report comes from the matrix the
/// clustering was computed on.
inline nlohmann::ordered_json to_json(const Clustering& c, const std::vector<Encoding>& encoding = {}) {
  nlohmann::ordered_json j;
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["sse"] = c.sse;
  j["iterations"] = c.iterations;
  j["max_iter"] = c.max_iter;
  j["tol"] = c.tol;
  j["centroids"] = c.centroids;
  j["assignment"] = c.assignment;
  j["sizes"] = c.sizes();
  j["encoding_report"] = nlohmann::ordered_json::array();
  for (const auto& e : encoding) j["encoding_report"].push_back(to_json(e));
  return j;
}

}  // namespace clustcube
