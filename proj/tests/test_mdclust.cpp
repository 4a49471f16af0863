#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "clustcube/mdclust.hpp"
#include "kmeans_oracle.hpp"

using namespace clustcube;
using testing_support::matrix;

namespace {

ObjectSet mixed_objects() {
  ObjectSet os;
  os.schema.attributes = {
      {"colour", ColumnType::kText, Role::kFeature, "T", "colour"},
      {"price", ColumnType::kReal, Role::kFeature, "T", "price"},
      {"flag", ColumnType::kBoolean, Role::kFeature, "T", "flag"},
      {"city", ColumnType::kText, Role::kCoordinate, "T", "city"},
      {"stay", ColumnType::kInteger, Role::kFeature, "T", "stay"},
  };
  const char* colours[] = {"red", "blue", "red", "green", "blue", "red", "red", "green", "blue", "red"};
  double prices[] = {10.5, 3.25, 7, 12, 4.5, 9, 1, 2, 8.75, 6};
  for (int i = 0; i < 10; ++i) {
    os.objects.push_back({std::string(colours[i]), prices[i], i % 3 == 0, std::string("c"),
                          static_cast<std::int64_t>(i * i % 7)});
  }
  return os;
}

}  // namespace

TEST(Featurize, OneHotInFirstAppearanceOrder) {
  ObjectSet os;
  os.schema.attributes = {{"c", ColumnType::kText, Role::kFeature, "T", "c"}};
  for (const char* v : {"red", "blue", "red"}) os.objects.push_back({std::string(v)});
  auto m = featurize(os);
  ASSERT_EQ(m.n_cols(), 2u);
  EXPECT_EQ(m.columns[0], "c=red");
  EXPECT_EQ(m.columns[1], "c=blue");
  EXPECT_EQ(m.values, (std::vector<double>{1, 0, 0, 1, 1, 0}));
  EXPECT_EQ(m.encoding[0].kind, Encoding::Kind::kOneHot);
  EXPECT_EQ(m.encoding[0].categories, (std::vector<std::string>{"red", "blue"}));
}

TEST(Featurize, ConstantColumnIsZero) {
  ObjectSet os;
  os.schema.attributes = {{"x", ColumnType::kReal, Role::kFeature, "T", "x"}};
  for (int i = 0; i < 5; ++i) os.objects.push_back({0.1});
  auto m = featurize(os);
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(Featurize, ZScoresMatchTwoPassOracle) {
  auto os = mixed_objects();
  auto m = featurize(os);
  // columns: colour x3, price, flag x2, stay
  ASSERT_EQ(m.n_cols(), 7u);
  ASSERT_EQ(m.n_rows(), 10u);
  for (std::size_t attr : {1u, 4u}) {
    std::vector<double> x;
    for (const auto& o : os.objects) x.push_back(*as_double(o[attr]));
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    double sd = std::sqrt(var / static_cast<double>(x.size()));
    std::size_t col = attr == 1 ? 3 : 6;
    double zm = 0, zv = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_NEAR(m.at(i, col), (x[i] - mean) / sd, 1e-12);
      zm += m.at(i, col);
    }
    zm /= 10;
    for (std::size_t i = 0; i < 10; ++i) zv += (m.at(i, col) - zm) * (m.at(i, col) - zm);
    EXPECT_NEAR(zm, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(zv / 10), 1.0, 1e-9);
  }
  EXPECT_EQ(m.columns[4], "flag=true");
}

TEST(Featurize, NullsAreImputedOrRejected) {
  ObjectSet os;
  os.schema.attributes = {{"x", ColumnType::kReal, Role::kFeature, "T", "x"},
                          {"c", ColumnType::kText, Role::kFeature, "T", "c"}};
  os.objects = {{1.0, std::string("a")}, {Value{}, Value{}}, {3.0, std::string("a")}};
  try {
    featurize(os);
    FAIL();
  } catch (const DomainError& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("'x'"), std::string::npos);
    EXPECT_NE(what.find("object 1"), std::string::npos);
  }
  auto m = featurize(os, {true});
  EXPECT_EQ(m.at(1, 0), 0.0);  // mean-imputed, then z-scored
  EXPECT_EQ(m.encoding[1].categories, (std::vector<std::string>{"a", std::string(kNullCategory)}));
  EXPECT_EQ(m.at(1, 2), 1.0);
}

TEST(Featurize, NoFeaturesIsAnError) {
  ObjectSet os;
  os.schema.attributes = {{"c", ColumnType::kText, Role::kCoordinate, "T", "c"}};
  EXPECT_THROW(featurize(os), DomainError);
}

TEST(KMeans, SingleClusterIsTheMean) {
  std::mt19937_64 rng(2);
  auto m = testing_support::random_matrix(rng, 30, 3);
  auto c = kmeans(m, 1, 9);
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += m.at(i, j);
  }
  double sse = 0;
  for (auto& v : mean) v /= 30;
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 3; ++j) sse += (m.at(i, j) - mean[j]) * (m.at(i, j) - mean[j]);
  }
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(c.centroids[0][j], mean[j], 1e-9);
  EXPECT_NEAR(c.sse, sse, 1e-9);
}

TEST(KMeans, KEqualsNGivesSingletons) {
  auto m = matrix({{0, 0}, {1, 0}, {0, 1}, {5, 5}, {2, 3}});
  auto c = kmeans(m, 5, 4);
  EXPECT_EQ(c.sse, 0.0);
  EXPECT_EQ(c.sizes(), std::vector<std::size_t>(5, 1));
}

TEST(KMeans, KEqualsNWithDuplicatePointsStillFillsEveryCluster) {
  auto m = matrix({{1, 1}, {1, 1}, {1, 1}, {2, 2}});
  auto c = kmeans(m, 4, 0);
  EXPECT_EQ(c.sizes(), std::vector<std::size_t>(4, 1));
  EXPECT_EQ(c.sse, 0.0);
}

TEST(KMeans, RejectsBadK) {
  auto m = matrix({{0}, {1}});
  EXPECT_THROW(kmeans(m, 0, 1), DomainError);
  EXPECT_THROW(kmeans(m, 3, 1), DomainError);
  EXPECT_THROW(kmeans(m, 1, 1, 0), DomainError);
}

TEST(KMeans, EightPointsNeverBeatTheExhaustiveOptimum) {
  auto m = matrix({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {5, 5}, {5, 6}, {6, 5}, {9, 0}});
  auto c = kmeans(m, 2, 7);
  double opt = testing_support::best_two_partition_sse(m);
  EXPECT_GE(c.sse, opt);
  for (std::size_t i = 1; i < c.sse_history.size(); ++i) EXPECT_LE(c.sse_history[i], c.sse_history[i - 1]);
}

TEST(KMeans, PropertiesOnRandomInstances) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng() % 11, d = 1 + rng() % 3;
    auto m = testing_support::random_matrix(rng, n, d);
    std::size_t k = 1 + rng() % n;
    auto seed = rng();
    auto c = kmeans(m, k, seed);
    ASSERT_EQ(c.assignment.size(), n);
    std::size_t total = 0;
    for (auto s : c.sizes()) {
      EXPECT_GT(s, 0u);
      total += s;
    }
    EXPECT_EQ(total, n);
    for (std::size_t i = 1; i < c.sse_history.size(); ++i) EXPECT_LE(c.sse_history[i], c.sse_history[i - 1]);
    EXPECT_EQ(c.sse, c.sse_history.back());
    EXPECT_LE(testing_support::centroid_mean_gap(m, c), 1e-9);
    EXPECT_EQ(kmeans(m, k, seed), c);
    if (k == 2) EXPECT_GE(c.sse, testing_support::best_two_partition_sse(m));
  }
}

TEST(KMeans, EquidistantPointGoesToLowestIndex) {
  std::vector<std::vector<double>> centers{{0.0}, {2.0}};
  double dist = 0;
  std::vector<double> x{1.0};
  EXPECT_EQ(detail::nearest(x, centers, &dist), 0u);
  EXPECT_EQ(dist, 1.0);
}

TEST(KMeans, ExportHasDocumentedFields) {
  auto m = matrix({{0}, {1}, {10}, {11}});
  auto j = to_json(kmeans(m, 2, 5), m.encoding);
  for (const char* f : {"k", "seed", "sse", "iterations", "centroids", "assignment", "encoding_report"}) {
    EXPECT_TRUE(j.contains(f)) << f;
  }
  EXPECT_EQ(j["seed"], 5);
}

TEST(Silhouette, WellSeparatedPairs) {
  auto m = matrix({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  Clustering c;
  c.k = 2;
  c.assignment = {0, 0, 1, 1};
  // direct evaluation: a = 1, b = (10 + sqrt(101)) / 2 for every point
  double b = (10 + std::sqrt(101.0)) / 2;
  EXPECT_NEAR(silhouette(m, c), (b - 1) / b, 1e-12);
  EXPECT_GT(silhouette(m, c), 0.5);
}

TEST(Silhouette, IdenticalPointsGiveZero) {
  auto m = matrix({{3, 3}, {3, 3}, {3, 3}, {3, 3}});
  Clustering c;
  c.k = 2;
  c.assignment = {0, 1, 0, 1};
  EXPECT_EQ(silhouette(m, c), 0.0);
}

TEST(Silhouette, SingletonContributesZero) {
  auto m = matrix({{0}, {1}, {5}});
  Clustering c;
  c.k = 2;
  c.assignment = {0, 0, 1};
  // points 0 and 1: a = 1, b = 5 and 4
  double expected = ((5.0 - 1) / 5 + (4.0 - 1) / 4 + 0) / 3;
  EXPECT_NEAR(silhouette(m, c), expected, 1e-15);
}

TEST(Silhouette, NeedsTwoClusters) {
  auto m = matrix({{0}, {1}});
  Clustering c;
  c.k = 1;
  c.assignment = {0, 0};
  EXPECT_THROW(silhouette(m, c), DomainError);
}
