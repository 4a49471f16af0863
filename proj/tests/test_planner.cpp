#include <atomic>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "clustcube/planner.hpp"

using namespace clustcube;

namespace {

bool before(const std::vector<std::string>& order, const std::string& a, const std::string& b) {
  auto ia = std::find(order.begin(), order.end(), a), ib = std::find(order.begin(), order.end(), b);
  return ia != order.end() && ib != order.end() && ia < ib;
}

std::vector<ProcessingMode> all_modes() {
  return {ProcessingMode::sequential(), ProcessingMode::concurrent(3), ProcessingMode::concurrent_auto()};
}

}  // namespace

TEST(Plan, IndependentElementsKeepInputOrder) {
  std::vector<std::string> elems{"d", "a", "c", "b"};
  auto plan = plan_processing(elems, {}, ProcessingMode::sequential(), false);
  EXPECT_EQ(plan.order, elems);
  EXPECT_EQ(plan.limit, 1u);
}

TEST(Plan, ChainRunsInDependencyOrderInEveryMode) {
  for (const auto& mode : all_modes()) {
    auto plan = plan_processing({"b", "a"}, {{"b", "a"}}, mode, false);
    EXPECT_EQ(plan.order, (std::vector<std::string>{"a", "b"}));
  }
}

TEST(Plan, IncludeDependentsClosesTransitively) {
  std::vector<Dependency> registry{{"b", "a"}, {"c", "b"}, {"x", "y"}};
  auto plan = plan_processing({"a"}, registry, ProcessingMode::sequential(), true);
  EXPECT_EQ(plan.elements.size(), 3u);
  EXPECT_EQ(plan.order, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(plan.dependencies.size(), 2u);
}

TEST(Plan, ForeignDependencyWithoutClosureIsAnError) {
  EXPECT_THROW(plan_processing({"a"}, {{"b", "a"}}, ProcessingMode::sequential(), false), ReferenceError);
}

TEST(Plan, CycleIsReported) {
  try {
    plan_processing({"a", "b", "c", "d"}, {{"b", "a"}, {"c", "b"}, {"b", "c"}}, ProcessingMode::sequential(), false);
    FAIL();
  } catch (const CycleError& e) {
    const auto& cyc = e.cycle();
    ASSERT_GE(cyc.size(), 3u);
    EXPECT_EQ(cyc.front(), cyc.back());
    std::set<std::string> members(cyc.begin(), cyc.end());
    EXPECT_EQ(members, (std::set<std::string>{"b", "c"}));
    EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos);
  }
  EXPECT_THROW(plan_processing({"a"}, {{"a", "a"}}, ProcessingMode::sequential(), false), CycleError);
}

TEST(Plan, AutoModeRecordsPlatformParallelism) {
  auto plan = plan_processing({"a"}, {}, ProcessingMode::concurrent_auto(), false);
  EXPECT_EQ(plan.limit, std::max(1u, std::thread::hardware_concurrency()));
  EXPECT_EQ(plan_processing({"a"}, {}, ProcessingMode::concurrent(0), false).limit, 1u);
  EXPECT_EQ(plan_processing({"a"}, {}, ProcessingMode::concurrent(6), false).limit, 6u);
}

TEST(Plan, RandomDagsGiveStableValidTopologicalOrders) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 12;
    std::vector<std::string> elems;
    for (std::size_t i = 0; i < n; ++i) elems.push_back("e" + std::to_string(i));
    std::shuffle(elems.begin(), elems.end(), rng);
    // edges only from a lower to a higher rank, so the graph is acyclic
    std::vector<Dependency> deps;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng() % 4 == 0) deps.push_back({"e" + std::to_string(j), "e" + std::to_string(i)});
      }
    }
    auto mode = all_modes()[rng() % 3];
    auto plan = plan_processing(elems, deps, mode, false);
    ASSERT_EQ(plan.order.size(), n);
    for (const auto& d : deps) EXPECT_TRUE(before(plan.order, d.depends_on, d.element));
    EXPECT_EQ(plan_processing(elems, deps, mode, false).order, plan.order);
    // among ready elements the earliest input position wins
    std::set<std::string> done;
    for (const auto& e : plan.order) {
      for (const auto& cand : elems) {
        if (done.count(cand) || cand == e) continue;
        bool ready = std::all_of(deps.begin(), deps.end(),
                                 [&](const Dependency& d) { return d.element != cand || done.count(d.depends_on); });
        if (!ready) continue;
        EXPECT_GT(std::find(elems.begin(), elems.end(), cand), std::find(elems.begin(), elems.end(), e));
        break;
      }
      done.insert(e);
    }
  }
}

TEST(ParallelFor, RunsEveryIndexOnce) {
  for (std::size_t limit : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(500);
    parallel_for(hits.size(), limit, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsWorkerFailure) {
  EXPECT_THROW(parallel_for(50, 4, [](std::size_t i) {
                 if (i == 17) throw DomainError("boom");
               }),
               DomainError);
}
