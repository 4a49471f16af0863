#pragma once

// Processing plans for analysis tasks: dependency closure, deterministic
// topological order, and the concurrency limit a run may use.

#include <algorithm>
#include <atomic>
#include <functional>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "clustcube/error.hpp"

namespace clustcube {

struct ProcessingMode {
  enum class Kind { kSequential, kConcurrent, kConcurrentAuto };
  Kind kind = Kind::kSequential;
  std::size_t limit = 1;  // only meaningful for kConcurrent

  static ProcessingMode sequential() { return {}; }
  static ProcessingMode concurrent(std::size_t limit) { return {Kind::kConcurrent, std::max<std::size_t>(1, limit)}; }
  static ProcessingMode concurrent_auto() { return {Kind::kConcurrentAuto, 0}; }

  /// Worker count this mode allows on the current platform.
  std::size_t resolved_limit() const {
    switch (kind) {
      case Kind::kSequential: return 1;
      case Kind::kConcurrent: return limit;
      case Kind::kConcurrentAuto: return std::max(1u, std::thread::hardware_concurrency());
    }
    return 1;
  }
};

/// `element` may only run after `depends_on`.
struct Dependency {
  std::string element;
  std::string depends_on;

  bool operator==(const Dependency&) const = default;
};

struct ProcessingPlan {
  std::vector<std::string> elements;
  std::vector<Dependency> dependencies;
  ProcessingMode mode;
  std::size_t limit = 1;
  std::vector<std::string> order;
};

class CycleError : public DomainError {
 public:
  explicit CycleError(std::vector<std::string> cycle) : DomainError(describe(cycle)), cycle_(std::move(cycle)) {}
  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  static std::string describe(const std::vector<std::string>& cycle) {
    std::string s = "dependency cycle: ";
    for (std::size_t i = 0; i < cycle.size(); ++i) s += (i ? " -> " : "") + cycle[i];
    return s;
  }
  std::vector<std::string> cycle_;
};

/// Plans `requested`. With include_dependents, `dependencies` acts as a
/// registry: every element that transitively depends on a requested one joins
/// the plan, in discovery order. Ready elements are emitted lowest input
/// position first, so independent elements keep their input order.
inline ProcessingPlan plan_processing(const std::vector<std::string>& requested,
                                      const std::vector<Dependency>& dependencies, ProcessingMode mode,
                                      bool include_dependents) {
  ProcessingPlan plan;
  plan.mode = mode;
  plan.limit = mode.resolved_limit();

  std::map<std::string, std::size_t> position;
  auto add = [&](const std::string& e) {
    if (position.emplace(e, plan.elements.size()).second) plan.elements.push_back(e);
  };
  for (const auto& e : requested) add(e);

  if (include_dependents) {
    for (std::size_t i = 0; i < plan.elements.size(); ++i) {
      std::string current = plan.elements[i];
      for (const auto& dep : dependencies) {
        if (dep.depends_on == current) add(dep.element);
      }
    }
    for (const auto& dep : dependencies) {
      if (position.count(dep.element) && position.count(dep.depends_on)) plan.dependencies.push_back(dep);
    }
  } else {
    for (const auto& dep : dependencies) {
      if (!position.count(dep.element) || !position.count(dep.depends_on)) {
        throw ReferenceError("dependency " + dep.depends_on + " -> " + dep.element +
                             " references an element outside the plan");
      }
      plan.dependencies.push_back(dep);
    }
  }

  const std::size_t n = plan.elements.size();
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& dep : plan.dependencies) {
    out[position[dep.depends_on]].push_back(position[dep.element]);
    ++indegree[position[dep.element]];
  }
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    plan.order.push_back(plan.elements[i]);
    for (std::size_t j : out[i]) {
      if (--indegree[j] == 0) ready.insert(j);
    }
  }

  if (plan.order.size() != n) {
    // walk predecessors among the unordered nodes until one repeats
    std::vector<std::vector<std::size_t>> in(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j : out[i]) in[j].push_back(i);
    }
    std::size_t start = 0;
    while (indegree[start] == 0) ++start;
    std::vector<std::size_t> walk;
    std::map<std::size_t, std::size_t> seen;
    std::size_t cur = start;
    while (!seen.count(cur)) {
      seen[cur] = walk.size();
      walk.push_back(cur);
      for (std::size_t p : in[cur]) {
        if (indegree[p] != 0) {
          cur = p;
          break;
        }
      }
    }
    std::vector<std::string> cycle;
    for (std::size_t k = walk.size(); k-- > seen[cur];) cycle.push_back(plan.elements[walk[k]]);
    cycle.push_back(cycle.front());
    throw CycleError(cycle);
  }
  return plan;
}

/// Runs fn(0..count-1) on at most `limit` threads. Each index runs exactly
/// once; callers write results into per-index slots so output does not depend
/// on scheduling.
inline void parallel_for(std::size_t count, std::size_t limit, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min(limit, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace clustcube
