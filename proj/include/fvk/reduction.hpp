#pragma once

// Max-reductions over per-cell eigenvalues. Masked lanes contribute the
// neutral element 0, which is valid because every eigenvalue is >= 0.

#include <algorithm>
#include <array>
#include <atomic>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fvk/thread_pool.hpp"

namespace fvk {

enum class ReductionStrategy { GroupTree, SharedMax, Serial };

inline constexpr std::array<ReductionStrategy, 3> allReductionStrategies{
    ReductionStrategy::GroupTree, ReductionStrategy::SharedMax, ReductionStrategy::Serial};

inline constexpr double reductionNeutral = 0.0;

[[nodiscard]] inline std::string_view toString(ReductionStrategy s) {
  switch (s) {
    case ReductionStrategy::GroupTree: return "tree";
    case ReductionStrategy::SharedMax: return "shared-max";
    case ReductionStrategy::Serial: return "serial";
  }
  return "?";
}

[[nodiscard]] inline ReductionStrategy parseReductionStrategy(std::string_view name) {
  for (auto s : allReductionStrategies) {
    if (toString(s) == name) return s;
  }
  throw std::invalid_argument("unknown reduction strategy '" + std::string(name) + "'");
}

/// Lock-free running maximum.
class AtomicMax {
 public:
  explicit AtomicMax(double initial = reductionNeutral) : value_(initial) {}

  void update(double candidate) noexcept {
    double current = value_.load(std::memory_order_relaxed);
    while (candidate > current &&
           !value_.compare_exchange_weak(current, candidate, std::memory_order_relaxed)) {
    }
  }

  [[nodiscard]] double get() const noexcept { return value_.load(std::memory_order_relaxed); }

 private:
  std::atomic<double> value_;
};

/// Balanced pairwise maximum, the shape of a work-group tree reduction.
[[nodiscard]] inline double groupTreeMax(std::span<const double> values) {
  if (values.empty()) return reductionNeutral;
  if (values.size() == 1) return values[0];
  const std::size_t half = values.size() / 2;
  return std::max(groupTreeMax(values.first(half)), groupTreeMax(values.subspan(half)));
}

[[nodiscard]] inline double serialMax(std::span<const double> values) {
  double result = reductionNeutral;
  for (double v : values) result = std::max(result, v);
  return result;
}

/// Single-scope reduction without a pool: SharedMax funnels every lane through
/// one atomic.
[[nodiscard]] inline double reduceMax(std::span<const double> values, ReductionStrategy strategy) {
  switch (strategy) {
    case ReductionStrategy::GroupTree:
      return groupTreeMax(values);
    case ReductionStrategy::SharedMax: {
      AtomicMax shared;
      for (double v : values) shared.update(v);
      return shared.get();
    }
    case ReductionStrategy::Serial:
      return serialMax(values);
  }
  return reductionNeutral;
}

/// Batch-scope reduction over groups of groupSize lanes on a pool.
/// GroupTree: tree per group, then a tree over group results.
/// SharedMax: every lane updates one shared maximum.
/// Serial: one loop per group, then a serial pass over the group results.
[[nodiscard]] inline double reduceMax(std::span<const double> values, ReductionStrategy strategy,
                                      std::size_t groupSize, ThreadPool& pool) {
  if (values.empty()) return reductionNeutral;
  if (groupSize == 0) throw std::invalid_argument("group size must be positive");
  const std::size_t groups = (values.size() + groupSize - 1) / groupSize;
  const auto group = [&](std::size_t g) {
    const std::size_t lo = g * groupSize;
    return values.subspan(lo, std::min(groupSize, values.size() - lo));
  };

  if (strategy == ReductionStrategy::SharedMax) {
    AtomicMax shared;
    pool.parallelFor(values.size(), [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) shared.update(values[i]);
    });
    return shared.get();
  }

  std::vector<double> partial(groups);
  pool.parallelFor(groups, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t g = lo; g < hi; ++g) {
      partial[g] = strategy == ReductionStrategy::GroupTree ? groupTreeMax(group(g)) : serialMax(group(g));
    }
  });
  return strategy == ReductionStrategy::GroupTree ? groupTreeMax(partial) : serialMax(partial);
}

}  // namespace fvk
