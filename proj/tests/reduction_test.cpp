#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "fvk/reduction.hpp"
#include "test_support.hpp"

namespace fvk {
namespace {

TEST(ReduceMax, StrategiesAgreeBitwiseOnRandomInputs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(0.0, 5.0);
  ThreadPool pool(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> values(1 + rng() % 2000);
    for (auto& v : values) v = dist(rng);
    const double expected = *std::max_element(values.begin(), values.end());
    for (auto strategy : allReductionStrategies) {
      EXPECT_TRUE(testing::bitwiseEqual(reduceMax(values, strategy), expected));
      for (std::size_t group : {1u, 7u, 64u, 5000u}) {
        EXPECT_TRUE(testing::bitwiseEqual(reduceMax(values, strategy, group, pool), expected));
      }
    }
  }
}

TEST(ReduceMax, MaskedLanesContributeNeutralZero) {
  const std::vector<double> masked(16, reductionNeutral);
  for (auto strategy : allReductionStrategies) EXPECT_EQ(reduceMax(masked, strategy), 0.0);
  EXPECT_EQ(groupTreeMax({}), 0.0);
}

TEST(ReduceMax, SingleCell) {
  const std::vector<double> one{2.75};
  ThreadPool pool(2);
  for (auto strategy : allReductionStrategies) {
    EXPECT_EQ(reduceMax(one, strategy), 2.75);
    EXPECT_EQ(reduceMax(one, strategy, 4, pool), 2.75);
  }
}

TEST(AtomicMax, ConcurrentUpdates) {
  ThreadPool pool(4);
  AtomicMax shared;
  pool.parallelFor(100000, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) shared.update(static_cast<double>((i * 7919) % 100000));
  });
  EXPECT_EQ(shared.get(), 99999.0);
}

TEST(ReductionStrategy, ParsesNames) {
  for (auto s : allReductionStrategies) EXPECT_EQ(parseReductionStrategy(toString(s)), s);
  EXPECT_THROW((void)parseReductionStrategy("atomic"), std::invalid_argument);
}

TEST(ThreadPool, ParallelForCoversRangeOnceAndPropagatesErrors) {
  ThreadPool pool(3);
  std::vector<int> hits(1003, 0);
  pool.parallelFor(hits.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) ++hits[i];
  });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(pool.parallelFor(10, [](std::size_t lo, std::size_t) {
                 if (lo == 0) throw std::runtime_error("boom");
               }),
               std::runtime_error);
  EXPECT_THROW(ThreadPool(0), std::invalid_argument);
}

}  // namespace
}  // namespace fvk
