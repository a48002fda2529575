#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fvk/bench.hpp"
#include "test_support.hpp"

namespace fvk {
namespace {

std::vector<std::string> splitLines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> splitFields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

TEST(Lcg64, KnownSequence) {
  Lcg64 rng(0);
  EXPECT_EQ(rng.next(), 1442695040888963407ULL);
  EXPECT_EQ(rng.next(), 1876011003808476466ULL);
  Lcg64 u(0);
  EXPECT_EQ(u.uniform(), static_cast<double>(1442695040888963407ULL >> 11) * 0x1.0p-53);
}

TEST(InitField, FrozenCells) {
  // computed by an independent Python implementation of the generator and profile
  const ScatteredPatchSet a = initField({2, 4, 1}, 0);
  const std::vector<double> first(a.input(0).begin(), a.input(0).begin() + 4);
  EXPECT_EQ(first, (std::vector<double>{0.5748091945646966, -0.24881905391208586, -0.2521605251309483,
                                        1.7375901245842764}));

  const ScatteredPatchSet b = initField({3, 6, 2}, 42);
  const Enumerator<3> local(Layout::AoS, BatchShape{3, 6, 1}, true);
  const std::vector<double> expected{1.0702981679365946, -0.4287023640473672, -0.4999241378049175,
                                     -0.5325399090595534, 2.350712635616588};
  for (int k = 0; k < 5; ++k) EXPECT_EQ(b.input(1)[local(0, {2, 0, 5}, k)], expected[k]);
}

TEST(InitField, DeterministicAndAdmissible) {
  for (int dim : {2, 3}) {
    const BatchShape shape{dim, 6, 3};
    const ScatteredPatchSet a = initField(shape, 7);
    const ScatteredPatchSet b = initField(shape, 7);
    const ScatteredPatchSet c = initField(shape, 8);
    bool differs = false;
    for (int patch = 0; patch < 3; ++patch) {
      ASSERT_TRUE(testing::bitwiseEqual(a.input(patch), b.input(patch)));
      differs |= !testing::bitwiseEqual(a.input(patch), c.input(patch));
      for (double v : a.output(patch)) ASSERT_EQ(v, 0.0);
      const auto in = a.input(patch);
      const int n = dim + 2;
      for (std::size_t cell = 0; cell < in.size() / n; ++cell) {
        const double rho = in[cell * n];
        ASSERT_GE(rho, 0.5);
        ASSERT_LE(rho, 2.0);
        double kinetic = 0.0;
        for (int i = 0; i < dim; ++i) {
          const double u = in[cell * n + 1 + i] / rho;
          ASSERT_LE(std::abs(u), 0.5 + 1e-12);
          kinetic += 0.5 * rho * u * u;
        }
        const double p = 0.4 * (in[cell * n + n - 1] - kinetic);
        ASSERT_GT(p, 0.5 - 1e-9);
        ASSERT_LT(p, 2.0 + 1e-9);
      }
    }
    EXPECT_TRUE(differs);
  }
}

TEST(InitField, PatchesDiffer) {
  const ScatteredPatchSet s = initField({2, 4, 2}, 3);
  EXPECT_FALSE(testing::bitwiseEqual(s.input(0), s.input(1)));
}

BenchRecord fixedRecord(int dim, int p, int t, bool reduce) {
  BenchRecord r;
  r.config.dim = dim;
  r.config.p = p;
  r.config.patches = t;
  r.config.withReduction = reduce;
  r.config.samples = 4;
  r.meanTotalSeconds = 1.0 / 3.0;
  r.meanComputeSeconds = 0.1;
  r.meanTransferSeconds = 0.2;
  r.meanAllocSeconds = 1e-7;
  r.minTotalSeconds = 0.3;
  if (reduce) r.reducedEigenvalue = 1.183215956619923;
  return r;
}

TEST(CSV, ExactHeaderAndFormatting) {
  std::ostringstream os;
  writeCSV({fixedRecord(2, 4, 2, false), fixedRecord(3, 6, 1, true)}, os);
  EXPECT_EQ(os.str(),
            "dim,p,T,layout,realization,transfer_mode,reduction_strategy,with_reduction,samples,workers,"
            "mean_total_s,mean_compute_s,mean_transfer_s,mean_alloc_s,time_per_volume_update_s,"
            "time_per_unknown_update_s,reduced_eigenvalue\n"
            "2,4,2,aos,batched,pooled,tree,off,4,1,0.33333333333333331,0.10000000000000001,"
            "0.20000000000000001,9.9999999999999995e-08,0.010416666666666666,0.0026041666666666665,\n"
            "3,6,1,aos,batched,pooled,tree,on,4,1,0.33333333333333331,0.10000000000000001,"
            "0.20000000000000001,9.9999999999999995e-08,0.0015432098765432098,0.00030864197530864197,"
            "1.183215956619923\n");
}

TEST(CSV, ExtendedAddsMinimumColumn) {
  std::ostringstream os;
  writeCSV({fixedRecord(2, 4, 1, false)}, os, true);
  const auto lines = splitLines(os.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(splitFields(lines[0]).back(), "min_total_s");
  EXPECT_EQ(splitFields(lines[1]).back(), "0.29999999999999999");
}

TEST(CSV, QuotesFieldsWithSeparators) {
  EXPECT_EQ(csvField("aos"), "aos");
  EXPECT_EQ(csvField("a,b"), "\"a,b\"");
  EXPECT_EQ(csvField("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(CSV, ReEmissionIsByteIdentical) {
  const std::vector<BenchRecord> records{fixedRecord(2, 8, 16, true), fixedRecord(2, 4, 1, false)};
  std::ostringstream a, b;
  writeCSV(records, a);
  writeCSV(records, b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().find('\r'), std::string::npos);
}

TEST(Sweep, RowsMatchConfigsAndNormalisationRecomputes) {
  SweepGrid grid;
  grid.dims = {2, 3};
  grid.patchSizes = {4};
  grid.patchCounts = {2, 1};
  grid.realizations = {Realization::TaskGraph, Realization::Batched};
  grid.reductions = {true, false};
  grid.base.samples = 2;
  grid.base.workers = 2;
  const auto configs = expandGrid(grid);
  ASSERT_EQ(configs.size(), 16u);

  const auto records = runSweep(configs, {.verify = true});
  std::ostringstream os;
  writeCSV(records, os);
  const auto lines = splitLines(os.str());
  ASSERT_EQ(lines.size(), 17u);

  std::vector<std::tuple<int, int, int, int>> keys;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = splitFields(lines[i]);
    ASSERT_EQ(f.size(), 17u) << lines[i];
    const int dim = std::stoi(f[0]);
    const int p = std::stoi(f[1]);
    const int t = std::stoi(f[2]);
    const double mean = std::strtod(f[10].c_str(), nullptr);
    const double volumes = static_cast<double>(t) * std::pow(p, dim);
    EXPECT_EQ(std::strtod(f[14].c_str(), nullptr), mean / volumes);
    EXPECT_EQ(std::strtod(f[15].c_str(), nullptr), mean / (volumes * (dim + 2)));
    EXPECT_GT(mean, 0.0);
    EXPECT_EQ(f[16].empty(), f[7] == "off");
    keys.emplace_back(dim, p, t, static_cast<int>(parseRealization(f[4])));
  }
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
}

TEST(Sweep, ReplicaGridCoversThirtyConfigurations) {
  const auto configs = replicaSweep(BenchConfig{});
  ASSERT_EQ(configs.size(), 30u);
  for (const auto& c : configs) {
    EXPECT_EQ(c.dim, 2);
    EXPECT_TRUE(c.p == 4 || c.p == 6 || c.p == 8);
    EXPECT_EQ(c.patches & (c.patches - 1), 0);
    EXPECT_LE(c.patches, 512);
  }
}

TEST(Verify, EveryRealizationPassesAgainstOracle) {
  ThreadPool pool(2);
  for (Realization r : allRealizations) {
    for (TransferMode m : allTransferModes) {
      BenchConfig c;
      c.dim = 3;
      c.p = 4;
      c.patches = 3;
      c.realization = r;
      c.transfer = m;
      c.layout = Layout::AoSoA;
      c.withReduction = true;
      c.reductionStrategy = ReductionStrategy::SharedMax;
      EXPECT_NO_THROW(verifyAgainstOracle(c, pool)) << toString(r) << "/" << toString(m);
    }
  }
}

TEST(BenchConfig, RejectsInvalidValues) {
  BenchConfig c;
  c.samples = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.h = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace fvk
