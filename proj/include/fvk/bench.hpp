#pragma once

// Benchmark harness: seeded initial data, configuration sweeps, oracle
// verification and CSV emission.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fvk/launch.hpp"

namespace fvk {

/// 64-bit linear congruential generator (Knuth's MMIX constants).
class Lcg64 {
 public:
  static constexpr std::uint64_t multiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t increment = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ = state_ * multiplier + increment;
    return state_;
  }

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

namespace detail {

/// Triangle wave of period 2 composed with smoothstep; values in [0, 1].
inline double smoothProfile(double t) {
  t = std::fmod(t, 2.0);
  if (t < 0.0) t += 2.0;
  const double tri = t <= 1.0 ? t : 2.0 - t;
  return tri * tri * (3.0 - 2.0 * tri);
}

template <int Dim>
void initFieldImpl(ScatteredPatchSet& set, std::uint64_t seed, const EulerParameters& params) {
  const BatchShape& shape = set.shape();
  constexpr int primitives = Dim + 2;  // density, velocity components, pressure
  const std::array<double, primitives> lower = [] {
    std::array<double, primitives> a{};
    a[0] = 0.5;
    for (int i = 0; i < Dim; ++i) a[1 + i] = -0.5;
    a[Dim + 1] = 0.5;
    return a;
  }();
  const std::array<double, primitives> upper = [] {
    std::array<double, primitives> a{};
    a[0] = 2.0;
    for (int i = 0; i < Dim; ++i) a[1 + i] = 0.5;
    a[Dim + 1] = 2.0;
    return a;
  }();

  Lcg64 rng(seed);
  const Enumerator<Dim> local(Layout::AoS, BatchShape{Dim, shape.p, 1}, true);

  for (int patch = 0; patch < shape.patches; ++patch) {
    std::array<double, primitives> phase{};
    std::array<std::array<double, Dim>, primitives> wave{};
    for (int q = 0; q < primitives; ++q) {
      phase[q] = rng.uniform();
      for (int i = 0; i < Dim; ++i) wave[q][i] = 0.5 + rng.uniform();
    }
    auto data = set.input(patch);
    forEachCell<Dim>(unionRange(shape), [&](const Cell<Dim>& c) {
      std::array<double, primitives> w{};
      for (int q = 0; q < primitives; ++q) {
        double t = phase[q];
        for (int i = 0; i < Dim; ++i) t += wave[q][i] * ((c[i] + 0.5) / shape.p);
        w[q] = lower[q] + (upper[q] - lower[q]) * smoothProfile(t);
      }
      std::array<double, Dim> velocity{};
      for (int i = 0; i < Dim; ++i) velocity[i] = w[1 + i];
      const auto state = fromPrimitive<Dim>(w[0], velocity, w[Dim + 1], params);
      for (int k = 0; k < Dim + 2; ++k) data[local(0, c, k)] = state[k];
    });
  }
}

}  // namespace detail

/// Deterministic smooth admissible field over every patch including halos:
/// density and pressure in [0.5, 2], velocities in [-0.5, 0.5].
[[nodiscard]] inline ScatteredPatchSet initField(const BatchShape& shape, std::uint64_t seed,
                                                 const EulerParameters& params = {}) {
  ScatteredPatchSet set(shape);
  if (shape.dim == 2) {
    detail::initFieldImpl<2>(set, seed, params);
  } else {
    detail::initFieldImpl<3>(set, seed, params);
  }
  for (int patch = 0; patch < shape.patches; ++patch) {
    auto out = set.output(patch);
    std::fill(out.begin(), out.end(), 0.0);
  }
  return set;
}

struct BenchConfig {
  int dim = 2;
  int p = 4;
  int patches = 1;
  Layout layout = Layout::AoS;
  Realization realization = Realization::Batched;
  TransferMode transfer = TransferMode::Pooled;
  ReductionStrategy reductionStrategy = ReductionStrategy::GroupTree;
  bool withReduction = false;
  int samples = 16;
  int workers = 1;
  double gamma = 1.4;
  double dt = 1e-3;
  double h = 0.1;
  std::uint64_t seed = 0;
  int workgroupLimit = defaultWorkgroupLimit;

  [[nodiscard]] BatchShape shape() const { return {dim, p, patches}; }

  void validate() const {
    shape().validate();
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    if (workgroupLimit < 1) throw std::invalid_argument("workgroup limit must be positive");
    timeStepContext(Check::None).validate();
  }

  [[nodiscard]] TimeStepContext timeStepContext(Check check) const {
    return {dt, h, EulerParameters{gamma}, check};
  }

  [[nodiscard]] LaunchConfig launchConfig(Check check) const {
    LaunchConfig c;
    c.layout = layout;
    c.realization = realization;
    c.transfer = transfer;
    c.executor.reduction = reductionStrategy;
    c.executor.workgroupLimit = workgroupLimit;
    c.executor.assembly = DagAssembly::Dynamic;
    c.ctx = timeStepContext(check);
    return c;
  }

  [[nodiscard]] auto sortKey() const {
    return std::make_tuple(dim, p, patches, static_cast<int>(layout), static_cast<int>(realization),
                           static_cast<int>(transfer), static_cast<int>(reductionStrategy), withReduction,
                           samples, workers);
  }
};

struct BenchRecord {
  BenchConfig config;
  double meanTotalSeconds = 0.0;
  double meanComputeSeconds = 0.0;
  double meanTransferSeconds = 0.0;
  double meanAllocSeconds = 0.0;
  double minTotalSeconds = 0.0;
  std::optional<double> reducedEigenvalue;

  [[nodiscard]] double volumeUpdates() const {
    return static_cast<double>(config.shape().interiorVolumesPerPatch() * static_cast<std::size_t>(config.patches));
  }
  [[nodiscard]] double timePerVolumeUpdate() const { return meanTotalSeconds / volumeUpdates(); }
  [[nodiscard]] double timePerUnknownUpdate() const {
    return meanTotalSeconds / (volumeUpdates() * static_cast<double>(config.dim + 2));
  }
};

/// Raised when a realisation disagrees with the sequential oracle.
class VerifyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the configuration once with admissibility checks and compares the
/// outputs and reduced eigenvalue bit for bit with the sequential oracle.
inline void verifyAgainstOracle(const BenchConfig& config, ThreadPool& pool) {
  const BatchShape shape = config.shape();
  const KernelPlan plan = makePlan(shape, config.withReduction);
  ScatteredPatchSet patches = initField(shape, config.seed, EulerParameters{config.gamma});

  BatchStorage reference(shape, Layout::AoS);
  gatherPatches(patches, reference.view());
  ScratchStorage scratch(shape, Layout::AoS);
  const KernelResult expected = runKernel(Realization::Sequential, plan, reference.view(), scratch.arrays(),
                                          config.timeStepContext(Check::Verify), pool);

  DeviceArena arena;
  const LaunchResult actual = launch(plan, config.launchConfig(Check::Verify), patches, arena, pool);

  const std::size_t perPatch = patches.outputSizePerPatch();
  for (int patch = 0; patch < shape.patches; ++patch) {
    const auto out = patches.output(patch);
    for (std::size_t i = 0; i < perPatch; ++i) {
      const double want = reference.output()[patch * perPatch + i];
      if (std::bit_cast<std::uint64_t>(out[i]) != std::bit_cast<std::uint64_t>(want)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "verification failed for " << toString(config.realization) << "/" << toString(config.layout)
            << "/" << toString(config.transfer) << ": patch " << patch << " entry " << i << " is " << out[i]
            << ", oracle has " << want;
        throw VerifyFailure(msg.str());
      }
    }
  }
  if (expected.maxEigenvalue.has_value() != actual.maxEigenvalue.has_value() ||
      (expected.maxEigenvalue && std::bit_cast<std::uint64_t>(*expected.maxEigenvalue) !=
                                     std::bit_cast<std::uint64_t>(*actual.maxEigenvalue))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "verification failed for " << toString(config.realization) << ": reduced eigenvalue "
        << actual.maxEigenvalue.value_or(-1.0) << " differs from oracle " << expected.maxEigenvalue.value_or(-1.0);
    throw VerifyFailure(msg.str());
  }
}

/// Times one configuration: one warm-up launch, then config.samples launches.
inline BenchRecord runConfig(const BenchConfig& config, ThreadPool& pool) {
  config.validate();
  const BatchShape shape = config.shape();
  const KernelPlan plan = makePlan(shape, config.withReduction);
  ScatteredPatchSet patches = initField(shape, config.seed, EulerParameters{config.gamma});
  DeviceArena arena;
  const LaunchConfig launchConfig = config.launchConfig(Check::None);

  (void)launch(plan, launchConfig, patches, arena, pool);

  BenchRecord record;
  record.config = config;
  record.minTotalSeconds = std::numeric_limits<double>::infinity();
  for (int s = 0; s < config.samples; ++s) {
    const LaunchResult r = launch(plan, launchConfig, patches, arena, pool);
    record.meanTotalSeconds += r.timings.totalSeconds;
    record.meanComputeSeconds += r.timings.computeSeconds;
    record.meanTransferSeconds += r.timings.transferSeconds;
    record.meanAllocSeconds += r.timings.allocSeconds;
    record.minTotalSeconds = std::min(record.minTotalSeconds, r.timings.totalSeconds);
    record.reducedEigenvalue = r.maxEigenvalue;
  }
  const double n = config.samples;
  record.meanTotalSeconds /= n;
  record.meanComputeSeconds /= n;
  record.meanTransferSeconds /= n;
  record.meanAllocSeconds /= n;
  return record;
}

struct SweepOptions {
  bool verify = false;
  std::ostream* log = nullptr;
};

/// Runs every configuration (verifying first when requested) and returns the
/// records in configuration order.
inline std::vector<BenchRecord> runSweep(std::vector<BenchConfig> configs, const SweepOptions& options = {}) {
  std::stable_sort(configs.begin(), configs.end(),
                   [](const BenchConfig& a, const BenchConfig& b) { return a.sortKey() < b.sortKey(); });
  std::map<int, std::unique_ptr<ThreadPool>> pools;
  std::vector<BenchRecord> records;
  records.reserve(configs.size());
  for (const auto& config : configs) {
    config.validate();
    auto& pool = pools[config.workers];
    if (!pool) pool = std::make_unique<ThreadPool>(static_cast<std::size_t>(config.workers));
    if (options.verify) verifyAgainstOracle(config, *pool);
    records.push_back(runConfig(config, *pool));
    if (options.log) {
      *options.log << "d=" << config.dim << " p=" << config.p << " T=" << config.patches << " "
                   << toString(config.realization) << "/" << toString(config.layout) << "/"
                   << toString(config.transfer) << " mean " << records.back().meanTotalSeconds << " s\n";
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view csvHeader =
    "dim,p,T,layout,realization,transfer_mode,reduction_strategy,with_reduction,samples,workers,"
    "mean_total_s,mean_compute_s,mean_transfer_s,mean_alloc_s,time_per_volume_update_s,"
    "time_per_unknown_update_s,reduced_eigenvalue";

[[nodiscard]] inline std::string formatReal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// RFC 4180 field quoting.
[[nodiscard]] inline std::string csvField(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void writeCSV(const std::vector<BenchRecord>& records, std::ostream& os, bool extended = false) {
  os << csvHeader;
  if (extended) os << ",min_total_s";
  os << "\n";
  for (const auto& r : records) {
    const auto& c = r.config;
    os << c.dim << ',' << c.p << ',' << c.patches << ',' << csvField(toString(c.layout)) << ','
       << csvField(toString(c.realization)) << ',' << csvField(toString(c.transfer)) << ','
       << csvField(toString(c.reductionStrategy)) << ',' << (c.withReduction ? "on" : "off") << ','
       << c.samples << ',' << c.workers << ',' << formatReal(r.meanTotalSeconds) << ','
       << formatReal(r.meanComputeSeconds) << ',' << formatReal(r.meanTransferSeconds) << ','
       << formatReal(r.meanAllocSeconds) << ',' << formatReal(r.timePerVolumeUpdate()) << ','
       << formatReal(r.timePerUnknownUpdate()) << ','
       << (r.reducedEigenvalue ? formatReal(*r.reducedEigenvalue) : std::string());
    if (extended) os << ',' << formatReal(r.minTotalSeconds);
    os << "\n";
  }
}

inline void emitCSV(const std::vector<BenchRecord>& records, const std::string& path, bool extended = false) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  writeCSV(records, os, extended);
  os.flush();
  if (!os) throw std::runtime_error("failed writing CSV to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Configuration grids
// ---------------------------------------------------------------------------

struct SweepGrid {
  std::vector<int> dims{2};
  std::vector<int> patchSizes{4};
  std::vector<int> patchCounts{1};
  std::vector<Layout> layouts{Layout::AoS};
  std::vector<Realization> realizations{Realization::Batched};
  std::vector<TransferMode> transfers{TransferMode::Pooled};
  std::vector<ReductionStrategy> strategies{ReductionStrategy::GroupTree};
  std::vector<bool> reductions{false};
  BenchConfig base;
};

[[nodiscard]] inline std::vector<BenchConfig> expandGrid(const SweepGrid& grid) {
  std::vector<BenchConfig> out;
  for (int d : grid.dims)
    for (int p : grid.patchSizes)
      for (int t : grid.patchCounts)
        for (Layout l : grid.layouts)
          for (Realization r : grid.realizations)
            for (TransferMode m : grid.transfers)
              for (ReductionStrategy s : grid.strategies)
                for (bool red : grid.reductions) {
                  BenchConfig c = grid.base;
                  c.dim = d;
                  c.p = p;
                  c.patches = t;
                  c.layout = l;
                  c.realization = r;
                  c.transfer = m;
                  c.reductionStrategy = s;
                  c.withReduction = red;
                  out.push_back(c);
                }
  return out;
}

/// d=2, p in {4,6,8}, T in {1, 2, ..., 512}.
[[nodiscard]] inline std::vector<BenchConfig> replicaSweep(const BenchConfig& base) {
  SweepGrid grid;
  grid.base = base;
  grid.dims = {2};
  grid.patchSizes = {4, 6, 8};
  grid.patchCounts = {};
  for (int t = 1; t <= 512; t *= 2) grid.patchCounts.push_back(t);
  grid.layouts = {base.layout};
  grid.realizations = {base.realization};
  grid.transfers = {base.transfer};
  grid.strategies = {base.reductionStrategy};
  grid.reductions = {base.withReduction};
  return expandGrid(grid);
}

}  // namespace fvk
