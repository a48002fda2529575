#pragma once

// One kernel launch over a scattered patch set: buffer acquisition, gather,
// compute, scatter, release, each timed separately.

#include <chrono>
#include <optional>

#include "fvk/executors.hpp"
#include "fvk/memory.hpp"

namespace fvk {

struct LaunchConfig {
  Layout layout = Layout::AoS;
  Realization realization = Realization::Batched;
  TransferMode transfer = TransferMode::Pooled;
  ExecutorOptions executor;
  TimeStepContext ctx;
};

struct LaunchTimings {
  double totalSeconds = 0.0;
  double computeSeconds = 0.0;
  double transferSeconds = 0.0;
  double allocSeconds = 0.0;
};

struct LaunchResult {
  std::optional<double> maxEigenvalue;
  ExecutionTrace trace;
  LaunchTimings timings;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double secondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace detail

/// Reads patches.input(*) and leaves the updated interiors in patches.output(*).
inline LaunchResult launch(const KernelPlan& plan, const LaunchConfig& config, ScatteredPatchSet& patches,
                           DeviceArena& arena, ThreadPool& pool) {
  if (!(plan.shape == patches.shape())) throw ShapeMismatch("plan and patch set shapes differ");
  using detail::Clock;
  LaunchResult result;
  const auto launchStart = Clock::now();

  auto t = Clock::now();
  DeviceBuffers buffers = acquireBuffers(plan.shape, config.layout, config.transfer, arena);
  result.timings.allocSeconds += detail::secondsSince(t);

  if (buffers.batch) {
    t = Clock::now();
    gatherPatches(patches, *buffers.batch);
    result.timings.transferSeconds += detail::secondsSince(t);

    t = Clock::now();
    KernelResult kernel = runKernel(config.realization, plan, *buffers.batch, buffers.scratch, config.ctx,
                                    pool, config.executor);
    result.timings.computeSeconds = detail::secondsSince(t);
    result.maxEigenvalue = kernel.maxEigenvalue;
    result.trace = std::move(kernel.trace);

    t = Clock::now();
    scatterResults(*buffers.batch, patches);
    result.timings.transferSeconds += detail::secondsSince(t);
  } else {
    t = Clock::now();
    KernelResult kernel =
        plan.shape.dim == 2
            ? runRealization<2>(config.realization, plan, patches.inputField<2>(), patches.outputField<2>(),
                                buffers.scratch, config.ctx, pool, config.executor)
            : runRealization<3>(config.realization, plan, patches.inputField<3>(), patches.outputField<3>(),
                                buffers.scratch, config.ctx, pool, config.executor);
    result.timings.computeSeconds = detail::secondsSince(t);
    result.maxEigenvalue = kernel.maxEigenvalue;
    result.trace = std::move(kernel.trace);
  }

  t = Clock::now();
  releaseBuffers(buffers, arena);
  result.timings.allocSeconds += detail::secondsSince(t);

  result.timings.totalSeconds = detail::secondsSince(launchStart);
  return result;
}

}  // namespace fvk
