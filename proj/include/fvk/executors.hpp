#pragma once

// Kernel realisations over a batch of patches:
//
//   Sequential  plain nested loops in canonical order; defines the golden output.
//   PatchWise   one parallel region over patches. Each patch walks the union
//               range [-1,p]^d once per step, masks lanes outside the step's
//               range, and synchronises per patch between steps. One global wait.
//   Batched     one collapsed parallel-for per step over all patches' cells,
//               with a global wait after every step.
//   TaskGraph   one node per (patch, step), executed under dependency edges.
//
// All realisations evaluate every cell with identical arithmetic, so their
// outputs are bitwise equal.

#include <atomic>
#include <cstdint>
#include <functional>
#include <latch>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fvk/kernelgraph.hpp"
#include "fvk/microkernels.hpp"
#include "fvk/patchdata.hpp"
#include "fvk/reduction.hpp"
#include "fvk/thread_pool.hpp"

namespace fvk {

enum class Realization { Sequential, PatchWise, Batched, TaskGraph };

inline constexpr std::array<Realization, 4> allRealizations{
    Realization::Sequential, Realization::PatchWise, Realization::Batched, Realization::TaskGraph};

[[nodiscard]] inline std::string_view toString(Realization r) {
  switch (r) {
    case Realization::Sequential: return "sequential";
    case Realization::PatchWise: return "patch-wise";
    case Realization::Batched: return "batched";
    case Realization::TaskGraph: return "task-graph";
  }
  return "?";
}

[[nodiscard]] inline Realization parseRealization(std::string_view name) {
  for (auto r : allRealizations) {
    if (toString(r) == name) return r;
  }
  throw std::invalid_argument("unknown realization '" + std::string(name) + "'");
}

/// Dynamic assembly rebuilds the DAG inside the launch; Prebuilt reuses plan.dag.
enum class DagAssembly { Dynamic, Prebuilt };

inline constexpr int defaultWorkgroupLimit = 1024;

struct ExecutorOptions {
  ReductionStrategy reduction = ReductionStrategy::GroupTree;
  int workgroupLimit = defaultWorkgroupLimit;
  DagAssembly assembly = DagAssembly::Dynamic;
};

struct ExecutionTrace {
  int globalSyncCount = 0;
  int launchCount = 0;
  std::vector<std::uint64_t> perStepTaskCounts;  // indexed like plan.steps
  std::uint64_t maskedInvocationCount = 0;
  std::uint64_t executedInvocationCount = 0;
  int peakConcurrentTasks = 0;

  friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

struct KernelResult {
  std::optional<double> maxEigenvalue;
  ExecutionTrace trace;
};

/// The patch needs (p+2)^d cooperating lanes, more than a workgroup may hold.
class WorkgroupLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void checkWorkgroupLimit(const BatchShape& shape, int limit) {
  const std::size_t lanes = shape.haloedVolumesPerPatch();
  if (lanes > static_cast<std::size_t>(limit)) {
    throw WorkgroupLimitExceeded("patch-wise kernel needs " + std::to_string(lanes) +
                                 " lanes per patch but the workgroup limit is " +
                                 std::to_string(limit) +
                                 "; the patch has to be broken down manually");
  }
}

namespace detail {

class StepCounters {
 public:
  explicit StepCounters(std::size_t steps)
      : counts_(std::make_unique<std::atomic<std::uint64_t>[]>(steps)), size_(steps) {
    for (std::size_t i = 0; i < steps; ++i) counts_[i].store(0, std::memory_order_relaxed);
  }

  void add(std::size_t step, std::uint64_t n) { counts_[step].fetch_add(n, std::memory_order_relaxed); }

  void addMasked(std::uint64_t n) { masked_.fetch_add(n, std::memory_order_relaxed); }

  void fill(ExecutionTrace& trace) const {
    trace.perStepTaskCounts.assign(size_, 0);
    trace.executedInvocationCount = 0;
    for (std::size_t i = 0; i < size_; ++i) {
      trace.perStepTaskCounts[i] = counts_[i].load(std::memory_order_relaxed);
      trace.executedInvocationCount += trace.perStepTaskCounts[i];
    }
    trace.maskedInvocationCount = masked_.load(std::memory_order_relaxed);
  }

 private:
  std::unique_ptr<std::atomic<std::uint64_t>[]> counts_;
  std::size_t size_;
  std::atomic<std::uint64_t> masked_{0};
};

template <int Dim, class In, class Out>
struct KernelArgs {
  const KernelPlan& plan;
  const In& in;
  const Out& out;
  const ScratchArrays& raw;
  ScratchFields<Dim> scratch;
  const TimeStepContext& ctx;

  KernelArgs(const KernelPlan& p, const In& i, const Out& o, const ScratchArrays& s,
             const TimeStepContext& c)
      : plan(p), in(i), out(o), raw(s), scratch(s), ctx(c) {
    if (p.shape.dim != Dim) throw std::invalid_argument("plan dimension does not match kernel");
    if (!(s.shape == p.shape)) throw std::invalid_argument("scratch shape does not match plan");
    if (s.reduction.size() < ScratchArrays::reductionSize(p.shape)) {
      throw std::invalid_argument("reduction scratch too small");
    }
    c.validate();
  }

  /// Runs one step over one patch's full range, serially.
  std::uint64_t runPatchStep(StepKind kind, const CellRange& range, int patch) const {
    forEachCell<Dim>(range, [&](const Cell<Dim>& c) {
      runMicrokernel<Dim>(kind, in, out, scratch, patch, c, ctx);
    });
    return range.size();
  }

  /// Reduction over one patch's interior cells.
  double reducePatch(int patch, ReductionStrategy strategy, AtomicMax& shared) const {
    const CellRange range = iterationRange(StepKind::reduce(), plan.shape);
    switch (strategy) {
      case ReductionStrategy::GroupTree: {
        const std::size_t lanes = range.size();
        auto buffer = raw.reduction.subspan(static_cast<std::size_t>(patch) * plan.shape.haloedVolumesPerPatch(), lanes);
        for (std::size_t i = 0; i < lanes; ++i) {
          buffer[i] = reduceMicrokernelValue<Dim>(out, patch, range.cellAt<Dim>(i), ctx);
        }
        return groupTreeMax(buffer);
      }
      case ReductionStrategy::SharedMax: {
        double local = reductionNeutral;
        forEachCell<Dim>(range, [&](const Cell<Dim>& c) {
          const double v = reduceMicrokernelValue<Dim>(out, patch, c, ctx);
          shared.update(v);
          local = std::max(local, v);
        });
        return local;
      }
      case ReductionStrategy::Serial: {
        double local = reductionNeutral;
        forEachCell<Dim>(range, [&](const Cell<Dim>& c) {
          local = std::max(local, reduceMicrokernelValue<Dim>(out, patch, c, ctx));
        });
        return local;
      }
    }
    return reductionNeutral;
  }
};

inline std::size_t stepIndex(const KernelPlan& plan, StepKind kind) {
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    if (plan.steps[i].kind == kind) return i;
  }
  throw std::logic_error("step " + kind.name() + " is not part of the plan");
}

}  // namespace detail

template <int Dim, class In, class Out>
KernelResult runSequential(const KernelPlan& plan, const In& in, const Out& out,
                           const ScratchArrays& scratch, const TimeStepContext& ctx) {
  const detail::KernelArgs<Dim, In, Out> args(plan, in, out, scratch, ctx);
  detail::StepCounters counters(plan.steps.size());
  KernelResult result;

  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const StepSpec& step = plan.steps[s];
    if (step.kind.type == StepType::ReduceMaxEigenvalue) {
      double global = reductionNeutral;
      for (int patch = 0; patch < plan.shape.patches; ++patch) {
        forEachCell<Dim>(step.range, [&](const Cell<Dim>& c) {
          global = std::max(global, reduceMicrokernelValue<Dim>(out, patch, c, ctx));
        });
      }
      counters.add(s, step.range.size() * plan.shape.patches);
      result.maxEigenvalue = global;
      continue;
    }
    for (int patch = 0; patch < plan.shape.patches; ++patch) {
      counters.add(s, args.runPatchStep(step.kind, step.range, patch));
    }
  }
  counters.fill(result.trace);
  result.trace.peakConcurrentTasks = 1;
  return result;
}

template <int Dim, class In, class Out>
KernelResult runBatched(const KernelPlan& plan, const In& in, const Out& out,
                        const ScratchArrays& scratch, const TimeStepContext& ctx, ThreadPool& pool,
                        const ExecutorOptions& options) {
  const detail::KernelArgs<Dim, In, Out> args(plan, in, out, scratch, ctx);
  detail::StepCounters counters(plan.steps.size());
  KernelResult result;
  const auto patches = static_cast<std::size_t>(plan.shape.patches);

  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const StepSpec& step = plan.steps[s];
    const std::size_t perPatch = step.range.size();

    if (step.kind.type == StepType::ReduceMaxEigenvalue) {
      AtomicMax shared;
      std::vector<double> partial(patches, reductionNeutral);
      if (options.reduction == ReductionStrategy::SharedMax) {
        // every lane of the batch updates the shared maximum
        pool.parallelFor(patches * perPatch, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t i = lo; i < hi; ++i) {
            const int patch = static_cast<int>(i / perPatch);
            const auto c = step.range.cellAt<Dim>(i % perPatch);
            shared.update(reduceMicrokernelValue<Dim>(out, patch, c, ctx));
          }
          counters.add(s, hi - lo);
        });
        result.maxEigenvalue = shared.get();
      } else {
        // one group per patch
        pool.parallelFor(patches, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t patch = lo; patch < hi; ++patch) {
            partial[patch] = args.reducePatch(static_cast<int>(patch), options.reduction, shared);
          }
          counters.add(s, (hi - lo) * perPatch);
        }, 1);
        result.maxEigenvalue = options.reduction == ReductionStrategy::GroupTree
                                   ? groupTreeMax(partial)
                                   : serialMax(partial);
      }
    } else {
      pool.parallelFor(patches * perPatch, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const int patch = static_cast<int>(i / perPatch);
          const auto c = step.range.cellAt<Dim>(i % perPatch);
          runMicrokernel<Dim>(step.kind, in, out, args.scratch, patch, c, ctx);
        }
        counters.add(s, hi - lo);
      });
    }
    ++result.trace.globalSyncCount;
    ++result.trace.launchCount;
  }
  counters.fill(result.trace);
  result.trace.peakConcurrentTasks = static_cast<int>(pool.size());
  return result;
}

template <int Dim, class In, class Out>
KernelResult runPatchWise(const KernelPlan& plan, const In& in, const Out& out,
                          const ScratchArrays& scratch, const TimeStepContext& ctx, ThreadPool& pool,
                          const ExecutorOptions& options) {
  checkWorkgroupLimit(plan.shape, options.workgroupLimit);
  const detail::KernelArgs<Dim, In, Out> args(plan, in, out, scratch, ctx);
  detail::StepCounters counters(plan.steps.size());
  KernelResult result;

  const auto patches = static_cast<std::size_t>(plan.shape.patches);
  const IterationSpace<Dim> space(BatchShape{Dim, plan.shape.p, 1}, true);
  const std::size_t lanes = space.size();
  AtomicMax shared;
  std::vector<double> partial(patches, reductionNeutral);

  pool.parallelFor(patches, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t patchIdx = lo; patchIdx < hi; ++patchIdx) {
      const int patch = static_cast<int>(patchIdx);
      for (std::size_t s = 0; s < plan.steps.size(); ++s) {
        const StepSpec& step = plan.steps[s];
        std::uint64_t executed = 0;

        if (step.kind.type == StepType::ReduceMaxEigenvalue) {
          auto buffer = scratch.reduction.subspan(patchIdx * lanes, lanes);
          if (options.reduction == ReductionStrategy::Serial) {
            // lane 0 loops over the interior, all other lanes are masked
            double local = reductionNeutral;
            forEachCell<Dim>(step.range, [&](const Cell<Dim>& c) {
              local = std::max(local, reduceMicrokernelValue<Dim>(out, patch, c, ctx));
            });
            executed = step.range.size();
            partial[patchIdx] = local;
          } else {
            for (std::size_t lane = 0; lane < lanes; ++lane) {
              const auto c = space.unpack(space.delinearize(lane)).cell;
              double v = reductionNeutral;
              if (step.range.contains<Dim>(c)) {
                v = reduceMicrokernelValue<Dim>(out, patch, c, ctx);
                ++executed;
              }
              if (options.reduction == ReductionStrategy::SharedMax) {
                shared.update(v);
              } else {
                buffer[lane] = v;
              }
            }
            if (options.reduction == ReductionStrategy::GroupTree) {
              partial[patchIdx] = groupTreeMax(buffer);
            }
          }
        } else {
          for (std::size_t lane = 0; lane < lanes; ++lane) {
            const auto c = space.unpack(space.delinearize(lane)).cell;
            if (step.range.contains<Dim>(c)) {
              runMicrokernel<Dim>(step.kind, in, out, args.scratch, patch, c, ctx);
              ++executed;
            }
          }
        }
        counters.add(s, executed);
        counters.addMasked(lanes - executed);
        // per-patch barrier: the next step starts after this loop completes
      }
    }
  }, 1);

  if (plan.withReduction) {
    result.maxEigenvalue = options.reduction == ReductionStrategy::SharedMax ? shared.get()
                           : options.reduction == ReductionStrategy::GroupTree ? groupTreeMax(partial)
                                                                              : serialMax(partial);
  }
  result.trace.globalSyncCount = 1;
  result.trace.launchCount = 1;
  counters.fill(result.trace);
  result.trace.peakConcurrentTasks = static_cast<int>(std::min(patches, pool.size()));
  return result;
}

template <int Dim, class In, class Out>
KernelResult runTaskGraph(const KernelPlan& plan, const In& in, const Out& out,
                          const ScratchArrays& scratch, const TimeStepContext& ctx, ThreadPool& pool,
                          const ExecutorOptions& options) {
  const detail::KernelArgs<Dim, In, Out> args(plan, in, out, scratch, ctx);
  detail::StepCounters counters(plan.steps.size());
  KernelResult result;

  TaskGraph assembled;
  const TaskGraph* graph = &plan.dag;
  if (options.assembly == DagAssembly::Dynamic) {
    assembled = buildTaskGraph(plan.shape, plan.withReduction);
    graph = &assembled;
  }
  graph->requireAcyclic();

  const std::size_t nodeCount = graph->size();
  std::vector<std::size_t> stepOf(nodeCount);
  auto pending = std::make_unique<std::atomic<int>[]>(nodeCount);
  for (std::size_t i = 0; i < nodeCount; ++i) {
    stepOf[i] = detail::stepIndex(plan, graph->node(static_cast<int>(i)).kind);
    pending[i].store(static_cast<int>(graph->predecessors(static_cast<int>(i)).size()));
  }

  AtomicMax shared;
  std::vector<double> partial(static_cast<std::size_t>(plan.shape.patches), reductionNeutral);
  std::atomic<int> running{0};
  std::atomic<int> peak{0};
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::latch done(static_cast<std::ptrdiff_t>(nodeCount));

  std::function<void(int)> execute = [&](int id) {
    const int now = running.fetch_add(1) + 1;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }

    if (!failed.load()) {
      try {
        const TaskNode& node = graph->node(id);
        const StepSpec& step = plan.steps[stepOf[id]];
        if (node.kind.type == StepType::ReduceMaxEigenvalue) {
          partial[node.patch] = args.reducePatch(node.patch, options.reduction, shared);
          counters.add(stepOf[id], step.range.size());
        } else {
          counters.add(stepOf[id], args.runPatchStep(node.kind, step.range, node.patch));
        }
      } catch (...) {
        std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
        failed.store(true);
      }
    }

    running.fetch_sub(1);
    for (int successor : graph->successors(id)) {
      if (pending[successor].fetch_sub(1) == 1) {
        pool.submit([&execute, successor] { execute(successor); });
      }
    }
    done.count_down();
  };

  for (std::size_t i = 0; i < nodeCount; ++i) {
    if (graph->predecessors(static_cast<int>(i)).empty()) {
      const int id = static_cast<int>(i);
      pool.submit([&execute, id] { execute(id); });
    }
  }
  done.wait();
  if (failure) std::rethrow_exception(failure);

  if (plan.withReduction) {
    result.maxEigenvalue = options.reduction == ReductionStrategy::SharedMax ? shared.get()
                           : options.reduction == ReductionStrategy::GroupTree ? groupTreeMax(partial)
                                                                              : serialMax(partial);
  }
  result.trace.globalSyncCount = 1;
  result.trace.launchCount = static_cast<int>(nodeCount);
  counters.fill(result.trace);
  result.trace.peakConcurrentTasks = peak.load();
  return result;
}

template <int Dim, class In, class Out>
KernelResult runRealization(Realization realization, const KernelPlan& plan, const In& in,
                            const Out& out, const ScratchArrays& scratch,
                            const TimeStepContext& ctx, ThreadPool& pool,
                            const ExecutorOptions& options) {
  switch (realization) {
    case Realization::Sequential: return runSequential<Dim>(plan, in, out, scratch, ctx);
    case Realization::PatchWise: return runPatchWise<Dim>(plan, in, out, scratch, ctx, pool, options);
    case Realization::Batched: return runBatched<Dim>(plan, in, out, scratch, ctx, pool, options);
    case Realization::TaskGraph: return runTaskGraph<Dim>(plan, in, out, scratch, ctx, pool, options);
  }
  throw std::invalid_argument("unknown realization");
}

/// Runs a realisation on a contiguous batch.
inline KernelResult runKernel(Realization realization, const KernelPlan& plan, const PatchBatch& batch,
                              const ScratchArrays& scratch, const TimeStepContext& ctx,
                              ThreadPool& pool, const ExecutorOptions& options = {}) {
  batch.validate();
  if (!(batch.shape == plan.shape)) throw std::invalid_argument("batch shape does not match plan");
  if (plan.shape.dim == 2) {
    return runRealization<2>(realization, plan, batch.inputField<2>(), batch.outputField<2>(),
                             scratch, ctx, pool, options);
  }
  return runRealization<3>(realization, plan, batch.inputField<3>(), batch.outputField<3>(), scratch,
                           ctx, pool, options);
}

}  // namespace fvk
