#pragma once

// Host-side emulation of the three device data-transfer modes:
//
//   Shared        kernels work in place on the scattered per-patch
//                 allocations through a pointer table; nothing is copied.
//   ExplicitCopy  batch buffers are allocated, filled, drained and freed on
//                 every launch.
//   Pooled        batch buffers are allocated once per shape and recycled.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fvk/microkernels.hpp"
#include "fvk/patchdata.hpp"

namespace fvk {

enum class TransferMode { Shared, ExplicitCopy, Pooled };

inline constexpr std::array<TransferMode, 3> allTransferModes{
    TransferMode::Shared, TransferMode::ExplicitCopy, TransferMode::Pooled};

[[nodiscard]] inline std::string_view toString(TransferMode m) {
  switch (m) {
    case TransferMode::Shared: return "shared";
    case TransferMode::ExplicitCopy: return "copy";
    case TransferMode::Pooled: return "pooled";
  }
  return "?";
}

[[nodiscard]] inline TransferMode parseTransferMode(std::string_view name) {
  for (auto m : allTransferModes) {
    if (toString(m) == name) return m;
  }
  throw std::invalid_argument("unknown memory mode '" + std::string(name) + "'");
}

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// T independently allocated patches, each stored AoS: input with halo,
/// output interior only.
class ScatteredPatchSet {
 public:
  explicit ScatteredPatchSet(const BatchShape& shape) : shape_(shape) {
    shape.validate();
    const std::size_t in = shape.inputSize() / shape.patches;
    const std::size_t out = shape.outputSize() / shape.patches;
    for (int i = 0; i < shape.patches; ++i) {
      inputs_.push_back(std::make_unique<double[]>(in));
      outputs_.push_back(std::make_unique<double[]>(out));
      inputPointers_.push_back(inputs_.back().get());
      outputPointers_.push_back(outputs_.back().get());
    }
  }

  [[nodiscard]] const BatchShape& shape() const { return shape_; }
  [[nodiscard]] std::size_t inputSizePerPatch() const { return shape_.inputSize() / shape_.patches; }
  [[nodiscard]] std::size_t outputSizePerPatch() const { return shape_.outputSize() / shape_.patches; }

  [[nodiscard]] std::span<double> input(int patch) { return {inputs_.at(patch).get(), inputSizePerPatch()}; }
  [[nodiscard]] std::span<double> output(int patch) { return {outputs_.at(patch).get(), outputSizePerPatch()}; }
  [[nodiscard]] std::span<const double> input(int patch) const { return {inputs_.at(patch).get(), inputSizePerPatch()}; }
  [[nodiscard]] std::span<const double> output(int patch) const { return {outputs_.at(patch).get(), outputSizePerPatch()}; }

  [[nodiscard]] std::span<const double* const> inputPointers() const { return inputPointers_; }
  [[nodiscard]] std::span<double* const> outputPointers() const { return outputPointers_; }

  template <int Dim>
  [[nodiscard]] ScatteredField<Dim, const double> inputField() const {
    return {inputPointers(), shape_, true};
  }
  template <int Dim>
  [[nodiscard]] ScatteredField<Dim> outputField() const {
    return {outputPointers(), shape_, false};
  }

 private:
  BatchShape shape_;
  std::vector<std::unique_ptr<double[]>> inputs_;
  std::vector<std::unique_ptr<double[]>> outputs_;
  std::vector<const double*> inputPointers_;
  std::vector<double*> outputPointers_;
};

namespace detail {

template <int Dim>
void gatherImpl(const ScatteredPatchSet& src, const PatchBatch& dst) {
  const auto from = src.inputField<Dim>();
  const BatchField<Dim> to(dst.input, Enumerator<Dim>(dst.layout, dst.shape, true));
  const CellRange all = unionRange(dst.shape);
  for (int patch = 0; patch < dst.shape.patches; ++patch) {
    if (dst.layout == Layout::AoS) {
      const auto patchIn = src.input(patch);
      std::copy(patchIn.begin(), patchIn.end(), dst.input.begin() + static_cast<std::ptrdiff_t>(patch * patchIn.size()));
      continue;
    }
    forEachCell<Dim>(all, [&](const Cell<Dim>& c) {
      for (int k = 0; k < Dim + 2; ++k) to(patch, c, k) = from(patch, c, k);
    });
  }
}

template <int Dim>
void scatterImpl(const PatchBatch& src, ScatteredPatchSet& dst) {
  const auto to = dst.outputField<Dim>();
  const BatchField<Dim, const double> from(std::span<const double>(src.output),
                                           Enumerator<Dim>(src.layout, src.shape, false));
  const CellRange interior = iterationRange(StepKind::copy(), src.shape);
  for (int patch = 0; patch < src.shape.patches; ++patch) {
    if (src.layout == Layout::AoS) {
      const auto patchOut = dst.output(patch);
      const auto begin = src.output.begin() + static_cast<std::ptrdiff_t>(patch * patchOut.size());
      std::copy(begin, begin + static_cast<std::ptrdiff_t>(patchOut.size()), patchOut.begin());
      continue;
    }
    forEachCell<Dim>(interior, [&](const Cell<Dim>& c) {
      for (int k = 0; k < Dim + 2; ++k) to(patch, c, k) = from(patch, c, k);
    });
  }
}

}  // namespace detail

/// Copies every patch's haloed input into the batch input, converting AoS
/// into the batch layout.
inline void gatherPatches(const ScatteredPatchSet& src, const PatchBatch& dst) {
  if (!(src.shape() == dst.shape)) throw ShapeMismatch("gather: patch set and batch shapes differ");
  dst.validate();
  if (dst.shape.dim == 2) {
    detail::gatherImpl<2>(src, dst);
  } else {
    detail::gatherImpl<3>(src, dst);
  }
}

/// Copies the batch output back into the per-patch outputs.
inline void scatterResults(const PatchBatch& src, ScatteredPatchSet& dst) {
  if (!(src.shape == dst.shape())) throw ShapeMismatch("scatter: batch and patch set shapes differ");
  src.validate();
  if (src.shape.dim == 2) {
    detail::scatterImpl<2>(src, dst);
  } else {
    detail::scatterImpl<3>(src, dst);
  }
}

class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Buffer store standing in for device memory. Pooled slots survive
/// release(); transient slots are freed by it.
class DeviceArena {
 public:
  struct Stats {
    std::size_t allocations = 0;
    std::size_t frees = 0;
    std::size_t liveBytes = 0;
    std::size_t highWaterBytes = 0;
  };

  enum class Slot : int { Input = 0, Output = 1, Reduction = 2, Flux = 16, Lambda = 32 };

  std::span<double> acquire(Slot slot, int axis, std::size_t count, bool pooled) {
    const int key = static_cast<int>(slot) + axis;
    if (pooled) {
      auto it = pooled_.find(key);
      if (it != pooled_.end() && it->second.size == count) return {it->second.data.get(), count};
      if (it != pooled_.end()) {
        free(it->second);
        pooled_.erase(it);
      }
      auto [pos, inserted] = pooled_.emplace(key, allocate(count));
      return {pos->second.data.get(), count};
    }
    transient_.push_back(allocate(count));
    return {transient_.back().data.get(), count};
  }

  /// Frees every transient buffer.
  void release() {
    for (auto& b : transient_) free(b);
    transient_.clear();
  }

  [[nodiscard]] const Stats& stats() const { return stats_; }

 private:
  struct Buffer {
    std::unique_ptr<double[]> data;
    std::size_t size = 0;
  };

  Buffer allocate(std::size_t count) {
    Buffer b;
    try {
      b.data = std::make_unique_for_overwrite<double[]>(count);
    } catch (const std::bad_alloc&) {
      throw AllocationError("device arena failed to allocate " + std::to_string(count * sizeof(double)) + " bytes");
    }
    b.size = count;
    ++stats_.allocations;
    stats_.liveBytes += count * sizeof(double);
    stats_.highWaterBytes = std::max(stats_.highWaterBytes, stats_.liveBytes);
    return b;
  }

  void free(Buffer& b) {
    if (!b.data) return;
    ++stats_.frees;
    stats_.liveBytes -= b.size * sizeof(double);
    b.data.reset();
    b.size = 0;
  }

  std::map<int, Buffer> pooled_;
  std::vector<Buffer> transient_;
  Stats stats_;
};

/// Buffers for one launch. batch is empty in Shared mode.
struct DeviceBuffers {
  std::optional<PatchBatch> batch;
  ScratchArrays scratch;
};

/// Shared mode allocates scratch only (pooled). ExplicitCopy allocates
/// everything fresh; Pooled recycles everything.
[[nodiscard]] inline DeviceBuffers acquireBuffers(const BatchShape& shape, Layout layout, TransferMode mode,
                                                  DeviceArena& arena) {
  shape.validate();
  using Slot = DeviceArena::Slot;
  const bool pooled = mode != TransferMode::ExplicitCopy;
  DeviceBuffers buffers;
  if (mode != TransferMode::Shared) {
    auto input = arena.acquire(Slot::Input, 0, shape.inputSize(), pooled);
    auto output = arena.acquire(Slot::Output, 0, shape.outputSize(), pooled);
    buffers.batch = PatchBatch{shape, layout, input, output};
  }
  buffers.scratch.shape = shape;
  buffers.scratch.layout = layout;
  for (int n = 0; n < shape.dim; ++n) {
    buffers.scratch.flux.push_back(arena.acquire(Slot::Flux, n, ScratchArrays::fluxSize(shape), pooled));
    buffers.scratch.lambda.push_back(arena.acquire(Slot::Lambda, n, ScratchArrays::lambdaSize(shape), pooled));
  }
  buffers.scratch.reduction = arena.acquire(Slot::Reduction, 0, ScratchArrays::reductionSize(shape), pooled);
  return buffers;
}

[[nodiscard]] inline std::size_t buffersPerLaunch(const BatchShape& shape, TransferMode mode) {
  const std::size_t scratch = 2 * static_cast<std::size_t>(shape.dim) + 1;
  return mode == TransferMode::Shared ? scratch : scratch + 2;
}

inline void releaseBuffers(DeviceBuffers& buffers, DeviceArena& arena) {
  buffers.batch.reset();
  buffers.scratch = {};
  arena.release();
}

}  // namespace fvk
