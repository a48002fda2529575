#pragma once

// Algorithmic steps of the patch update kernel, their iteration ranges and
// masks, and the per-patch dependency graph.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fvk/patchdata.hpp"

namespace fvk {

enum class StepType { CopyInterior, FluxAlongAxis, EigenvalueAlongAxis, AccumulateAlongAxis, ReduceMaxEigenvalue };

struct StepKind {
  StepType type = StepType::CopyInterior;
  int axis = 0;

  static constexpr StepKind copy() { return {StepType::CopyInterior, 0}; }
  static constexpr StepKind flux(int n) { return {StepType::FluxAlongAxis, n}; }
  static constexpr StepKind eigenvalue(int n) { return {StepType::EigenvalueAlongAxis, n}; }
  static constexpr StepKind accumulate(int n) { return {StepType::AccumulateAlongAxis, n}; }
  static constexpr StepKind reduce() { return {StepType::ReduceMaxEigenvalue, 0}; }

  [[nodiscard]] bool isAxial() const {
    return type == StepType::FluxAlongAxis || type == StepType::EigenvalueAlongAxis ||
           type == StepType::AccumulateAlongAxis;
  }

  [[nodiscard]] std::string name() const {
    switch (type) {
      case StepType::CopyInterior: return "copy";
      case StepType::FluxAlongAxis: return "flux" + std::to_string(axis);
      case StepType::EigenvalueAlongAxis: return "eig" + std::to_string(axis);
      case StepType::AccumulateAlongAxis: return "acc" + std::to_string(axis);
      case StepType::ReduceMaxEigenvalue: return "reduce";
    }
    return "?";
  }

  friend auto operator<=>(const StepKind&, const StepKind&) = default;
};

/// Box of cells [lo, hi) per axis in patch-local coordinates.
struct CellRange {
  int dim = 2;
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{0, 0, 0};

  [[nodiscard]] std::size_t size() const {
    std::size_t n = 1;
    for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(hi[k] - lo[k]);
    return n;
  }

  [[nodiscard]] bool contains(std::span<const int> c) const {
    for (int k = 0; k < dim; ++k) {
      if (c[k] < lo[k] || c[k] >= hi[k]) return false;
    }
    return true;
  }

  template <int Dim>
  [[nodiscard]] bool contains(const Cell<Dim>& c) const {
    for (int k = 0; k < Dim; ++k) {
      if (c[k] < lo[k] || c[k] >= hi[k]) return false;
    }
    return true;
  }

  /// i-th cell of the range, coordinate 0 fastest.
  template <int Dim>
  [[nodiscard]] Cell<Dim> cellAt(std::size_t i) const {
    Cell<Dim> c;
    for (int k = 0; k < Dim; ++k) {
      const auto extent = static_cast<std::size_t>(hi[k] - lo[k]);
      c[k] = lo[k] + static_cast<int>(i % extent);
      i /= extent;
    }
    return c;
  }
};

template <int Dim, class F>
void forEachCell(const CellRange& range, F&& f) {
  static_assert(Dim == 2 || Dim == 3);
  Cell<Dim> c;
  if constexpr (Dim == 2) {
    for (c[1] = range.lo[1]; c[1] < range.hi[1]; ++c[1])
      for (c[0] = range.lo[0]; c[0] < range.hi[0]; ++c[0]) f(c);
  } else {
    for (c[2] = range.lo[2]; c[2] < range.hi[2]; ++c[2])
      for (c[1] = range.lo[1]; c[1] < range.hi[1]; ++c[1])
        for (c[0] = range.lo[0]; c[0] < range.hi[0]; ++c[0]) f(c);
  }
}

[[nodiscard]] inline CellRange iterationRange(StepKind kind, const BatchShape& shape) {
  CellRange r;
  r.dim = shape.dim;
  for (int k = 0; k < shape.dim; ++k) {
    r.lo[k] = 0;
    r.hi[k] = shape.p;
  }
  if (kind.type == StepType::FluxAlongAxis || kind.type == StepType::EigenvalueAlongAxis) {
    if (kind.axis < 0 || kind.axis >= shape.dim) throw std::out_of_range("step axis out of range");
    r.lo[kind.axis] = -1;
    r.hi[kind.axis] = shape.p + 1;
  }
  return r;
}

/// The union of all step ranges, [-1, p]^d, over which patch-wise lanes run.
[[nodiscard]] inline CellRange unionRange(const BatchShape& shape) {
  CellRange r;
  r.dim = shape.dim;
  for (int k = 0; k < shape.dim; ++k) {
    r.lo[k] = -1;
    r.hi[k] = shape.p + 1;
  }
  return r;
}

[[nodiscard]] inline bool maskPredicate(StepKind kind, std::span<const int> c, const BatchShape& shape) {
  return iterationRange(kind, shape).contains(c);
}

enum class ArrayRole { Input, Output, Flux, Lambda, Reduction };

struct ArrayRef {
  ArrayRole role = ArrayRole::Input;
  int axis = 0;
  friend bool operator==(const ArrayRef&, const ArrayRef&) = default;
};

struct StepSpec {
  StepKind kind;
  CellRange range;
  std::vector<ArrayRef> reads;
  ArrayRef writes;
};

[[nodiscard]] inline StepSpec makeStep(StepKind kind, const BatchShape& shape) {
  StepSpec s{kind, iterationRange(kind, shape), {}, {}};
  switch (kind.type) {
    case StepType::CopyInterior:
      s.reads = {{ArrayRole::Input, 0}};
      s.writes = {ArrayRole::Output, 0};
      break;
    case StepType::FluxAlongAxis:
      s.reads = {{ArrayRole::Input, 0}};
      s.writes = {ArrayRole::Flux, kind.axis};
      break;
    case StepType::EigenvalueAlongAxis:
      s.reads = {{ArrayRole::Input, 0}};
      s.writes = {ArrayRole::Lambda, kind.axis};
      break;
    case StepType::AccumulateAlongAxis:
      s.reads = {{ArrayRole::Input, 0},
                 {ArrayRole::Output, 0},
                 {ArrayRole::Flux, kind.axis},
                 {ArrayRole::Lambda, kind.axis}};
      s.writes = {ArrayRole::Output, 0};
      break;
    case StepType::ReduceMaxEigenvalue:
      s.reads = {{ArrayRole::Output, 0}};
      s.writes = {ArrayRole::Reduction, 0};
      break;
  }
  return s;
}

/// [copy, flux 0..d-1, eigenvalue 0..d-1, accumulate 0..d-1, (reduce)].
[[nodiscard]] inline std::vector<StepSpec> stepSequence(const BatchShape& shape, bool withReduction) {
  shape.validate();
  std::vector<StepSpec> steps;
  steps.push_back(makeStep(StepKind::copy(), shape));
  for (int n = 0; n < shape.dim; ++n) steps.push_back(makeStep(StepKind::flux(n), shape));
  for (int n = 0; n < shape.dim; ++n) steps.push_back(makeStep(StepKind::eigenvalue(n), shape));
  for (int n = 0; n < shape.dim; ++n) steps.push_back(makeStep(StepKind::accumulate(n), shape));
  if (withReduction) steps.push_back(makeStep(StepKind::reduce(), shape));
  return steps;
}

struct TaskNode {
  int patch = 0;
  StepKind kind;
};

class CycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// DAG over (patch, step) nodes.
class TaskGraph {
 public:
  int addNode(TaskNode node) {
    nodes_.push_back(node);
    successors_.emplace_back();
    predecessors_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  void addEdge(int from, int to) {
    successors_.at(from).push_back(to);
    predecessors_.at(to).push_back(from);
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const TaskNode& node(int i) const { return nodes_[i]; }
  [[nodiscard]] const std::vector<TaskNode>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<int>& successors(int i) const { return successors_[i]; }
  [[nodiscard]] const std::vector<int>& predecessors(int i) const { return predecessors_[i]; }

  [[nodiscard]] std::size_t edgeCount() const {
    std::size_t n = 0;
    for (const auto& s : successors_) n += s.size();
    return n;
  }

  [[nodiscard]] std::optional<int> find(int patch, StepKind kind) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].patch == patch && nodes_[i].kind == kind) return static_cast<int>(i);
    }
    return std::nullopt;
  }

  /// Kahn's algorithm; empty optional if the graph has a cycle.
  [[nodiscard]] std::optional<std::vector<int>> topologicalOrder() const {
    std::vector<int> indegree(nodes_.size());
    std::vector<int> ready;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      indegree[i] = static_cast<int>(predecessors_[i].size());
      if (indegree[i] == 0) ready.push_back(static_cast<int>(i));
    }
    std::vector<int> order;
    order.reserve(nodes_.size());
    while (!ready.empty()) {
      const int n = ready.back();
      ready.pop_back();
      order.push_back(n);
      for (int s : successors_[n]) {
        if (--indegree[s] == 0) ready.push_back(s);
      }
    }
    if (order.size() != nodes_.size()) return std::nullopt;
    return order;
  }

  [[nodiscard]] bool isAcyclic() const { return topologicalOrder().has_value(); }

  void requireAcyclic() const {
    if (!isAcyclic()) throw CycleError("task graph contains a cycle");
  }

  [[nodiscard]] bool hasPath(int from, int to) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<int> stack{from};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      if (n == to) return true;
      if (seen[n]) continue;
      seen[n] = 1;
      for (int s : successors_[n]) stack.push_back(s);
    }
    return false;
  }

  /// One "patch:step -> patch:step" line per edge, sorted.
  [[nodiscard]] std::string dumpEdges() const {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (int s : successors_[i]) {
        lines.push_back(label(static_cast<int>(i)) + " -> " + label(s));
      }
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  }

  [[nodiscard]] std::string label(int i) const {
    return std::to_string(nodes_[i].patch) + ":" + nodes_[i].kind.name();
  }

 private:
  std::vector<TaskNode> nodes_;
  std::vector<std::vector<int>> successors_;
  std::vector<std::vector<int>> predecessors_;
};

/// Per patch: copy, flux(n) and eigenvalue(n) are roots; accumulate(n)
/// waits for copy, flux(n), eigenvalue(n) and accumulate(n-1); reduce waits
/// for the last accumulate. Patches are independent.
[[nodiscard]] inline TaskGraph buildTaskGraph(const BatchShape& shape, bool withReduction) {
  shape.validate();
  TaskGraph g;
  const int d = shape.dim;
  for (int patch = 0; patch < shape.patches; ++patch) {
    const int copy = g.addNode({patch, StepKind::copy()});
    std::vector<int> fluxes(d), eigenvalues(d);
    for (int n = 0; n < d; ++n) fluxes[n] = g.addNode({patch, StepKind::flux(n)});
    for (int n = 0; n < d; ++n) eigenvalues[n] = g.addNode({patch, StepKind::eigenvalue(n)});
    int previous = -1;
    for (int n = 0; n < d; ++n) {
      const int acc = g.addNode({patch, StepKind::accumulate(n)});
      g.addEdge(copy, acc);
      g.addEdge(fluxes[n], acc);
      g.addEdge(eigenvalues[n], acc);
      if (previous >= 0) g.addEdge(previous, acc);
      previous = acc;
    }
    if (withReduction) {
      const int reduce = g.addNode({patch, StepKind::reduce()});
      g.addEdge(previous, reduce);
    }
  }
  return g;
}

struct KernelPlan {
  BatchShape shape;
  bool withReduction = false;
  std::vector<StepSpec> steps;
  TaskGraph dag;
};

[[nodiscard]] inline KernelPlan makePlan(const BatchShape& shape, bool withReduction) {
  return {shape, withReduction, stepSequence(shape, withReduction), buildTaskGraph(shape, withReduction)};
}

}  // namespace fvk
