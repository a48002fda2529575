#pragma once

// Per-volume compute bodies. Each microkernel touches exactly the entries
// addressed by its own (patch, cell, axis); all address arithmetic is hidden
// behind the field views.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "fvk/equations.hpp"
#include "fvk/kernelgraph.hpp"
#include "fvk/patchdata.hpp"

namespace fvk {

struct TimeStepContext {
  double dt = 1e-3;
  double h = 0.1;
  EulerParameters params;
  Check check = Check::None;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("time step size must be positive");
    if (!(h > 0.0)) throw std::invalid_argument("volume size must be positive");
    params.validate();
  }
};

/// Non-owning views of the kernel temporaries. flux[n] holds N*T*(p+2)^d
/// entries, lambda[n] T*(p+2)^d; reduction T*(p+2)^d lanes.
struct ScratchArrays {
  BatchShape shape;
  Layout layout = Layout::AoS;
  std::vector<std::span<double>> flux;
  std::vector<std::span<double>> lambda;
  std::span<double> reduction;

  [[nodiscard]] static std::size_t fluxSize(const BatchShape& s) { return s.inputSize(); }
  [[nodiscard]] static std::size_t lambdaSize(const BatchShape& s) {
    return s.haloedVolumesPerPatch() * static_cast<std::size_t>(s.patches);
  }
  [[nodiscard]] static std::size_t reductionSize(const BatchShape& s) { return lambdaSize(s); }
};

class ScratchStorage {
 public:
  ScratchStorage(const BatchShape& shape, Layout layout)
      : shape_(shape),
        layout_(layout),
        flux_(shape.dim, std::vector<double>(ScratchArrays::fluxSize(shape))),
        lambda_(shape.dim, std::vector<double>(ScratchArrays::lambdaSize(shape))),
        reduction_(ScratchArrays::reductionSize(shape)) {}

  [[nodiscard]] ScratchArrays arrays() {
    ScratchArrays s{shape_, layout_, {}, {}, reduction_};
    for (auto& f : flux_) s.flux.emplace_back(f);
    for (auto& l : lambda_) s.lambda.emplace_back(l);
    return s;
  }

 private:
  BatchShape shape_;
  Layout layout_;
  std::vector<std::vector<double>> flux_;
  std::vector<std::vector<double>> lambda_;
  std::vector<double> reduction_;
};

template <int Dim>
struct ScratchFields {
  std::array<BatchField<Dim>, Dim> flux;
  std::array<BatchField<Dim>, Dim> lambda;

  explicit ScratchFields(const ScratchArrays& s) {
    if (s.shape.dim != Dim || static_cast<int>(s.flux.size()) != Dim ||
        static_cast<int>(s.lambda.size()) != Dim) {
      throw std::invalid_argument("scratch arrays do not match kernel dimension");
    }
    const Enumerator<Dim> fluxEnum(s.layout, s.shape, true);
    const Enumerator<Dim> lambdaEnum(s.layout, s.shape, true, 1);
    for (int n = 0; n < Dim; ++n) {
      flux[n] = BatchField<Dim>(s.flux[n], fluxEnum);
      lambda[n] = BatchField<Dim>(s.lambda[n], lambdaEnum);
    }
  }
};

template <int Dim, class In, class Out>
inline void copyMicrokernel(const In& in, const Out& out, int patch, const Cell<Dim>& c) {
  for (int k = 0; k < Dim + 2; ++k) out(patch, c, k) = in(patch, c, k);
}

template <int Dim, class In>
inline void fluxMicrokernel(const In& in, const ScratchFields<Dim>& scratch, int patch,
                            const Cell<Dim>& c, int axis, const TimeStepContext& ctx) {
  const auto f = flux<Dim>(loadState<Dim>(in, patch, c), axis, ctx.params, ctx.check);
  const auto& target = scratch.flux[axis];
  for (int k = 0; k < Dim + 2; ++k) target(patch, c, k) = f[k];
}

template <int Dim, class In>
inline void eigenvalueMicrokernel(const In& in, const ScratchFields<Dim>& scratch, int patch,
                                  const Cell<Dim>& c, int axis, const TimeStepContext& ctx) {
  scratch.lambda[axis](patch, c, 0) =
      maxEigenvalue<Dim>(loadState<Dim>(in, patch, c), axis, ctx.params, ctx.check);
}

/// Rusanov update along one axis:
///   F_{c-1/2} = (f(L) + f(c))/2 - max(l(L), l(c))/2 * (Q(c) - Q(L))
///   F_{c+1/2} = (f(c) + f(R))/2 - max(l(c), l(R))/2 * (Q(R) - Q(c))
///   Q_new(c) += dt/h * (F_{c-1/2} - F_{c+1/2})
/// The jump term uses the old solution.
template <int Dim, class In, class Out>
inline void accumulateMicrokernel(const In& in, const Out& out, const ScratchFields<Dim>& scratch,
                                  int patch, const Cell<Dim>& c, int axis,
                                  const TimeStepContext& ctx) {
  Cell<Dim> left = c;
  Cell<Dim> right = c;
  --left[axis];
  ++right[axis];

  const auto& f = scratch.flux[axis];
  const auto& lambda = scratch.lambda[axis];
  const double speedLeft = std::max(lambda(patch, left, 0), lambda(patch, c, 0));
  const double speedRight = std::max(lambda(patch, c, 0), lambda(patch, right, 0));
  const double scale = ctx.dt / ctx.h;

  for (int k = 0; k < Dim + 2; ++k) {
    const double qL = in(patch, left, k);
    const double qC = in(patch, c, k);
    const double qR = in(patch, right, k);
    const double fL = f(patch, left, k);
    const double fC = f(patch, c, k);
    const double fR = f(patch, right, k);
    const double faceLeft = 0.5 * (fL + fC) - 0.5 * speedLeft * (qC - qL);
    const double faceRight = 0.5 * (fC + fR) - 0.5 * speedRight * (qR - qC);
    out(patch, c, k) += scale * (faceLeft - faceRight);
  }
}

/// Largest directional eigenvalue of the updated solution at one cell.
template <int Dim, class Out>
[[nodiscard]] inline double reduceMicrokernelValue(const Out& out, int patch, const Cell<Dim>& c,
                                                   const TimeStepContext& ctx) {
  const auto q = loadState<Dim>(out, patch, c);
  double result = 0.0;
  for (int n = 0; n < Dim; ++n) {
    result = std::max(result, maxEigenvalue<Dim>(q, n, ctx.params, ctx.check));
  }
  return result;
}

/// Dispatches every step except the reduction.
template <int Dim, class In, class Out>
inline void runMicrokernel(StepKind kind, const In& in, const Out& out,
                           const ScratchFields<Dim>& scratch, int patch, const Cell<Dim>& c,
                           const TimeStepContext& ctx) {
  switch (kind.type) {
    case StepType::CopyInterior:
      copyMicrokernel<Dim>(in, out, patch, c);
      break;
    case StepType::FluxAlongAxis:
      fluxMicrokernel<Dim>(in, scratch, patch, c, kind.axis, ctx);
      break;
    case StepType::EigenvalueAlongAxis:
      eigenvalueMicrokernel<Dim>(in, scratch, patch, c, kind.axis, ctx);
      break;
    case StepType::AccumulateAlongAxis:
      accumulateMicrokernel<Dim>(in, out, scratch, patch, c, kind.axis, ctx);
      break;
    case StepType::ReduceMaxEigenvalue:
      throw std::logic_error("reduction is not a plain microkernel step");
  }
}

}  // namespace fvk
