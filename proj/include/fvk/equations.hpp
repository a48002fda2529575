#pragma once

// Euler equations for an ideal gas: the user functions (directional flux and
// maximum directional wave speed) wrapped by the compute microkernels.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fvk {

/// Unknowns of one finite volume: density, Dim momentum components, total energy.
template <int Dim>
using ConservedState = std::array<double, Dim + 2>;

template <int Dim>
inline constexpr int unknownsFor = Dim + 2;

struct EulerParameters {
  double gamma = 1.4;

  void validate() const {
    if (!(gamma > 1.0)) {
      throw std::invalid_argument("adiabatic exponent must exceed 1, got " + std::to_string(gamma));
    }
  }
};

/// Raised for non-positive density or pressure.
class InvalidState : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Verify enables admissibility checks; None assumes admissible input.
enum class Check { Verify, None };

namespace detail {

template <int Dim>
[[nodiscard]] inline double kineticEnergy(const ConservedState<Dim>& q) {
  double momentumSquared = 0.0;
  for (int i = 0; i < Dim; ++i) {
    momentumSquared += q[1 + i] * q[1 + i];
  }
  return momentumSquared / (2.0 * q[0]);
}

}  // namespace detail

template <int Dim>
[[nodiscard]] inline double pressure(const ConservedState<Dim>& q, const EulerParameters& params,
                                     Check check = Check::Verify) {
  static_assert(Dim == 2 || Dim == 3, "only 2d and 3d are supported");
  if (check == Check::Verify && !(q[0] > 0.0)) {
    throw InvalidState("non-positive density " + std::to_string(q[0]));
  }
  const double p = (params.gamma - 1.0) * (q[Dim + 1] - detail::kineticEnergy<Dim>(q));
  if (check == Check::Verify && !(p > 0.0)) {
    throw InvalidState("non-positive pressure " + std::to_string(p));
  }
  return p;
}

/// Directional flux F_axis(q).
template <int Dim>
[[nodiscard]] inline ConservedState<Dim> flux(const ConservedState<Dim>& q, int axis,
                                              const EulerParameters& params,
                                              Check check = Check::Verify) {
  if (check == Check::Verify && (axis < 0 || axis >= Dim)) {
    throw std::out_of_range("flux axis " + std::to_string(axis) + " outside [0," +
                            std::to_string(Dim) + ")");
  }
  const double p = pressure<Dim>(q, params, check);
  const double normalVelocity = q[1 + axis] / q[0];

  ConservedState<Dim> f{};
  f[0] = q[1 + axis];
  for (int i = 0; i < Dim; ++i) {
    f[1 + i] = q[1 + i] * normalVelocity;
  }
  f[1 + axis] += p;
  f[Dim + 1] = normalVelocity * (q[Dim + 1] + p);
  return f;
}

/// |u_axis| + c with c the speed of sound.
template <int Dim>
[[nodiscard]] inline double maxEigenvalue(const ConservedState<Dim>& q, int axis,
                                          const EulerParameters& params,
                                          Check check = Check::Verify) {
  if (check == Check::Verify && (axis < 0 || axis >= Dim)) {
    throw std::out_of_range("eigenvalue axis " + std::to_string(axis) + " outside [0," +
                            std::to_string(Dim) + ")");
  }
  const double p = pressure<Dim>(q, params, check);
  const double soundSpeed = std::sqrt(params.gamma * p / q[0]);
  return std::abs(q[1 + axis] / q[0]) + soundSpeed;
}

/// Builds a conserved state from primitive variables (density, velocity, pressure).
template <int Dim>
[[nodiscard]] inline ConservedState<Dim> fromPrimitive(double density,
                                                       const std::array<double, Dim>& velocity,
                                                       double p, const EulerParameters& params) {
  ConservedState<Dim> q{};
  q[0] = density;
  double speedSquared = 0.0;
  for (int i = 0; i < Dim; ++i) {
    q[1 + i] = density * velocity[i];
    speedSquared += velocity[i] * velocity[i];
  }
  q[Dim + 1] = p / (params.gamma - 1.0) + 0.5 * density * speedSquared;
  return q;
}

}  // namespace fvk
