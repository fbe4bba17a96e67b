#pragma once

// Parametrically pumped pendulum
//   u'' + (1 + eps cos 2 Phi(t)) sin u + theta u' = 0,  Phi(t) = t - alpha t^2 / 2,
// its map to the slow autoresonance system (tau = eps t / 2) and envelope
// comparison against sqrt(4 eps r(tau)).

#include <array>
#include <vector>

#include "autores/model.hpp"
#include "autores/trajectory.hpp"

namespace autores {

struct PendulumParams {
  double eps = 0.05;
  double alpha = 3.125e-4;
  double theta = 2.5e-3;
  double mu = 0.0;  // only the deterministic pendulum is integrated
};

/// lambda = 8 alpha / eps^2, gamma = 2 theta / eps. Throws DomainError naming
/// the parameter whose derived value leaves its range.
[[nodiscard]] SystemParams map_params(const PendulumParams& pp);

/// Fast time t corresponding to slow time tau, and back.
[[nodiscard]] inline double slow_to_fast(double tau, const PendulumParams& pp) noexcept {
  return 2.0 * tau / pp.eps;
}
[[nodiscard]] inline double fast_to_slow(double t, const PendulumParams& pp) noexcept {
  return pp.eps * t / 2.0;
}

/// Pump phase Phi(t) = t - alpha t^2 / 2.
[[nodiscard]] inline double pump_phase(double t, const PendulumParams& pp) noexcept {
  return t - 0.5 * pp.alpha * t * t;
}

/// Leading-order inverse of u = sqrt(4 eps r) cos(psi / 2 + Phi(t)) at fast time
/// t: returns (u, u').
[[nodiscard]] Vec2 seed_from_slow(const State& s, double t, const PendulumParams& pp);

/// (u, u') samples every `sample_dt` on [t0, t1]; columns ("t", "u", "v").
[[nodiscard]] Trajectory integrate_pendulum(const PendulumParams& pp, double u0, double v0,
                                            double t0, double t1, double tol = 1e-10,
                                            double sample_dt = 0.05);

struct EnvelopeRow {
  double tau = 0.0;
  double envelope = 0.0;
  double predicted = 0.0;
  double relerr = 0.0;
};

struct EnvelopeReport {
  double max_relerr = 0.0;
  double mean_relerr = 0.0;
  std::size_t extrema = 0;
  std::vector<EnvelopeRow> rows;  // rows after the transient
};

/// Local extrema of u refined by a parabola through three samples: (t, |u|).
[[nodiscard]] std::vector<std::array<double, 2>> envelope_extrema(const Trajectory& pendulum);

/// Compares the extrema envelope of `pendulum` (fast time) with
/// sqrt(4 eps r(tau)) from `averaged` (slow time, columns r, psi) over the
/// common slow-time window, skipping its first 10%. Throws std::runtime_error
/// when fewer than 20 extrema fall in the window.
[[nodiscard]] EnvelopeReport envelope_compare(const Trajectory& pendulum,
                                              const Trajectory& averaged,
                                              const PendulumParams& pp);

/// Growth verdict used to match the averaged capture classifier: the largest
/// |u| over the last slow-time unit exceeds sqrt(4 eps lambda tau_end / 2).
[[nodiscard]] bool envelope_grown(const Trajectory& pendulum, const PendulumParams& pp);

}  // namespace autores
