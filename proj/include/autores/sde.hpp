#pragma once

// Fixed-step Ito integration: Euler-Maruyama, with an optional Milstein
// correction for the w1 channel (valid because the w2 column of the
// diffusion is state independent, so the noise is commutative).

#include <cmath>
#include <cstdint>
#include <functional>

#include "autores/model.hpp"
#include "autores/noise.hpp"
#include "autores/trajectory.hpp"

namespace autores {

enum class SdeScheme { euler_maruyama, milstein };

struct SdeOptions {
  double dt = 1e-3;
  double mu = 0.0;
  SdeScheme scheme = SdeScheme::euler_maruyama;
  std::size_t record_every = 1;  // 0 keeps only the two end points
};

/// Default step: 1e-3 for mu >= 0.05, min(1e-3, mu^2 / 10) below that.
[[nodiscard]] inline double default_sde_dt(double mu) noexcept {
  return mu >= 0.05 ? 1e-3 : std::min(1e-3, mu * mu / 10.0);
}

struct SdeSystem {
  std::function<Vec2(double, const Vec2&)> drift;
  std::function<Mat2(double, const Vec2&)> diffusion;
  std::function<Vec2(double, const Vec2&)> milstein_w1;  // needed for SdeScheme::milstein
};

/// Called after each step with the new time and state. Returning false stops
/// the path there (used for stopped processes).
using StepObserver = std::function<bool(double, const Vec2&)>;

namespace detail {

/// Inlined stepping loop. Step k consumes block k of the stream: (dW1, dW2)
/// in that order, each N(0, dt). The final step is shortened so that the end
/// time is hit exactly. Returns the number of steps taken.
template <class Drift, class Diffusion, class Milstein, class Observer>
long sde_loop(const Drift& drift, const Diffusion& diffusion, const Milstein& milstein, Vec2& x,
              double t0, double t1, const SdeOptions& opt, const NoiseStream& stream,
              Observer&& observe, TrajectoryMeta& meta) {
  const double span = t1 - t0;
  const auto full = static_cast<long>(std::floor(span / opt.dt * (1.0 + 1e-12)));
  const bool partial = span - static_cast<double>(full) * opt.dt > 1e-12 * opt.dt;
  const long steps = full + (partial ? 1 : 0);
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * opt.dt;
    const double t_next = (k + 1 == steps) ? t1 : t + opt.dt;
    const double h = t_next - t;
    const double sq = std::sqrt(h);
    const auto z = stream.normal_pair(static_cast<std::uint64_t>(k));
    const double dw1 = sq * z[0];
    const double dw2 = sq * z[1];
    const Vec2 f = drift(t, x);
    Vec2 next = {x[0] + f[0] * h, x[1] + f[1] * h};
    if (opt.mu != 0.0) {
      const Mat2 g = diffusion(t, x);
      next[0] += opt.mu * (g[0][0] * dw1 + g[0][1] * dw2);
      next[1] += opt.mu * (g[1][0] * dw1 + g[1][1] * dw2);
      if (opt.scheme == SdeScheme::milstein) {
        const Vec2 m = milstein(t, x);
        const double w = 0.5 * opt.mu * opt.mu * (dw1 * dw1 - h);
        next[0] += w * m[0];
        next[1] += w * m[1];
      }
    }
    if (!std::isfinite(next[0]) || !std::isfinite(next[1])) {
      meta.truncated = true;
      meta.truncated_at = t_next;
      return k;
    }
    x = next;
    if (!observe(t_next, x)) return k + 1;
  }
  return steps;
}

}  // namespace detail

/// Integrates dx = drift dt + mu G dW from t0 to t1. A path that produces a
/// non-finite state is truncated at the last finite sample and flagged in the
/// trajectory metadata.
[[nodiscard]] Trajectory integrate_sde(const SdeSystem& sys, const Vec2& x0, double t0, double t1,
                                       const SdeOptions& opt, const NoiseStream& stream,
                                       const StepObserver& observe = {});

}  // namespace autores
