#include "autores/pendulum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "autores/ode.hpp"

namespace autores {

namespace {

constexpr std::size_t kMinExtrema = 20;

// Linear interpolation of component `c` of a trajectory at time t (clamped).
double interp(const Trajectory& tr, double t, int c) {
  const auto it = std::lower_bound(tr.times.begin(), tr.times.end(), t);
  if (it == tr.times.begin()) return tr.states.front()[c];
  if (it == tr.times.end()) return tr.states.back()[c];
  const auto i = static_cast<std::size_t>(it - tr.times.begin());
  const double w = (t - tr.times[i - 1]) / (tr.times[i] - tr.times[i - 1]);
  return (1.0 - w) * tr.states[i - 1][c] + w * tr.states[i][c];
}

}  // namespace

SystemParams map_params(const PendulumParams& pp) {
  if (!(pp.eps > 0.0 && pp.eps < 1.0)) throw DomainError("eps", "must lie in (0, 1)");
  const double lambda = 8.0 * pp.alpha / (pp.eps * pp.eps);
  const double gamma = 2.0 * pp.theta / pp.eps;
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("alpha", "derived lambda = 8 alpha / eps^2 must be > 0");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("theta", "derived gamma = 2 theta / eps must lie in (0, 1)");
  }
  return SystemParams(lambda, gamma);
}

Vec2 seed_from_slow(const State& s, double t, const PendulumParams& pp) {
  if (!(s.r >= 0.0)) throw DomainError("r", "amplitude must be >= 0");
  const double amp = std::sqrt(4.0 * pp.eps * s.r);
  const double phase = 0.5 * s.psi + pump_phase(t, pp);
  return {amp * std::cos(phase), -amp * std::sin(phase)};
}

Trajectory integrate_pendulum(const PendulumParams& pp, double u0, double v0, double t0,
                              double t1, double tol, double sample_dt) {
  if (pp.mu != 0.0) throw DomainError("mu", "only the deterministic pendulum is integrated");
  if (!(pp.eps >= 0.0)) throw DomainError("eps", "must be >= 0");
  if (!(pp.theta >= 0.0)) throw DomainError("theta", "must be >= 0");
  if (!(sample_dt > 0.0)) throw DomainError("sample_dt", "must be positive");
  const double eps = pp.eps, alpha = pp.alpha, theta = pp.theta;
  const Field f = [=](double t, const Vec2& x) {
    const double phi = t - 0.5 * alpha * t * t;
    return Vec2{x[1], -(1.0 + eps * std::cos(2.0 * phi)) * std::sin(x[0]) - theta * x[1]};
  };
  const std::vector<double> times = uniform_times(t0, t1, sample_dt);
  Trajectory tr = integrate_ode(f, {u0, v0}, t0, t1, tol, times);
  tr.time_label = "t";
  tr.labels[0] = "u";
  tr.labels[1] = "v";
  return tr;
}

std::vector<std::array<double, 2>> envelope_extrema(const Trajectory& p) {
  std::vector<std::array<double, 2>> out;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    const double a = p.states[i - 1][0], b = p.states[i][0], c = p.states[i + 1][0];
    const bool is_max = b > a && b >= c;
    const bool is_min = b < a && b <= c;
    if (!is_max && !is_min) continue;
    // Parabola through three equally spaced samples.
    const double h = p.times[i + 1] - p.times[i];
    const double denom = a - 2.0 * b + c;
    double shift = 0.0, value = b;
    if (denom != 0.0) {
      shift = 0.5 * (a - c) / denom;
      value = b - 0.25 * (a - c) * shift;
    }
    out.push_back({p.times[i] + shift * h, std::abs(value)});
  }
  return out;
}

EnvelopeReport envelope_compare(const Trajectory& pendulum, const Trajectory& averaged,
                                const PendulumParams& pp) {
  if (pendulum.empty() || averaged.empty()) throw std::runtime_error("envelope: empty trajectory");
  const double lo = std::max(fast_to_slow(pendulum.times.front(), pp), averaged.times.front());
  const double hi = std::min(fast_to_slow(pendulum.back_time(), pp), averaged.back_time());
  if (!(hi > lo)) throw std::runtime_error("envelope: trajectories share no slow-time window");
  const double start = lo + 0.1 * (hi - lo);

  EnvelopeReport rep;
  double sum = 0.0;
  for (const auto& [t, env] : envelope_extrema(pendulum)) {
    const double tau = fast_to_slow(t, pp);
    if (tau < lo || tau > hi) continue;
    ++rep.extrema;
    if (tau < start) continue;
    const double r = std::max(0.0, interp(averaged, tau, 0));
    const double predicted = std::sqrt(4.0 * pp.eps * r);
    const double rel = std::abs(env - predicted) / predicted;
    rep.rows.push_back({tau, env, predicted, rel});
    rep.max_relerr = std::max(rep.max_relerr, rel);
    sum += rel;
  }
  if (rep.extrema < kMinExtrema || rep.rows.empty()) {
    throw std::runtime_error("envelope: fewer than 20 extrema in the common window");
  }
  rep.mean_relerr = sum / static_cast<double>(rep.rows.size());
  return rep;
}

bool envelope_grown(const Trajectory& pendulum, const PendulumParams& pp) {
  const SystemParams sp = map_params(pp);
  const double t_end = pendulum.back_time();
  const double tau_end = fast_to_slow(t_end, pp);
  const double t_from = slow_to_fast(tau_end - 1.0, pp);
  double peak = 0.0;
  for (std::size_t i = 0; i < pendulum.size(); ++i) {
    if (pendulum.times[i] >= t_from) peak = std::max(peak, std::abs(pendulum.states[i][0]));
  }
  return peak > std::sqrt(4.0 * pp.eps * sp.lambda() * tau_end / 2.0);
}

}  // namespace autores
