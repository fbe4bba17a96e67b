#include "autores/ode.hpp"

#include <vector>

namespace autores {
namespace detail {

namespace {

double error_norm(const Vec2& err, const Vec2& y, const Vec2& y_new, double tol) {
  double worst = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sc = tol * (1.0 + std::max(std::abs(y[i]), std::abs(y_new[i])));
    worst = std::max(worst, std::abs(err[i]) / sc);
  }
  return std::isfinite(worst) ? worst : std::numeric_limits<double>::infinity();
}

double initial_step(const Field& f, double t, const Vec2& y, const Vec2& k1, double dir,
                    double tol) {
  // Hairer-Norsett-Wanner starting step heuristic.
  double d0 = 0.0, d1 = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sc = tol * (1.0 + std::abs(y[i]));
    d0 = std::max(d0, std::abs(y[i]) / sc);
    d1 = std::max(d1, std::abs(k1[i]) / sc);
  }
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  const Vec2 y1 = {y[0] + dir * h0 * k1[0], y[1] + dir * h0 * k1[1]};
  const Vec2 k2 = f(t + dir * h0, y1);
  double d2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sc = tol * (1.0 + std::abs(y[i]));
    d2 = std::max(d2, std::abs(k2[i] - k1[i]) / sc / h0);
  }
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
  return std::min(100.0 * h0, h1);
}

}  // namespace

Vec2 dopri5(const Field& f, Vec2 y, double t0, double t1, const OdeOptions& opt,
            std::span<const double> sample_times, const SampleObserver& observe) {
  if (t1 == t0) {
    for (double ts : sample_times) observe(ts, y);
    return y;
  }
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;
  Vec2 k1 = f(t, y);
  double h = opt.initial_step > 0.0 ? opt.initial_step : initial_step(f, t, y, k1, dir, opt.tol);
  const double h_max = opt.max_step > 0.0 ? opt.max_step : span;
  h = std::min(h, h_max);

  std::size_t next_sample = 0;
  while (next_sample < sample_times.size() && dir * (sample_times[next_sample] - t0) <= 0.0) {
    observe(sample_times[next_sample++], y);
  }

  long steps = 0;
  bool last = false;
  while (!last) {
    if (++steps > opt.max_steps) throw IntegrationError(t, "step budget exhausted");
    const double remaining = std::abs(t1 - t);
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      last = true;
    }
    const double h_min = 1e-14 * std::max(1.0, std::abs(t));
    if (h < h_min) throw IntegrationError(t, "step size underflow");

    const Dopri5Step s = dopri5_step(f, t, y, k1, dir * h);
    const double err = error_norm(s.err, y, s.y_new, opt.tol);
    if (err <= 1.0) {
      const double t_new = last ? t1 : t + dir * h;
      while (next_sample < sample_times.size() &&
             dir * (sample_times[next_sample] - t_new) <= 0.0) {
        const double ts = sample_times[next_sample++];
        const double theta = (ts - t) / (t_new - t);
        observe(ts, theta >= 1.0 ? s.y_new : dense_eval(s.rcont, theta));
      }
      if (sample_times.empty()) observe(t_new, s.y_new);
      t = t_new;
      y = s.y_new;
      k1 = s.k7;
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h = std::min(h * fac, h_max);
    } else {
      last = false;
      h *= std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9) : 0.1;
    }
  }
  return y;
}

}  // namespace detail

Trajectory integrate_ode(const Field& field, const Vec2& x0, double t0, double t1, double tol,
                         std::span<const double> sample_times) {
  if (!(t1 > t0)) throw DomainError("tau1", "integration end must exceed start");
  if (!(tol > 0.0)) throw DomainError("tol", "tolerance must be positive");
  Trajectory traj;
  traj.meta.integrator = "dopri5";
  traj.meta.step_or_tol = tol;
  OdeOptions opt;
  opt.tol = tol;
  const bool sample_steps = sample_times.empty();
  if (sample_steps) traj.push(t0, x0);
  const Vec2 end = detail::dopri5(field, x0, t0, t1, opt, sample_times,
                                  [&](double t, const Vec2& x) { traj.push(t, x); });
  if (traj.empty() || traj.back_time() < t1) traj.push(t1, end);
  return traj;
}

Vec2 integrate_fixed_dopri5(const Field& field, Vec2 x0, double t0, double t1, long steps) {
  if (steps <= 0) throw DomainError("steps", "need at least one step");
  const double h = (t1 - t0) / static_cast<double>(steps);
  Vec2 k1 = field(t0, x0);
  for (long i = 0; i < steps; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const detail::Dopri5Step s = detail::dopri5_step(field, t, x0, k1, h);
    x0 = s.y_new;
    k1 = s.k7;
  }
  return x0;
}

std::vector<double> uniform_times(double t0, double t1, double dt) {
  if (!(dt > 0.0) || !(t1 >= t0)) throw DomainError("dt", "need dt > 0 and t1 >= t0");
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((t1 - t0) / dt * (1.0 + 1e-12)));
  out.reserve(static_cast<std::size_t>(n) + 2);
  for (long i = 0; i <= n; ++i) out.push_back(t0 + dt * static_cast<double>(i));
  if (t1 - out.back() > 1e-9 * dt) out.push_back(t1);
  else out.back() = t1;
  return out;
}

}  // namespace autores
