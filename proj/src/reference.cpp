#include "autores/reference.hpp"

#include <algorithm>
#include <cmath>

#include "autores/ode.hpp"

namespace autores {

ReferenceSolution::ReferenceSolution(SystemParams params, double tau_min, double step,
                                     std::vector<State> nodes)
    : params_(params), tau_min_(tau_min), step_(step), nodes_(std::move(nodes)) {
  if (nodes_.size() < 2) throw DomainError("nodes", "need at least two grid nodes");
  if (!(step > 0.0)) throw DomainError("step", "grid step must be positive");
  tau_max_ = tau_min_ + step_ * static_cast<double>(nodes_.size() - 1);
  slopes_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    slopes_.push_back(rhs_primary(nodes_[i], tau_min_ + step_ * static_cast<double>(i), params_));
  }
}

State ReferenceSolution::at(double tau) const {
  if (!contains(tau)) {
    throw DomainError("tau", "reference solution queried at tau=" + std::to_string(tau) +
                                 " outside [" + std::to_string(tau_min_) + ", " +
                                 std::to_string(tau_max_) + "]");
  }
  double x = (tau - tau_min_) / step_;
  // Grid times rebuilt as tau_min + i * step land within rounding of a node.
  if (const double k = std::round(x); std::abs(x - k) < 1e-9) x = k;
  const auto last = nodes_.size() - 1;
  auto i = static_cast<std::size_t>(x);
  if (i >= last) i = last - 1;
  const double t = x - static_cast<double>(i);
  if (t == 0.0) return nodes_[i];
  if (t == 1.0) return nodes_[i + 1];

  const double t2 = t * t;
  const double t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  const State& a = nodes_[i];
  const State& b = nodes_[i + 1];
  const Vec2& da = slopes_[i];
  const Vec2& db = slopes_[i + 1];
  return {h00 * a.r + h10 * step_ * da[0] + h01 * b.r + h11 * step_ * db[0],
          h00 * a.psi + h10 * step_ * da[1] + h01 * b.psi + h11 * step_ * db[1]};
}

Vec2 ReferenceSolution::derivative(double tau) const { return rhs_primary(at(tau), tau, params_); }

ReferenceSolution reference_solution(const SystemParams& p, const ReferenceOptions& opt) {
  if (!(opt.tau_min > 0.0 && opt.tau_min < opt.tau_seed && opt.tau_seed <= opt.tau_max)) {
    throw DomainError("tau_seed", "need 0 < tau_min < tau_seed <= tau_max");
  }
  if (!(opt.step > 0.0)) throw DomainError("step", "grid step must be positive");
  const AsymptoticExpansion series = expand(p, Branch::stable, opt.K);
  const Vec2 res = residual(series, p, opt.tau_seed);
  const double res_norm = std::hypot(res[0], res[1]);
  if (!(res_norm <= opt.seed_residual_tol)) {
    throw ReferenceError(opt.tau_seed, "series residual " + std::to_string(res_norm) +
                                           " exceeds seed_residual_tol; raise tau_seed or K");
  }
  const State seed = evaluate(series, p, opt.tau_seed);

  const auto count = static_cast<std::size_t>(std::floor((opt.tau_max - opt.tau_min) / opt.step + 1e-9)) + 1;
  auto node_tau = [&](std::size_t i) { return opt.tau_min + opt.step * static_cast<double>(i); };
  // Last node at or below the seed time.
  const auto seed_node = static_cast<std::size_t>(std::floor((opt.tau_seed - opt.tau_min) / opt.step + 1e-9));

  std::vector<State> nodes(count);
  const Field field = [&p](double t, const Vec2& x) { return rhs_primary(State::from(x), t, p); };
  OdeOptions ode;
  ode.tol = opt.tol;

  std::vector<double> back_times;
  for (std::size_t i = seed_node + 1; i-- > 0;) back_times.push_back(node_tau(i));
  std::size_t back_fill = seed_node + 1;
  try {
    detail::dopri5(field, seed.vec(), opt.tau_seed, opt.tau_min, ode, back_times,
                   [&](double, const Vec2& x) { nodes[--back_fill] = State::from(x); });
  } catch (const IntegrationError& e) {
    throw ReferenceError(e.where(), "backward integration lost stability");
  }

  std::vector<double> fwd_times;
  for (std::size_t i = seed_node + 1; i < count; ++i) fwd_times.push_back(node_tau(i));
  std::size_t fwd_fill = seed_node + 1;
  if (!fwd_times.empty()) {
    try {
      detail::dopri5(field, seed.vec(), opt.tau_seed, fwd_times.back(), ode, fwd_times,
                     [&](double, const Vec2& x) { nodes[fwd_fill++] = State::from(x); });
    } catch (const IntegrationError& e) {
      throw ReferenceError(e.where(), "forward integration failed");
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(nodes[i].r) || !std::isfinite(nodes[i].psi)) {
      throw ReferenceError(node_tau(i), "non-finite reference state");
    }
  }
  return ReferenceSolution(p, opt.tau_min, opt.step, std::move(nodes));
}

}  // namespace autores
