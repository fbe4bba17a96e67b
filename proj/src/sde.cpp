#include "autores/sde.hpp"

namespace autores {

Trajectory integrate_sde(const SdeSystem& sys, const Vec2& x0, double t0, double t1,
                         const SdeOptions& opt, const NoiseStream& stream,
                         const StepObserver& observe) {
  if (!(opt.dt > 0.0)) throw DomainError("dt", "step must be positive");
  if (!(t1 > t0)) throw DomainError("tau1", "integration end must exceed start");
  if (!(opt.mu >= 0.0 && opt.mu < 1.0)) throw DomainError("mu", "must lie in [0, 1)");
  if (opt.scheme == SdeScheme::milstein && !sys.milstein_w1) {
    throw DomainError("scheme", "Milstein requested without a w1 correction term");
  }

  Trajectory traj;
  traj.meta.integrator = opt.scheme == SdeScheme::milstein ? "milstein" : "euler_maruyama";
  traj.meta.step_or_tol = opt.dt;
  traj.meta.seed = stream.master_seed();
  traj.meta.path_index = stream.path_index();
  traj.push(t0, x0);

  Vec2 x = x0;
  double t_x = t0;
  bool recorded = true;
  std::size_t since_record = 0;
  auto record = [&](double t, const Vec2& state) {
    t_x = t;
    const bool keep = observe ? observe(t, state) : true;
    const bool cadence = opt.record_every > 0 && ++since_record >= opt.record_every;
    if (cadence || !keep || t == t1) {
      traj.push(t, state);
      since_record = 0;
      recorded = true;
    } else {
      recorded = false;
    }
    return keep;
  };
  auto no_milstein = [](double, const Vec2&) { return Vec2{0.0, 0.0}; };
  if (sys.milstein_w1) {
    detail::sde_loop(sys.drift, sys.diffusion, sys.milstein_w1, x, t0, t1, opt, stream, record,
                     traj.meta);
  } else {
    detail::sde_loop(sys.drift, sys.diffusion, no_milstein, x, t0, t1, opt, stream, record,
                     traj.meta);
  }
  if (!recorded) traj.push(t_x, x);
  return traj;
}

}  // namespace autores
