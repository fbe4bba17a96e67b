#include "autores/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "autores/noise.hpp"
#include "autores/parallel.hpp"

namespace autores {

namespace {

// Counters at and above this offset are reserved for initial-state sampling;
// step k of the SDE uses counter k.
constexpr std::uint64_t kInitCounter = std::uint64_t{1} << 63;

// Upper bound on the steps of one path.
constexpr double kMaxSteps = 2e9;

struct PathEnvironment {
  const EnsembleConfig& cfg;
  SdeOptions opt;
  bool track_deviation = false;
};

void validate(const EnsembleConfig& cfg) {
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
    throw EnsembleConfigError("horizon", "must be positive and finite");
  }
  if (!(cfg.dt > 0.0)) throw EnsembleConfigError("dt", "must be positive");
  if (cfg.horizon / cfg.dt > kMaxSteps) {
    throw EnsembleConfigError("dt", "horizon / dt exceeds the per-path step budget");
  }
  if (const double limit = max_stable_dt(cfg.params, cfg.tau0 + cfg.horizon); cfg.dt >= limit) {
    throw EnsembleConfigError("dt", "explicit scheme is unstable on the captured branch up to tau=" +
                                        std::to_string(cfg.tau0 + cfg.horizon) +
                                        "; need dt < " + std::to_string(limit));
  }
  if (cfg.paths == 0) throw EnsembleConfigError("paths", "must be >= 1");
  if (!(cfg.eps1 > 0.0)) throw EnsembleConfigError("eps1", "must be positive");
  if (!std::isfinite(cfg.tau0)) throw EnsembleConfigError("tau0", "must be finite");
  if (cfg.initial.kind == InitialCondition::Kind::reference_ball) {
    if (!(cfg.initial.radius >= 0.0)) {
      throw EnsembleConfigError("initial.radius", "must be >= 0");
    }
    if (!cfg.reference || !cfg.reference->contains(cfg.tau0)) {
      throw EnsembleConfigError("initial", "reference ball needs a reference covering tau0");
    }
  } else if (!std::isfinite(cfg.initial.point.r) || !std::isfinite(cfg.initial.point.psi)) {
    throw EnsembleConfigError("initial.point", "must be finite");
  }
}

SdeOptions sde_options(const EnsembleConfig& cfg) {
  SdeOptions opt;
  opt.dt = cfg.dt;
  opt.mu = cfg.noise.mu();
  opt.scheme = cfg.scheme;
  return opt;
}

bool covers(const EnsembleConfig& cfg) {
  return cfg.reference && cfg.reference->contains(cfg.tau0) &&
         cfg.reference->contains(cfg.tau0 + cfg.horizon);
}

// Runs one path, calling observe(t, x) after every step; returns the final
// state and the truncation metadata.
template <class Observer>
Vec2 run_path(const EnsembleConfig& cfg, const SdeOptions& opt, std::uint64_t index,
              TrajectoryMeta& meta, Observer&& observe) {
  const NoiseStream stream(cfg.master_seed, index);
  Vec2 x = initial_state(cfg, index).vec();
  const SystemParams& p = cfg.params;
  const NoiseSchedule& n = cfg.noise;
  auto drift = [&](double t, const Vec2& y) { return drift_perturbed(State::from(y), t, p, n); };
  auto diffusion = [&](double t, const Vec2& y) { return diffusion_matrix(State::from(y), t, n); };
  auto milstein = [&](double t, const Vec2& y) { return milstein_w1_term(State::from(y), t, n); };
  detail::sde_loop(drift, diffusion, milstein, x, cfg.tau0, cfg.tau0 + cfg.horizon, opt, stream,
                   observe, meta);
  return x;
}

PathResult simulate_one(const PathEnvironment& env, std::uint64_t index) {
  const EnsembleConfig& cfg = env.cfg;
  PathResult res;
  res.path_index = index;
  res.has_deviation = env.track_deviation;
  res.exit_time = cfg.horizon;
  const double tau_end = cfg.tau0 + cfg.horizon;
  CaptureTracker tracker(cfg.tau0, tau_end);

  auto deviation = [&](double t, const Vec2& x) {
    const State ref = cfg.reference->at(t);
    const double dpsi = std::abs(x[1] - ref.psi);
    const double dr = std::abs(x[0] - ref.r);
    const double dr_w = dr / std::sqrt(t);
    res.sup_psi_dev = std::max(res.sup_psi_dev, dpsi);
    res.sup_r_dev_raw = std::max(res.sup_r_dev_raw, dr);
    res.sup_r_dev_weighted = std::max(res.sup_r_dev_weighted, dr_w);
    if (res.censored && (dpsi >= cfg.eps1 || dr_w >= cfg.eps1)) {
      res.censored = false;
      res.exit_time = t - cfg.tau0;
    }
  };

  const Vec2 x0 = initial_state(cfg, index).vec();
  tracker.observe(cfg.tau0, x0[1]);
  if (env.track_deviation) deviation(cfg.tau0, x0);

  TrajectoryMeta meta;
  const Vec2 x = run_path(cfg, env.opt, index, meta, [&](double t, const Vec2& y) {
    tracker.observe(t, y[1]);
    if (env.track_deviation) deviation(t, y);
    return true;
  });

  res.final_state = State::from(x);
  res.blew_up = meta.truncated;
  res.blowup_tau = meta.truncated_at;
  if (res.blew_up && env.track_deviation && res.censored) {
    res.censored = false;
    res.exit_time = res.blowup_tau - cfg.tau0;
  }
  res.exceed_psi = env.track_deviation && (res.sup_psi_dev >= cfg.eps1 || res.blew_up);
  res.exceed_r = env.track_deviation && (res.sup_r_dev_weighted >= cfg.eps1 || res.blew_up);
  res.capture = tracker.verdict(x[0], cfg.params, res.blew_up);
  return res;
}

}  // namespace

const char* to_string(CaptureClass c) noexcept {
  switch (c) {
    case CaptureClass::captured:
      return "captured";
    case CaptureClass::escaped:
      return "escaped";
    case CaptureClass::indeterminate:
      break;
  }
  return "indeterminate";
}

CaptureClass CaptureTracker::verdict(double r_end, const SystemParams& p,
                                     bool blew_up) const noexcept {
  if (blew_up) return CaptureClass::escaped;
  if (tau_end_ < kMinClassifyTau) return CaptureClass::indeterminate;
  const bool grown = r_end > p.lambda() * tau_end_ / 2.0;
  const bool locked = variation_ < 2.0 * std::numbers::pi;
  return grown && locked ? CaptureClass::captured : CaptureClass::escaped;
}

CaptureClass classify_capture(const Trajectory& t, const SystemParams& p) {
  if (t.meta.truncated) return CaptureClass::escaped;
  if (t.empty()) return CaptureClass::indeterminate;
  CaptureTracker tracker(t.times.front(), t.back_time());
  for (std::size_t i = 0; i < t.size(); ++i) tracker.observe(t.times[i], t.states[i][1]);
  return tracker.verdict(t.back_state()[0], p, false);
}

State initial_state(const EnsembleConfig& cfg, std::uint64_t index) {
  if (cfg.initial.kind == InitialCondition::Kind::point) return cfg.initial.point;
  const NoiseStream stream(cfg.master_seed, index);
  const double radius = cfg.initial.radius * std::sqrt(stream.uniform(kInitCounter));
  const double angle = 2.0 * std::numbers::pi * stream.uniform(kInitCounter + 1);
  const State c = cfg.reference->at(cfg.tau0);
  return {c.r + radius * std::cos(angle), c.psi + radius * std::sin(angle)};
}

Trajectory sample_path(const EnsembleConfig& cfg, std::uint64_t index, std::size_t record_every) {
  validate(cfg);
  SdeOptions opt = sde_options(cfg);
  opt.record_every = record_every;
  SdeSystem sys;
  const SystemParams p = cfg.params;
  const NoiseSchedule n = cfg.noise;
  sys.drift = [p, n](double t, const Vec2& y) { return drift_perturbed(State::from(y), t, p, n); };
  sys.diffusion = [n](double t, const Vec2& y) { return diffusion_matrix(State::from(y), t, n); };
  sys.milstein_w1 = [n](double t, const Vec2& y) { return milstein_w1_term(State::from(y), t, n); };
  return integrate_sde(sys, initial_state(cfg, index).vec(), cfg.tau0, cfg.tau0 + cfg.horizon, opt,
                       NoiseStream(cfg.master_seed, index));
}

EnsembleStats run_ensemble(const EnsembleConfig& cfg) {
  validate(cfg);
  EnsembleStats stats;
  stats.paths = cfg.paths;
  stats.horizon = cfg.horizon;
  const NoiseClassReport cls =
      noise_class_check(cfg.noise, std::max(cfg.tau0, std::numeric_limits<double>::min()));
  stats.class_bound = cls.bound;
  stats.out_of_class = !cls.admissible;
  if (!cls.admissible && !cfg.out_of_class) {
    throw EnsembleConfigError("noise", "schedule fails the class bound h; set out_of_class to run");
  }

  const PathEnvironment env{cfg, sde_options(cfg), covers(cfg)};
  stats.path_results.resize(cfg.paths);
  parallel_for(cfg.paths, cfg.threads,
               [&](std::size_t i) { stats.path_results[i] = simulate_one(env, i); });

  std::uint64_t psi_hits = 0, r_hits = 0, captured = 0, classified = 0;
  for (const PathResult& r : stats.path_results) {
    psi_hits += r.exceed_psi ? 1 : 0;
    r_hits += r.exceed_r ? 1 : 0;
    stats.blowups += r.blew_up ? 1 : 0;
    if (r.capture != CaptureClass::indeterminate) {
      ++classified;
      captured += r.capture == CaptureClass::captured ? 1 : 0;
    }
  }
  constexpr std::size_t kMinPathsForEstimate = 100;
  if (env.track_deviation && cfg.paths >= kMinPathsForEstimate) {
    stats.exceed_prob_psi = wilson(psi_hits, cfg.paths);
    stats.exceed_prob_r = wilson(r_hits, cfg.paths);
  }
  if (classified > 0) stats.capture_fraction = wilson(captured, classified);
  return stats;
}

// ---------------------------------------------------------------------------

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ExitTimeScaling exit_time_scaling_from_samples(const std::vector<double>& mus,
                                               const std::vector<std::vector<double>>& exit_times,
                                               const std::vector<std::vector<bool>>& censored,
                                               int bootstrap, std::uint64_t bootstrap_seed) {
  if (mus.size() < 3) throw DomainError("mu_list", "needs at least 3 values of mu");
  if (exit_times.size() != mus.size() || censored.size() != mus.size()) {
    throw DomainError("exit_times", "one sample per mu required");
  }
  if (bootstrap < 10) throw DomainError("bootstrap", "needs at least 10 resamples");
  bool any_resolved = false;
  for (std::size_t j = 0; j < mus.size(); ++j) {
    if (!(mus[j] > 0.0)) throw DomainError("mu_list", "values must be positive");
    if (exit_times[j].empty() || censored[j].size() != exit_times[j].size()) {
      throw DomainError("exit_times", "empty sample or censoring mask mismatch");
    }
    const auto c = static_cast<std::size_t>(std::count(censored[j].begin(), censored[j].end(), true));
    if (2 * c <= exit_times[j].size()) any_resolved = true;
  }
  if (!any_resolved) {
    throw DomainError("horizon", "more than half the paths are censored at every mu");
  }

  ExitTimeScaling out;
  std::vector<double> log_mu(mus.size()), log_med(mus.size());
  std::vector<std::vector<double>> boot_medians(mus.size());
  for (std::size_t j = 0; j < mus.size(); ++j) {
    const auto& sample = exit_times[j];
    ExitTimePoint pt;
    pt.mu = mus[j];
    pt.paths = sample.size();
    pt.censored = static_cast<std::size_t>(std::count(censored[j].begin(), censored[j].end(), true));
    pt.median_exit = median(sample);
    NoiseStream rng(bootstrap_seed, j);
    std::vector<double> resample(sample.size());
    boot_medians[j].resize(static_cast<std::size_t>(bootstrap));
    for (int b = 0; b < bootstrap; ++b) {
      for (double& v : resample) {
        const auto k = static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(sample.size()));
        v = sample[std::min(k, sample.size() - 1)];
      }
      boot_medians[j][static_cast<std::size_t>(b)] = median(resample);
    }
    pt.ci95 = {percentile(boot_medians[j], 0.025), percentile(boot_medians[j], 0.975)};
    log_mu[j] = std::log(pt.mu);
    log_med[j] = std::log(pt.median_exit);
    out.points.push_back(pt);
  }
  out.slope = linear_fit(log_mu, log_med).slope;

  std::vector<double> slopes(static_cast<std::size_t>(bootstrap));
  std::vector<double> y(mus.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (std::size_t j = 0; j < mus.size(); ++j) {
      y[j] = std::log(boot_medians[j][static_cast<std::size_t>(b)]);
    }
    slopes[static_cast<std::size_t>(b)] = linear_fit(log_mu, y).slope;
  }
  out.slope_ci95 = {percentile(slopes, 0.025), percentile(slopes, 0.975)};
  return out;
}

ExitTimeScaling exit_time_scaling(const std::vector<EnsembleConfig>& cfgs, int bootstrap,
                                  std::uint64_t bootstrap_seed) {
  std::vector<double> mus;
  std::vector<std::vector<double>> times;
  std::vector<std::vector<bool>> cens;
  for (const EnsembleConfig& cfg : cfgs) {
    if (!covers(cfg)) {
      throw EnsembleConfigError("reference", "exit times need a reference covering the horizon");
    }
    const EnsembleStats s = run_ensemble(cfg);
    mus.push_back(cfg.noise.mu());
    std::vector<double> t;
    std::vector<bool> c;
    for (const PathResult& r : s.path_results) {
      t.push_back(r.exit_time);
      c.push_back(r.censored);
    }
    times.push_back(std::move(t));
    cens.push_back(std::move(c));
  }
  return exit_time_scaling_from_samples(mus, times, cens, bootstrap, bootstrap_seed);
}

// ---------------------------------------------------------------------------

namespace {

struct StoppedPath {
  std::vector<double> U;  // U_N at each checkpoint
  double sup_U = 0.0;
  bool exited = false;
};

}  // namespace

SupermartingaleReport supermartingale_check(const EnsembleConfig& cfg,
                                            const StabilityCertificate& cert, int N,
                                            int checkpoints, std::vector<double> ladder) {
  validate(cfg);
  if (N < 1) throw EnsembleConfigError("N", "must be >= 1");
  if (checkpoints < 2) throw EnsembleConfigError("checkpoints", "must be >= 2");
  if (!covers(cfg)) {
    throw EnsembleConfigError("reference", "the check needs a reference covering the horizon");
  }
  if (cfg.tau0 < cert.tau0) throw EnsembleConfigError("tau0", "precedes the certificate's tau0");
  const ReferenceSolution& ref = *cfg.reference;
  const SystemParams& p = cfg.params;
  const double radius = std::min(cfg.eps1, cert.rho0);

  ChainParams chain;
  chain.N = N;
  chain.mu = cfg.noise.mu();
  chain.h = cfg.noise.h();
  chain.n = 2.0;
  chain.B = cert.B;
  chain.C = cert.C;
  chain.q = cert.q;
  chain.T = cfg.horizon;
  chain.t0 = cfg.tau0;

  auto U_N = [&](const Vec2& x, double t) {
    const State s = ref.at(t);
    const ErrorState e{x[0] - s.r, x[1] - s.psi};
    return chain_U(chain, 4.0 * eval_V(e, t, p, ref), std::min(t, chain.t0 + chain.T));
  };

  SupermartingaleReport rep;
  rep.N = N;
  rep.tube_radius = radius;
  const auto K = static_cast<std::size_t>(checkpoints);
  for (std::size_t i = 0; i <= K; ++i) {
    rep.times.push_back(cfg.tau0 + cfg.horizon * static_cast<double>(i) / static_cast<double>(K));
  }

  const SdeOptions opt = sde_options(cfg);
  std::vector<StoppedPath> paths(cfg.paths);
  parallel_for(cfg.paths, cfg.threads, [&](std::size_t index) {
    StoppedPath& sp = paths[index];
    const Vec2 x0 = initial_state(cfg, index).vec();
    double frozen = U_N(x0, cfg.tau0);
    sp.U.push_back(frozen);
    sp.sup_U = frozen;
    std::size_t next = 1;
    const double slack = 1e-9 * cfg.horizon;
    TrajectoryMeta meta;
    run_path(cfg, opt, index, meta, [&](double t, const Vec2& x) {
      const State s = ref.at(t);
      const double d = std::hypot(x[0] - s.r, x[1] - s.psi);
      frozen = U_N(x, t);
      sp.sup_U = std::max(sp.sup_U, frozen);
      if (d >= radius) sp.exited = true;
      while (next <= K && t >= rep.times[next] - slack) {
        sp.U.push_back(frozen);
        ++next;
      }
      return !sp.exited;
    });
    if (meta.truncated) sp.exited = true;
    // The stopped process keeps its value after the exit.
    while (sp.U.size() <= K) sp.U.push_back(frozen);
  });

  const double M = static_cast<double>(cfg.paths);
  std::vector<double> column(cfg.paths), diff(cfg.paths);
  for (std::size_t i = 0; i <= K; ++i) {
    for (std::size_t m = 0; m < cfg.paths; ++m) column[m] = paths[m].U[i];
    const MeanStat ms = mean_and_stderr(column);
    rep.mean_U.push_back(ms.mean);
    rep.stderr_U.push_back(ms.std_error);
  }
  rep.mean_non_increasing = true;
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t m = 0; m < cfg.paths; ++m) diff[m] = paths[m].U[i + 1] - paths[m].U[i];
    const MeanStat d = mean_and_stderr(diff);
    const bool ok = d.mean <= 2.0 * d.std_error;
    rep.band_ok.push_back(ok);
    rep.mean_non_increasing = rep.mean_non_increasing && ok;
  }
  for (const StoppedPath& sp : paths) rep.exited += sp.exited ? 1 : 0;

  rep.start_mean = rep.mean_U.front();
  rep.doob_ok = true;
  for (double mult : ladder) {
    const double c = mult * rep.start_mean;
    const auto hits = std::count_if(paths.begin(), paths.end(),
                                    [c](const StoppedPath& sp) { return sp.sup_U >= c; });
    const double frac = static_cast<double>(hits) / M;
    const double bound = std::min(1.0, rep.start_mean / c);
    const double se = std::sqrt(bound * (1.0 - bound) / M);
    const bool ok = frac <= bound + 3.0 * se;
    rep.ladder_c.push_back(c);
    rep.ladder_fraction.push_back(frac);
    rep.ladder_bound.push_back(bound);
    rep.ladder_stderr.push_back(se);
    rep.ladder_ok.push_back(ok);
    rep.doob_ok = rep.doob_ok && ok;
  }
  return rep;
}

}  // namespace autores
