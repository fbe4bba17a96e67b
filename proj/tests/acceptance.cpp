// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../tools/cli.hpp"
#include "autores/asymptotics.hpp"
#include "autores/ensemble.hpp"
#include "autores/lyapunov.hpp"
#include "autores/ode.hpp"
#include "autores/pendulum.hpp"
#include "autores/reference.hpp"
#include "autores/stats.hpp"

using namespace autores;
namespace fs = std::filesystem;

namespace {

const SystemParams kParams(1.0, 0.1);

std::shared_ptr<const ReferenceSolution> reference() {
  static const auto ref = std::make_shared<const ReferenceSolution>(reference_solution(kParams));
  return ref;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double round_sig(double x, int digits) {
  if (x == 0.0) return 0.0;
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
  return std::round(x * scale) / scale;
}

Trajectory flow(const State& s0, double tau0, double tau1, double sample = 0.1) {
  const Field f = [](double t, const Vec2& x) { return rhs_primary(State::from(x), t, kParams); };
  return integrate_ode(f, s0.vec(), tau0, tau1, 1e-10, uniform_times(tau0, tau1, sample));
}

// Coefficients of sum_k c_k tau^-k fitted to a tight reference trajectory.
std::vector<double> fit_inverse_powers(double lo, double hi, int terms, bool amplitude) {
  ReferenceOptions o;
  o.tol = 1e-14;
  o.tau_min = 10.0;
  o.tau_max = 400.0;
  static const ReferenceSolution ref = reference_solution(kParams, o);
  const double psi0 = solve_psi0(kParams, Branch::stable);
  std::vector<double> taus;
  for (double t = lo; t <= hi + 1e-9; t += 1.0) taus.push_back(t);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(taus.size()), terms);
  Eigen::VectorXd y(static_cast<Eigen::Index>(taus.size()));
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const State st = ref.at(taus[i]);
    for (int k = 0; k < terms; ++k) A(row, k) = std::pow(lo / taus[i], k);
    y(row) = amplitude ? st.r - kParams.lambda() * taus[i] : st.psi - psi0;
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  std::vector<double> out;
  for (int k = 0; k < terms; ++k) out.push_back(c(k) * std::pow(lo, k));
  return out;
}

Verdict criterion1() {
  const AsymptoticExpansion e = expand(kParams, Branch::stable, 1);
  const double want[4] = {3.0414252, 0.994987, 0.100504, -1.005038};
  const double got[4] = {e.psi0, e.r[0], e.r[1], e.psi[0]};
  bool ok = true;
  std::string d = "order-1 (psi0, r0, r1, psi1) =";
  for (int i = 0; i < 4; ++i) {
    const bool hit = std::abs(got[i] - want[i]) <= 1e-6;
    ok = ok && hit;
    d += fmt(" %.7f%s", got[i], hit ? "" : fmt("[want %.7f]", want[i]).c_str());
  }
  const AsymptoticExpansion e3 = expand(kParams, Branch::stable, 3);
  const std::vector<double> rc = fit_inverse_powers(15.0, 300.0, 9, true);
  const std::vector<double> pc = fit_inverse_powers(15.0, 300.0, 9, false);
  double worst = 0.0;
  for (std::size_t k = 0; k <= 3; ++k) {
    worst = std::max(worst, std::abs(rc[k] - e3.r[k]) / std::abs(e3.r[k]));
    if (k >= 1) worst = std::max(worst, std::abs(pc[k] - e3.psi_coeff(static_cast<int>(k))) /
                                            std::abs(e3.psi_coeff(static_cast<int>(k))));
  }
  const bool oracle = worst < 1e-3;
  d += fmt("; K=3 vs least-squares oracle worst rel diff %.2e", worst);
  return {ok && oracle, d};
}

Verdict criterion2() {
  bool ok = true;
  std::string d = "slopes";
  for (int K = 0; K <= 3; ++K) {
    const double s = residual_slope(expand(kParams, Branch::stable, K), kParams, 10.0, 1000.0);
    ok = ok && s <= -K + 0.3;
    d += fmt(" K=%d:%.3f", K, s);
  }
  return {ok, d + " (need <= -K+0.3)"};
}

Verdict criterion3() {
  const auto ref = reference();
  const double tau0 = 20.0, eps = 0.05;
  // Decay rate of the phase deviation envelope after a 0.01 kick.
  State s0 = ref->at(tau0);
  s0.psi += 0.01;
  const Trajectory t = flow(s0, tau0, 200.0, 0.01);
  std::vector<double> dev(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) dev[i] = std::abs(t.states[i][1] - ref->at(t.times[i]).psi);
  std::vector<double> xs, ys;
  for (std::size_t i = 1; i + 1 < dev.size(); ++i) {
    if (dev[i] >= dev[i - 1] && dev[i] > dev[i + 1] && dev[i] > 1e-8) {
      xs.push_back(t.times[i]);
      ys.push_back(std::log(dev[i]));
    }
  }
  const double rate = xs.size() >= 5 ? -linear_fit(xs, ys).slope : 0.0;
  const bool decays = rate >= kParams.gamma() / 12.0;

  const double delta0 = eps * std::sqrt(kParams.nu() / 3.0);
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double th = angle(rng);
    State p = ref->at(tau0);
    p.r += delta0 * std::cos(th);
    p.psi += delta0 * std::sin(th);
    const Trajectory tr = flow(p, tau0, ref->tau_max(), 0.1);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const State x = State::from(tr.states[k]);
      const State r = ref->at(tr.times[k]);
      const ErrorState e{x.r - r.r, x.psi - r.psi};
      worst = std::max(worst, std::sqrt(weighted_norm_sq(e, tr.times[k], kParams)));
    }
  }
  return {decays && worst < eps,
          fmt("phase envelope rate %.5f (need >= %.5f, %zu maxima); 20 kicks of %.5f: sup weighted deviation %.5f (need < %.2f)",
              rate, kParams.gamma() / 12.0, xs.size(), delta0, worst, eps)};
}

Verdict criterion4() {
  const auto ref = reference();
  const double tau0 = 20.0, tau1 = 200.0;
  const AsymptoticExpansion st = expand(kParams, Branch::stable, 3);
  const Trajectory a = flow(evaluate(st, kParams, tau0), tau0, tau1);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.states[i][1] - ref->at(a.times[i]).psi));

  const AsymptoticExpansion un = expand(kParams, Branch::unstable, 3);
  const Trajectory b = flow(evaluate(un, kParams, tau0), tau0, tau1);
  double departed = -1.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (std::abs(b.states[i][1] - evaluate(un, kParams, b.times[i]).psi) > 0.5) {
      departed = b.times[i];
      break;
    }
  }
  return {worst < 0.1 && departed > 0.0,
          fmt("stable branch sup|psi-psi*| %.2e (need < 0.1); unstable branch departs by 0.5 at tau=%.1f",
              worst, departed)};
}

CertifyRequest certify_request() {
  CertifyRequest rq;
  rq.d_lo = 0.05;
  rq.d_hi = 0.5;
  rq.tau_lo = 10.0;
  rq.tau_hi = 50.0;
  rq.spot_checks = 10000;
  return rq;
}

const CertifyResult& certificate() {
  static const CertifyResult cr = certify(kParams, *reference(), certify_request());
  return cr;
}

Verdict criterion5() {
  const CertifyResult& cr = certificate();
  if (!cr.ok()) return {false, "certification failed at " + cr.failure->inequality};
  const StabilityCertificate& c = *cr.certificate;
  const bool q_ok = std::abs(c.q - kParams.gamma() / 6.0) < 1e-15 && std::abs(c.a - 1.0 / kParams.nu()) < 1e-15 &&
                    c.b == 1.0;
  return {c.d0 >= 0.05 && c.tau0 <= 50.0 && c.spot_checks == 10000 && c.spot_violations == 0 && q_ok,
          fmt("d0 %.4f tau0 %.2f q %.5f B %.3f C %.3f, %d spot checks, %d violations", c.d0, c.tau0, c.q, c.B, c.C,
              c.spot_checks, c.spot_violations)};
}

Verdict criterion6() {
  ThresholdInputs in;
  in.eps1 = 0.1;
  in.eps2 = 0.1;
  in.A = 3.0;
  in.a = 1.005038;
  in.kappa = 0.5;
  in.n = 2.0;
  in.h = 1.0;
  in.C = 1.0;
  const ThresholdReport r = thresholds(in);
  const bool d_ok = r.delta && round_sig(*r.delta, 4) == 9.117e-3;
  const bool D_ok = r.Delta && round_sig(*r.Delta, 4) == 1.25e-4;
  bool exp_ok = true;
  for (int N : {1, 2, 3}) {
    ThresholdInputs x = in;
    x.N = N;
    exp_ok = exp_ok && std::abs(thresholds(x).horizon_exponent - (-2.0 * N * (1.0 - in.kappa))) < 1e-12;
  }
  const double a1 = chain_coefficient(1, 2.0, 1.0, 1.0, 1.0, 0.5);
  return {d_ok && D_ok && exp_ok && std::abs(a1 - 32.0) < 1e-12,
          fmt("delta %.4e Delta %.4e, T_mu exponents %s, a_1 %.6g", r.delta.value_or(NAN), r.Delta.value_or(NAN),
              exp_ok ? "match" : "differ", a1)};
}

EnsembleConfig fig2_config(double mu, std::size_t paths) {
  EnsembleConfig c;
  c.params = kParams;
  c.noise = NoiseSchedule(mu, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
  c.initial.point = {1.09, 2.15};
  c.tau0 = 0.0;
  c.horizon = 60.0;
  c.dt = 1e-3;
  c.paths = paths;
  c.master_seed = 42;
  return c;
}

Verdict criterion7() {
  Proportion f[3];
  const double mus[3] = {0.1, 0.35, 0.55};
  for (int i = 0; i < 3; ++i) f[i] = *run_ensemble(fig2_config(mus[i], 500)).capture_fraction;
  const bool separated = f[0].estimate > f[2].estimate && !f[0].ci95.overlaps(f[2].ci95);
  const bool between = f[1].estimate <= f[0].estimate && f[1].estimate >= f[2].estimate;
  return {separated && between, fmt("capture mu=0.1 %.3f [%.3f,%.3f], mu=0.35 %.3f [%.3f,%.3f], mu=0.55 %.3f [%.3f,%.3f]",
                                    f[0].estimate, f[0].ci95.lo, f[0].ci95.hi, f[1].estimate, f[1].ci95.lo,
                                    f[1].ci95.hi, f[2].estimate, f[2].ci95.lo, f[2].ci95.hi)};
}

Verdict criterion8() {
  const CertifyResult& cr = certificate();
  if (!cr.ok()) return {false, "no certificate"};
  const StabilityCertificate& c = *cr.certificate;
  EnsembleConfig e;
  e.params = kParams;
  e.noise = NoiseSchedule(0.05, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
  e.reference = reference();
  e.tau0 = std::max(c.tau0, 10.0);
  e.horizon = 20.0;
  e.dt = 1e-3;
  e.paths = 1000;
  e.master_seed = 5;
  e.initial.kind = InitialCondition::Kind::reference_ball;
  e.initial.radius = 0.01;
  e.eps1 = c.d0;
  const SupermartingaleReport r = supermartingale_check(e, c, 1);
  std::string d = fmt("mean U_1 %.5f -> %.5f, %s; ladder", r.mean_U.front(), r.mean_U.back(),
                      r.mean_non_increasing ? "non-increasing within 2 s.e." : "increase beyond 2 s.e.");
  for (std::size_t i = 0; i < r.ladder_c.size(); ++i)
    d += fmt(" [c=%.4g frac %.4f bound %.4f]", r.ladder_c[i], r.ladder_fraction[i], r.ladder_bound[i]);
  d += fmt("; %zu of %zu paths stopped at the tube", r.exited, e.paths);
  return {r.passed(), d};
}

Verdict criterion9() {
  const CertifyResult& cr = certificate();
  if (!cr.ok()) return {false, "no certificate"};
  const double eps1 = cr.certificate->d0;
  std::vector<EnsembleConfig> cfgs;
  for (double mu : {0.2, 0.3, 0.45}) {
    EnsembleConfig x;
    x.params = kParams;
    x.noise = NoiseSchedule(mu, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
    x.reference = reference();
    x.tau0 = 10.0;
    x.horizon = 60.0;
    x.dt = 1e-3;
    x.paths = 400;
    x.master_seed = 9;
    x.eps1 = eps1;
    x.initial.point = reference()->at(x.tau0);
    cfgs.push_back(x);
  }
  const ExitTimeScaling s = exit_time_scaling(cfgs);
  std::string d = fmt("eps1 %.3f; medians", eps1);
  for (const auto& p : s.points) d += fmt(" mu=%.2f:%.4f", p.mu, p.median_exit);
  d += fmt("; slope %.3f [%.3f, %.3f]", s.slope, s.slope_ci95.lo, s.slope_ci95.hi);
  return {s.slope <= -1.0 && !s.slope_ci95.contains(0.0), d};
}

double pendulum_error(double eps) {
  const double k = eps / 0.05;
  PendulumParams pp;
  pp.eps = eps;
  pp.alpha = 3.125e-4 * k * k;
  pp.theta = 2.5e-3 * k;
  const double tau0 = 5.0, tau1 = 30.0;
  const State s0 = reference()->at(tau0);
  const double t0 = slow_to_fast(tau0, pp), t1 = slow_to_fast(tau1, pp);
  const Vec2 x0 = seed_from_slow(s0, t0, pp);
  const Trajectory pend = integrate_pendulum(pp, x0[0], x0[1], t0, t1);
  return envelope_compare(pend, flow(s0, tau0, tau1, 0.01), pp).mean_relerr;
}

Verdict criterion10() {
  const double e1 = pendulum_error(0.1), e2 = pendulum_error(0.05), e3 = pendulum_error(0.025);
  return {e2 <= 0.15 && e1 > e2 && e2 > e3,
          fmt("mean relative envelope error eps=0.1 %.4f, 0.05 %.4f (need <= 0.15), 0.025 %.4f", e1, e2, e3)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "autores");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  if (rc != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return rc;
}

Verdict criterion11() {
  const fs::path root = fs::temp_directory_path() / "autores_acceptance_repro";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "config.json") << R"({
    "lambda": 1, "gamma": 0.1,
    "noise": {"mu": 0.35, "sigma1": {"kind": "constant", "coeff": 0}, "sigma2": {"kind": "constant", "coeff": 1}},
    "initial": {"r": 1.09, "psi": 2.15},
    "tau0": 0, "horizon": 60, "dt": 0.001, "paths": 200
  })";
  if (run_cli({"ensemble", "--config", (root / "config.json").string(), "--out", (root / "first").string(), "--seed",
               "17", "--threads", "1"}) != 0)
    return {false, "first run failed"};
  bool same = true;
  for (const char* threads : {"1", "8"}) {
    const fs::path out = root / (std::string("rerun") + threads);
    if (run_cli({"ensemble", "--config", (root / "first" / "manifest.json").string(), "--out", out.string(),
                 "--threads", threads}) != 0)
      return {false, "manifest rerun failed"};
    for (const char* f : {"stats.json", "paths.csv"}) same = same && slurp(root / "first" / f) == slurp(out / f);
  }
  return {same, same ? "stats.json and paths.csv identical from the manifest at 1 and 8 threads"
                     : "outputs differ between reruns"};
}

}  // namespace

int main() {
  const std::vector<std::function<Verdict()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                       criterion5, criterion6, criterion7, criterion8,
                                                       criterion9, criterion10, criterion11};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("criterion %zu: %s  %s  (%.1fs)\n", i + 1, v.pass ? "PASS" : "FAIL", v.detail.c_str(), sec);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
