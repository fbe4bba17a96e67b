#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

#include "autores/asymptotics.hpp"
#include "autores/ensemble.hpp"
#include "autores/io.hpp"
#include "autores/lyapunov.hpp"
#include "autores/ode.hpp"
#include "autores/pendulum.hpp"
#include "autores/reference.hpp"

namespace autores::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reader. Every accessor records the resolved value; finish()
// rejects keys that no accessor consumed.

class Obj {
 public:
  Obj(const Json& in, std::string path) : in_(in), path_(std::move(path)) {
    if (!in_.is_object()) throw ConfigError(label(), "expected a JSON object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return in_.contains(key); }

  double number(const std::string& key) { return put(key, num_at(key)); }
  double number(const std::string& key, double def) {
    return put(key, has(key) ? num_at(key) : def);
  }
  std::optional<double> maybe_number(const std::string& key) {
    if (!has(key) || in_.at(key).is_null()) {
      seen_.insert(key);
      return std::nullopt;
    }
    return put(key, num_at(key));
  }

  std::uint64_t unsigned_int(const std::string& key, std::uint64_t def) {
    if (!has(key)) return put(key, def);
    const Json& v = in_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(field(key), "expected a non-negative integer");
    }
    return put(key, v.get<std::uint64_t>());
  }
  std::uint64_t unsigned_int(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    return unsigned_int(key, 0);
  }

  int integer(const std::string& key, int def) {
    if (!has(key)) return put(key, def);
    const Json& v = in_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return put(key, v.get<int>());
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return put(key, def);
    const Json& v = in_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return put(key, v.get<bool>());
  }

  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return put(key, def);
    const Json& v = in_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return put(key, v.get<std::string>());
  }
  std::string string(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    return string(key, "");
  }

  std::vector<double> numbers(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    const Json& v = in_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    seen_.insert(key);
    out_[key] = out;
    return out;
  }

  Obj child(const std::string& key) {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    seen_.insert(key);
    return Obj(in_.at(key), field(key));
  }
  /// Child object, or an empty one when the key is absent.
  Obj child_or_empty(const std::string& key) {
    seen_.insert(key);
    return Obj(has(key) ? in_.at(key) : empty(), field(key));
  }
  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return in_.at(key);
  }

  void attach(const std::string& key, Json resolved) { out_[key] = std::move(resolved); }
  void skip(const std::string& key) { seen_.insert(key); }
  /// Drops a consumed key from the resolved output.
  void forget(const std::string& key) { out_.erase(key); }

  [[nodiscard]] std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  [[nodiscard]] std::string label() const { return path_.empty() ? "config" : path_; }

  /// Rejects unknown keys and returns the resolved object.
  Json finish() {
    for (const auto& [k, v] : in_.items()) {
      if (!seen_.count(k)) throw ConfigError(field(k), "unknown field");
    }
    return out_;
  }

 private:
  static const Json& empty() {
    static const Json e = Json::object();
    return e;
  }
  double num_at(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required field is missing");
    const Json& v = in_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
    return d;
  }
  template <class T>
  T put(const std::string& key, T v) {
    seen_.insert(key);
    out_[key] = v;
    return v;
  }

  const Json& in_;
  std::string path_;
  std::set<std::string> seen_;
  Json out_ = Json::object();
};

// DomainError::what() is "<field>: <message>"; returns the message part.
std::string domain_message(const DomainError& e) {
  const std::string w = e.what();
  const std::string lead = e.field() + ": ";
  return w.rfind(lead, 0) == 0 ? w.substr(lead.size()) : w;
}

// Library constructors report DomainError(field); re-anchor the field under
// the config path it came from.
template <class F>
auto guarded(const std::string& prefix, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw ConfigError(prefix.empty() ? e.field() : prefix + "." + e.field(), domain_message(e));
  }
}

// ---------------------------------------------------------------------------
// Shared parsers.

SystemParams parse_params(Obj& o) {
  const double lambda = o.number("lambda");
  const double gamma = o.number("gamma");
  return guarded("", [&] { return SystemParams(lambda, gamma); });
}

Schedule parse_schedule(Obj& parent, const std::string& key, double default_const) {
  if (!parent.has(key)) {
    parent.attach(key, Json{{"kind", "constant"}, {"coeff", default_const}});
    parent.skip(key);
    return Schedule::constant(default_const);
  }
  Obj o = parent.child(key);
  const std::string kind = o.string("kind", "constant");
  Schedule s;
  if (kind == "constant") {
    s = Schedule::constant(o.number("coeff"));
  } else if (kind == "power_law") {
    const double c = o.number("coeff");
    s = Schedule::power_law(c, o.number("exponent"));
  } else {
    throw ConfigError(o.field("kind"), "expected \"constant\" or \"power_law\"");
  }
  parent.attach(key, o.finish());
  return s;
}

struct NoiseSpec {
  double mu = 0.0;
  Schedule s1, s2;
  double h = 1.0;
  [[nodiscard]] NoiseSchedule schedule() const {
    return NoiseSchedule(0.5, s1, s2, h).with_mu(mu);
  }
};

NoiseSpec parse_noise_body(Obj& o, bool with_mu) {
  NoiseSpec n;
  if (with_mu) {
    n.mu = o.number("mu");
    if (!(n.mu >= 0.0 && n.mu < 1.0)) throw ConfigError(o.field("mu"), "must lie in [0, 1)");
  }
  n.s1 = parse_schedule(o, "sigma1", 0.0);
  n.s2 = parse_schedule(o, "sigma2", 1.0);
  n.h = o.number("h", 1.0);
  if (!(n.h > 0.0)) throw ConfigError(o.field("h"), "must be positive");
  return n;
}

SdeScheme parse_scheme(Obj& o) {
  const std::string s = o.string("scheme", "euler_maruyama");
  if (s == "euler_maruyama") return SdeScheme::euler_maruyama;
  if (s == "milstein") return SdeScheme::milstein;
  throw ConfigError(o.field("scheme"), "expected \"euler_maruyama\" or \"milstein\"");
}

// {"r": .., "psi": ..} or {"ball_radius": d} (0 starts on the reference).
InitialCondition parse_initial(Obj& parent, const std::string& key,
                               std::optional<InitialCondition> def) {
  if (!parent.has(key)) {
    if (!def) throw ConfigError(parent.field(key), "required field is missing");
    parent.skip(key);
    if (def->kind == InitialCondition::Kind::point) {
      parent.attach(key, Json{{"r", def->point.r}, {"psi", def->point.psi}});
    } else {
      parent.attach(key, Json{{"ball_radius", def->radius}});
    }
    return *def;
  }
  Obj o = parent.child(key);
  InitialCondition ic;
  if (o.has("ball_radius")) {
    ic.kind = InitialCondition::Kind::reference_ball;
    ic.radius = o.number("ball_radius");
    if (!(ic.radius >= 0.0)) throw ConfigError(o.field("ball_radius"), "must be >= 0");
    if (o.has("r") || o.has("psi")) {
      throw ConfigError(o.label(), "give either ball_radius or (r, psi), not both");
    }
  } else {
    ic.kind = InitialCondition::Kind::point;
    ic.point = {o.number("r"), o.number("psi")};
  }
  parent.attach(key, o.finish());
  return ic;
}

std::shared_ptr<const ReferenceSolution> build_reference(const SystemParams& p, double tau_lo,
                                                         double tau_hi) {
  ReferenceOptions opt;
  if (tau_lo < opt.tau_min) return nullptr;
  opt.tau_max = std::max(opt.tau_max, std::ceil(tau_hi) + 1.0);
  return std::make_shared<const ReferenceSolution>(reference_solution(p, opt));
}

Json proportion_json(const std::optional<Proportion>& p) {
  if (!p) return nullptr;
  return Json{{"estimate", p->estimate},
              {"successes", p->successes},
              {"trials", p->trials},
              {"ci95", {p->ci95.lo, p->ci95.hi}}};
}

// Non-finite numbers have no JSON form; they are written as strings.
Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

// ---------------------------------------------------------------------------

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string which;
};

struct Context {
  std::string subcommand;
  Flags flags;
  fs::path out_dir;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::ostream& out;
  std::ostream& err;
};

using Runner = std::function<void(Obj&, Context&, const std::function<void(const Json&)>&)>;

// Each runner parses its config (recording the resolved form), calls
// `commit(resolved)` to write the manifest, then executes.

void run_series(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  const SystemParams p = parse_params(o);
  const Branch b = guarded("", [&] { return branch_from_string(o.string("branch", "stable")); });
  const int K = o.integer("K", 3);
  if (K < 0) throw ConfigError("K", "must be >= 0");
  commit(o.finish());

  const AsymptoticExpansion e = expand(p, b, K);
  Json j;
  j["gamma"] = p.gamma();
  j["lambda"] = p.lambda();
  j["branch"] = to_string(b);
  j["K"] = K;
  j["psi0"] = e.psi0;
  j["r"] = e.r;
  j["psi"] = e.psi;
  io::write_json(ctx.out_dir / "series.json", j);
  ctx.out << j.dump(2) << '\n';
}

void run_simulate(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  const SystemParams p = parse_params(o);
  const double tau0 = o.number("tau0");
  const double tau1 = o.number("tau1");
  if (!(tau1 > tau0)) throw ConfigError("tau1", "must exceed tau0");
  const InitialCondition ic = parse_initial(o, "initial", std::nullopt);
  const double sample_dt = o.number("sample_dt", 0.01);
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt", "must be positive");
  const double tol = o.number("tol", 1e-10);
  if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
  const std::string frame = o.string("frame", "primary");
  if (frame != "primary" && frame != "error") {
    throw ConfigError("frame", "expected \"primary\" or \"error\"");
  }
  std::optional<NoiseSpec> noise;
  double dt = 0.0;
  SdeScheme scheme = SdeScheme::euler_maruyama;
  std::uint64_t path_index = 0;
  bool out_of_class = false;
  if (o.has("noise") && !o.raw("noise").is_null()) {
    Obj n = o.child("noise");
    noise = parse_noise_body(n, true);
    dt = n.number("dt", default_sde_dt(noise->mu));
    if (!(dt > 0.0)) throw ConfigError("noise.dt", "must be positive");
    scheme = parse_scheme(n);
    path_index = n.unsigned_int("path_index", 0);
    out_of_class = n.boolean("out_of_class", false);
    o.attach("noise", n.finish());
  } else {
    o.skip("noise");
    o.attach("noise", nullptr);
  }
  commit(o.finish());

  const bool need_ref = frame == "error" || ic.kind == InitialCondition::Kind::reference_ball;
  std::shared_ptr<const ReferenceSolution> ref;
  if (need_ref) {
    ref = build_reference(p, tau0, tau1);
    if (!ref || !ref->contains(tau1)) {
      throw ConfigError("tau0", "the error frame and reference starts need tau0 >= 5");
    }
  }
  EnsembleConfig cfg;
  cfg.params = p;
  cfg.initial = ic;
  cfg.tau0 = tau0;
  cfg.horizon = tau1 - tau0;
  cfg.reference = ref;
  cfg.master_seed = ctx.seed;

  Trajectory tr;
  if (noise) {
    cfg.noise = noise->schedule();
    cfg.dt = dt;
    cfg.scheme = scheme;
    const NoiseClassReport cls =
        noise_class_check(cfg.noise, std::max(tau0, std::numeric_limits<double>::min()));
    if (!cls.admissible && !out_of_class) {
      throw ConfigError("noise", "schedule fails the class bound h; set noise.out_of_class to run");
    }
    const auto every = static_cast<std::size_t>(std::max(1.0, std::round(sample_dt / dt)));
    tr = guarded("", [&] { return sample_path(cfg, path_index, every); });
  } else {
    const State x0 = initial_state(cfg, 0);
    const Field f = [p](double t, const Vec2& x) { return rhs_primary(State::from(x), t, p); };
    tr = integrate_ode(f, x0.vec(), tau0, tau1, tol, uniform_times(tau0, tau1, sample_dt));
  }
  const CaptureClass cls = classify_capture(tr, p);
  if (frame == "error") {
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const State s = ref->at(tr.times[i]);
      tr.states[i] = {tr.states[i][0] - s.r, tr.states[i][1] - s.psi};
    }
    tr.labels[0] = "R";
    tr.labels[1] = "Psi";
  }
  io::write_trajectory(ctx.out_dir / "trajectory.csv", tr, Json{{"capture", to_string(cls)}});
  ctx.out << "simulate: " << tr.size() << " samples, " << to_string(cls) << '\n';
}

struct EnsembleSpec {
  EnsembleConfig cfg;
  bool write_paths = true;
};

EnsembleSpec parse_ensemble(Obj& o, Context& ctx) {
  EnsembleSpec s;
  EnsembleConfig& c = s.cfg;
  c.params = parse_params(o);
  Obj n = o.child("noise");
  const NoiseSpec noise = parse_noise_body(n, true);
  o.attach("noise", n.finish());
  c.noise = noise.schedule();
  c.initial = parse_initial(o, "initial", std::nullopt);
  c.tau0 = o.number("tau0");
  c.horizon = o.number("horizon");
  c.dt = o.number("dt", default_sde_dt(noise.mu));
  c.paths = o.unsigned_int("paths");
  c.eps1 = o.number("eps1", 0.05);
  c.scheme = parse_scheme(o);
  c.out_of_class = o.boolean("out_of_class", false);
  s.write_paths = o.boolean("write_paths", true);
  c.master_seed = ctx.seed;
  c.threads = ctx.threads;
  return s;
}

void run_ensemble_cmd(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  EnsembleSpec spec = parse_ensemble(o, ctx);
  commit(o.finish());
  EnsembleConfig& c = spec.cfg;
  c.reference = build_reference(c.params, c.tau0, c.tau0 + c.horizon);
  const EnsembleStats st = guarded("", [&] { return run_ensemble(c); });

  std::vector<double> exits;
  std::size_t censored = 0;
  for (const PathResult& r : st.path_results) {
    exits.push_back(r.exit_time);
    censored += r.censored ? 1 : 0;
  }
  const bool tracked = !st.path_results.empty() && st.path_results.front().has_deviation;
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["paths"] = st.paths;
  j["horizon"] = st.horizon;
  j["out_of_class"] = st.out_of_class;
  j["class_bound"] = number_json(st.class_bound);
  j["deviation_tracked"] = tracked;
  j["blowups"] = st.blowups;
  j["exceed_prob_psi"] = proportion_json(st.exceed_prob_psi);
  j["exceed_prob_r"] = proportion_json(st.exceed_prob_r);
  j["capture_fraction"] = proportion_json(st.capture_fraction);
  if (tracked) {
    j["exit_times"] = Json{{"median", median(exits)}, {"censored", censored}};
  } else {
    j["exit_times"] = nullptr;
  }
  io::write_json(ctx.out_dir / "stats.json", j);

  if (spec.write_paths) {
    io::CsvWriter w(ctx.out_dir / "paths.csv",
                    {"path_index", "exit_time", "censored", "sup_psi_dev", "sup_r_dev_weighted",
                     "sup_r_dev_raw", "exceed_psi", "exceed_r", "capture", "blew_up",
                     "blowup_tau", "r_end", "psi_end"},
                    Json{{"seed", c.master_seed}, {"dt", c.dt}, {"tau0", c.tau0}, {"horizon", c.horizon},
                         {"eps1", c.eps1}, {"scheme", c.scheme == SdeScheme::milstein ? "milstein" : "euler_maruyama"}});
    for (const PathResult& r : st.path_results) {
      w.cell(static_cast<long long>(r.path_index))
          .cell(r.exit_time)
          .cell(static_cast<long long>(r.censored))
          .cell(r.sup_psi_dev)
          .cell(r.sup_r_dev_weighted)
          .cell(r.sup_r_dev_raw)
          .cell(static_cast<long long>(r.exceed_psi))
          .cell(static_cast<long long>(r.exceed_r))
          .cell(std::string(to_string(r.capture)))
          .cell(static_cast<long long>(r.blew_up))
          .cell(r.blowup_tau)
          .cell(r.final_state.r)
          .cell(r.final_state.psi);
      w.end_row();
    }
    w.close();
  }
  ctx.out << "ensemble: " << st.paths << " paths";
  if (st.capture_fraction) ctx.out << ", capture fraction " << st.capture_fraction->estimate;
  ctx.out << '\n';
}

void run_exit_times(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  const SystemParams p = parse_params(o);
  const NoiseSpec noise = parse_noise_body(o, false);
  const std::vector<double> mus = o.numbers("mu_list");
  if (mus.size() < 3) throw ConfigError("mu_list", "needs at least 3 values");
  for (double m : mus) {
    if (!(m > 0.0 && m < 1.0)) throw ConfigError("mu_list", "values must lie in (0, 1)");
  }
  const double tau0 = o.number("tau0");
  const double horizon = o.number("horizon");
  const double dt = o.number("dt", default_sde_dt(*std::min_element(mus.begin(), mus.end())));
  const std::uint64_t paths = o.unsigned_int("paths");
  const double eps1 = o.number("eps1");
  InitialCondition def;
  def.kind = InitialCondition::Kind::reference_ball;
  const InitialCondition ic = parse_initial(o, "initial", def);
  const SdeScheme scheme = parse_scheme(o);
  const int bootstrap = o.integer("bootstrap", 1000);
  commit(o.finish());

  const auto ref = build_reference(p, tau0, tau0 + horizon);
  if (!ref) throw ConfigError("tau0", "exit times need tau0 >= 5 (reference domain)");
  std::vector<EnsembleConfig> cfgs;
  for (double m : mus) {
    EnsembleConfig c;
    c.params = p;
    c.noise = NoiseSpec{m, noise.s1, noise.s2, noise.h}.schedule();
    c.initial = ic;
    c.tau0 = tau0;
    c.horizon = horizon;
    c.dt = dt;
    c.paths = paths;
    c.eps1 = eps1;
    c.scheme = scheme;
    c.master_seed = ctx.seed;
    c.threads = ctx.threads;
    c.reference = ref;
    cfgs.push_back(c);
  }
  const ExitTimeScaling sc = guarded("", [&] { return exit_time_scaling(cfgs, bootstrap, ctx.seed); });
  io::CsvWriter w(ctx.out_dir / "exit_times.csv", {"mu", "median_exit", "lo", "hi"},
                  Json{{"seed", ctx.seed}, {"paths", paths}, {"dt", dt}, {"eps1", eps1}, {"bootstrap", bootstrap},
                       {"interval", "bootstrap percentile 95% of the median"}});
  Json pts = Json::array();
  for (const ExitTimePoint& pt : sc.points) {
    w.cell(pt.mu).cell(pt.median_exit).cell(pt.ci95.lo).cell(pt.ci95.hi);
    w.end_row();
    pts.push_back(Json{{"mu", pt.mu}, {"median_exit", pt.median_exit}, {"censored", pt.censored},
                       {"paths", pt.paths}});
  }
  w.close();
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["slope"] = sc.slope;
  j["slope_ci95"] = {sc.slope_ci95.lo, sc.slope_ci95.hi};
  j["points"] = pts;
  io::write_json(ctx.out_dir / "scaling.json", j);
  ctx.out << "exit-times: slope " << sc.slope << " [" << sc.slope_ci95.lo << ", "
          << sc.slope_ci95.hi << "]\n";
}

void run_certify(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  const SystemParams p = parse_params(o);
  CertifyRequest rq;
  rq.d_lo = o.number("d_lo", rq.d_lo);
  rq.d_hi = o.number("d_hi", rq.d_hi);
  rq.tau_lo = o.number("tau_lo", rq.tau_lo);
  rq.tau_hi = o.number("tau_hi", rq.tau_hi);
  rq.tau_horizon = o.number("tau_horizon", 1000.0);
  {
    Obj g = o.child_or_empty("grid");
    rq.grid.radial = g.integer("radial", rq.grid.radial);
    rq.grid.angular = g.integer("angular", rq.grid.angular);
    rq.grid.tau = g.integer("tau", rq.grid.tau);
    o.attach("grid", g.finish());
  }
  rq.spot_checks = o.integer("spot_checks", rq.spot_checks);
  rq.spot_seed = ctx.seed;
  commit(o.finish());

  const auto ref = build_reference(p, std::max(rq.tau_lo, 5.0), rq.tau_horizon);
  const CertifyResult res = guarded("", [&] { return certify(p, *ref, rq); });
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["method"] = "sampled grid and random spot checks (not a proof)";
  if (res.certificate) {
    const StabilityCertificate& c = *res.certificate;
    j["certified"] = true;
    j["certificate"] = Json{{"d0", c.d0},
                            {"tau0", c.tau0},
                            {"A", c.A},
                            {"B", c.B},
                            {"C", c.C},
                            {"q", c.q},
                            {"a", c.a},
                            {"b", c.b},
                            {"rho0", c.rho0},
                            {"tau_horizon", c.tau_horizon},
                            {"grid", {{"radial", c.grid.radial}, {"angular", c.grid.angular}, {"tau", c.grid.tau}}},
                            {"margin", c.margin},
                            {"B_measured", c.B_measured},
                            {"C_measured", c.C_measured},
                            {"spot_checks", c.spot_checks},
                            {"spot_violations", c.spot_violations}};
  } else {
    const CertifyFailure& f = *res.failure;
    j["certified"] = false;
    j["failure"] = Json{{"inequality", f.inequality}, {"R", f.R}, {"Psi", f.Psi}, {"tau", f.tau},
                        {"slack", f.slack}};
  }
  io::write_json(ctx.out_dir / "certificate.json", j);
  if (!res.certificate) {
    const CertifyFailure& f = *res.failure;
    throw std::runtime_error("lyapunov: no certificate; " + f.inequality + " fails at R=" +
                             io::format_double(f.R) + " Psi=" + io::format_double(f.Psi) +
                             " tau=" + io::format_double(f.tau));
  }
  ctx.out << "certify: d0 " << res.certificate->d0 << ", tau0 " << res.certificate->tau0 << '\n';
}

void run_thresholds(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  ThresholdInputs in;
  in.N = o.integer("N", 1);
  in.kappa = o.number("kappa");
  in.h = o.number("h", 1.0);
  in.n = o.number("n", 2.0);
  in.A = o.number("A", 3.0);
  in.a = o.number("a");
  in.C = o.number("C");
  in.eps1 = o.number("eps1");
  in.eps2 = o.number("eps2");
  std::vector<double> mus;
  if (o.has("mu_list")) {
    mus = o.numbers("mu_list");
  } else {
    o.attach("mu_list", Json::array());
  }
  const std::optional<double> beta = o.maybe_number("beta");
  std::optional<double> B, q;
  B = o.maybe_number("B");
  q = o.maybe_number("q");
  commit(o.finish());

  const ThresholdReport r = guarded("", [&] { return thresholds(in); });
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["N"] = r.N;
  j["kappa"] = r.kappa;
  j["h"] = r.h;
  j["eps1"] = r.eps1;
  j["eps2"] = r.eps2;
  j["delta"] = r.delta ? Json(*r.delta) : Json("empirical");
  j["Delta"] = r.Delta ? Json(*r.Delta) : Json("empirical");
  j["T_mu_exponent"] = r.horizon_exponent;
  Json tm = Json::array();
  for (double m : mus) tm.push_back(Json{{"mu", m}, {"T_mu", number_json(r.T_mu(m))}});
  j["T_mu"] = tm;
  if (beta) j["beta_horizon_exponent"] = guarded("", [&] { return thresholds_beta(*beta, in.kappa); });
  if (B && q) {
    Json ak = Json::array();
    for (int k = 1; k <= std::max(1, in.N); ++k) {
      ak.push_back(guarded("", [&] { return chain_coefficient(k, in.n, in.h, *B, in.C, *q); }));
    }
    j["a_k"] = ak;
  }
  io::write_json(ctx.out_dir / "thresholds.json", j);
  ctx.out << j.dump(2) << '\n';
}

void run_pendulum(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  PendulumParams pp;
  pp.eps = o.number("eps");
  pp.alpha = o.number("alpha");
  pp.theta = o.number("theta");
  const SystemParams p = guarded("", [&] { return map_params(pp); });
  InitialCondition def;
  def.kind = InitialCondition::Kind::reference_ball;
  const InitialCondition seed = parse_initial(o, "initial", def);
  if (seed.kind == InitialCondition::Kind::reference_ball && seed.radius != 0.0) {
    throw ConfigError("initial.ball_radius", "pendulum seeds take radius 0 (the reference)");
  }
  const double tau_start = o.number("tau_start");
  const double tau_end = o.number("tau_end");
  if (!(tau_end > tau_start && tau_start >= 0.0)) {
    throw ConfigError("tau_end", "need 0 <= tau_start < tau_end");
  }
  const double tol = o.number("tol", 1e-10);
  const double sample_dt = o.number("sample_dt", 0.05);
  if (!(tol > 0.0)) throw ConfigError("tol", "must be positive");
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt", "must be positive");
  commit(o.finish());

  State s0 = seed.point;
  if (seed.kind == InitialCondition::Kind::reference_ball) {
    const auto ref = build_reference(p, tau_start, tau_end);
    if (!ref) throw ConfigError("tau_start", "reference seeds need tau_start >= 5");
    s0 = ref->at(tau_start);
  }
  const Field f = [p](double t, const Vec2& x) { return rhs_primary(State::from(x), t, p); };
  const Trajectory averaged =
      integrate_ode(f, s0.vec(), tau_start, tau_end, tol, uniform_times(tau_start, tau_end, 0.01));
  const double t0 = slow_to_fast(tau_start, pp), t1 = slow_to_fast(tau_end, pp);
  const Vec2 x0 = seed_from_slow(s0, t0, pp);
  const Trajectory pend = integrate_pendulum(pp, x0[0], x0[1], t0, t1, tol, sample_dt);
  const EnvelopeReport rep = envelope_compare(pend, averaged, pp);

  io::write_trajectory(ctx.out_dir / "pendulum.csv", pend);
  io::write_trajectory(ctx.out_dir / "averaged.csv", averaged);
  io::CsvWriter w(ctx.out_dir / "comparison.csv", {"tau", "envelope", "predicted", "relerr"},
                  Json{{"eps", pp.eps}, {"tol", tol}, {"predicted", "sqrt(4 eps r(tau))"}});
  for (const EnvelopeRow& r : rep.rows) {
    w.cell(r.tau).cell(r.envelope).cell(r.predicted).cell(r.relerr);
    w.end_row();
  }
  w.close();
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["lambda"] = p.lambda();
  j["gamma"] = p.gamma();
  j["mean_relerr"] = rep.mean_relerr;
  j["max_relerr"] = rep.max_relerr;
  j["extrema"] = rep.extrema;
  j["averaged_capture"] = tau_end >= kMinClassifyTau ? to_string(classify_capture(averaged, p))
                                                     : "indeterminate";
  j["envelope_grown"] = envelope_grown(pend, pp);
  io::write_json(ctx.out_dir / "pendulum_summary.json", j);
  ctx.out << "pendulum: mean relative envelope error " << rep.mean_relerr << '\n';
}

void run_figures(Obj& o, Context& ctx, const std::function<void(const Json&)>& commit) {
  std::string which = ctx.flags.which;
  if (which.empty()) {
    which = o.string("which");
  } else {
    o.skip("which");
    o.attach("which", which);
  }
  if (which != "fig1" && which != "fig2") throw ConfigError("which", "expected fig1 or fig2");
  const double tau_end = o.number("tau_end", 60.0);
  const double sample_dt = o.number("sample_dt", 0.05);
  const double dt = o.number("dt", 1e-3);
  const std::uint64_t path_index = o.unsigned_int("path_index", 0);
  if (!(tau_end > 0.0)) throw ConfigError("tau_end", "must be positive");
  if (!(sample_dt > 0.0)) throw ConfigError("sample_dt", "must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
  commit(o.finish());

  const SystemParams p(1.0, 0.1);
  const fs::path dir = ctx.out_dir / which;
  if (which == "fig1") {
    const Field f = [p](double t, const Vec2& x) { return rhs_primary(State::from(x), t, p); };
    io::CsvWriter idx(dir / "index.csv", {"file", "r0", "psi0", "capture"},
                      Json{{"figure", which}, {"tau_end", tau_end}, {"integrator", "dopri5"}});
    for (int i = 1; i <= 8; ++i) {
      for (int k = 0; k < 4; ++k) {
        const State s0{0.25 * i, k * std::numbers::pi / 2.0};
        const Trajectory tr =
            integrate_ode(f, s0.vec(), 0.0, tau_end, 1e-10, uniform_times(0.0, tau_end, sample_dt));
        const CaptureClass c = classify_capture(tr, p);
        const std::string name = "traj_r" + std::to_string(i) + "_psi" + std::to_string(k) + ".csv";
        io::write_trajectory(dir / name, tr,
                             Json{{"r0", s0.r}, {"psi0", s0.psi}, {"capture", to_string(c)}});
        idx.cell(name).cell(s0.r).cell(s0.psi).cell(std::string(to_string(c)));
        idx.end_row();
      }
    }
    idx.close();
  } else {
    io::CsvWriter idx(dir / "index.csv", {"file", "mu", "capture"},
                      Json{{"figure", which}, {"tau_end", tau_end}, {"seed", ctx.seed}, {"dt", dt}});
    const std::size_t every = static_cast<std::size_t>(std::max(1.0, std::round(sample_dt / dt)));
    for (double mu : {0.1, 0.35, 0.55}) {
      EnsembleConfig c;
      c.params = p;
      c.noise = NoiseSchedule(mu, Schedule::constant(0.0), Schedule::constant(1.0), 1.0);
      c.initial.point = {1.09, 2.15};
      c.tau0 = 0.0;
      c.horizon = tau_end;
      c.dt = dt;
      c.master_seed = ctx.seed;
      const Trajectory tr = sample_path(c, path_index, every);
      const CaptureClass cls = classify_capture(tr, p);
      const std::string name = "path_mu" + std::to_string(static_cast<int>(std::lround(mu * 100))) + ".csv";
      io::write_trajectory(dir / name, tr, Json{{"mu", mu}, {"capture", to_string(cls)}});
      idx.cell(name).cell(mu).cell(std::string(to_string(cls)));
      idx.end_row();
    }
    idx.close();
  }
  ctx.out << "figures: wrote " << (dir / "index.csv").string() << '\n';
}

const std::map<std::string, Runner>& runners() {
  static const std::map<std::string, Runner> r = {
      {"series", run_series},       {"simulate", run_simulate},   {"ensemble", run_ensemble_cmd},
      {"exit-times", run_exit_times}, {"certify", run_certify},   {"thresholds", run_thresholds},
      {"pendulum", run_pendulum},   {"figures", run_figures}};
  return r;
}

Json load_config(const Flags& flags, const std::string& subcommand) {
  if (flags.config.empty()) {
    if (subcommand == "figures") return Json::object();
    throw ConfigError("config", "--config is required for " + subcommand);
  }
  std::ifstream in(flags.config, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot read " + flags.config);
  std::stringstream ss;
  ss << in.rdbuf();
  if (ss.str().find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ConfigError("config", "file is empty");
  }
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  if (j.contains("manifest_version")) {
    Obj m(j, "");
    m.integer("manifest_version", kManifestVersion);
    m.string("artifact_version", kArtifactVersion);
    const std::string sub = m.string("subcommand");
    if (sub != subcommand) {
      throw ConfigError("subcommand", "manifest was written by '" + sub + "'");
    }
    m.skip("execution");
    const Json cfg = m.raw("config");
    m.finish();
    if (!cfg.is_object()) throw ConfigError("config", "manifest config must be an object");
    return cfg;
  }
  return j;
}

int execute(const std::string& sub, const Flags& flags, std::ostream& out, std::ostream& err) {
  Context ctx{sub, flags, {}, 1, 0, out, err};
  try {
    const Json cfg = load_config(flags, sub);
    Obj o(cfg, "");
    ctx.seed = flags.seed ? *flags.seed : o.unsigned_int("seed", 1);
    ctx.threads = flags.threads ? *flags.threads
                                : static_cast<unsigned>(o.unsigned_int("threads", 0));
    ctx.out_dir = flags.out.empty() ? fs::path(o.string("out_dir", "out")) : fs::path(flags.out);
    // Execution settings live in the manifest's "execution" block.
    o.attach("seed", ctx.seed);
    o.forget("threads");
    o.forget("out_dir");
    const std::function<void(const Json&)> commit = [&](const Json& resolved) {
      const Json& config = resolved;
      Json m;
      m["manifest_version"] = kManifestVersion;
      m["artifact_version"] = kArtifactVersion;
      m["subcommand"] = sub;
      m["config"] = config;
      m["execution"] = Json{{"threads", ctx.threads}, {"out_dir", ctx.out_dir.string()}};
      fs::create_directories(ctx.out_dir);
      io::write_json(ctx.out_dir / "manifest.json", m);
    };
    runners().at(sub)(o, ctx, commit);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "autores " << sub << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "autores " << sub << ": config error: " << e.field() << ": " << domain_message(e) << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "autores " << sub << ": " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parametric autoresonance simulation and certification lab", "autores"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  const std::map<std::string, std::string> help = {
      {"series", "asymptotic series coefficients"},
      {"simulate", "one deterministic or stochastic trajectory"},
      {"ensemble", "Monte Carlo deviation, exit and capture statistics"},
      {"exit-times", "median exit time scaling in mu"},
      {"certify", "sampled Lyapunov certificate"},
      {"thresholds", "admissibility thresholds delta, Delta and T_mu"},
      {"pendulum", "full pendulum against the averaged system"},
      {"figures", "trajectory CSVs for the two figure parameter sets"}};
  std::uint64_t seed = 0;
  unsigned threads = 0;
  for (const auto& [name, text] : help) {
    CLI::App* sc = app.add_subcommand(name, text);
    sc->add_option("--config", flags.config, "JSON config or manifest.json");
    sc->add_option("--out", flags.out, "output directory");
    sc->add_option("--seed", seed, "master seed (u64)");
    sc->add_option("--threads", threads, "worker threads (0 = all cores)");
    if (name == "figures") sc->add_option("--which", flags.which, "fig1 or fig2");
    sc->callback([&chosen, name = name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "autores: " << e.what() << '\n';
    return kExitConfig;
  }
  CLI::App* sc = app.get_subcommand(chosen);
  if (sc->count("--seed") > 0) flags.seed = seed;
  if (sc->count("--threads") > 0) flags.threads = threads;
  return execute(chosen, flags, out, err);
}

}  // namespace autores::cli
