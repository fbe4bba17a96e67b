#include "autores/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "autores/noise.hpp"

namespace autores {

LyapunovJet lyapunov_jet(const ErrorState& e, double tau, const SystemParams& p,
                         const ReferenceSolution& ref) {
  const HamiltonianJet h = hamiltonian_jet(e, tau, p, ref);
  const double g = p.gamma();
  const double w = 1.0 / (p.nu() * tau);

  LyapunovJet v;
  v.V = w * (h.H + 0.5 * g * e.R * e.Psi);
  v.dR = w * (h.dR + 0.5 * g * e.Psi);
  v.dPsi = w * (h.dPsi + 0.5 * g * e.R);
  v.dtau = -v.V / tau + w * h.dtau;
  v.dRR = w * h.dRR;
  v.dRPsi = w * (h.dRPsi + 0.5 * g);
  v.dPsiPsi = w * h.dPsiPsi;
  v.flow_derivative = v.dtau + v.dR * (-h.dPsi - g * e.R) + v.dPsi * h.dR;
  return v;
}

double eval_V(const ErrorState& e, double tau, const SystemParams& p, const ReferenceSolution& ref) {
  return lyapunov_jet(e, tau, p, ref).V;
}

double weighted_norm_sq(const ErrorState& e, double tau, const SystemParams& p) noexcept {
  return e.R * e.R / (p.nu() * tau) + e.Psi * e.Psi;
}

namespace {

struct PointSlack {
  double value = std::numeric_limits<double>::infinity();
  const char* which = "";
};

PointSlack point_slack(const LyapunovJet& v, double W, double q) {
  PointSlack s;
  const double ratio = v.V / W;
  const double lower = ratio - 0.25;
  const double upper = 0.75 - ratio;
  const double decay = (-v.flow_derivative - q * v.V) / W;
  s.value = lower;
  s.which = "lower_sandwich";
  if (upper < s.value) {
    s.value = upper;
    s.which = "upper_sandwich";
  }
  if (decay < s.value || !std::isfinite(decay)) {
    s.value = std::isfinite(decay) ? decay : -std::numeric_limits<double>::infinity();
    s.which = "decay";
  }
  return s;
}

std::vector<double> tau_nodes(const CertifyRequest& req, double horizon) {
  std::vector<double> out(static_cast<std::size_t>(req.grid.tau));
  const double ratio = horizon / req.tau_lo;
  for (int i = 0; i < req.grid.tau; ++i) {
    out[static_cast<std::size_t>(i)] =
        req.tau_lo * std::pow(ratio, static_cast<double>(i) / (req.grid.tau - 1));
  }
  out.back() = horizon;
  return out;
}

void validate(const CertifyRequest& req, const ReferenceSolution& ref, double horizon) {
  if (req.grid.radial < 32 || req.grid.angular < 32 || req.grid.tau < 32) {
    throw DomainError("grid", "certification needs at least 32 points per axis");
  }
  if (!(req.d_lo > 0.0 && req.d_hi >= req.d_lo)) throw DomainError("d_range", "need 0 < d_lo <= d_hi");
  if (!(req.tau_lo > 0.0 && req.tau_hi >= req.tau_lo)) {
    throw DomainError("tau_range", "need 0 < tau_lo <= tau_hi");
  }
  if (req.tau_lo < ref.tau_min() || horizon > ref.tau_max() || horizon <= req.tau_hi) {
    throw DomainError("tau_range", "tau range must lie inside the reference domain and below the horizon");
  }
}

struct GridPoint {
  double R, Psi, tau;
};

template <class Visit>
void for_each_point(const CertifyRequest& req, const std::vector<double>& taus, std::size_t tau_from,
                    int max_radius, Visit&& visit) {
  const double dr = req.d_hi / req.grid.radial;
  for (std::size_t t = tau_from; t < taus.size(); ++t) {
    for (int i = 1; i <= max_radius; ++i) {
      for (int j = 0; j < req.grid.angular; ++j) {
        const double th = 2.0 * std::numbers::pi * j / req.grid.angular;
        visit(t, i, GridPoint{dr * i * std::cos(th), dr * i * std::sin(th), taus[t]});
      }
    }
  }
}

}  // namespace

SlackReport worst_slack(const SystemParams& p, const ReferenceSolution& ref, double d0, double tau0,
                        const CertifyRequest& req) {
  const double horizon = req.tau_horizon > 0.0 ? req.tau_horizon : ref.tau_max();
  validate(req, ref, horizon);
  const auto taus = tau_nodes(req, horizon);
  const double q = certified_decay_rate(p);
  const double dr = req.d_hi / req.grid.radial;
  const int max_radius = static_cast<int>(std::floor(d0 / dr + 1e-9));
  const auto from = static_cast<std::size_t>(
      std::lower_bound(taus.begin(), taus.end(), tau0 * (1.0 - 1e-12)) - taus.begin());

  SlackReport rep;
  rep.worst = std::numeric_limits<double>::infinity();
  for_each_point(req, taus, from, max_radius, [&](std::size_t, int, const GridPoint& g) {
    const ErrorState e{g.R, g.Psi};
    const PointSlack s =
        point_slack(lyapunov_jet(e, g.tau, p, ref), weighted_norm_sq(e, g.tau, p), q);
    if (s.value < rep.worst) {
      rep.worst = s.value;
      rep.where = {s.which, g.R, g.Psi, g.tau, s.value};
    }
  });
  return rep;
}

CertifyResult certify(const SystemParams& p, const ReferenceSolution& ref,
                      const CertifyRequest& req) {
  const double horizon = req.tau_horizon > 0.0 ? req.tau_horizon : ref.tau_max();
  validate(req, ref, horizon);
  const auto taus = tau_nodes(req, horizon);
  const double q = certified_decay_rate(p);
  const int nr = req.grid.radial;
  const double dr = req.d_hi / nr;
  const std::size_t nt = taus.size();

  // slack[t][i]: worst slack over angles at radius index i (1-based) and tau node t.
  std::vector<std::vector<double>> slack(nt, std::vector<double>(static_cast<std::size_t>(nr) + 1,
                                                                 std::numeric_limits<double>::infinity()));
  for_each_point(req, taus, 0, nr, [&](std::size_t t, int i, const GridPoint& g) {
    const ErrorState e{g.R, g.Psi};
    const PointSlack s =
        point_slack(lyapunov_jet(e, g.tau, p, ref), weighted_norm_sq(e, g.tau, p), q);
    auto& cell = slack[t][static_cast<std::size_t>(i)];
    cell = std::min(cell, s.value);
  });
  // Cumulative over radius, then suffix minimum over tau.
  for (auto& row : slack) {
    for (std::size_t i = 2; i < row.size(); ++i) row[i] = std::min(row[i], row[i - 1]);
  }
  for (std::size_t t = nt - 1; t-- > 0;) {
    for (std::size_t i = 1; i < slack[t].size(); ++i) {
      slack[t][i] = std::min(slack[t][i], slack[t + 1][i]);
    }
  }

  const int i_min = static_cast<int>(std::ceil(req.d_lo / dr - 1e-9));
  int best_i = 0;
  std::size_t best_t = 0;
  for (std::size_t t = 0; t < nt && taus[t] <= req.tau_hi * (1.0 + 1e-12); ++t) {
    // Largest radius index with non-negative slack; slack is non-increasing in i.
    int lo = 0, hi = nr;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (slack[t][static_cast<std::size_t>(mid)] >= 0.0) lo = mid;
      else hi = mid - 1;
    }
    if (lo >= std::max(i_min, 1) && lo > best_i) {
      best_i = lo;
      best_t = t;
    }
  }

  CertifyResult result;
  if (best_i == 0) {
    std::size_t last_candidate = 0;
    while (last_candidate + 1 < nt && taus[last_candidate + 1] <= req.tau_hi * (1.0 + 1e-12)) {
      ++last_candidate;
    }
    const SlackReport worst =
        worst_slack(p, ref, std::max(dr * std::max(i_min, 1), dr), taus[last_candidate], req);
    result.failure = worst.where;
    return result;
  }

  StabilityCertificate c;
  c.d0 = dr * best_i;
  c.tau0 = taus[best_t];
  c.q = q;
  c.a = 1.0 / p.nu();
  c.b = 1.0;
  c.A = 3.0;
  c.rho0 = c.d0;
  c.tau_horizon = horizon;
  c.grid = req.grid;
  c.margin = slack[best_t][static_cast<std::size_t>(best_i)];

  double b_ratio = 0.0, c_max = 0.0;
  for_each_point(req, taus, best_t, best_i, [&](std::size_t, int, const GridPoint& g) {
    const LyapunovJet v = lyapunov_jet({g.R, g.Psi}, g.tau, p, ref);
    if (v.V > 0.0) b_ratio = std::max(b_ratio, (v.dR * v.dR + v.dPsi * v.dPsi) / v.V);
    c_max = std::max({c_max, std::abs(v.dRR), std::abs(v.dRPsi), std::abs(v.dPsiPsi)});
  });
  // U = 4 V: |dU|^2 / U = 4 |dV|^2 / V and d2U = 4 d2V.
  c.B_measured = 4.0 * b_ratio;
  c.C_measured = 4.0 * c_max;
  c.B = c.B_measured * 1.01;
  c.C = c.C_measured * 1.01;

  // Random spot checks inside the certified domain.
  const NoiseStream rng(req.spot_seed, 0);
  std::uint64_t counter = 0;
  c.spot_checks = req.spot_checks;
  for (int k = 0; k < req.spot_checks; ++k) {
    const double rad = c.d0 * std::sqrt(rng.uniform(counter++));
    const double th = 2.0 * std::numbers::pi * rng.uniform(counter++);
    const double tau = c.tau0 * std::pow(horizon / c.tau0, rng.uniform(counter++));
    const ErrorState e{rad * std::cos(th), rad * std::sin(th)};
    const LyapunovJet v = lyapunov_jet(e, tau, p, ref);
    const double W = weighted_norm_sq(e, tau, p);
    const PointSlack s = point_slack(v, W, q);
    const double U = 4.0 * v.V;
    const double grad_sq = 16.0 * (v.dR * v.dR + v.dPsi * v.dPsi);
    const double hess = 4.0 * std::max({std::abs(v.dRR), std::abs(v.dRPsi), std::abs(v.dPsiPsi)});
    if (s.value < 0.0 || grad_sq > c.B * U || hess > c.C) ++c.spot_violations;
  }
  result.certificate = c;
  return result;
}

double chain_coefficient(int k, double n, double h, double B, double C, double q) {
  if (k < 1) throw DomainError("k", "chain index starts at 1");
  if (!(q > 0.0)) throw DomainError("q", "decay rate must be positive");
  return (k + 1) * n * n * h * (B + C) / q;
}

double chain_U(const ChainParams& c, double U, double t) {
  if (c.N < 1) throw DomainError("N", "chain order must be >= 1");
  if (!(c.h > 0.0 && c.B > 0.0 && c.C > 0.0 && c.q > 0.0 && c.n > 0.0 && c.T > 0.0)) {
    throw DomainError("chain", "constants must be positive");
  }
  if (t < c.t0 || t > c.t0 + c.T * (1.0 + 1e-12)) {
    throw DomainError("t", "outside [t0, t0 + T]");
  }
  const double mu2 = c.mu * c.mu;
  double Uk = U + mu2 * c.h * c.n * c.n * c.C * std::max(0.0, c.T + c.t0 - t);
  for (int k = 2; k <= c.N; ++k) {
    Uk = std::pow(U, k) + mu2 * chain_coefficient(k - 1, c.n, c.h, c.B, c.C, c.q) * Uk;
  }
  return Uk;
}

double ThresholdReport::T_mu(double mu) const { return std::pow(mu, horizon_exponent); }

ThresholdReport thresholds(const ThresholdInputs& in) {
  if (!(in.kappa > 0.0 && in.kappa < 1.0)) throw DomainError("kappa", "must lie in (0, 1)");
  if (in.N < 1) throw DomainError("N", "must be >= 1");
  if (!(in.h > 0.0 && in.n > 0.0 && in.A > 0.0 && in.a >= 0.0 && in.C > 0.0 && in.eps1 > 0.0 &&
        in.eps2 > 0.0)) {
    throw DomainError("thresholds", "parameters must be positive (a >= 0)");
  }
  ThresholdReport r;
  r.N = in.N;
  r.kappa = in.kappa;
  r.h = in.h;
  r.eps1 = in.eps1;
  r.eps2 = in.eps2;
  r.horizon_exponent = -2.0 * in.N * (1.0 - in.kappa);
  if (in.N == 1) {
    const double budget = in.eps1 * in.eps1 * in.eps2;
    r.delta = std::sqrt(budget / (2.0 * in.A * (1.0 + in.a)));
    r.Delta = std::pow(budget / (2.0 * in.n * in.n * in.h * in.C), 1.0 / (2.0 * in.kappa));
  }
  return r;
}

double thresholds_beta(double beta, double kappa) {
  if (!(beta > 0.0)) throw DomainError("beta", "must be > 0");
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa", "must lie in (0, 1)");
  return (kappa - 2.0) / (1.0 + beta);
}

namespace {

// sup over tau > tau0 of |c| tau^e.
double sup_power(double coeff, double exponent, double tau0) {
  if (coeff == 0.0) return 0.0;
  if (exponent > 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(coeff) * std::pow(tau0, exponent);
}

}  // namespace

NoiseClassReport noise_class_check(const NoiseSchedule& n, double tau0) {
  if (!(tau0 > 0.0)) throw DomainError("tau0", "must be > 0");
  const Schedule& s1 = n.sigma1();
  const Schedule& s2 = n.sigma2();
  // Both terms are monotone in tau; an increasing term is unbounded, so the
  // supremum is either +inf or attained in the limit tau -> tau0.
  const double e1 = (s1.kind == Schedule::Kind::constant ? 0.0 : s1.exponent) + 1.0;
  const double e2 = s2.kind == Schedule::Kind::constant ? 0.0 : s2.exponent;
  NoiseClassReport r;
  r.bound = sup_power(s1.coeff, e1, tau0) + sup_power(s2.coeff, e2, tau0);
  r.admissible = r.bound <= n.h();
  return r;
}

double max_half_covariance(const NoiseSchedule& n, const ReferenceSolution& ref, double rho0,
                           double tau0, double tau1, int grid) {
  double worst = 0.0;
  for (int it = 0; it < grid; ++it) {
    const double tau = tau0 * std::pow(tau1 / tau0, static_cast<double>(it) / (grid - 1));
    const double r_ext = rho0 * std::sqrt(tau);
    for (int i = 0; i < grid; ++i) {
      const double R = -r_ext + 2.0 * r_ext * i / (grid - 1);
      for (int j = 0; j < grid; ++j) {
        const double Psi = -rho0 + 2.0 * rho0 * j / (grid - 1);
        const Mat2 s = half_covariance(diffusion_matrix_error({R, Psi}, tau, n, ref));
        worst = std::max({worst, std::abs(s[0][0]), std::abs(s[0][1]), std::abs(s[1][1])});
      }
    }
  }
  return worst;
}

}  // namespace autores
