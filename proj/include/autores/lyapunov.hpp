#pragma once

// Lyapunov machinery for the deviation system: the function
//   V = (nu tau)^{-1} [H + gamma R Psi / 2],
// sampled certification of its bounds, the U_N supermartingale chain and the
// admissibility thresholds for noise amplitude and start radius.

#include <cstdint>
#include <optional>
#include <string>

#include "autores/model.hpp"
#include "autores/reference.hpp"

namespace autores {

/// V and its derivatives at one point.
struct LyapunovJet {
  double V = 0.0;
  double dR = 0.0;
  double dPsi = 0.0;
  double dtau = 0.0;
  double dRR = 0.0;
  double dRPsi = 0.0;
  double dPsiPsi = 0.0;
  double flow_derivative = 0.0;  // dV/dtau along the deviation system
};

[[nodiscard]] LyapunovJet lyapunov_jet(const ErrorState& e, double tau, const SystemParams& p,
                                       const ReferenceSolution& ref);

[[nodiscard]] double eval_V(const ErrorState& e, double tau, const SystemParams& p,
                            const ReferenceSolution& ref);

/// (nu tau)^{-1} R^2 + Psi^2, the weighted norm in the sandwich bounds.
[[nodiscard]] double weighted_norm_sq(const ErrorState& e, double tau, const SystemParams& p) noexcept;

struct CertifyGrid {
  int radial = 64;
  int angular = 64;
  int tau = 64;
};

struct CertifyRequest {
  double d_lo = 0.01;    // smallest acceptable tube radius
  double d_hi = 0.1;     // grid extent and largest radius tried
  double tau_lo = 10.0;  // smallest tau0 candidate, also the start of the tau grid
  double tau_hi = 100.0; // largest tau0 candidate
  double tau_horizon = 0.0;  // sampled tau range ends here; 0 means ref.tau_max()
  CertifyGrid grid;
  int spot_checks = 10000;
  std::uint64_t spot_seed = 20170601;
};

/// Constants for the normalized form U = 4 V:
///   |x|^2 + a t^-b |y|^2 <= U <= A [...], |dU|^2 <= B U, |d2 U| <= C, dU/dt <= -q U
/// with x = Psi, y = R, on |z| <= rho0, t >= tau0.
struct StabilityCertificate {
  double d0 = 0.0;
  double tau0 = 0.0;
  double A = 3.0;
  double B = 0.0;
  double C = 0.0;
  double q = 0.0;
  double a = 0.0;
  double b = 1.0;
  double rho0 = 0.0;
  double tau_horizon = 0.0;
  CertifyGrid grid;
  double margin = 0.0;          // worst normalized slack over the certified grid
  double B_measured = 0.0;      // grid maxima before headroom
  double C_measured = 0.0;
  int spot_checks = 0;
  int spot_violations = 0;
};

struct CertifyFailure {
  std::string inequality;  // "lower_sandwich", "upper_sandwich" or "decay"
  double R = 0.0;
  double Psi = 0.0;
  double tau = 0.0;
  double slack = 0.0;
};

struct CertifyResult {
  std::optional<StabilityCertificate> certificate;
  std::optional<CertifyFailure> failure;
  [[nodiscard]] bool ok() const noexcept { return certificate.has_value(); }
};

/// Decay rate used throughout: q = gamma / 6.
[[nodiscard]] inline double certified_decay_rate(const SystemParams& p) noexcept {
  return p.gamma() / 6.0;
}

/// Worst normalized slack of the three bounds over the polar grid with radii
/// k * d_hi / grid.radial <= d0 and log-spaced tau nodes >= tau0.
struct SlackReport {
  double worst = 0.0;
  CertifyFailure where;
};

[[nodiscard]] SlackReport worst_slack(const SystemParams& p, const ReferenceSolution& ref,
                                      double d0, double tau0, const CertifyRequest& req);

[[nodiscard]] CertifyResult certify(const SystemParams& p, const ReferenceSolution& ref,
                                    const CertifyRequest& req);

// ---------------------------------------------------------------------------
// Supermartingale chain and thresholds for the general Ito system.

/// a_k = (k + 1) n^2 h (B + C) / q.
[[nodiscard]] double chain_coefficient(int k, double n, double h, double B, double C, double q);

struct ChainParams {
  int N = 1;
  double mu = 0.0;
  double h = 1.0;
  double n = 2.0;  // state dimension
  double B = 1.0;
  double C = 1.0;
  double q = 1.0;
  double T = 1.0;   // horizon length
  double t0 = 0.0;
};

/// U_1 = U + mu^2 h n^2 C (T + t0 - t), U_k = U^k + mu^2 a_{k-1} U_{k-1}.
[[nodiscard]] double chain_U(const ChainParams& c, double U, double t);

struct ThresholdReport {
  int N = 1;
  double kappa = 0.5;
  double h = 1.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::optional<double> delta;  // closed form only for N = 1
  std::optional<double> Delta;
  double horizon_exponent = 0.0;  // T_mu = mu^{horizon_exponent}

  [[nodiscard]] double T_mu(double mu) const;
};

struct ThresholdInputs {
  int N = 1;
  double kappa = 0.5;
  double h = 1.0;
  double n = 2.0;
  double A = 3.0;
  double a = 1.0;
  double C = 1.0;
  double eps1 = 0.1;
  double eps2 = 0.1;
};

[[nodiscard]] ThresholdReport thresholds(const ThresholdInputs& in);

/// Horizon exponent (kappa - 2) / (1 + beta) for intensities decaying like
/// (1 + t)^{-beta}.
[[nodiscard]] double thresholds_beta(double beta, double kappa);

struct NoiseClassReport {
  double bound = 0.0;  // sup_{tau > tau0} |sigma1| tau + |sigma2|, may be +inf
  bool admissible = false;
};

[[nodiscard]] NoiseClassReport noise_class_check(const NoiseSchedule& n, double tau0);

/// Largest |sigma_ij| of G G^T / 2 for the deviation system over the tube
/// |R| <= rho0 sqrt(tau), |Psi| <= rho0, tau in [tau0, tau1].
[[nodiscard]] double max_half_covariance(const NoiseSchedule& n, const ReferenceSolution& ref,
                                         double rho0, double tau0, double tau1, int grid = 32);

}  // namespace autores
