#pragma once

// Domain types and closed-form vector fields for the parametric autoresonance
// system, its noise-perturbed Ito form and the deviation (error) system
// around a captured reference solution.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace autores {

class ReferenceSolution;

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

/// Thrown when a domain object is constructed from out-of-range values.
/// `field()` names the offending parameter.
class DomainError : public std::invalid_argument {
 public:
  DomainError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Sweep rate lambda > 0 and damping 0 < gamma < 1, with nu = sqrt(1 - gamma^2).
class SystemParams {
 public:
  SystemParams(double lambda, double gamma);

  [[nodiscard]] double lambda() const noexcept { return lambda_; }
  [[nodiscard]] double gamma() const noexcept { return gamma_; }
  [[nodiscard]] double nu() const noexcept { return nu_; }

 private:
  double lambda_;
  double gamma_;
  double nu_;
};

/// Amplitude and phase shift. The phase is never wrapped.
struct State {
  double r = 0.0;
  double psi = 0.0;

  [[nodiscard]] Vec2 vec() const noexcept { return {r, psi}; }
  static State from(const Vec2& v) noexcept { return {v[0], v[1]}; }
};

/// Deviation from the reference solution: r = r* + R, psi = psi* + Psi.
struct ErrorState {
  double R = 0.0;
  double Psi = 0.0;

  [[nodiscard]] double norm() const noexcept { return std::hypot(R, Psi); }
  [[nodiscard]] Vec2 vec() const noexcept { return {R, Psi}; }
  static ErrorState from(const Vec2& v) noexcept { return {v[0], v[1]}; }
};

/// A noise intensity profile c * tau^p. Constant schedules have p = 0.
struct Schedule {
  enum class Kind { constant, power_law };

  Kind kind = Kind::constant;
  double coeff = 0.0;
  double exponent = 0.0;

  static Schedule constant(double c) noexcept { return {Kind::constant, c, 0.0}; }
  static Schedule power_law(double c, double p) noexcept { return {Kind::power_law, c, p}; }

  [[nodiscard]] double operator()(double tau) const noexcept {
    if (kind == Kind::constant || exponent == 0.0) return coeff;
    return coeff * std::pow(tau, exponent);
  }
};

/// Noise amplitude mu in (0, 1), the two channel schedules and the declared
/// class bound h.
class NoiseSchedule {
 public:
  NoiseSchedule(double mu, Schedule sigma1, Schedule sigma2, double h);

  /// Same schedules with a different amplitude. mu = 0 is allowed here so that
  /// deterministic runs can share the stochastic code path.
  [[nodiscard]] NoiseSchedule with_mu(double mu) const;

  [[nodiscard]] double mu() const noexcept { return mu_; }
  [[nodiscard]] const Schedule& sigma1() const noexcept { return sigma1_; }
  [[nodiscard]] const Schedule& sigma2() const noexcept { return sigma2_; }
  [[nodiscard]] double h() const noexcept { return h_; }

 private:
  NoiseSchedule() = default;
  double mu_ = 0.0;
  Schedule sigma1_;
  Schedule sigma2_;
  double h_ = 0.0;
};

// dr/dtau = r sin(psi) - gamma r,  dpsi/dtau = r - lambda tau + cos(psi).
[[nodiscard]] Vec2 rhs_primary(const State& s, double tau, const SystemParams& p) noexcept;

// Ito drift of the perturbed system; identical to rhs_primary.
[[nodiscard]] Vec2 drift_perturbed(const State& s, double tau, const SystemParams& p,
                                   const NoiseSchedule& n) noexcept;

// Diffusion matrix before the mu scaling:
//   [[sigma1 r sin(psi), 0], [sigma1 cos(psi), sigma2]].
[[nodiscard]] Mat2 diffusion_matrix(const State& s, double tau, const NoiseSchedule& n) noexcept;

// Milstein correction L^1 g^1 for the w1 column (unscaled). The w2 column is
// state independent, so the noise is commutative and this is the only term.
[[nodiscard]] Vec2 milstein_w1_term(const State& s, double tau, const NoiseSchedule& n) noexcept;

/// Error-system diffusion in (R, Psi) evaluated through the reference.
[[nodiscard]] Mat2 diffusion_matrix_error(const ErrorState& e, double tau, const NoiseSchedule& n,
                                          const ReferenceSolution& ref);

/// sigma = G G^T / 2.
[[nodiscard]] Mat2 half_covariance(const Mat2& g) noexcept;

/// H(R, Psi, tau) and its closed-form derivatives.
struct HamiltonianJet {
  double H = 0.0;
  double dR = 0.0;
  double dPsi = 0.0;
  double dtau = 0.0;
  double dRR = 0.0;
  double dRPsi = 0.0;
  double dPsiPsi = 0.0;
};

[[nodiscard]] HamiltonianJet hamiltonian_jet(const ErrorState& e, double tau, const SystemParams& p,
                                             const ReferenceSolution& ref);

[[nodiscard]] double hamiltonian(const ErrorState& e, double tau, const SystemParams& p,
                                 const ReferenceSolution& ref);

// (-dH/dPsi - gamma R, dH/dR).
[[nodiscard]] Vec2 rhs_error(const ErrorState& e, double tau, const SystemParams& p,
                             const ReferenceSolution& ref);

}  // namespace autores
