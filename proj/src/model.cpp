#include "autores/model.hpp"

#include "autores/reference.hpp"

namespace autores {

SystemParams::SystemParams(double lambda, double gamma) : lambda_(lambda), gamma_(gamma) {
  if (!(std::isfinite(lambda) && lambda > 0.0)) {
    throw DomainError("lambda", "must be > 0, got " + std::to_string(lambda));
  }
  if (!(std::isfinite(gamma) && gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("gamma", "must lie in (0, 1), got " + std::to_string(gamma));
  }
  nu_ = std::sqrt((1.0 - gamma) * (1.0 + gamma));
}

namespace {

void check_schedule(const Schedule& s, const char* name) {
  if (!std::isfinite(s.coeff) || !std::isfinite(s.exponent)) {
    throw DomainError(name, "schedule coefficients must be finite");
  }
}

}  // namespace

NoiseSchedule::NoiseSchedule(double mu, Schedule sigma1, Schedule sigma2, double h)
    : mu_(mu), sigma1_(sigma1), sigma2_(sigma2), h_(h) {
  if (!(mu > 0.0 && mu < 1.0)) {
    throw DomainError("mu", "must lie in (0, 1), got " + std::to_string(mu));
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw DomainError("h", "class bound must be positive and finite");
  }
  check_schedule(sigma1_, "sigma1");
  check_schedule(sigma2_, "sigma2");
}

NoiseSchedule NoiseSchedule::with_mu(double mu) const {
  if (!(mu >= 0.0 && mu < 1.0)) {
    throw DomainError("mu", "must lie in [0, 1), got " + std::to_string(mu));
  }
  NoiseSchedule out = *this;
  out.mu_ = mu;
  return out;
}

Vec2 rhs_primary(const State& s, double tau, const SystemParams& p) noexcept {
  return {s.r * std::sin(s.psi) - p.gamma() * s.r, s.r - p.lambda() * tau + std::cos(s.psi)};
}

Vec2 drift_perturbed(const State& s, double tau, const SystemParams& p,
                     const NoiseSchedule& /*n*/) noexcept {
  return rhs_primary(s, tau, p);
}

Mat2 diffusion_matrix(const State& s, double tau, const NoiseSchedule& n) noexcept {
  const double s1 = n.sigma1()(tau);
  const double s2 = n.sigma2()(tau);
  return {{{s1 * s.r * std::sin(s.psi), 0.0}, {s1 * std::cos(s.psi), s2}}};
}

Vec2 milstein_w1_term(const State& s, double tau, const NoiseSchedule& n) noexcept {
  const double s1 = n.sigma1()(tau);
  return {s1 * s1 * s.r, -s1 * s1 * std::sin(s.psi) * std::cos(s.psi)};
}

Mat2 diffusion_matrix_error(const ErrorState& e, double tau, const NoiseSchedule& n,
                            const ReferenceSolution& ref) {
  const State star = ref.at(tau);
  return diffusion_matrix(State{star.r + e.R, star.psi + e.Psi}, tau, n);
}

Mat2 half_covariance(const Mat2& g) noexcept {
  Mat2 out{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      out[i][j] = 0.5 * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
    }
  }
  return out;
}

HamiltonianJet hamiltonian_jet(const ErrorState& e, double tau, const SystemParams& p,
                               const ReferenceSolution& ref) {
  const State star = ref.at(tau);
  const Vec2 star_dot = rhs_primary(star, tau, p);
  const double rs = star.r;
  const double ps = star.psi;
  const double R = e.R;
  const double Psi = e.Psi;

  const double c = std::cos(Psi + ps);
  const double s = std::sin(Psi + ps);
  const double c0 = std::cos(ps);
  const double s0 = std::sin(ps);

  HamiltonianJet j;
  j.H = 0.5 * R * R + (R + rs) * (c - c0) + Psi * rs * s0;
  j.dR = R + c - c0;
  j.dPsi = -(R + rs) * s + rs * s0;
  // Explicit tau dependence enters only through r*(tau) and psi*(tau).
  j.dtau = star_dot[0] * (c - c0 + Psi * s0) + star_dot[1] * ((R + rs) * (s0 - s) + Psi * rs * c0);
  j.dRR = 1.0;
  j.dRPsi = -s;
  j.dPsiPsi = -(R + rs) * c;
  return j;
}

double hamiltonian(const ErrorState& e, double tau, const SystemParams& p,
                   const ReferenceSolution& ref) {
  return hamiltonian_jet(e, tau, p, ref).H;
}

Vec2 rhs_error(const ErrorState& e, double tau, const SystemParams& p,
               const ReferenceSolution& ref) {
  const HamiltonianJet j = hamiltonian_jet(e, tau, p, ref);
  return {-j.dPsi - p.gamma() * e.R, j.dR};
}

}  // namespace autores
