#include "autores/asymptotics.hpp"

#include <cmath>
#include <numbers>

#include "autores/stats.hpp"

namespace autores {

const char* to_string(Branch b) noexcept { return b == Branch::stable ? "stable" : "unstable"; }

Branch branch_from_string(const std::string& s) {
  if (s == "stable") return Branch::stable;
  if (s == "unstable") return Branch::unstable;
  throw DomainError("branch", "expected \"stable\" or \"unstable\", got \"" + s + "\"");
}

double solve_psi0(double gamma, Branch branch) {
  // gamma = 1 merges the branches at psi0 = pi / 2; expand() then reports
  // the singular order-one balance.
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw DomainError("gamma", "must lie in [0, 1] for the series");
  }
  const double a = std::asin(gamma);
  return branch == Branch::stable ? std::numbers::pi - a : a;
}

namespace {

// Truncated power series in s = 1/tau, coefficients c[0..n-1].
using Series = std::vector<double>;

Series mul(const Series& a, const Series& b) {
  const std::size_t n = a.size();
  Series out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; i + j < n; ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// sin(phi), cos(phi) for a series phi with zero constant term, truncated at
// the series length. phi^m starts at s^m, so m < n terms suffice.
void sin_cos(const Series& phi, Series& sin_out, Series& cos_out) {
  const std::size_t n = phi.size();
  sin_out.assign(n, 0.0);
  cos_out.assign(n, 0.0);
  Series power(n, 0.0);
  power[0] = 1.0;
  double factorial = 1.0;
  for (std::size_t m = 0; m < n; ++m) {
    if (m > 0) {
      power = mul(power, phi);
      factorial *= static_cast<double>(m);
    }
    const double sign = (m / 2) % 2 == 0 ? 1.0 : -1.0;
    Series& target = m % 2 == 0 ? cos_out : sin_out;
    for (std::size_t i = 0; i < n; ++i) target[i] += sign * power[i] / factorial;
  }
}

struct Residuals {
  Series eq_r;    // coefficients of s^j in dr/dtau - rhs_r
  Series eq_psi;  // coefficients of s^j in dpsi/dtau - rhs_psi
};

// Residual coefficients of the series (r_0..r_K, psi_1..psi_{K+1}) up to s^K.
// Both lists are padded with zeros to length n = K + 2.
Residuals series_residuals(double lambda, double gamma, double psi0, const Series& r_coef,
                           const Series& psi_coef) {
  const std::size_t n = r_coef.size();
  Series phi(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) phi[k] = psi_coef[k];
  Series sp, cp;
  sin_cos(phi, sp, cp);

  const double s0 = std::sin(psi0);
  const double c0 = std::cos(psi0);
  Series sin_minus_gamma(n), cos_psi(n);
  for (std::size_t i = 0; i < n; ++i) {
    sin_minus_gamma[i] = s0 * cp[i] + c0 * sp[i];
    cos_psi[i] = c0 * cp[i] - s0 * sp[i];
  }
  sin_minus_gamma[0] -= gamma;

  Residuals out{Series(n - 1, 0.0), Series(n - 1, 0.0)};
  for (std::size_t j = 0; j + 1 < n; ++j) {
    // dr/dtau = lambda - sum k r_k s^{k+1}
    double lhs_r = (j == 0 ? lambda : 0.0);
    if (j >= 2) lhs_r -= static_cast<double>(j - 1) * r_coef[j - 1];
    // r (sin psi - gamma) with r = lambda / s + sum r_i s^i
    double rhs_r = lambda * sin_minus_gamma[j + 1];
    for (std::size_t i = 0; i <= j; ++i) rhs_r += r_coef[i] * sin_minus_gamma[j - i];
    out.eq_r[j] = lhs_r - rhs_r;

    double lhs_psi = 0.0;
    if (j >= 2) lhs_psi -= static_cast<double>(j - 1) * psi_coef[j - 1];
    out.eq_psi[j] = lhs_psi - (r_coef[j] + cos_psi[j]);
  }
  return out;
}

}  // namespace

AsymptoticExpansion expand(double lambda, double gamma, Branch branch, int K) {
  if (K < 0) throw DomainError("K", "order must be >= 0");
  if (!(lambda > 0.0)) throw DomainError("lambda", "must be > 0");

  AsymptoticExpansion e;
  e.branch = branch;
  e.order = K;
  e.psi0 = solve_psi0(gamma, branch);
  const double c0 = std::cos(e.psi0);
  const double s0 = std::sin(e.psi0);

  // Working arrays padded to K + 2 so the s^K balance can be formed.
  const std::size_t n = static_cast<std::size_t>(K) + 2;
  Series r_coef(n, 0.0), psi_coef(n, 0.0);

  // Order 0 of the psi balance fixes r_0.
  r_coef[0] = -c0;

  // At level k the unknowns (psi_k, r_k) enter the s^{k-1} balance of the r
  // equation through lambda cos(psi0) psi_k and the s^k balance of the psi
  // equation through r_k - sin(psi0) psi_k. Everything else is known.
  //   [ -lambda c0   0 ] [psi_k]   [ -res_r(k-1) ]
  //   [  s0         -1 ] [ r_k ] = [ -res_psi(k) ]
  for (int k = 1; k <= K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    r_coef[uk] = 0.0;
    psi_coef[uk] = 0.0;
    const Residuals base = series_residuals(lambda, gamma, e.psi0, r_coef, psi_coef);
    const double b0 = -base.eq_r[uk - 1];
    const double b1 = -base.eq_psi[uk];

    const double a00 = -lambda * c0, a01 = 0.0;
    const double a10 = s0, a11 = -1.0;
    const double det = a00 * a11 - a01 * a10;
    const double scale = std::max({std::abs(a00), std::abs(a10), std::abs(a11)});
    if (!(std::abs(det) > 1e-14 * scale * scale)) {
      throw SingularOrderError(k, "singular balance (cos(psi0) = " + std::to_string(c0) + ")");
    }
    psi_coef[uk] = (b0 * a11 - a01 * b1) / det;
    r_coef[uk] = (a00 * b1 - a10 * b0) / det;
  }

  e.r.assign(r_coef.begin(), r_coef.begin() + K + 1);
  e.psi.assign(psi_coef.begin() + 1, psi_coef.begin() + K + 1);
  return e;
}

State evaluate(const AsymptoticExpansion& e, const SystemParams& p, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau", "series evaluated at tau <= 0");
  const double s = 1.0 / tau;
  double r = 0.0, psi = 0.0;
  // Horner in s, highest order first.
  for (int k = e.order; k >= 0; --k) {
    r = r * s + e.r[static_cast<std::size_t>(k)];
    psi = psi * s + (k == 0 ? 0.0 : e.psi[static_cast<std::size_t>(k - 1)]);
  }
  return {p.lambda() * tau + r, e.psi0 + psi};
}

Vec2 evaluate_derivative(const AsymptoticExpansion& e, const SystemParams& p, double tau) {
  if (!(tau > 0.0)) throw DomainError("tau", "series evaluated at tau <= 0");
  double dr = p.lambda();
  double dpsi = 0.0;
  for (int k = 1; k <= e.order; ++k) {
    const double w = -static_cast<double>(k) * std::pow(tau, -(k + 1));
    dr += w * e.r[static_cast<std::size_t>(k)];
    dpsi += w * e.psi[static_cast<std::size_t>(k - 1)];
  }
  return {dr, dpsi};
}

Vec2 residual(const AsymptoticExpansion& e, const SystemParams& p, double tau) {
  const State s = evaluate(e, p, tau);
  const Vec2 d = evaluate_derivative(e, p, tau);
  const Vec2 f = rhs_primary(s, tau, p);
  return {d[0] - f[0], d[1] - f[1]};
}

double residual_slope(const AsymptoticExpansion& e, const SystemParams& p, double tau_lo,
                      double tau_hi, int points) {
  if (!(tau_lo >= 1.0 && tau_hi > tau_lo)) {
    throw DomainError("tau_range", "residual slope needs 1 <= tau_lo < tau_hi");
  }
  std::vector<double> x, y;
  for (int i = 0; i < points; ++i) {
    const double tau =
        tau_lo * std::pow(tau_hi / tau_lo, static_cast<double>(i) / (points - 1));
    const Vec2 res = residual(e, p, tau);
    const double norm = std::hypot(res[0], res[1]);
    if (norm == 0.0) continue;
    x.push_back(std::log(tau));
    y.push_back(std::log(norm));
  }
  if (x.size() < 2) return -std::numeric_limits<double>::infinity();
  return linear_fit(x, y).slope;
}

}  // namespace autores
