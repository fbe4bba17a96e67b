#pragma once

// Formal power series in 1/tau for captured solutions:
//   r(tau)   = lambda tau + sum_{k=0..K} r_k tau^{-k}
//   psi(tau) = psi_0      + sum_{k=1..K} psi_k tau^{-k}

#include <stdexcept>
#include <string>
#include <vector>

#include "autores/model.hpp"

namespace autores {

enum class Branch { stable, unstable };

[[nodiscard]] const char* to_string(Branch b) noexcept;
[[nodiscard]] Branch branch_from_string(const std::string& s);

/// Raised when the per-order linear system cannot be solved.
class SingularOrderError : public std::runtime_error {
 public:
  SingularOrderError(int order, const std::string& what)
      : std::runtime_error("order " + std::to_string(order) + ": " + what), order_(order) {}
  [[nodiscard]] int order() const noexcept { return order_; }

 private:
  int order_;
};

struct AsymptoticExpansion {
  Branch branch = Branch::stable;
  double psi0 = 0.0;
  int order = 0;
  std::vector<double> r;    // r_0 .. r_K
  std::vector<double> psi;  // psi_1 .. psi_K (psi[k - 1] holds psi_k)

  [[nodiscard]] double psi_coeff(int k) const { return k == 0 ? psi0 : psi.at(k - 1); }
};

/// arcsin(gamma) on the unstable branch, pi - arcsin(gamma) on the stable one.
/// gamma = 0 and gamma = 1 are accepted here for the degenerate limits.
[[nodiscard]] double solve_psi0(double gamma, Branch branch);
[[nodiscard]] inline double solve_psi0(const SystemParams& p, Branch branch) {
  return solve_psi0(p.gamma(), branch);
}

/// Coefficients through order K by substituting the truncated series and
/// matching powers of 1/tau. Takes (lambda, gamma) directly so the
/// degenerate gamma = 0 case can be expanded too.
[[nodiscard]] AsymptoticExpansion expand(double lambda, double gamma, Branch branch, int K);
[[nodiscard]] inline AsymptoticExpansion expand(const SystemParams& p, Branch branch, int K) {
  return expand(p.lambda(), p.gamma(), branch, K);
}

/// Throws DomainError for tau <= 0.
[[nodiscard]] State evaluate(const AsymptoticExpansion& e, const SystemParams& p, double tau);

/// Exact tau-derivative of the truncated series.
[[nodiscard]] Vec2 evaluate_derivative(const AsymptoticExpansion& e, const SystemParams& p,
                                       double tau);

/// (dr/dtau - rhs_r, dpsi/dtau - rhs_psi) along the truncated series.
[[nodiscard]] Vec2 residual(const AsymptoticExpansion& e, const SystemParams& p, double tau);

/// Least-squares slope of log|residual| against log tau over log-spaced
/// points in [tau_lo, tau_hi].
[[nodiscard]] double residual_slope(const AsymptoticExpansion& e, const SystemParams& p,
                                    double tau_lo, double tau_hi, int points = 41);

}  // namespace autores
