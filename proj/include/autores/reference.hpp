#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "autores/asymptotics.hpp"
#include "autores/model.hpp"

namespace autores {

/// Dense-grid realization of the captured solution (r*, psi*). Nodes are
/// uniformly spaced; between nodes the state is a cubic Hermite interpolant
/// built from stored values and the exact vector field, so node values are
/// reproduced exactly.
class ReferenceSolution {
 public:
  ReferenceSolution(SystemParams params, double tau_min, double step, std::vector<State> nodes);

  [[nodiscard]] double tau_min() const noexcept { return tau_min_; }
  [[nodiscard]] double tau_max() const noexcept { return tau_max_; }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] const SystemParams& params() const noexcept { return params_; }
  [[nodiscard]] const std::vector<State>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] bool contains(double tau) const noexcept {
    return tau >= tau_min_ && tau <= tau_max_;
  }

  /// Throws DomainError("tau", ...) outside [tau_min, tau_max].
  [[nodiscard]] State at(double tau) const;

  /// (dr*/dtau, dpsi*/dtau) from the vector field at the interpolated state.
  [[nodiscard]] Vec2 derivative(double tau) const;

 private:
  SystemParams params_;
  double tau_min_;
  double step_;
  double tau_max_;
  std::vector<State> nodes_;
  std::vector<Vec2> slopes_;
};

struct ReferenceOptions {
  int K = 8;                      // series order used for seeding
  double tau_seed = 100.0;        // where the series hands over to the flow
  double tol = 1e-12;             // integrator tolerance
  double tau_min = 5.0;
  double tau_max = 1000.0;
  double step = 0.01;             // grid spacing of stored nodes
  double seed_residual_tol = 1e-8;  // bound on |series residual| at tau_seed
};

/// Failure while building the reference; `where()` is the tau reached.
class ReferenceError : public std::runtime_error {
 public:
  ReferenceError(double where, const std::string& what)
      : std::runtime_error("reference solution: " + what + " (tau=" + std::to_string(where) + ")"),
        where_(where) {}
  [[nodiscard]] double where() const noexcept { return where_; }

 private:
  double where_;
};

/// Seeds the stable-branch series at tau_seed, then integrates backward to
/// tau_min and forward to tau_max, storing states on the uniform grid.
[[nodiscard]] ReferenceSolution reference_solution(const SystemParams& p,
                                                   const ReferenceOptions& opt = {});

}  // namespace autores
