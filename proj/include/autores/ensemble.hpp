#pragma once

// Monte Carlo engine for the noise-perturbed autoresonance system: deviation
// probabilities, first exit times from the eps1 tube around the reference,
// capture classification and the supermartingale check for U_N.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "autores/lyapunov.hpp"
#include "autores/model.hpp"
#include "autores/reference.hpp"
#include "autores/sde.hpp"
#include "autores/stats.hpp"
#include "autores/trajectory.hpp"

namespace autores {

enum class CaptureClass { captured, escaped, indeterminate };

[[nodiscard]] const char* to_string(CaptureClass c) noexcept;

/// Window end must reach tau >= 50 to classify.
inline constexpr double kMinClassifyTau = 50.0;

/// Spacing of the samples entering the total-variation sum. Finer sampling
/// would measure Brownian roughness instead of phase slipping.
inline constexpr double kClassifySpacing = 1.0;

/// Captured iff r(end) > lambda tau_end / 2 and the total variation of psi over
/// the last 20% of the window, sampled every kClassifySpacing, is below 2 pi.
/// A truncated (blown-up) path is escaped.
[[nodiscard]] CaptureClass classify_capture(const Trajectory& t, const SystemParams& p);

/// Streaming form of the same rule, fed one sample at a time in time order.
class CaptureTracker {
 public:
  CaptureTracker(double tau_start, double tau_end) noexcept
      : next_mark_(tau_end - 0.2 * (tau_end - tau_start)), tau_end_(tau_end) {}

  void observe(double tau, double psi) noexcept {
    if (tau < next_mark_ - 1e-9) return;
    if (have_prev_) variation_ += std::abs(psi - prev_psi_);
    prev_psi_ = psi;
    have_prev_ = true;
    while (next_mark_ <= tau + 1e-9) next_mark_ += kClassifySpacing;
  }

  [[nodiscard]] CaptureClass verdict(double r_end, const SystemParams& p, bool blew_up) const noexcept;
  [[nodiscard]] double variation() const noexcept { return variation_; }

 private:
  double next_mark_;
  double tau_end_;
  double prev_psi_ = 0.0;
  bool have_prev_ = false;
  double variation_ = 0.0;
};

struct InitialCondition {
  enum class Kind { point, reference_ball };
  Kind kind = Kind::point;
  State point;          // used by Kind::point
  double radius = 0.0;  // used by Kind::reference_ball: uniform in the disk around (r*, psi*)(tau0)
};

struct EnsembleConfig {
  SystemParams params{1.0, 0.1};
  NoiseSchedule noise{0.1, Schedule::constant(0.0), Schedule::constant(1.0), 1.0};
  InitialCondition initial;
  double tau0 = 0.0;
  double horizon = 60.0;
  double dt = 1e-3;
  std::size_t paths = 500;
  std::uint64_t master_seed = 1;
  double eps1 = 0.05;
  SdeScheme scheme = SdeScheme::euler_maruyama;
  unsigned threads = 0;
  bool out_of_class = false;  // set to run schedules that fail noise_class_check
  std::shared_ptr<const ReferenceSolution> reference;  // needed for deviations
};

struct PathResult {
  std::uint64_t path_index = 0;
  // Deviation statistics; present only when the reference covers the run.
  bool has_deviation = false;
  double sup_psi_dev = 0.0;
  double sup_r_dev_weighted = 0.0;  // sup tau^{-1/2} |r - r*|
  double sup_r_dev_raw = 0.0;
  bool exceed_psi = false;
  bool exceed_r = false;
  double exit_time = 0.0;  // elapsed since tau0; equals horizon when censored
  bool censored = true;
  CaptureClass capture = CaptureClass::indeterminate;
  bool blew_up = false;
  double blowup_tau = 0.0;
  State final_state;
};

struct EnsembleStats {
  std::size_t paths = 0;
  double horizon = 0.0;
  bool out_of_class = false;
  double class_bound = 0.0;
  std::optional<Proportion> exceed_prob_psi;
  std::optional<Proportion> exceed_prob_r;
  std::optional<Proportion> capture_fraction;  // over classifiable paths
  std::size_t blowups = 0;
  std::vector<PathResult> path_results;  // ordered by path_index
};

/// Raised for configurations that violate preconditions.
class EnsembleConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Largest step for which an explicit step of the linearized deviation flow
/// (eigenvalues -gamma/2 +- i sqrt(lambda nu tau)) is contracting up to
/// tau_end: gamma / (lambda nu tau_end).
[[nodiscard]] inline double max_stable_dt(const SystemParams& p, double tau_end) noexcept {
  if (!(tau_end > 0.0)) return std::numeric_limits<double>::infinity();
  return p.gamma() / (p.lambda() * p.nu() * tau_end);
}

/// Throws EnsembleConfigError naming the offending field; also rejects steps
/// at or above max_stable_dt.
[[nodiscard]] EnsembleStats run_ensemble(const EnsembleConfig& cfg);

/// Starting state of path `index` (deterministic in seed and index).
[[nodiscard]] State initial_state(const EnsembleConfig& cfg, std::uint64_t index);

/// One stored sample path of the perturbed system in (tau, r, psi).
[[nodiscard]] Trajectory sample_path(const EnsembleConfig& cfg, std::uint64_t index,
                                     std::size_t record_every);

// ---------------------------------------------------------------------------

struct ExitTimePoint {
  double mu = 0.0;
  double median_exit = 0.0;
  Interval ci95;  // bootstrap percentile interval of the median
  std::size_t censored = 0;
  std::size_t paths = 0;
};

struct ExitTimeScaling {
  std::vector<ExitTimePoint> points;
  double slope = 0.0;
  Interval slope_ci95;
};

/// Fits log(median exit time) against log(mu) across configurations that
/// differ only in mu. Refuses when more than half the paths are censored at
/// every mu.
[[nodiscard]] ExitTimeScaling exit_time_scaling(const std::vector<EnsembleConfig>& cfgs,
                                                int bootstrap = 1000,
                                                std::uint64_t bootstrap_seed = 7);

/// Same fit from precomputed exit-time samples (one vector per mu).
[[nodiscard]] ExitTimeScaling exit_time_scaling_from_samples(
    const std::vector<double>& mus, const std::vector<std::vector<double>>& exit_times,
    const std::vector<std::vector<bool>>& censored, int bootstrap, std::uint64_t bootstrap_seed);

// ---------------------------------------------------------------------------

struct SupermartingaleReport {
  int N = 1;
  double tube_radius = 0.0;
  std::vector<double> times;
  std::vector<double> mean_U;
  std::vector<double> stderr_U;
  std::vector<bool> band_ok;  // band_ok[i]: step i -> i + 1 within 2 standard errors
  bool mean_non_increasing = false;
  double start_mean = 0.0;
  std::vector<double> ladder_c;
  std::vector<double> ladder_fraction;  // fraction of paths with sup U_N >= c
  std::vector<double> ladder_bound;     // mean U_N(start) / c
  std::vector<double> ladder_stderr;
  std::vector<bool> ladder_ok;  // fraction <= bound + 3 standard errors
  bool doob_ok = false;
  std::size_t exited = 0;
  [[nodiscard]] bool passed() const noexcept { return mean_non_increasing && doob_ok; }
};

/// Runs stopped paths of the deviation process and evaluates U_N(z(s_t), s_t; T)
/// with U = 4 V on `checkpoints` equally spaced times.
[[nodiscard]] SupermartingaleReport supermartingale_check(const EnsembleConfig& cfg,
                                                          const StabilityCertificate& cert, int N,
                                                          int checkpoints = 20,
                                                          std::vector<double> ladder = {1, 2, 4});

}  // namespace autores
