#pragma once

// Dormand-Prince 5(4) with FSAL, elementary step-size control and the standard
// fourth-order continuous extension for dense output.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "autores/model.hpp"
#include "autores/trajectory.hpp"

namespace autores {

/// Step-size underflow or a runaway step count. `where()` is the time reached.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(double where, const std::string& what)
      : std::runtime_error(what + " at t=" + std::to_string(where)), where_(where) {}
  [[nodiscard]] double where() const noexcept { return where_; }

 private:
  double where_;
};

using Field = std::function<Vec2(double, const Vec2&)>;
using SampleObserver = std::function<void(double, const Vec2&)>;

struct OdeOptions {
  double tol = 1e-10;          // mixed absolute/relative local error bound
  double initial_step = 0.0;   // 0 picks a starting step automatically
  double max_step = 0.0;       // 0 means unlimited
  long max_steps = 50'000'000;
};

namespace detail {

struct Dopri5Tableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

inline Vec2 axpy(const Vec2& x, double h, std::initializer_list<std::pair<double, const Vec2*>> terms) {
  Vec2 out = x;
  for (const auto& [c, k] : terms) {
    out[0] += h * c * (*k)[0];
    out[1] += h * c * (*k)[1];
  }
  return out;
}

struct Dopri5Step {
  Vec2 y_new{};
  Vec2 k7{};
  Vec2 err{};
  Vec2 rcont[5]{};
};

inline Dopri5Step dopri5_step(const Field& f, double t, const Vec2& y, const Vec2& k1, double h) {
  using T = Dopri5Tableau;
  const Vec2 k2 = f(t + T::c2 * h, axpy(y, h, {{T::a21, &k1}}));
  const Vec2 k3 = f(t + T::c3 * h, axpy(y, h, {{T::a31, &k1}, {T::a32, &k2}}));
  const Vec2 k4 = f(t + T::c4 * h, axpy(y, h, {{T::a41, &k1}, {T::a42, &k2}, {T::a43, &k3}}));
  const Vec2 k5 = f(t + T::c5 * h,
                    axpy(y, h, {{T::a51, &k1}, {T::a52, &k2}, {T::a53, &k3}, {T::a54, &k4}}));
  const Vec2 k6 = f(t + h, axpy(y, h,
                                {{T::a61, &k1}, {T::a62, &k2}, {T::a63, &k3}, {T::a64, &k4},
                                 {T::a65, &k5}}));
  Dopri5Step s;
  s.y_new = axpy(y, h, {{T::a71, &k1}, {T::a73, &k3}, {T::a74, &k4}, {T::a75, &k5}, {T::a76, &k6}});
  s.k7 = f(t + h, s.y_new);
  for (int i = 0; i < 2; ++i) {
    s.err[i] = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                    T::e6 * k6[i] + T::e7 * s.k7[i]);
    s.rcont[0][i] = y[i];
    s.rcont[1][i] = s.y_new[i] - y[i];
    s.rcont[2][i] = h * k1[i] - s.rcont[1][i];
    s.rcont[3][i] = s.rcont[1][i] - h * s.k7[i] - s.rcont[2][i];
    s.rcont[4][i] = h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] +
                         T::d6 * k6[i] + T::d7 * s.k7[i]);
  }
  return s;
}

inline Vec2 dense_eval(const Vec2 (&rc)[5], double theta) {
  const double theta1 = 1.0 - theta;
  Vec2 out{};
  for (int i = 0; i < 2; ++i) {
    out[i] = rc[0][i] +
             theta * (rc[1][i] + theta1 * (rc[2][i] + theta * (rc[3][i] + theta1 * rc[4][i])));
  }
  return out;
}

// Integrates from t0 to t1 (either direction). Sample times must be ordered
// in the direction of integration and lie in the closed interval.
Vec2 dopri5(const Field& f, Vec2 y, double t0, double t1, const OdeOptions& opt,
            std::span<const double> sample_times, const SampleObserver& observe);

}  // namespace detail

/// Adaptive integration of dx/dt = field(t, x) from t0 to t1 > t0. Returns
/// samples at `sample_times` (dense output) or at every accepted step when
/// the list is empty. The end point is always the last sample.
[[nodiscard]] Trajectory integrate_ode(const Field& field, const Vec2& x0, double t0, double t1,
                                       double tol, std::span<const double> sample_times = {});

/// Classic fixed-step fifth-order Dormand-Prince solution (no error control);
/// used to verify the order of the pair.
[[nodiscard]] Vec2 integrate_fixed_dopri5(const Field& field, Vec2 x0, double t0, double t1,
                                          long steps);

/// Uniformly spaced sample times t0, t0 + dt, ..., with t1 appended.
[[nodiscard]] std::vector<double> uniform_times(double t0, double t1, double dt);

}  // namespace autores
