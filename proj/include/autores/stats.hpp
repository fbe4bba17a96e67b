#pragma once

// Small statistics helpers shared by the Monte Carlo engine and the tests.

#include <cstdint>
#include <span>
#include <vector>

namespace autores {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
[[nodiscard]] LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  [[nodiscard]] bool overlaps(const Interval& o) const noexcept { return lo <= o.hi && o.lo <= hi; }
};

struct Proportion {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double estimate = 0.0;
  Interval ci95;
};

/// Wilson score interval at 95%.
[[nodiscard]] Proportion wilson(std::uint64_t successes, std::uint64_t trials);

/// Median with linear interpolation between the two central order statistics.
[[nodiscard]] double median(std::vector<double> v);

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
};

[[nodiscard]] MeanStat mean_and_stderr(std::span<const double> v);

}  // namespace autores
