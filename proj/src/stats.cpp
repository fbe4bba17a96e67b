#include "autores/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace autores {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit: need two or more paired samples");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = y[i] - f.intercept - f.slope * x[i];
      sse += e * e;
    }
    f.slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
  }
  return f;
}

Proportion wilson(std::uint64_t successes, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("wilson: zero trials");
  if (successes > trials) throw std::invalid_argument("wilson: successes exceed trials");
  constexpr double z = 1.959963984540054;
  const auto n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  Proportion out;
  out.successes = successes;
  out.trials = trials;
  out.estimate = p;
  // Clamp so the interval always brackets the estimate despite rounding.
  out.ci95 = {std::clamp(std::min(centre - half, p), 0.0, 1.0),
              std::clamp(std::max(centre + half, p), 0.0, 1.0)};
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MeanStat mean_and_stderr(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean_and_stderr: empty sample");
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  MeanStat out;
  out.mean = m;
  out.std_error = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

}  // namespace autores
