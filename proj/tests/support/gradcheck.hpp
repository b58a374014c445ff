#pragma once

// Central finite differences, the independent oracle for analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace ause::testing {

/// d f / d params[i] by (f(x + eps e_i) - f(x - eps e_i)) / (2 eps). The
/// parameters are restored afterwards.
inline std::vector<double> central_differences(std::span<double> params, const std::function<double()>& f,
                                               double eps = 1e-5) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + eps;
    const double up = f();
    params[i] = saved - eps;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
/// whose true gradient is zero from dividing round-off by round-off.
inline double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace ause::testing
