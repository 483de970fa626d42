#pragma once

// Least-squares power-law fits, error ~ C h^p.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace slrk {

struct OrderFit {
  double slope = 0.0;
  /// C in error ~ C h^slope.
  double constant = 0.0;
  /// Root-mean-square residual of the fit in log space.
  double residual = 0.0;
  std::vector<std::size_t> used;
  std::vector<std::size_t> excluded;
};

/// Fits log(error) = log(C) + p log(h). Points with error <= floor (round-off
/// saturated) or non-finite errors are excluded; at least 3 must remain.
inline OrderFit estimate_order(const std::vector<double>& errors, const std::vector<double>& hs, double floor = 0.0) {
  if (errors.size() != hs.size()) throw std::invalid_argument("errors and step sizes differ in length");
  OrderFit fit;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(hs[i] > 0.0)) throw std::invalid_argument("step sizes must be positive");
    if (std::isfinite(errors[i]) && errors[i] > floor && errors[i] > 0.0)
      fit.used.push_back(i);
    else
      fit.excluded.push_back(i);
  }
  const std::size_t n = fit.used.size();
  if (n < 3) throw std::invalid_argument("fewer than 3 usable points for an order fit");
  double mx = 0.0, my = 0.0;
  for (std::size_t i : fit.used) {
    mx += std::log(hs[i]);
    my += std::log(errors[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i : fit.used) {
    const double dx = std::log(hs[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(errors[i]) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("order fit needs distinct step sizes");
  fit.slope = sxy / sxx;
  const double intercept = my - fit.slope * mx;
  fit.constant = std::exp(intercept);
  double ss = 0.0;
  for (std::size_t i : fit.used) {
    const double r = std::log(errors[i]) - intercept - fit.slope * std::log(hs[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n));
  return fit;
}

}  // namespace slrk
