#pragma once

#include <span>

#include "openintent/common.hpp"

namespace openintent {

/// Two-parameter Weibull on (x - shift).
struct WeibullModel {
  double shape = 1.0;
  double scale = 1.0;
  double shift = 0.0;

  /// 0 for x <= shift.
  double cdf(double x) const;

  json to_json() const;
  static WeibullModel from_json(const json& j);
};

/// Maximum-likelihood fit on `samples - shift` (all must be positive).
/// Safeguarded Newton on the profile equation for the shape
///   sum(x^k ln x) / sum(x^k) - 1/k - mean(ln x) = 0,
/// then scale = mean(x^k)^(1/k).
/// Throws numerical "zero-variance tail" for identical samples and a
/// numerical error when the iteration does not converge in `max_iter` steps.
WeibullModel fit_weibull(std::span<const double> samples, double shift = 0.0, std::size_t max_iter = 200);

}  // namespace openintent
