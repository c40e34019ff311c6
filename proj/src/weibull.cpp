#include "openintent/weibull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace openintent {

double WeibullModel::cdf(double x) const {
  if (x <= shift) return 0.0;
  return -std::expm1(-std::pow((x - shift) / scale, shape));
}

json WeibullModel::to_json() const { return json{{"shape", shape}, {"scale", scale}, {"shift", shift}}; }

WeibullModel WeibullModel::from_json(const json& j) {
  WeibullModel w{j.at("shape").get<double>(), j.at("scale").get<double>(), j.at("shift").get<double>()};
  if (!(w.shape > 0.0) || !(w.scale > 0.0)) fail(ErrorKind::invalid_argument, "weibull: shape and scale must be positive");
  return w;
}

WeibullModel fit_weibull(std::span<const double> samples, double shift, std::size_t max_iter) {
  if (samples.size() < 2) fail(ErrorKind::numerical, "zero-variance tail (fewer than two samples)");
  std::vector<double> x;
  x.reserve(samples.size());
  for (double s : samples) {
    const double v = s - shift;
    if (!std::isfinite(v) || v <= 0.0) fail(ErrorKind::invalid_argument, "weibull fit: samples must exceed the shift");
    x.push_back(v);
  }
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  const double top = *mx;
  if (*mx - *mn <= 1e-12 * top) fail(ErrorKind::numerical, "zero-variance tail");

  // Normalising by the maximum keeps x^k in (0, 1].
  std::vector<double> logs(x.size());
  double mean_log = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    logs[i] = std::log(x[i] / top);
    mean_log += logs[i];
  }
  mean_log /= static_cast<double>(x.size());

  struct Eval {
    double f, df, sum_pow;
  };
  const auto eval = [&](double k) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double l : logs) {
      const double p = std::exp(k * l);
      s0 += p;
      s1 += p * l;
      s2 += p * l * l;
    }
    const double r = s1 / s0;
    return Eval{r - 1.0 / k - mean_log, s2 / s0 - r * r + 1.0 / (k * k), s0};
  };

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double k = 1.0;
  bool converged = false;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const Eval e = eval(k);
    if (e.f > 0.0) hi = std::min(hi, k);
    else lo = std::max(lo, k);
    double next = k - e.f / e.df;
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * k;
    if (std::abs(next - k) <= 1e-12 * std::max(1.0, k) || e.f == 0.0) {
      k = next;
      converged = true;
      break;
    }
    k = next;
  }
  if (!converged) fail(ErrorKind::numerical, "weibull MLE did not converge in " + std::to_string(max_iter) + " iterations");

  const Eval e = eval(k);
  const double scale = top * std::pow(e.sum_pow / static_cast<double>(x.size()), 1.0 / k);
  return WeibullModel{k, scale, shift};
}

}  // namespace openintent
