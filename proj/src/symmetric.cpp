#include "gjrdf/symmetric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gjrdf/errors.hpp"

namespace gjrdf::symmetric {

namespace {

void validate(const std::vector<double>& d, double delta) {
  if (d.empty()) throw BadDelta("waterfill: empty correlation vector");
  if (!(delta > 0.0)) throw BadDelta("waterfill: budget must be positive, got " +
                                     std::to_string(delta));
  for (size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] >= 0.0) || d[i] >= 1.0)
      throw BadDelta("waterfill: correlation out of [0,1): " + std::to_string(d[i]));
    if (i > 0 && d[i] > d[i - 1] + 1e-14)
      throw BadDelta("waterfill: correlations must be sorted descending");
  }
}

double component_distortion(double d, double level) {
  if (level < 1.0 - d) return level;
  if (level < 1.0 + d) return 0.5 * (level + (1.0 - d));
  return 1.0;
}

double budget_used(const std::vector<double>& d, double level) {
  double acc = 0.0;
  for (double di : d) acc += component_distortion(di, level);
  return acc;
}

}  // namespace

WaterLevel waterfill(const std::vector<double>& d, double delta,
                     const Tolerances& tol) {
  validate(d, delta);
  const int n = static_cast<int>(d.size());

  WaterLevel out;
  if (delta >= double(n)) {
    // everything saturated; the smallest level doing so
    out.lambda_prime = 1.0 + d[0];
    out.clamped = delta > double(n);
    for (double di : d) out.per_component.push_back({1.0, di});
    return out;
  }

  // the used-budget map is piecewise linear in the level with kinks at
  // 1 -+ d_i; locate the bracketing segment first so bisection starts exact
  std::vector<double> kinks;
  for (double di : d) {
    kinks.push_back(1.0 - di);
    kinks.push_back(1.0 + di);
  }
  std::sort(kinks.begin(), kinks.end());
  double lo = 0.0, hi = 1.0 + d[0];
  for (double k : kinks) {
    if (budget_used(d, k) >= delta) {
      hi = k;
      break;
    }
    lo = k;
  }

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < tol.bisect_max_iter; ++it) {
    mid = 0.5 * (lo + hi);
    const double used = budget_used(d, mid);
    if (std::abs(used - delta) <= tol.bisect_tol) break;
    (used < delta ? lo : hi) = mid;
  }
  // the segment is linear, so one secant step lands on the root exactly
  const double flo = budget_used(d, lo), fhi = budget_used(d, hi);
  if (fhi > flo) {
    const double lin = lo + (delta - flo) * (hi - lo) / (fhi - flo);
    if (std::abs(budget_used(d, lin) - delta) <= std::abs(budget_used(d, mid) - delta))
      mid = lin;
  }

  out.lambda_prime = mid;
  for (double di : d) {
    WaterComponent c;
    c.distortion = component_distortion(di, mid);
    if (mid < 1.0 - di)
      c.cross = 0.0;
    else if (mid < 1.0 + di)
      c.cross = 0.5 * (mid - (1.0 - di));
    else
      c.cross = di;
    out.per_component.push_back(c);
  }
  return out;
}

double symmetric_rdf(const std::vector<double>& d, double delta,
                     const Tolerances& tol) {
  const WaterLevel w = waterfill(d, delta, tol);
  double acc = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const WaterComponent& c = w.per_component[i];
    if (w.lambda_prime >= 1.0 + d[i]) continue;  // saturated: exactly zero
    const double err_det = c.distortion * c.distortion - c.cross * c.cross;
    acc += std::log((1.0 - d[i] * d[i]) / err_det);
  }
  return 0.5 * acc;
}

}  // namespace gjrdf::symmetric
