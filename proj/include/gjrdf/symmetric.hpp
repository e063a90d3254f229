#pragma once

#include <vector>

#include "gjrdf/model.hpp"
#include "gjrdf/tolerances.hpp"

namespace gjrdf::symmetric {

// Per-component solution of the equal-budget problem at water level
// lambda_prime: distortion and error cross-covariance for each component.
struct WaterComponent {
  double distortion = 0.0;  // shared by both sources at a symmetric optimum
  double cross = 0.0;
};

struct WaterLevel {
  double lambda_prime = 0.0;
  std::vector<WaterComponent> per_component;
  bool clamped = false;  // true when delta >= n forced full saturation
};

// Water-filling for the symmetric budget delta shared by both sources.
// The per-component map is piecewise linear in the level with kinks at
// 1 -+ d_i, so the root bracket is exact and bisection is safe.
// delta > n clamps to the all-saturated solution (rate zero).
WaterLevel waterfill(const std::vector<double>& d, double delta,
                     const Tolerances& tol = {});

// Rate in nats at the symmetric optimum; saturated components contribute
// exactly zero.
double symmetric_rdf(const std::vector<double>& d, double delta,
                     const Tolerances& tol = {});

}  // namespace gjrdf::symmetric
