#include "gjrdf/scalar.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gjrdf::scalar {

namespace {

double log_plus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

}  // namespace

ScalarRdf scalar_rdf(double d, double delta1, double delta2) {
  if (!(d >= 0.0) || d >= 1.0)
    throw std::invalid_argument("scalar_rdf: correlation out of [0,1): " +
                                std::to_string(d));
  if (!(delta1 > 0.0) || !(delta2 > 0.0))
    throw std::invalid_argument("scalar_rdf: budgets must be positive");

  const double a = 1.0 - delta1;
  const double b = 1.0 - delta2;
  const double d2 = d * d;

  const bool in1 = d2 <= a * b;
  bool in3;
  if (a == 0.0 && b == 0.0) {
    // both budgets exactly 1: the ratio test degenerates; its closure only
    // touches d = 1, which the domain excludes
    in3 = false;
  } else if (a == 0.0 || b == 0.0 || a * b < 0.0) {
    in3 = true;  // one budget at/past 1 while the other is not
  } else {
    in3 = d2 >= std::min(a / b, b / a);
  }

  const double v1 = 0.5 * log_plus((1.0 - d2) / (delta1 * delta2));
  const double v3 = 0.5 * log_plus(1.0 / std::min(delta1, delta2));

  if (in1 && in3) return v1 <= v3 ? ScalarRdf{v1, 1} : ScalarRdf{v3, 3};
  if (in1) return {v1, 1};
  if (in3) return {v3, 3};

  // complement region: outside region 3 the product a*b is nonnegative, so
  // the square root below is defined
  const double gap = d - std::sqrt(a * b);
  const double v2 = 0.5 * log_plus((1.0 - d2) / (delta1 * delta2 - gap * gap));
  return {v2, 2};
}

}  // namespace gjrdf::scalar
