#pragma once

namespace gjrdf::scalar {

struct ScalarRdf {
  double rate_nats = 0.0;
  int region = 0;  // 1, 2, or 3
};

// Closed-form joint rate for a single correlated pair with correlation d and
// individual budgets (delta1, delta2). Region 1: both reproductions can stay
// independent of each other; region 3: only the tighter budget matters;
// region 2: the genuinely coupled regime in between. On region boundaries
// the branch with the smaller value is reported (values coincide there).
ScalarRdf scalar_rdf(double d, double delta1, double delta2);

}  // namespace gjrdf::scalar
