#include "gjrdf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gjrdf/errors.hpp"
#include "gjrdf/linalg.hpp"
#include "gjrdf/symmetric.hpp"

namespace gjrdf::solver {

namespace {

constexpr double kMinStep = 9.5367431640625e-07;  // 2^-20, damping floor

void validate_input(const std::vector<double>& d, const DistortionPair& delta,
                    const char* who) {
  if (d.empty()) throw std::invalid_argument(std::string(who) + ": empty d");
  for (size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] >= 0.0) || d[i] >= 1.0)
      throw std::invalid_argument(std::string(who) +
                                  ": correlation out of [0,1): " +
                                  std::to_string(d[i]));
    if (i > 0 && d[i] > d[i - 1] + 1e-14)
      throw std::invalid_argument(std::string(who) +
                                  ": correlations must be sorted descending");
  }
  if (!(delta.delta1 > 0.0) || !(delta.delta2 > 0.0))
    throw std::invalid_argument(std::string(who) + ": budgets must be positive");
}

// Per-component quantities shared by the stationarity systems. For a
// component with correlation d at distortions (x1, x2):
//   g  = x1 x2 - (d - sqrt((1-x1)(1-x2)))^2, the error determinant
//   n1 = dg/dx1 = 1 - d sqrt((1-x2)/(1-x1)),  n2 symmetric.
struct CompEval {
  double a, b, r, cross, g, n1, n2;
};

bool eval_comp(double d, double x1, double x2, CompEval& e) {
  e.a = 1.0 - x1;
  e.b = 1.0 - x2;
  if (e.a <= 0.0 || e.b <= 0.0 || x1 <= 0.0 || x2 <= 0.0) return false;
  e.r = std::sqrt(e.a * e.b);
  e.cross = d - e.r;
  e.g = x1 * x2 - e.cross * e.cross;
  if (e.g <= 0.0) return false;
  e.n1 = 1.0 - d * std::sqrt(e.b / e.a);
  e.n2 = 1.0 - d * std::sqrt(e.a / e.b);
  return true;
}

// Stationarity for kappa active components against equal leftover split:
//   -n1_i / g_i + (n - kappa) / leftover_1 = 0   (and mirrored in source 2)
// Unknowns: x = [active distortions source 1 | active distortions source 2].
struct ActiveSplitSystem {
  const std::vector<double>& d;
  double del1, del2;
  int kappa, n;
  double box;

  void clip(Eigen::VectorXd& x) const {
    for (int i = 0; i < x.size(); ++i)
      x(i) = std::clamp(x(i), box, 1.0 - box);
  }

  bool residual(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    const double l1 = del1 - x.head(kappa).sum();
    const double l2 = del2 - x.tail(kappa).sum();
    if (l1 <= 0.0 || l2 <= 0.0) return false;
    f.resize(2 * kappa);
    CompEval e;
    for (int i = 0; i < kappa; ++i) {
      if (!eval_comp(d[i], x(i), x(kappa + i), e)) return false;
      f(i) = -e.n1 / e.g + double(n - kappa) / l1;
      f(kappa + i) = -e.n2 / e.g + double(n - kappa) / l2;
    }
    return true;
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    const double l1 = del1 - x.head(kappa).sum();
    const double l2 = del2 - x.tail(kappa).sum();
    const double lev1 = double(n - kappa) / (l1 * l1);
    const double lev2 = double(n - kappa) / (l2 * l2);
    j.setZero(2 * kappa, 2 * kappa);
    CompEval e;
    for (int i = 0; i < kappa; ++i) {
      eval_comp(d[i], x(i), x(kappa + i), e);
      const double g2 = e.g * e.g;
      const double dn1_d1 = -0.5 * d[i] * std::sqrt(e.b) / (e.a * std::sqrt(e.a));
      const double dn2_d2 = -0.5 * d[i] * std::sqrt(e.a) / (e.b * std::sqrt(e.b));
      const double dn_cross = 0.5 * d[i] / e.r;  // dn1/dx2 = dn2/dx1
      // own-component parts of -n/g; leftover parts fill whole row blocks
      j(i, i) = -dn1_d1 / e.g + e.n1 * e.n1 / g2;
      j(i, kappa + i) = -dn_cross / e.g + e.n1 * e.n2 / g2;
      j(kappa + i, kappa + i) = -dn2_d2 / e.g + e.n2 * e.n2 / g2;
      j(kappa + i, i) = -dn_cross / e.g + e.n1 * e.n2 / g2;
      for (int c = 0; c < kappa; ++c) {
        j(i, c) += lev1;
        j(kappa + i, kappa + c) += lev2;
      }
    }
  }
};

// Stationarity with explicit budget multipliers; the ell most weakly
// correlated components are pinned at full saturation and drop out.
//   -n1_i / (2 g_i) + lambda_1 = 0,  sum of free distortions = budget - ell.
// Unknowns: x = [free source-1 | free source-2 | lambda_1 | lambda_2].
struct SaturatedTailSystem {
  const std::vector<double>& d;
  double del1, del2;
  int ell, n;
  double box;

  int free_count() const { return n - ell; }

  void clip(Eigen::VectorXd& x) const {
    const int m = free_count();
    for (int i = 0; i < 2 * m; ++i) x(i) = std::clamp(x(i), box, 1.0 - box);
  }

  bool residual(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    const int m = free_count();
    f.resize(2 * m + 2);
    CompEval e;
    for (int i = 0; i < m; ++i) {
      if (!eval_comp(d[i], x(i), x(m + i), e)) return false;
      f(i) = -e.n1 / (2.0 * e.g) + x(2 * m);
      f(m + i) = -e.n2 / (2.0 * e.g) + x(2 * m + 1);
    }
    f(2 * m) = x.head(m).sum() - (del1 - ell);
    f(2 * m + 1) = x.segment(m, m).sum() - (del2 - ell);
    return true;
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    const int m = free_count();
    j.setZero(2 * m + 2, 2 * m + 2);
    CompEval e;
    for (int i = 0; i < m; ++i) {
      eval_comp(d[i], x(i), x(m + i), e);
      const double g2 = e.g * e.g;
      const double dn1_d1 = -0.5 * d[i] * std::sqrt(e.b) / (e.a * std::sqrt(e.a));
      const double dn2_d2 = -0.5 * d[i] * std::sqrt(e.a) / (e.b * std::sqrt(e.b));
      const double dn_cross = 0.5 * d[i] / e.r;
      j(i, i) = 0.5 * (-dn1_d1 / e.g + e.n1 * e.n1 / g2);
      j(i, m + i) = 0.5 * (-dn_cross / e.g + e.n1 * e.n2 / g2);
      j(m + i, m + i) = 0.5 * (-dn2_d2 / e.g + e.n2 * e.n2 / g2);
      j(m + i, i) = 0.5 * (-dn_cross / e.g + e.n1 * e.n2 / g2);
      j(i, 2 * m) = 1.0;
      j(m + i, 2 * m + 1) = 1.0;
      j(2 * m, i) = 1.0;
      j(2 * m + 1, m + i) = 1.0;
    }
  }
};

// Damped Newton with residual backtracking: halve the step until the
// infinity norm decreases, floor 2^-20, distortion unknowns clipped into the
// open unit box after every trial step.
template <class System>
std::optional<NewtonState> damped_newton(const System& sys, Eigen::VectorXd x,
                                         const Tolerances& tol) {
  sys.clip(x);
  Eigen::VectorXd f;
  if (!sys.residual(x, f)) return std::nullopt;
  double fnorm = f.lpNorm<Eigen::Infinity>();

  for (int it = 0; it <= tol.newton_max_iter; ++it) {
    if (fnorm <= tol.newton_tol)
      return NewtonState{std::move(x), fnorm, it};
    if (it == tol.newton_max_iter) break;

    Eigen::MatrixXd j;
    sys.jacobian(x, j);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(j);
    if (!lu.isInvertible()) {
      // tiny ridge rescues a numerically rank-deficient linearization
      j.diagonal().array() += 1e-10 * (1.0 + j.cwiseAbs().maxCoeff());
      lu.compute(j);
      if (!lu.isInvertible()) return std::nullopt;
    }
    const Eigen::VectorXd dx = lu.solve(-f);

    bool moved = false;
    for (double alpha = 1.0; alpha >= kMinStep; alpha *= 0.5) {
      Eigen::VectorXd xt = x + alpha * dx;
      sys.clip(xt);
      Eigen::VectorXd ft;
      if (!sys.residual(xt, ft)) continue;
      const double fnt = ft.lpNorm<Eigen::Infinity>();
      if (fnt < fnorm) {
        x = std::move(xt);
        f = std::move(ft);
        fnorm = fnt;
        moved = true;
        break;
      }
    }
    if (!moved) return std::nullopt;
  }
  return std::nullopt;
}

// Exact solution of either stationarity system at equal budgets: every
// active component satisfies 2u_i - (1 - d_i) = c with c fixed by the budget
// row, the water-filling identity extended to a prescribed active count.
Eigen::VectorXd symmetric_start_active(const std::vector<double>& d, int kappa,
                                       int n, double level_budget,
                                       const Tolerances& tol) {
  double s = 0.0;
  for (int i = 0; i < kappa; ++i) s += 1.0 - d[i];
  double c = (level_budget - 0.5 * s) / (double(n) - 0.5 * kappa);
  if (!(c > 0.0)) c = level_budget / double(n);
  // starts pinned to the box edge make the Jacobian blow up; stay interior
  const double hi = 1.0 - std::max(tol.box_eps, 1e-3);
  Eigen::VectorXd x(2 * kappa);
  for (int i = 0; i < kappa; ++i) {
    const double u = std::clamp(0.5 * (c + 1.0 - d[i]), tol.box_eps, hi);
    x(i) = u;
    x(kappa + i) = u;
  }
  return x;
}

Eigen::VectorXd symmetric_start_saturated(const std::vector<double>& d, int ell,
                                          int n, double level_budget,
                                          const Tolerances& tol) {
  const int m = n - ell;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += 1.0 - d[i];
  double c = (2.0 * (level_budget - ell) - s) / double(m);
  double lambda = c > 0.0 ? 0.5 / c : 1.0;
  if (!(c > 0.0)) c = std::max((level_budget - ell) / double(m), 2.0 * tol.box_eps);
  const double hi = 1.0 - std::max(tol.box_eps, 1e-3);
  Eigen::VectorXd x(2 * m + 2);
  for (int i = 0; i < m; ++i) {
    const double u = std::clamp(0.5 * (c + 1.0 - d[i]), tol.box_eps, hi);
    x(i) = u;
    x(m + i) = u;
  }
  x(2 * m) = lambda;
  x(2 * m + 1) = lambda;
  return x;
}

// Plain Newton from the symmetric start; on failure, walk the budgets from
// the symmetric midpoint to the target in ten straight-line steps.
template <class System>
std::optional<NewtonState> solve_with_continuation(
    System sys, const Eigen::VectorXd& start, const DistortionPair& delta,
    const Tolerances& tol) {
  if (auto st = damped_newton(sys, start, tol)) return st;

  const double mid = 0.5 * (delta.delta1 + delta.delta2);
  Eigen::VectorXd x = start;
  int total_iters = 0;
  for (int k = 1; k <= 10; ++k) {
    const double t = double(k) / 10.0;
    sys.del1 = mid + t * (delta.delta1 - mid);
    sys.del2 = mid + t * (delta.delta2 - mid);
    auto st = damped_newton(sys, x, tol);
    if (!st) return std::nullopt;
    x = st->unknowns;
    total_iters += st->iterations;
    if (k == 10) {
      st->iterations = total_iters;
      return st;
    }
  }
  return std::nullopt;
}

// Components with identical correlations must come out identical; average
// the solved unknowns across tied groups and keep the result when the
// residual stays converged.
template <class System>
void symmetrize_ties(const System& sys, const std::vector<double>& d, int count,
                     int stride, Eigen::VectorXd& x, double& resid,
                     const Tolerances& tol) {
  bool any = false;
  Eigen::VectorXd y = x;
  for (int i = 0; i < count;) {
    int j = i + 1;
    while (j < count && d[j] == d[i]) ++j;
    if (j - i > 1) {
      any = true;
      for (int block = 0; block < 2; ++block) {
        double mean = 0.0;
        for (int k = i; k < j; ++k) mean += y(block * stride + k);
        mean /= double(j - i);
        for (int k = i; k < j; ++k) y(block * stride + k) = mean;
      }
    }
    i = j;
  }
  if (!any) return;
  Eigen::VectorXd f;
  if (sys.residual(y, f)) {
    const double fn = f.lpNorm<Eigen::Infinity>();
    if (fn <= std::max(100.0 * tol.newton_tol, 10.0 * resid)) {
      x = std::move(y);
      resid = fn;
    }
  }
}

struct RegionCheck {
  bool ok = true;
  bool boundary = false;

  // cond holds when expr <= slack; values within band of zero flag boundary
  void require(double expr, double slack) {
    if (expr > slack) ok = false;
    if (std::abs(expr) <= 10.0 * slack) boundary = true;
  }
};

// Optimality region for an active/split allocation: active components sit in
// the band where cross-covariance helps, split components where it does not,
// and every per-component distortion stays below 1.
RegionCheck region_active_split(const std::vector<double>& d,
                                const RdfAllocation& alloc, int kappa,
                                const Tolerances& tol) {
  RegionCheck rc;
  const int n = static_cast<int>(d.size());
  for (int i = 0; i < n; ++i) {
    const ComponentAllocation& c = alloc.per_component[i];
    const double a = 1.0 - c.delta1;
    const double b = 1.0 - c.delta2;
    const double d2 = d[i] * d[i];
    rc.require(c.delta1 - 1.0, tol.region);
    rc.require(c.delta2 - 1.0, tol.region);
    if (i < kappa) {
      rc.require(a * b - d2, tol.region);       // correlation strong enough
      rc.require(d2 * b - a, tol.region);       // but not past the ratio caps
      rc.require(d2 * a - b, tol.region);
    } else {
      rc.require(d2 - a * b, tol.region);       // weak enough to stay apart
    }
  }
  return rc;
}

// Optimality region when every component is active and the tail saturates.
RegionCheck region_saturated_tail(const std::vector<double>& d,
                                  const RdfAllocation& alloc, int ell,
                                  double lambda1, double lambda2,
                                  const Tolerances& tol) {
  RegionCheck rc;
  const int m = static_cast<int>(d.size()) - ell;
  for (int i = 0; i < m; ++i) {
    const ComponentAllocation& c = alloc.per_component[i];
    const double a = 1.0 - c.delta1;
    const double b = 1.0 - c.delta2;
    const double d2 = d[i] * d[i];
    rc.require(c.delta1 - 1.0, tol.region);
    rc.require(c.delta2 - 1.0, tol.region);
    rc.require(a * b - d2, tol.region);
    rc.require(d2 * b - a, tol.region);
    rc.require(d2 * a - b, tol.region);
  }
  // budget shadow prices must not be negative, or fewer components saturate
  rc.require(-lambda1, tol.region);
  rc.require(-lambda2, tol.region);
  return rc;
}

RdfAllocation saturated_allocation(const std::vector<double>& d) {
  RdfAllocation alloc;
  const int n = static_cast<int>(d.size());
  for (int i = 0; i < n; ++i) alloc.per_component.push_back({1.0, 1.0, d[i]});
  alloc.kappa = n;
  alloc.ell = n;
  alloc.label = RdfCase::C;
  alloc.rate_nats = 0.0;
  return alloc;
}

// Shared closed form for the single-binding-source regions. bind = 1 means
// source 1's budget is the active one.
RdfAllocation single_source_allocation(const std::vector<double>& d,
                                       const DistortionPair& delta, int bind) {
  const int n = static_cast<int>(d.size());
  const double budget = bind == 1 ? delta.delta1 : delta.delta2;
  const double lead = std::min(1.0, budget / double(n));
  RdfAllocation alloc;
  int active = 0, saturated = 0;
  for (int i = 0; i < n; ++i) {
    const double follow = 1.0 - d[i] * d[i] * (1.0 - lead);
    const double cross = d[i] * lead;
    ComponentAllocation c = bind == 1 ? ComponentAllocation{lead, follow, cross}
                                      : ComponentAllocation{follow, lead, cross};
    alloc.per_component.push_back(c);
    if (cross != 0.0) ++active;
    if (c.delta1 == 1.0 && c.delta2 == 1.0) ++saturated;
  }
  alloc.kappa = active;
  alloc.ell = saturated;
  alloc.label = bind == 1 ? RdfCase::D : RdfCase::E;
  alloc.rate_nats = rate_from_allocation(d, alloc);
  return alloc;
}

}  // namespace

bool in_region_m(const std::vector<double>& d, const DistortionPair& delta,
                 int which) {
  // budgets may sit at 0 here (limit handling), unlike the solving entry points
  validate_input(d, DistortionPair{1.0, 1.0}, "in_region_m");
  if (!(delta.delta1 >= 0.0) || !(delta.delta2 >= 0.0))
    throw std::invalid_argument("in_region_m: budgets must be nonnegative");
  if (which != 1 && which != 2)
    throw std::invalid_argument("in_region_m: which must be 1 or 2");
  const double n = double(d.size());
  const double own = which == 1 ? delta.delta1 : delta.delta2;
  const double other = which == 1 ? delta.delta2 : delta.delta1;
  double acc = 0.0;
  for (double di : d) acc += di * di * (1.0 - std::min(1.0, own / n));
  return other > n - acc;
}

std::optional<RdfAllocation> case_a(const std::vector<double>& d,
                                    const DistortionPair& delta,
                                    const Tolerances& tol) {
  validate_input(d, delta, "case_a");
  const int n = static_cast<int>(d.size());
  if (delta.delta1 > n + tol.region || delta.delta2 > n + tol.region)
    return std::nullopt;
  const double x1 = delta.delta1 / n;
  const double x2 = delta.delta2 / n;
  if (d[0] * d[0] > (1.0 - x1) * (1.0 - x2) + tol.region) return std::nullopt;

  RdfAllocation alloc;
  for (int i = 0; i < n; ++i) alloc.per_component.push_back({x1, x2, 0.0});
  alloc.kappa = 0;
  alloc.ell = 0;
  alloc.label = RdfCase::A;
  alloc.rate_nats = rate_from_allocation(d, alloc);
  return alloc;
}

std::optional<RdfAllocation> case_b(const std::vector<double>& d,
                                    const DistortionPair& delta, int kappa,
                                    const Tolerances& tol, NewtonState* state) {
  validate_input(d, delta, "case_b");
  const int n = static_cast<int>(d.size());
  if (kappa < 1 || kappa >= n)
    throw std::invalid_argument("case_b: kappa must be in [1, n)");

  ActiveSplitSystem sys{d, delta.delta1, delta.delta2, kappa, n, tol.box_eps};
  const double mid = 0.5 * (delta.delta1 + delta.delta2);
  Eigen::VectorXd start = symmetric_start_active(d, kappa, n, mid, tol);
  // keep the start strictly inside both leftover constraints
  const double tight = std::min(delta.delta1, delta.delta2);
  const double used = start.head(kappa).sum();
  if (used >= 0.95 * tight) start *= 0.9 * tight / used;

  auto st = solve_with_continuation(sys, start, delta, tol);
  if (!st) {
    // the symmetric start can land where the coupled factor is invalid when
    // the budgets are very lopsided; retry from the per-source equal split,
    // whose leftovers are positive for every kappa < n
    Eigen::VectorXd flat(2 * kappa);
    for (int i = 0; i < kappa; ++i) {
      flat(i) = std::clamp(delta.delta1 / n, tol.box_eps, 1.0 - tol.box_eps);
      flat(kappa + i) =
          std::clamp(delta.delta2 / n, tol.box_eps, 1.0 - tol.box_eps);
    }
    sys.del1 = delta.delta1;
    sys.del2 = delta.delta2;
    st = damped_newton(sys, flat, tol);
  }
  if (!st) {
    // last resort: ride the tighter budget's equal split and park the other
    // source at its conditional optimum, a point the coupled factor always
    // accepts
    const bool one_tight = delta.delta1 <= delta.delta2;
    const double hi = 1.0 - std::max(tol.box_eps, 1e-3);
    const double lead = std::clamp(
        std::min(delta.delta1, delta.delta2) / n, tol.box_eps, hi);
    Eigen::VectorXd flat(2 * kappa);
    for (int i = 0; i < kappa; ++i) {
      const double follow =
          std::clamp(1.0 - d[i] * d[i] * (1.0 - lead), tol.box_eps, hi);
      flat(i) = one_tight ? lead : follow;
      flat(kappa + i) = one_tight ? follow : lead;
    }
    st = damped_newton(sys, flat, tol);
  }
  if (!st)
    throw NewtonDivergence("case_b: Newton failed for kappa=" +
                           std::to_string(kappa));
  sys.del1 = delta.delta1;
  sys.del2 = delta.delta2;
  symmetrize_ties(sys, d, kappa, kappa, st->unknowns, st->residual_norm, tol);
  if (state) *state = *st;

  const Eigen::VectorXd& x = st->unknowns;
  const double split1 = (delta.delta1 - x.head(kappa).sum()) / double(n - kappa);
  const double split2 = (delta.delta2 - x.tail(kappa).sum()) / double(n - kappa);

  RdfAllocation alloc;
  for (int i = 0; i < kappa; ++i) {
    CompEval e;
    eval_comp(d[i], x(i), x(kappa + i), e);
    alloc.per_component.push_back({x(i), x(kappa + i), e.cross});
  }
  for (int i = kappa; i < n; ++i)
    alloc.per_component.push_back({split1, split2, 0.0});
  alloc.kappa = kappa;
  alloc.ell = 0;
  alloc.label = RdfCase::B;

  if (!region_active_split(d, alloc, kappa, tol).ok) return std::nullopt;
  alloc.rate_nats = rate_from_allocation(d, alloc);
  return alloc;
}

std::optional<RdfAllocation> case_c(const std::vector<double>& d,
                                    const DistortionPair& delta, int ell,
                                    const Tolerances& tol, NewtonState* state) {
  validate_input(d, delta, "case_c");
  const int n = static_cast<int>(d.size());
  if (ell < 0 || ell > n)
    throw std::invalid_argument("case_c: ell must be in [0, n]");
  if (ell == n) {
    if (delta.delta1 < n - tol.region || delta.delta2 < n - tol.region)
      throw BudgetExhausted("case_c: full saturation needs both budgets >= n");
    if (state) *state = NewtonState{};
    return saturated_allocation(d);
  }
  if (ell > 0 && (delta.delta1 <= ell || delta.delta2 <= ell))
    throw BudgetExhausted("case_c: a budget cannot cover " +
                          std::to_string(ell) + " saturated components");

  const int m = n - ell;
  // a budget equality with every free distortion below 1 is impossible here
  if (delta.delta1 - ell >= m * (1.0 - tol.box_eps) ||
      delta.delta2 - ell >= m * (1.0 - tol.box_eps))
    return std::nullopt;

  SaturatedTailSystem sys{d, delta.delta1, delta.delta2, ell, n, tol.box_eps};
  const double mid = 0.5 * (delta.delta1 + delta.delta2);
  Eigen::VectorXd start = symmetric_start_saturated(d, ell, n, mid, tol);

  auto st = solve_with_continuation(sys, start, delta, tol);
  if (!st) {
    // same lopsided-budget fallback as the active-split solve: equal split of
    // what the saturated head leaves over, multipliers from the first
    // component's stationarity when the point is valid
    Eigen::VectorXd flat(2 * m + 2);
    const double f1 =
        std::clamp((delta.delta1 - ell) / m, tol.box_eps, 1.0 - tol.box_eps);
    const double f2 =
        std::clamp((delta.delta2 - ell) / m, tol.box_eps, 1.0 - tol.box_eps);
    for (int i = 0; i < m; ++i) {
      flat(i) = f1;
      flat(m + i) = f2;
    }
    double l1 = 1.0, l2 = 1.0;
    CompEval e;
    if (eval_comp(d[0], f1, f2, e)) {
      l1 = std::max(tol.box_eps, e.n1 / (2.0 * e.g));
      l2 = std::max(tol.box_eps, e.n2 / (2.0 * e.g));
    }
    flat(2 * m) = l1;
    flat(2 * m + 1) = l2;
    sys.del1 = delta.delta1;
    sys.del2 = delta.delta2;
    st = damped_newton(sys, flat, tol);
  }
  if (!st) {
    // last resort mirrors the active-split one: tighter budget leads, the
    // other source follows at its conditional optimum
    const bool one_tight = delta.delta1 <= delta.delta2;
    const double hi = 1.0 - std::max(tol.box_eps, 1e-3);
    const double lead = std::clamp(
        (std::min(delta.delta1, delta.delta2) - ell) / m, tol.box_eps, hi);
    Eigen::VectorXd flat(2 * m + 2);
    for (int i = 0; i < m; ++i) {
      const double follow =
          std::clamp(1.0 - d[i] * d[i] * (1.0 - lead), tol.box_eps, hi);
      flat(i) = one_tight ? lead : follow;
      flat(m + i) = one_tight ? follow : lead;
    }
    double l1 = 1.0, l2 = 1.0;
    CompEval e;
    if (eval_comp(d[0], flat(0), flat(m), e)) {
      l1 = std::max(tol.box_eps, e.n1 / (2.0 * e.g));
      l2 = std::max(tol.box_eps, e.n2 / (2.0 * e.g));
    }
    flat(2 * m) = l1;
    flat(2 * m + 1) = l2;
    st = damped_newton(sys, flat, tol);
  }
  if (!st)
    throw NewtonDivergence("case_c: Newton failed for ell=" +
                           std::to_string(ell));
  sys.del1 = delta.delta1;
  sys.del2 = delta.delta2;
  symmetrize_ties(sys, d, m, m, st->unknowns, st->residual_norm, tol);
  if (state) *state = *st;

  const Eigen::VectorXd& x = st->unknowns;
  RdfAllocation alloc;
  for (int i = 0; i < m; ++i) {
    CompEval e;
    eval_comp(d[i], x(i), x(m + i), e);
    alloc.per_component.push_back({x(i), x(m + i), e.cross});
  }
  for (int i = m; i < n; ++i) alloc.per_component.push_back({1.0, 1.0, d[i]});
  alloc.kappa = n;
  alloc.ell = ell;
  alloc.label = RdfCase::C;

  if (!region_saturated_tail(d, alloc, ell, x(2 * m), x(2 * m + 1), tol).ok)
    return std::nullopt;
  alloc.rate_nats = rate_from_allocation(d, alloc);
  return alloc;
}

RdfAllocation case_d(const std::vector<double>& d, const DistortionPair& delta) {
  validate_input(d, delta, "case_d");
  return single_source_allocation(d, delta, 1);
}

RdfAllocation case_e(const std::vector<double>& d, const DistortionPair& delta) {
  validate_input(d, delta, "case_e");
  return single_source_allocation(d, delta, 2);
}

double rate_from_allocation(const std::vector<double>& d,
                            const RdfAllocation& alloc) {
  if (d.size() != alloc.per_component.size())
    throw DimensionMismatch("rate_from_allocation: component count mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const ComponentAllocation& c = alloc.per_component[i];
    if (c.delta1 == 1.0 && c.delta2 == 1.0 && c.cross == d[i]) continue;
    const double den = c.delta1 * c.delta2 - c.cross * c.cross;
    if (den <= 0.0)
      throw NonpositiveDenominator(
          "rate_from_allocation: error determinant " + std::to_string(den) +
          " at component " + std::to_string(i));
    acc += std::log((1.0 - d[i] * d[i]) / den);
  }
  return 0.5 * acc;
}

bool feasible(const std::vector<double>& d, const RdfAllocation& alloc,
              const Tolerances& tol, const DistortionPair* delta) {
  if (d.size() != alloc.per_component.size()) return false;
  const double slack = tol.feasibility;
  double used1 = 0.0, used2 = 0.0;
  for (size_t i = 0; i < d.size(); ++i) {
    const ComponentAllocation& c = alloc.per_component[i];
    used1 += c.delta1;
    used2 += c.delta2;
    if (c.delta1 < -slack || c.delta2 < -slack || c.cross < -slack) return false;
    if (c.delta1 * c.delta2 - c.cross * c.cross < -slack) return false;

    // gap-to-source conditions through the scalar pseudoinverse: the gap
    // block [[1-x1, d-cross],[d-cross, 1-x2]] must be PSD including the
    // rank-deficient boundary
    const double gap1 = 1.0 - c.delta1;
    const double gap2 = 1.0 - c.delta2;
    const double off = d[i] - c.cross;
    if (gap2 < -slack) return false;
    if (gap1 - off * off * linalg::pinv_scalar(gap2, tol) < -slack) return false;
    if (std::abs(off * (1.0 - gap2 * linalg::pinv_scalar(gap2, tol))) > slack)
      return false;
  }
  if (delta) {
    if (used1 > delta->delta1 + slack) return false;
    if (used2 > delta->delta2 + slack) return false;
  }
  return true;
}

double shannon_rdf_unit(int n, double delta) {
  if (n <= 0 || !(delta > 0.0))
    throw std::invalid_argument("shannon_rdf_unit: bad arguments");
  if (delta >= double(n)) return 0.0;
  return 0.5 * n * std::log(double(n) / delta);
}

SolveResult joint_rdf(const std::vector<double>& d, const DistortionPair& delta,
                      const Tolerances& tol) {
  validate_input(d, delta, "joint_rdf");
  const int n = static_cast<int>(d.size());
  SolveResult res;

  auto finish = [&](RdfAllocation alloc, NewtonState st) -> SolveResult& {
    if (!feasible(d, alloc, tol, &delta))
      throw NoFeasibleCase("joint_rdf: accepted allocation failed feasibility",
                           to_string(alloc.label));
    res.allocation = std::move(alloc);
    res.newton = std::move(st);
    return res;
  };

  if (delta.delta1 >= n && delta.delta2 >= n) {
    res.notes.push_back("rate-zero fast path: both budgets cover full variance");
    return finish(saturated_allocation(d), {});
  }

  if (in_region_m(d, delta, 1)) {
    res.notes.push_back("degenerate region: source 2 budget slack, case D");
    return finish(case_d(d, delta), {});
  }
  if (in_region_m(d, delta, 2)) {
    res.notes.push_back("degenerate region: source 1 budget slack, case E");
    return finish(case_e(d, delta), {});
  }

  if (auto a = case_a(d, delta, tol)) {
    if (feasible(d, *a, tol, &delta)) {
      const double margin = (1.0 - delta.delta1 / n) * (1.0 - delta.delta2 / n) -
                            d[0] * d[0];
      if (std::abs(margin) <= 10.0 * tol.region)
        res.notes.push_back("case A: region boundary hit");
      return finish(std::move(*a), {});
    }
    res.notes.push_back("case A: region accepted but feasibility failed");
  } else {
    res.notes.push_back("case A: region test failed");
  }

  for (int kappa = 1; kappa < n; ++kappa) {
    try {
      NewtonState st;
      if (auto b = case_b(d, delta, kappa, tol, &st)) {
        if (feasible(d, *b, tol, &delta)) {
          if (region_active_split(d, *b, kappa, tol).boundary)
            res.notes.push_back("case B kappa=" + std::to_string(kappa) +
                                ": region boundary hit");
          return finish(std::move(*b), st);
        }
        res.notes.push_back("case B kappa=" + std::to_string(kappa) +
                            ": feasibility failed");
      } else {
        res.notes.push_back("case B kappa=" + std::to_string(kappa) +
                            ": region test failed");
      }
    } catch (const NewtonDivergence& e) {
      res.notes.push_back(std::string("case B kappa=") + std::to_string(kappa) +
                          ": " + e.what());
    }
  }

  for (int ell = 0; ell <= n; ++ell) {
    try {
      NewtonState st;
      if (auto c = case_c(d, delta, ell, tol, &st)) {
        if (feasible(d, *c, tol, &delta)) {
          if (st.unknowns.size() > 0) {
            const int m = n - ell;
            if (region_saturated_tail(d, *c, ell, st.unknowns(2 * m),
                                      st.unknowns(2 * m + 1), tol)
                    .boundary)
              res.notes.push_back("case C ell=" + std::to_string(ell) +
                                  ": region boundary hit");
          }
          return finish(std::move(*c), st);
        }
        res.notes.push_back("case C ell=" + std::to_string(ell) +
                            ": feasibility failed");
      } else {
        res.notes.push_back("case C ell=" + std::to_string(ell) +
                            ": region test failed");
      }
    } catch (const BudgetExhausted& e) {
      res.notes.push_back(std::string("case C ell=") + std::to_string(ell) +
                          ": " + e.what());
      break;  // larger ell only saturates more
    } catch (const NewtonDivergence& e) {
      res.notes.push_back(std::string("case C ell=") + std::to_string(ell) +
                          ": " + e.what());
    }
  }

  std::ostringstream diag;
  for (size_t i = 0; i < res.notes.size(); ++i) {
    if (i) diag << "; ";
    diag << res.notes[i];
  }
  throw NoFeasibleCase("joint_rdf: no case accepted the input", diag.str());
}

}  // namespace gjrdf::solver
