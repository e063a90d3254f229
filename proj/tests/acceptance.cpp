// Acceptance gate: each numbered criterion prints exactly one PASS/FAIL line
// with its tolerance and, where specified, its time limit. Exit 0 only when
// every requested criterion passes. Run with no argument for all, or with a
// single number 1..8.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gjrdf/linalg.hpp"
#include "gjrdf/model.hpp"
#include "gjrdf/oracle.hpp"
#include "gjrdf/scalar.hpp"
#include "gjrdf/solver.hpp"
#include "gjrdf/symmetric.hpp"

using namespace gjrdf;

namespace {

double u01(std::mt19937& g) { return (double(g()) + 0.5) / 4294967296.0; }

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// reference matrices are tabulated to four decimals, which makes them
// slightly infeasible; build them with no validation at all
Eigen::MatrixXd plain_sigma(const std::vector<ComponentAllocation>& pc) {
  const int n = static_cast<int>(pc.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    s(i, i) = pc[i].delta1;
    s(n + i, n + i) = pc[i].delta2;
    s(i, n + i) = s(n + i, i) = pc[i].cross;
  }
  return s;
}

std::vector<double> random_d(std::mt19937& g, int n) {
  std::vector<double> d(n);
  for (double& x : d) x = 0.05 + 0.9 * u01(g);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

const std::vector<double> kPair{0.588, 0.271};

bool criterion_1() {
  const DistortionPair delta{0.3, 0.2};
  auto res = solver::joint_rdf(kPair, delta);  // warm
  const auto t0 = Clock::now();
  for (int rep = 0; rep < 5; ++rep) res = solver::joint_rdf(kPair, delta);
  const double per_solve = ms_since(t0) / 5.0;

  const auto ec = assemble_error_covariance(res.allocation, kPair);
  Eigen::MatrixXd want = Eigen::MatrixXd::Zero(4, 4);
  want(0, 0) = want(1, 1) = 0.15;
  want(2, 2) = want(3, 3) = 0.1;
  const double dev = (ec.sigma - want).cwiseAbs().maxCoeff();

  const bool ok = dev <= 1e-9 && res.allocation.label == RdfCase::A &&
                  per_solve < 10.0;
  std::printf(
      "%s criterion 1: tight budgets give the diagonal equal split, case %s, "
      "max deviation %.3g (tol 1e-9), %.3g ms per solve (limit 10)\n",
      ok ? "PASS" : "FAIL", to_string(res.allocation.label).c_str(), dev,
      per_solve);
  return ok;
}

bool criterion_2() {
  const auto res = solver::joint_rdf(kPair, {1.3, 1.2});
  const auto ec = assemble_error_covariance(res.allocation, kPair);
  const Eigen::MatrixXd printed = plain_sigma(
      {{0.5692, 0.5381, 0.1414}, {0.7308, 0.6619, 0.0}});
  const double dev = (ec.sigma - printed).cwiseAbs().maxCoeff();

  const bool ok = dev <= 1e-3 && res.allocation.label == RdfCase::B &&
                  res.allocation.kappa == 1;
  std::printf(
      "%s criterion 2: mid budgets couple one component, case %s kappa=%d, "
      "max deviation from tabulated error covariance %.3g (tol 1e-3)\n",
      ok ? "PASS" : "FAIL", to_string(res.allocation.label).c_str(),
      res.allocation.kappa, dev);
  return ok;
}

bool criterion_3() {
  const auto res = solver::joint_rdf(kPair, {0.5, 1.7});
  const auto ec = assemble_error_covariance(res.allocation, kPair);
  const Eigen::MatrixXd printed = plain_sigma(
      {{0.25, 0.7411, 0.1469}, {0.25, 0.9449, 0.0677}});
  const double dev = (ec.sigma - printed).cwiseAbs().maxCoeff();
  const double rate_err = std::abs(res.allocation.rate_nats - std::log(4.0));

  const bool ok = dev <= 1e-3 && res.allocation.label == RdfCase::D &&
                  rate_err <= 1e-9;
  std::printf(
      "%s criterion 3: one binding budget, case %s, max deviation %.3g "
      "(tol 1e-3), rate error %.3g nats (tol 1e-9)\n",
      ok ? "PASS" : "FAIL", to_string(res.allocation.label).c_str(), dev,
      rate_err);
  return ok;
}

bool criterion_4() {
  const std::vector<double> d{0.96, 0.78, 0.40, 0.14};
  const double delta = 3.6;
  const auto w = symmetric::waterfill(d, delta);

  // independent reference: plain bisection on the total allocated budget
  auto used = [&](double level) {
    double acc = 0.0;
    for (double di : d)
      acc += level < 1.0 - di ? level : std::min(1.0, 0.5 * (level + 1.0 - di));
    return acc;
  };
  double lo = 0.0, hi = 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (used(mid) < delta ? lo : hi) = mid;
  }
  const double ref_level = 0.5 * (lo + hi);

  const double want_level = 1.47;
  const double want_dist[] = {0.755, 0.845, 1.0, 1.0};
  const double want_cross[] = {0.715, 0.625, 0.40, 0.14};

  double dev = std::abs(w.lambda_prime - want_level);
  dev = std::max(dev, std::abs(w.lambda_prime - ref_level));
  for (int i = 0; i < 4; ++i) {
    dev = std::max(dev, std::abs(w.per_component[i].distortion - want_dist[i]));
    dev = std::max(dev, std::abs(w.per_component[i].cross - want_cross[i]));
    // the reference level implies the same per-component values
    const double di = d[i];
    const double rd = ref_level < 1.0 - di
                          ? ref_level
                          : std::min(1.0, 0.5 * (ref_level + 1.0 - di));
    dev = std::max(dev, std::abs(w.per_component[i].distortion - rd));
  }

  const bool ok = dev <= 1e-9;
  std::printf(
      "%s criterion 4: water level and allocation at equal budgets, max "
      "deviation %.3g from tabulated values and the independent bisection "
      "(tol 1e-9)\n",
      ok ? "PASS" : "FAIL", dev);
  return ok;
}

bool criterion_5() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (double d : {0.1, 0.5, 0.9}) {
    for (int i = 1; i <= 50; ++i) {
      for (int j = 1; j <= 50; ++j) {
        const double x = 0.02 + (1.5 - 0.02) * i / 50.0;
        const double y = 0.02 + (1.5 - 0.02) * j / 50.0;
        const double joint = solver::joint_rdf({d}, {x, y}).allocation.rate_nats;
        const double flat = scalar::scalar_rdf(d, x, y).rate_nats;
        worst = std::max(worst, std::abs(joint - flat));
      }
    }
  }
  const double elapsed = ms_since(t0);
  const bool ok = worst <= 1e-8 && elapsed < 5000.0;
  std::printf(
      "%s criterion 5: 50x50 budget grid at one component matches the scalar "
      "closed form for three correlations, max gap %.3g (tol 1e-8), %.0f ms "
      "(limit 5000)\n",
      ok ? "PASS" : "FAIL", worst, elapsed);
  return ok;
}

bool criterion_6() {
  const auto t0 = Clock::now();
  std::mt19937 g(606);
  double worst = 0.0;
  for (int v = 0; v < 20; ++v) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    for (int j = 1; j <= 100; ++j) {
      const double delta = 0.05 + (double(n) - 0.05) * j / 100.0;
      const double joint =
          solver::joint_rdf(d, {delta, delta}).allocation.rate_nats;
      const double sym = symmetric::symmetric_rdf(d, delta);
      worst = std::max(worst, std::abs(joint - sym));
    }
  }
  const double elapsed = ms_since(t0);
  const bool ok = worst <= 1e-8 && elapsed < 10000.0;
  std::printf(
      "%s criterion 6: equal budgets match water-filling on 20 random "
      "spectra x 100 budgets, max gap %.3g (tol 1e-8), %.0f ms (limit "
      "10000)\n",
      ok ? "PASS" : "FAIL", worst, elapsed);
  return ok;
}

bool criterion_7() {
  const auto t0 = Clock::now();
  std::mt19937 g(707);
  double worst_gap = 0.0, worst_off = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const DistortionPair delta{0.1 + (2.0 * n - 0.1) * u01(g),
                               0.1 + (2.0 * n - 0.1) * u01(g)};
    const double joint = solver::joint_rdf(d, delta).allocation.rate_nats;
    const auto orc = oracle::maxdet_solve(d, delta);
    worst_gap = std::max(worst_gap, std::abs(joint - orc.rate_nats));
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j)
        if (i != j && std::abs(i - j) != n)
          worst_off = std::max(worst_off, std::abs(orc.sigma.sigma(i, j)));
  }
  const double elapsed = ms_since(t0);
  const bool ok = worst_gap <= 1e-4 && worst_off <= 1e-4 && elapsed < 120000.0;
  std::printf(
      "%s criterion 7: 200 random instances against the determinant "
      "maximization oracle, max rate gap %.3g (tol 1e-4), max off-structure "
      "entry %.3g (tol 1e-4), %.0f ms (limit 120000)\n",
      ok ? "PASS" : "FAIL", worst_gap, worst_off, elapsed);
  return ok;
}

int property_monotonic(std::mt19937& g) {
  int bad = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const double x = 0.1 + (1.6 * n - 0.1) * u01(g);
    const double y = 0.1 + (1.6 * n - 0.1) * u01(g);
    const double h = 0.05 + 0.2 * u01(g);
    const double base = solver::joint_rdf(d, {x, y}).allocation.rate_nats;
    if (solver::joint_rdf(d, {x + h, y}).allocation.rate_nats > base + 1e-10) ++bad;
    if (solver::joint_rdf(d, {x, y + h}).allocation.rate_nats > base + 1e-10) ++bad;
  }
  return bad;
}

int property_lower_bound(std::mt19937& g) {
  int bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const double x = 0.1 + (2.0 * n - 0.1) * u01(g);
    const double y = 0.1 + (2.0 * n - 0.1) * u01(g);
    const double rate = solver::joint_rdf(d, {x, y}).allocation.rate_nats;
    const double bound =
        std::max(solver::shannon_rdf_unit(n, x), solver::shannon_rdf_unit(n, y));
    if (rate < bound - 1e-9) ++bad;
  }
  return bad;
}

int property_tight_budgets(std::mt19937& g) {
  int bad = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const double x = 0.1 + (1.5 * n - 0.1) * u01(g);
    const double y = 0.1 + (1.5 * n - 0.1) * u01(g);
    const auto r = solver::joint_rdf(d, {x, y});
    double used1 = 0.0, used2 = 0.0;
    for (const auto& c : r.allocation.per_component) {
      used1 += c.delta1;
      used2 += c.delta2;
    }
    switch (r.allocation.label) {
      case RdfCase::A:
      case RdfCase::B:
        if (std::abs(used1 - x) > 1e-6 || std::abs(used2 - y) > 1e-6) ++bad;
        break;
      case RdfCase::C:
        if (r.allocation.ell < n &&
            (std::abs(used1 - x) > 1e-6 || std::abs(used2 - y) > 1e-6))
          ++bad;
        break;
      case RdfCase::D:
        if (std::abs(used1 - std::min(x, double(n))) > 1e-6) ++bad;
        break;
      case RdfCase::E:
        if (std::abs(used2 - std::min(y, double(n))) > 1e-6) ++bad;
        break;
    }
  }
  return bad;
}

int property_dispatch(std::mt19937& g) {
  int bad = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const DistortionPair delta{0.1 + (1.8 * n - 0.1) * u01(g),
                               0.1 + (1.8 * n - 0.1) * u01(g)};
    const auto r = solver::joint_rdf(d, delta);
    std::optional<RdfAllocation> again;
    try {
      switch (r.allocation.label) {
        case RdfCase::A: again = solver::case_a(d, delta); break;
        case RdfCase::B: again = solver::case_b(d, delta, r.allocation.kappa); break;
        case RdfCase::C: again = solver::case_c(d, delta, r.allocation.ell); break;
        case RdfCase::D: again = solver::case_d(d, delta); break;
        case RdfCase::E: again = solver::case_e(d, delta); break;
      }
    } catch (const std::exception&) {
    }
    if (!again || std::abs(again->rate_nats - r.allocation.rate_nats) > 1e-9) {
      ++bad;
      continue;
    }
    if (!solver::feasible(d, r.allocation, {}, &delta)) ++bad;
  }
  return bad;
}

int property_schur(std::mt19937& g) {
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int p = 1 + int(u01(g) * 3);
    const int q = 1 + int(u01(g) * 3);
    const int dim = p + q;
    Eigen::MatrixXd full(dim, dim);
    if (trial % 3 == 0) {
      Eigen::MatrixXd b(dim, std::max(1, dim - trial % 2));
      for (int i = 0; i < b.rows(); ++i)
        for (int j = 0; j < b.cols(); ++j) b(i, j) = 2.0 * u01(g) - 1.0;
      full = b * b.transpose();
    } else {
      Eigen::MatrixXd m(dim, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = 2.0 * u01(g) - 1.0;
      full = 0.5 * (m + m.transpose());
    }
    const bool schur = linalg::schur_psd_feasible(full.topLeftCorner(p, p),
                                                  full.bottomRightCorner(q, q),
                                                  full.topRightCorner(p, q));
    const bool eig = linalg::min_eigenvalue(full) >=
                     -1e-8 * (1.0 + full.cwiseAbs().maxCoeff());
    if (schur != eig) ++bad;
  }
  return bad;
}

bool criterion_8() {
  const auto t0 = Clock::now();
  std::mt19937 g(808);
  const int mono = property_monotonic(g);
  const int bound = property_lower_bound(g);
  const int tight = property_tight_budgets(g);
  const int dispatch = property_dispatch(g);
  const int schur = property_schur(g);
  const int total = mono + bound + tight + dispatch + schur;
  const double elapsed = ms_since(t0);

  const bool ok = total == 0;
  std::printf(
      "%s criterion 8: property suite, violations: monotonicity %d, lower "
      "bound %d, budget tightness %d, dispatch consistency %d, block "
      "feasibility agreement %d (must all be 0), %.0f ms\n",
      ok ? "PASS" : "FAIL", mono, bound, tight, dispatch, schur, elapsed);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  int which = 0;
  if (argc > 1) {
    which = std::atoi(argv[1]);
    if (which < 1 || which > 8) {
      std::fprintf(stderr, "usage: %s [1..8]\n", argv[0]);
      return 2;
    }
  }

  bool (*checks[8])() = {criterion_1, criterion_2, criterion_3, criterion_4,
                         criterion_5, criterion_6, criterion_7, criterion_8};
  bool all = true;
  for (int i = 1; i <= 8; ++i) {
    if (which != 0 && which != i) continue;
    bool ok = false;
    try {
      ok = checks[i - 1]();
    } catch (const std::exception& e) {
      std::printf("FAIL criterion %d: unexpected exception: %s\n", i, e.what());
    }
    all = all && ok;
  }
  return all ? 0 : 1;
}
