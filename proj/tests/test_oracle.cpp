#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "gjrdf/errors.hpp"
#include "gjrdf/linalg.hpp"
#include "gjrdf/model.hpp"
#include "gjrdf/oracle.hpp"
#include "gjrdf/scalar.hpp"
#include "gjrdf/solver.hpp"

using namespace gjrdf;

namespace {

double u01(std::mt19937& g) { return (double(g()) + 0.5) / 4294967296.0; }

std::vector<double> random_d(std::mt19937& g, int n) {
  std::vector<double> d(n);
  for (double& x : d) x = 0.05 + 0.9 * u01(g);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

}  // namespace

TEST_CASE("ample budgets drive the rate to zero") {
  const std::vector<double> d{0.9, 0.4};
  const auto res = oracle::maxdet_solve(d, {2.0, 2.0});
  CHECK(res.converged);
  CHECK(res.rate_nats <= 1e-6);
  // the maximizer is the source covariance itself
  CHECK((res.sigma.sigma - cvf_covariance(d)).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("mid-budget point matches the closed-form solution") {
  const std::vector<double> d{0.588, 0.271};
  const auto direct = oracle::maxdet_solve(d, {1.3, 1.2});
  const auto closed = solver::joint_rdf(d, {1.3, 1.2});
  CHECK(direct.converged);
  CHECK(std::abs(direct.rate_nats - closed.allocation.rate_nats) <= 1e-4);

  const auto ec = assemble_error_covariance(closed.allocation, d);
  CHECK((direct.sigma.sigma - ec.sigma).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("one-component problem matches the scalar form") {
  const auto res = oracle::maxdet_solve(std::vector<double>{0.5}, {0.3, 0.3});
  const auto flat = scalar::scalar_rdf(0.5, 0.3, 0.3);
  CHECK(res.converged);
  CHECK(std::abs(res.rate_nats - flat.rate_nats) <= 1e-5);
}

TEST_CASE("returned iterates respect every constraint") {
  std::mt19937 g(113);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + int(u01(g) * 4);
    const auto d = random_d(g, n);
    const DistortionPair delta{0.1 + (2.0 * n - 0.1) * u01(g),
                               0.1 + (2.0 * n - 0.1) * u01(g)};
    const auto res = oracle::maxdet_solve(d, delta);
    const Eigen::MatrixXd q = cvf_covariance(d);

    CHECK(linalg::min_eigenvalue(res.sigma.sigma) >= -1e-7);
    CHECK(linalg::min_eigenvalue(q - res.sigma.sigma) >= -1e-7);
    CHECK(res.sigma.sigma.topLeftCorner(n, n).trace() <= delta.delta1 + 1e-7);
    CHECK(res.sigma.sigma.bottomRightCorner(n, n).trace() <= delta.delta2 + 1e-7);
    CHECK(res.sigma.p1 == n);
    CHECK(res.sigma.p2 == n);
    CHECK(res.rate_nats >= 0.0);
  }
}

TEST_CASE("the maximizer keeps the per-component structure") {
  std::mt19937 g(127);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + int(u01(g) * 3);
    const auto d = random_d(g, n);
    const DistortionPair delta{0.2 + (1.5 * n - 0.2) * u01(g),
                               0.2 + (1.5 * n - 0.2) * u01(g)};
    const auto res = oracle::maxdet_solve(d, delta);
    double off = 0.0;
    for (int i = 0; i < 2 * n; ++i)
      for (int j = 0; j < 2 * n; ++j) {
        const bool allowed = i == j || std::abs(i - j) == n;
        if (!allowed) off = std::max(off, std::abs(res.sigma.sigma(i, j)));
      }
    CHECK(off <= 1e-4);
  }
}

TEST_CASE("general covariance entry point agrees with the canonical one") {
  const std::vector<double> d{0.8, 0.3};
  const JointGaussianSource src{cvf_covariance(d), 2, 2};
  const auto via_source = oracle::maxdet_solve(src, {1.0, 1.1});
  const auto via_d = oracle::maxdet_solve(d, {1.0, 1.1});
  CHECK(std::abs(via_source.rate_nats - via_d.rate_nats) <= 1e-10);
}

TEST_CASE("information measure basics") {
  const Eigen::MatrixXd q = cvf_covariance({0.6, 0.2});
  CHECK(oracle::mutual_information(q, q) == doctest::Approx(0.0));

  Eigen::MatrixXd quarter = 0.25 * Eigen::MatrixXd::Identity(2, 2);
  CHECK(oracle::mutual_information(Eigen::MatrixXd::Identity(2, 2), quarter) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
  singular(0, 0) = 1.0;
  CHECK_THROWS_AS(oracle::mutual_information(q.topLeftCorner(2, 2), singular),
                  SingularMatrix);
}

TEST_CASE("nonpositive budgets are rejected") {
  CHECK_THROWS_AS(oracle::maxdet_solve(std::vector<double>{0.5}, {0.0, 0.5}),
                  InfeasibleProblem);
  CHECK_THROWS_AS(oracle::maxdet_solve(std::vector<double>{0.5}, {0.5, -1.0}),
                  InfeasibleProblem);
}

TEST_CASE("tight budgets still converge") {
  const auto res = oracle::maxdet_solve(std::vector<double>{0.9, 0.6}, {0.11, 0.13});
  CHECK(res.converged);
  const auto closed = solver::joint_rdf({0.9, 0.6}, {0.11, 0.13});
  CHECK(std::abs(res.rate_nats - closed.allocation.rate_nats) <= 1e-4);
}
