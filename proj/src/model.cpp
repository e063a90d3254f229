#include "gjrdf/model.hpp"

#include <cmath>

#include "gjrdf/errors.hpp"
#include "gjrdf/linalg.hpp"

namespace gjrdf {

std::string to_string(RdfCase c) {
  switch (c) {
    case RdfCase::A: return "A";
    case RdfCase::B: return "B";
    case RdfCase::C: return "C";
    case RdfCase::D: return "D";
    case RdfCase::E: return "E";
  }
  return "?";
}

void validate_source(const JointGaussianSource& src, const Tolerances& tol) {
  const int n = src.p1 + src.p2;
  if (src.p1 <= 0 || src.p2 <= 0)
    throw DimensionMismatch("validate_source: source dimensions must be positive");
  if (src.q.rows() != n || src.q.cols() != n)
    throw DimensionMismatch("validate_source: covariance is " +
                            std::to_string(src.q.rows()) + "x" +
                            std::to_string(src.q.cols()) + ", expected " +
                            std::to_string(n) + "x" + std::to_string(n));
  if (!src.q.allFinite())
    throw std::invalid_argument("validate_source: non-finite covariance entries");

  const double scale = 1.0 + src.q.cwiseAbs().maxCoeff();
  if ((src.q - src.q.transpose()).cwiseAbs().maxCoeff() > tol.sym_rel * scale)
    throw NotSymmetric("validate_source: covariance not symmetric within tolerance");

  const linalg::EigResult full = linalg::sym_eig(src.q, tol);
  const double lam_max = std::max(full.values.maxCoeff(), 0.0);
  if (full.values.minCoeff() < -tol.psd_rel * std::max(lam_max, 1.0))
    throw NotPSD("validate_source: covariance has eigenvalue " +
                 std::to_string(full.values.minCoeff()));

  for (int which = 1; which <= 2; ++which) {
    const Eigen::MatrixXd block = which == 1 ? src.q_x1() : src.q_x2();
    const linalg::EigResult e = linalg::sym_eig(block, tol);
    const double bmax = std::max(e.values.maxCoeff(), 0.0);
    if (e.values.minCoeff() <= tol.psd_rel * std::max(bmax, 1.0))
      throw DiagonalBlockSingular("validate_source: per-source block " +
                                  std::to_string(which) + " is singular");
  }
}

Eigen::MatrixXd cvf_covariance(const std::vector<double>& d) {
  const int n = static_cast<int>(d.size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    q(i, n + i) = d[i];
    q(n + i, i) = d[i];
  }
  return q;
}

ErrorCovariance assemble_error_covariance(const RdfAllocation& alloc,
                                          const std::vector<double>& d,
                                          const Tolerances& tol) {
  const int n = static_cast<int>(alloc.per_component.size());
  if (n == 0 || d.size() != alloc.per_component.size())
    throw DimensionMismatch("assemble_error_covariance: component count mismatch");

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const ComponentAllocation& c = alloc.per_component[i];
    sigma(i, i) = c.delta1;
    sigma(n + i, n + i) = c.delta2;
    sigma(i, n + i) = c.cross;
    sigma(n + i, i) = c.cross;
  }

  const Eigen::MatrixXd q = cvf_covariance(d);
  const double slack = tol.feasibility * (1.0 + q.cwiseAbs().maxCoeff());
  const double sig_min = linalg::min_eigenvalue(sigma);
  if (sig_min < -slack)
    throw InfeasibleAllocation("assemble_error_covariance: Sigma has eigenvalue " +
                               std::to_string(sig_min));
  const double gap_min = linalg::min_eigenvalue(q - sigma);
  if (gap_min < -slack)
    throw InfeasibleAllocation(
        "assemble_error_covariance: Q - Sigma has eigenvalue " +
        std::to_string(gap_min));

  return ErrorCovariance{std::move(sigma), n, n};
}

}  // namespace gjrdf
