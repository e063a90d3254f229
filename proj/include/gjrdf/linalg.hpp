#pragma once

#include <Eigen/Dense>

#include "gjrdf/tolerances.hpp"

namespace gjrdf::linalg {

struct SvdResult {
  Eigen::MatrixXd u;       // left singular vectors, full
  Eigen::VectorXd values;  // singular values, descending
  Eigen::MatrixXd v;       // right singular vectors, full
};

struct EigResult {
  Eigen::VectorXd values;   // eigenvalues, descending
  Eigen::MatrixXd vectors;  // columns match values
};

// Full SVD with singular values sorted descending. Deterministic: the sign
// of each singular-vector pair is fixed so the first nonzero entry of the
// left vector is positive. Throws NoConvergence if the reconstruction
// residual exceeds tol.recon_rel * ||a||.
SvdResult svd(const Eigen::MatrixXd& a, const Tolerances& tol = {});

// Eigendecomposition of a symmetric matrix, eigenvalues descending.
// The input must be symmetric within tol.sym_rel; computation runs on the
// symmetrized half-sum.
EigResult sym_eig(const Eigen::MatrixXd& a, const Tolerances& tol = {});

// 1/x with a dead zone around zero: |x| <= tol.pinv_zero maps to 0.
double pinv_scalar(double x, const Tolerances& tol = {});

// Feasibility of [[m, n],[n^T, r]] >= 0 tested through the generalized Schur
// conditions: r >= 0, m - n r^+ n^T >= 0, and (I - r r^+) n^T = 0, all with
// slack tol.schur. Works for singular r (rank-deficient blocks included).
bool schur_psd_feasible(const Eigen::MatrixXd& m, const Eigen::MatrixXd& r,
                        const Eigen::MatrixXd& n, const Tolerances& tol = {});

// log(det a) for symmetric positive definite a, computed from eigenvalues.
// Throws SingularMatrix when the smallest eigenvalue is within the PSD
// tolerance of zero (or below).
double logdet_psd(const Eigen::MatrixXd& a, const Tolerances& tol = {});

// Smallest eigenvalue of the symmetrized input; convenience for PSD tests.
double min_eigenvalue(const Eigen::MatrixXd& a);

}  // namespace gjrdf::linalg
