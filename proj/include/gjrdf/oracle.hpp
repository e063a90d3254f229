#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gjrdf/model.hpp"
#include "gjrdf/tolerances.hpp"

namespace gjrdf::oracle {

struct OracleOptions {
  int max_iterations = 20000;
  double rel_tol = 1e-15;     // relative objective change at termination
  int dykstra_sweeps = 300;   // cap on cyclic projection sweeps
  double psd_floor = 1e-12;   // eigenvalue floor keeping log det defined
  double min_step = 1e-14;
};

struct OracleResult {
  ErrorCovariance sigma;    // maximizing error covariance with its block split
  double rate_nats = 0.0;   // 0.5 (log det Q - log det Sigma)
  int iterations = 0;
  double kkt_residual = 0.0;  // projected-gradient norm at the final iterate
  bool converged = false;
};

// Direct numerical solution of the determinant-maximization form of the
// rate problem: maximize log det Sigma over 0 <= Sigma <= Q with the two
// per-source error traces under their budgets. Projected gradient ascent
// with cyclic (Dykstra) projections onto the constraint intersection. Slow
// but independent of every closed form in the solver; used to cross-check.
OracleResult maxdet_solve(const JointGaussianSource& source,
                          const DistortionPair& delta,
                          const OracleOptions& opts = {},
                          const Tolerances& tol = {});

// Convenience overload for a source already in canonical variable form.
OracleResult maxdet_solve(const std::vector<double>& d,
                          const DistortionPair& delta,
                          const OracleOptions& opts = {},
                          const Tolerances& tol = {});

// 0.5 (log det q - log det sigma); throws SingularMatrix through logdet_psd
// when either argument is singular at tolerance.
double mutual_information(const Eigen::MatrixXd& q, const Eigen::MatrixXd& sigma,
                          const Tolerances& tol = {});

}  // namespace gjrdf::oracle
