#pragma once

namespace gjrdf {

// Every numeric threshold used by the library, in one place. Functions take
// this record explicitly so tests can tighten or loosen individual knobs;
// the CLI additionally honours the GJRDF_TOL_OVERRIDES environment variable
// (a JSON object keyed by field name).
struct Tolerances {
  // symmetry check: max|A - A^T| <= sym_rel * (1 + max|a_ij|)
  double sym_rel = 1e-10;
  // PSD check: lambda_min >= -psd_rel * max(lambda_max, 0)
  double psd_rel = 1e-9;
  // scalar pseudoinverse cutoff: |x| <= pinv_zero treated as 0
  double pinv_zero = 1e-12;
  // SVD / eigendecomposition reconstruction residual (relative)
  double recon_rel = 1e-10;
  // extended Schur feasibility slack
  double schur = 1e-8;
  // canonical-correlation classification: d >= 1 - cvf_eps_one is an
  // identical component, d <= cvf_eps_zero an independent one
  double cvf_eps_one = 1e-9;
  double cvf_eps_zero = 1e-9;
  // transform correctness: ||S Q S^T - I|| bound for canonical transforms
  double cvf_orth = 1e-8;
  // optimality-region membership slack (boundaries accepted non-strictly)
  double region = 1e-10;
  // constraint-set feasibility slack for allocations
  double feasibility = 1e-8;
  // Newton: convergence on residual infinity norm, iteration cap, box clip
  double newton_tol = 1e-11;
  int newton_max_iter = 200;
  double box_eps = 1e-10;
  // water level bisection
  double bisect_tol = 1e-12;
  int bisect_max_iter = 100;
};

}  // namespace gjrdf
