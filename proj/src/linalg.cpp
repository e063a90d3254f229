#include "gjrdf/linalg.hpp"

#include <cmath>
#include <string>

#include "gjrdf/errors.hpp"

namespace gjrdf::linalg {

namespace {

// Flip sign of column k (and its partner, if any) so the first entry of u
// with magnitude above the dead zone is positive. Makes decompositions
// reproducible across runs and BLAS backends.
void fix_column_sign(Eigen::MatrixXd& u, Eigen::MatrixXd* partner, int k) {
  for (int i = 0; i < u.rows(); ++i) {
    const double e = u(i, k);
    if (std::abs(e) > 1e-12) {
      if (e < 0.0) {
        u.col(k) = -u.col(k);
        if (partner) partner->col(k) = -partner->col(k);
      }
      return;
    }
  }
}

void require_finite(const Eigen::MatrixXd& a, const char* who) {
  if (!a.allFinite())
    throw std::invalid_argument(std::string(who) + ": non-finite entries");
}

}  // namespace

SvdResult svd(const Eigen::MatrixXd& a, const Tolerances& tol) {
  require_finite(a, "svd");
  Eigen::JacobiSVD<Eigen::MatrixXd> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdResult out{dec.matrixU(), dec.singularValues(), dec.matrixV()};

  const int rank_dim = static_cast<int>(std::min(a.rows(), a.cols()));
  for (int k = 0; k < out.u.cols(); ++k) {
    // paired columns must flip together to preserve u * s * v^T
    Eigen::MatrixXd* partner = (k < rank_dim && k < out.v.cols()) ? &out.v : nullptr;
    fix_column_sign(out.u, partner, k);
  }
  for (int k = rank_dim; k < out.v.cols(); ++k) fix_column_sign(out.v, nullptr, k);

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (int k = 0; k < rank_dim; ++k) s(k, k) = out.values(k);
  const double resid = (a - out.u * s * out.v.transpose()).norm();
  if (resid > tol.recon_rel * (1.0 + a.norm()))
    throw NoConvergence("svd: reconstruction residual " + std::to_string(resid));
  return out;
}

EigResult sym_eig(const Eigen::MatrixXd& a, const Tolerances& tol) {
  require_finite(a, "sym_eig");
  if (a.rows() != a.cols()) throw DimensionMismatch("sym_eig: matrix not square");
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol.sym_rel * scale)
    throw NotSymmetric("sym_eig: input not symmetric within tolerance");

  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dec(sym);
  if (dec.info() != Eigen::Success)
    throw NoConvergence("sym_eig: eigensolver did not converge");

  // Eigen returns ascending order; callers get descending.
  const int n = static_cast<int>(sym.rows());
  EigResult out;
  out.values = dec.eigenvalues().reverse();
  out.vectors.resize(n, n);
  for (int k = 0; k < n; ++k) out.vectors.col(k) = dec.eigenvectors().col(n - 1 - k);
  for (int k = 0; k < n; ++k) fix_column_sign(out.vectors, nullptr, k);

  const double resid = (sym * out.vectors - out.vectors * out.values.asDiagonal()).norm();
  if (resid > tol.recon_rel * (1.0 + sym.norm()) * std::sqrt(double(n)))
    throw NoConvergence("sym_eig: residual " + std::to_string(resid));
  return out;
}

double pinv_scalar(double x, const Tolerances& tol) {
  return std::abs(x) > tol.pinv_zero ? 1.0 / x : 0.0;
}

bool schur_psd_feasible(const Eigen::MatrixXd& m, const Eigen::MatrixXd& r,
                        const Eigen::MatrixXd& n, const Tolerances& tol) {
  if (m.rows() != m.cols() || r.rows() != r.cols())
    throw DimensionMismatch("schur_psd_feasible: diagonal blocks not square");
  if (n.rows() != m.rows() || n.cols() != r.rows())
    throw DimensionMismatch("schur_psd_feasible: off-diagonal block shape");

  double scale = 1.0;
  scale = std::max(scale, m.cwiseAbs().maxCoeff());
  scale = std::max(scale, r.cwiseAbs().maxCoeff());
  if (n.size() > 0) scale = std::max(scale, n.cwiseAbs().maxCoeff());
  const double slack = tol.schur * scale;

  const EigResult re = sym_eig(r, tol);
  if (re.values.size() > 0 && re.values.minCoeff() < -slack) return false;

  // pseudoinverse of r from its spectrum; eigenvalues inside the dead zone
  // (relative to the largest) count as rank deficiency
  const double lam_max = re.values.size() > 0 ? std::abs(re.values.maxCoeff()) : 0.0;
  const double cut = std::max(tol.pinv_zero, tol.pinv_zero * lam_max);
  Eigen::VectorXd inv = re.values;
  for (int i = 0; i < inv.size(); ++i)
    inv(i) = std::abs(re.values(i)) > cut ? 1.0 / re.values(i) : 0.0;
  const Eigen::MatrixXd r_pinv =
      re.vectors * inv.asDiagonal() * re.vectors.transpose();

  // range condition: n^T must live in the column space of r
  const Eigen::MatrixXd leak =
      (Eigen::MatrixXd::Identity(r.rows(), r.cols()) - r * r_pinv) * n.transpose();
  if (leak.size() > 0 && leak.cwiseAbs().maxCoeff() > slack) return false;

  const Eigen::MatrixXd comp = m - n * r_pinv * n.transpose();
  const EigResult ce = sym_eig(0.5 * (comp + comp.transpose()), tol);
  return ce.values.size() == 0 || ce.values.minCoeff() >= -slack;
}

double logdet_psd(const Eigen::MatrixXd& a, const Tolerances& tol) {
  const EigResult e = sym_eig(a, tol);
  if (e.values.size() == 0) return 0.0;
  const double lam_max = std::max(e.values.maxCoeff(), 0.0);
  const double floor = tol.psd_rel * std::max(lam_max, 1e-300);
  double acc = 0.0;
  for (int i = 0; i < e.values.size(); ++i) {
    if (e.values(i) <= floor)
      throw SingularMatrix("logdet_psd: eigenvalue " + std::to_string(e.values(i)) +
                           " at or below tolerance");
    acc += std::log(e.values(i));
  }
  return acc;
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dec(0.5 * (a + a.transpose()));
  return dec.eigenvalues().minCoeff();
}

}  // namespace gjrdf::linalg
