#include "gjrdf/cvf.hpp"

#include <algorithm>
#include <cmath>

#include "gjrdf/errors.hpp"
#include "gjrdf/linalg.hpp"

namespace gjrdf::cvf {

namespace {

// inverse square root of a strictly PD symmetric block from its spectrum
Eigen::MatrixXd inv_sqrt(const linalg::EigResult& e) {
  Eigen::VectorXd w = e.values;
  for (int i = 0; i < w.size(); ++i) w(i) = 1.0 / std::sqrt(w(i));
  return e.vectors * w.asDiagonal() * e.vectors.transpose();
}

}  // namespace

CanonicalForm to_cvf(const JointGaussianSource& src, const Tolerances& tol) {
  validate_source(src, tol);
  const int p1 = src.p1;
  const int p2 = src.p2;

  const linalg::EigResult e1 = linalg::sym_eig(src.q_x1(), tol);
  const linalg::EigResult e2 = linalg::sym_eig(src.q_x2(), tol);
  const Eigen::MatrixXd w1 = inv_sqrt(e1);  // Q_x1^{-1/2}
  const Eigen::MatrixXd w2 = inv_sqrt(e2);

  // whitened cross block; its singular values are the canonical correlations
  const Eigen::MatrixXd c = w1 * src.q_cross() * w2;
  const linalg::SvdResult sv = linalg::svd(c, tol);

  CanonicalForm cf;
  cf.s1 = sv.u.transpose() * w1;
  cf.s2 = sv.v.transpose() * w2;
  const int r = static_cast<int>(sv.values.size());
  cf.d.resize(r);
  for (int i = 0; i < r; ++i) cf.d(i) = std::clamp(sv.values(i), 0.0, 1.0);

  int n_one = 0, n_mid = 0;
  for (int i = 0; i < r; ++i) {
    if (cf.d(i) >= 1.0 - tol.cvf_eps_one)
      ++n_one;
    else if (cf.d(i) > tol.cvf_eps_zero)
      ++n_mid;
  }
  cf.partition.p11 = n_one;
  cf.partition.p12 = n_mid;
  cf.partition.p13 = p1 - n_one - n_mid;
  cf.partition.p21 = n_one;
  cf.partition.p22 = n_mid;
  cf.partition.p23 = p2 - n_one - n_mid;
  return cf;
}

std::vector<double> correlated_block(const CanonicalForm& cf, const Tolerances& tol) {
  std::vector<double> out;
  for (int i = 0; i < cf.d.size(); ++i) {
    const double d = cf.d(i);
    if (d > tol.cvf_eps_zero && d < 1.0 - tol.cvf_eps_one) out.push_back(d);
  }
  // canonical correlations arrive descending from the SVD; keep that order
  return out;
}

}  // namespace gjrdf::cvf
