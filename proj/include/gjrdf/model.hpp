#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gjrdf/tolerances.hpp"

namespace gjrdf {

// A zero-mean Gaussian pair (X1, X2) described by the joint covariance of
// the stacked vector [X1; X2] and the split point p1 = dim X1.
struct JointGaussianSource {
  Eigen::MatrixXd q;  // (p1+p2) x (p1+p2), symmetric PSD
  int p1 = 0;
  int p2 = 0;

  Eigen::MatrixXd q_x1() const { return q.topLeftCorner(p1, p1); }
  Eigen::MatrixXd q_x2() const { return q.bottomRightCorner(p2, p2); }
  Eigen::MatrixXd q_cross() const { return q.topRightCorner(p1, p2); }
};

// Dimension split of a canonical form: within each source the coordinates
// order as (identical, correlated, independent); the first two counts match
// across the sources.
struct CvfPartition {
  int p11 = 0, p12 = 0, p13 = 0;
  int p21 = 0, p22 = 0, p23 = 0;
};

// Result of reducing a source to canonical variables: whitening transforms
// s1, s2 and the canonical correlations d (descending, in [0,1]).
struct CanonicalForm {
  Eigen::VectorXd d;
  Eigen::MatrixXd s1;
  Eigen::MatrixXd s2;
  CvfPartition partition;
};

struct DistortionPair {
  double delta1 = 0.0;
  double delta2 = 0.0;
};

enum class RdfCase { A, B, C, D, E };

std::string to_string(RdfCase c);

// Per-component reproduction-error description: the two distortions and the
// cross-covariance of the error pair.
struct ComponentAllocation {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double cross = 0.0;
};

// A solved distortion split: one triple per correlated component, the count
// of components with active cross-covariance (kappa), the count of fully
// saturated components (ell), the closed-form case that produced it, and the
// resulting rate in nats.
struct RdfAllocation {
  std::vector<ComponentAllocation> per_component;
  int kappa = 0;
  int ell = 0;
  RdfCase label = RdfCase::A;
  double rate_nats = 0.0;
};

// Assembled reproduction-error covariance with the source split retained.
struct ErrorCovariance {
  Eigen::MatrixXd sigma;
  int p1 = 0;
  int p2 = 0;
};

// Structural validation: square, symmetric within tolerance, PSD within
// tolerance, and both per-source diagonal blocks strictly positive definite.
// Throws DimensionMismatch / NotSymmetric / NotPSD / DiagonalBlockSingular.
void validate_source(const JointGaussianSource& src, const Tolerances& tol = {});

// Covariance of a canonical pair tuple with correlations d: identity blocks
// on the diagonal, diag(d) off the diagonal.
Eigen::MatrixXd cvf_covariance(const std::vector<double>& d);

// Builds the block-diagonal-structure error covariance for an allocation on
// the canonical source with correlations d, and verifies 0 <= Sigma <= Q_cvf
// within tolerance (InfeasibleAllocation otherwise).
ErrorCovariance assemble_error_covariance(const RdfAllocation& alloc,
                                          const std::vector<double>& d,
                                          const Tolerances& tol = {});

}  // namespace gjrdf
