#pragma once

#include <vector>

#include "gjrdf/model.hpp"
#include "gjrdf/tolerances.hpp"

namespace gjrdf::cvf {

// Reduces a validated source to canonical variables: whitens each source,
// rotates the pair so the cross block becomes diag(d) with the canonical
// correlations d in [0,1] descending, and classifies each coordinate as
// identical (d within eps_one of 1), correlated, or independent (d within
// eps_zero of 0). The transforms are sign-fixed and deterministic.
CanonicalForm to_cvf(const JointGaussianSource& src, const Tolerances& tol = {});

// The strictly correlated coefficients of a canonical form: everything
// classified neither identical nor independent, descending.
std::vector<double> correlated_block(const CanonicalForm& cf,
                                     const Tolerances& tol = {});

}  // namespace gjrdf::cvf
