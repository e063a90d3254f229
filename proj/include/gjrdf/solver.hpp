#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "gjrdf/model.hpp"
#include "gjrdf/tolerances.hpp"

namespace gjrdf::solver {

// Final state of a damped Newton solve (zeroed for closed-form cases).
struct NewtonState {
  Eigen::VectorXd unknowns;
  double residual_norm = 0.0;
  int iterations = 0;
};

// Outcome of the optimality-region tests used by the dispatcher.
struct RegionLabel {
  enum class Kind { M1, M2, D0, Dkappa, Dhat } kind = Kind::D0;
  int index = 0;  // kappa for Dkappa, ell for Dhat, unused otherwise
  bool accepted = false;
  bool boundary = false;  // some inequality landed within tolerance of equality
};

// What joint_rdf hands back: the allocation plus solve diagnostics.
struct SolveResult {
  RdfAllocation allocation;
  NewtonState newton;
  std::vector<std::string> notes;  // region rejections, boundary hits, retries
};

// Membership in the degenerate region where only source `which` binds: the
// other source's budget exceeds the threshold determined by this source's
// equal split. Example: d=(0.588,0.271), budgets (0.5,1.7), which=1 -> true.
bool in_region_m(const std::vector<double>& d, const DistortionPair& delta,
                 int which);

// Equal-split solution; valid when no cross-covariance is needed anywhere.
std::optional<RdfAllocation> case_a(const std::vector<double>& d,
                                    const DistortionPair& delta,
                                    const Tolerances& tol = {});

// kappa components (largest correlations first) carry active cross-
// covariance, the rest split the leftover budgets equally. Solves the 2*kappa
// stationarity equations by damped Newton; returns nothing when the solution
// fails its region test. Throws NewtonDivergence when the iteration fails.
std::optional<RdfAllocation> case_b(const std::vector<double>& d,
                                    const DistortionPair& delta, int kappa,
                                    const Tolerances& tol = {},
                                    NewtonState* state = nullptr);

// All components carry cross-covariance and the ell smallest-correlation ones
// are fully saturated at (1, 1, d_i). Solves the remaining stationarity
// system with explicit budget multipliers. Throws BudgetExhausted when a
// budget cannot cover the saturated components.
std::optional<RdfAllocation> case_c(const std::vector<double>& d,
                                    const DistortionPair& delta, int ell,
                                    const Tolerances& tol = {},
                                    NewtonState* state = nullptr);

// Closed forms for the degenerate regions: only source 1 (case_d) or only
// source 2 (case_e) binds; the other reproduction rides along for free.
RdfAllocation case_d(const std::vector<double>& d, const DistortionPair& delta);
RdfAllocation case_e(const std::vector<double>& d, const DistortionPair& delta);

// Rate in nats recomputed from an allocation's per-component error
// determinants. Saturated triples (1, 1, d_i) contribute exactly zero.
// Throws NonpositiveDenominator when some error determinant is <= 0.
double rate_from_allocation(const std::vector<double>& d,
                            const RdfAllocation& alloc);

// All constraint-set conditions for an allocation, evaluated with the scalar
// pseudoinverse convention and tol.feasibility slack: per-component PSD of
// the error block and of its gap to the source block, the range condition on
// the cross term, and (when budgets are given) the two trace budgets.
bool feasible(const std::vector<double>& d, const RdfAllocation& alloc,
              const Tolerances& tol = {},
              const DistortionPair* delta = nullptr);

// Shannon rate of an n-dimensional unit-variance source at total budget
// delta (equal split): the single-source lower bound used by the dispatcher.
double shannon_rdf_unit(int n, double delta);

// Full dispatcher: validates input, walks the closed-form cases and the
// Newton systems (kappa ascending, then ell ascending), and returns the
// first allocation that passes both its optimality-region test and the
// constraint-set feasibility check. Throws NoFeasibleCase with diagnostics
// when everything was tried and rejected.
SolveResult joint_rdf(const std::vector<double>& d, const DistortionPair& delta,
                      const Tolerances& tol = {});

}  // namespace gjrdf::solver
