#pragma once

#include <stdexcept>
#include <string>

namespace gjrdf {

// Base for everything this library throws on its own behalf.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- input / shape problems ------------------------------------------------
struct DimensionMismatch : Error {
  using Error::Error;
};
struct NotSymmetric : Error {
  using Error::Error;
};
struct NotPSD : Error {
  using Error::Error;
};
struct DiagonalBlockSingular : Error {
  using Error::Error;
};
struct BadDelta : Error {
  using Error::Error;
};

// -- numeric failures ------------------------------------------------------
struct NoConvergence : Error {
  using Error::Error;
};
struct SingularMatrix : Error {
  using Error::Error;
};
struct NewtonDivergence : Error {
  using Error::Error;
};
struct NonpositiveDenominator : Error {
  using Error::Error;
};

// -- allocation / dispatch failures ----------------------------------------
struct InfeasibleAllocation : Error {
  using Error::Error;
};
struct InfeasibleProblem : Error {
  using Error::Error;
};
struct BudgetExhausted : Error {
  using Error::Error;
};

// Raised when every closed-form case and every Newton system was tried and
// none produced an allocation passing its own optimality-region test. This
// signals a numerical failure (or an input outside the supported domain),
// not a mathematical gap; the bundled diagnostics list what was attempted.
struct NoFeasibleCase : Error {
  explicit NoFeasibleCase(const std::string& what, std::string diag)
      : Error(what), diagnostics(std::move(diag)) {}
  std::string diagnostics;
};

}  // namespace gjrdf
