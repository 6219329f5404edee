#pragma once

#include "dpf/case_io.hpp"
#include "dpf/solution.hpp"

namespace dpf {

struct NrOptions {
    double tol = 1e-8;  ///< ∞-norm of the mismatch vector
    int max_iter = 20;
    bool flat_start = false;  ///< θ = 0, v = 1 (setpoints at REF/PV) instead of the case voltages
};

/// Centralized polar Newton-Raphson on the unpartitioned case.
///
/// Unknowns are θ at PV and PQ buses and v at PQ buses; each step solves the
/// dense mismatch Jacobian by full-pivot LU. After convergence the REF p, q and
/// PV q are back-substituted from S = V·conj(Y·V). No reactive limits.
///
/// Throws NoConvergence (diverged or max_iter) and SingularJacobian.
PfSolution nr_solve(const RawCase& c, const NrOptions& options = {});

}  // namespace dpf
