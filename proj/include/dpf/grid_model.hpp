#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "dpf/case_io.hpp"

namespace dpf {

using Complex = std::complex<double>;
using ComplexSparse = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Complex bus admittance matrix over an ordered bus subset.
///
/// Each in-service branch contributes the standard π-model stamp. With series
/// admittance y = 1/(r + jx), charging b and complex tap a = t·e^{jφ}:
///
///     Y_ff += (y + jb/2) / t²      Y_ft -= y / conj(a)
///     Y_tt +=  y + jb/2            Y_tf -= y / a
///
/// so a phase shifter makes Y_ft ≠ Y_tf while the sparsity pattern stays
/// symmetric. Bus shunts gs + j·bs add to the diagonal.
struct AdmittanceMatrix {
    std::vector<int> bus_ids;  ///< row/column order
    ComplexSparse y;

    Eigen::Index size() const { return y.rows(); }
    Complex coeff(Eigen::Index i, Eigen::Index k) const { return y.coeff(i, k); }
};

/// Throws EndpointOutsideSubset when a branch endpoint is not in `bus_subset`.
/// Out-of-service branches are skipped.
AdmittanceMatrix build_ybus(const RawCase& c, std::span<const int> bus_subset,
                            std::span<const BranchRecord> branch_subset);

/// Whole-network admittance matrix in case bus order.
AdmittanceMatrix build_ybus(const RawCase& c);

/// Scheduled values of one bus.
///
/// `p`, `q` are net injections (generation − load, p.u.); they are the known
/// values of PQ buses and the initial guesses of unknown injections. `v` is the
/// generator setpoint at REF/PV buses and the case-file magnitude otherwise;
/// `theta` is the case-file angle.
struct BusSpec {
    int id = 0;
    BusType type = BusType::PQ;
    double p = 0.0;
    double q = 0.0;
    double v = 1.0;
    double theta = 0.0;
};

struct BusInjectionSpec {
    std::vector<BusSpec> buses;
};

/// Sums in-service generators per bus and subtracts the load.
BusInjectionSpec injections(const RawCase& c, std::span<const int> bus_subset);

/// Case-ordered bus ids.
std::vector<int> all_bus_ids(const RawCase& c);

}  // namespace dpf
