#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "dpf/case_io.hpp"
#include "dpf/grid_model.hpp"

namespace dpf {

enum class ModelVariant { Original, Reduced };
enum class Quantity { Theta = 0, V = 1, P = 2, Q = 3 };

std::string_view to_string(ModelVariant variant);
std::string_view to_string(Quantity quantity);
ModelVariant parse_model_variant(std::string_view text);

/// One region's self-contained power-flow model.
///
/// Local bus order is core buses (case order) followed by copy buses (by id).
/// Copy buses are the foreign endpoints of tie lines, one per distinct bus.
/// The local admittance matrix holds the region's internal branches plus
/// every incident tie line.
struct RegionModel {
    int id = 0;
    std::vector<int> core;
    std::vector<int> copy;
    std::vector<int> copy_owner;  ///< region that owns each copy bus as core
    std::vector<BranchRecord> branches;
    AdmittanceMatrix ybus;
    BusInjectionSpec spec;  ///< local order; copy entries only seed initial guesses

    std::size_t n_core() const { return core.size(); }
    std::size_t n_copy() const { return copy.size(); }
    std::size_t n_local() const { return core.size() + copy.size(); }
    /// Power-flow residual rows: one active and one reactive per core bus.
    std::size_t n_pf() const { return 2 * core.size(); }
    /// Local index of `bus`, or -1.
    Eigen::Index local_index(int bus) const;

    std::unordered_map<int, Eigen::Index> local;
};

/// Equates one (θ or v) quantity of a copy bus with its core original.
struct ConsensusRow {
    int region = 0;       ///< region holding the copy
    int copy_bus = 0;
    int core_region = 0;  ///< region owning the bus as core
    Quantity quantity = Quantity::Theta;
};

struct Decomposition {
    std::vector<RegionModel> regions;  ///< regions[ℓ-1] has id ℓ
    std::vector<ConsensusRow> rows;    ///< sorted by (region, copy bus, θ before v)
    std::size_t n_bus = 0;
    std::size_t n_conn = 0;  ///< in-service tie lines
};

/// Throws ValidationError when `spec` does not fit `c`.
Decomposition decompose(const RawCase& c, const PartitionSpec& spec);

struct DimensionReport {
    std::size_t n_bus = 0;
    std::size_t n_reg = 0;
    std::size_t n_conn = 0;
    std::vector<std::size_t> n_core;
    std::vector<std::size_t> n_copy;
    std::size_t reduced = 0;   ///< Σ 2·n_core + 2·n_copy
    std::size_t original = 0;  ///< Σ 4·n_core + 2·n_copy

    std::size_t dimension(ModelVariant variant) const {
        return variant == ModelVariant::Reduced ? reduced : original;
    }
};

DimensionReport dimension_report(const Decomposition& d);

class StateLayout;

/// A·χ = b over the stacked regional states.
///
/// Row r reads x_core − x_copy = 0. When the core-side quantity is a known
/// bus specification rather than a state entry (REF θ, v or PV v in the
/// reduced layout) the row keeps only the −1 on the copy entry and b holds
/// the negated setpoint.
struct ConsensusSystem {
    Eigen::SparseMatrix<double, Eigen::RowMajor> a;
    Eigen::VectorXd b;
    std::vector<ConsensusRow> rows;
    std::vector<Eigen::Index> offsets;  ///< column offset of each region block, plus the total

    Eigen::Index n_rows() const { return a.rows(); }
    Eigen::Index n_cols() const { return a.cols(); }
    /// Column block A_ℓ of region index `k` (0-based).
    Eigen::SparseMatrix<double> block(std::size_t k) const;
};

ConsensusSystem build_consensus(const Decomposition& d, std::span<const StateLayout> layouts);

}  // namespace dpf
