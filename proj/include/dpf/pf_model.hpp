#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "dpf/partition.hpp"
#include "dpf/solution.hpp"

namespace dpf {

using Eigen::Index;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Which quantities of a bus are known specifications by bus type:
/// REF (θ, v), PQ (p, q), PV (v, p).
std::array<Quantity, 2> known_quantities(BusType type);
/// The complementary unknowns: REF (p, q), PQ (θ, v), PV (θ, q).
std::array<Quantity, 2> unknown_quantities(BusType type);

/// Ordering of a region's state vector χ_ℓ.
///
/// Reduced: the two unknowns of each core bus, then (θ, v) of each copy bus;
/// 2·n_core + 2·n_copy entries. Original: (θ, v, p, q) of each core bus, then
/// (θ, v) of each copy bus; 4·n_core + 2·n_copy entries. Original-layout
/// residuals carry one extra "known − state" row per known core quantity.
class StateLayout {
  public:
    struct Entry {
        Index bus;  ///< local bus index
        Quantity quantity;
    };

    StateLayout(const RegionModel& region, ModelVariant variant);

    ModelVariant variant() const { return variant_; }
    Index size() const { return static_cast<Index>(entries_.size()); }
    Index n_residuals() const { return n_residuals_; }
    Index n_core() const { return n_core_; }
    const std::vector<Entry>& entries() const { return entries_; }

    /// Position of (bus, quantity) in χ_ℓ, or -1 when it is not a state entry.
    Index position(Index local_bus, Quantity quantity) const {
        return positions_[static_cast<std::size_t>(local_bus)][static_cast<std::size_t>(quantity)];
    }

  private:
    ModelVariant variant_;
    Index n_core_ = 0;
    Index n_residuals_ = 0;
    std::vector<Entry> entries_;
    std::vector<std::array<Index, 4>> positions_;
};

/// r_ℓ(χ_ℓ). Rows 2i and 2i+1 are the active and reactive mismatch of core
/// bus i, scheduled − computed; copy-bus voltages enter through tie-line
/// terms. The original layout appends the bus-specification rows.
VectorXd residual(const RegionModel& region, const StateLayout& layout, const VectorXd& x);

/// Analytic ∂r_ℓ/∂χ_ℓ.
SparseMatrix jacobian(const RegionModel& region, const StateLayout& layout, const VectorXd& x);

struct ObjectiveGradient {
    double f = 0.0;      ///< ½‖r‖²
    VectorXd gradient;   ///< Jᵀr
};

ObjectiveGradient objective_grad(const RegionModel& region, const StateLayout& layout, const VectorXd& x);

/// Jᵀ(J·w) at χ_ℓ without forming JᵀJ.
VectorXd gn_hessian_apply(const RegionModel& region, const StateLayout& layout, const VectorXd& x,
                          const VectorXd& w);
VectorXd gn_hessian_apply(const SparseMatrix& jac, const VectorXd& w);

/// Initial χ_ℓ from the case file: voltages from the bus data (generator
/// setpoints at REF/PV), injections from generator dispatch minus load, copy
/// buses from their foreign originals.
VectorXd initial_state(const RegionModel& region, const StateLayout& layout);

/// Partitioned case with one layout per region and the assembled consensus
/// system: everything the distributed solvers need.
class DistributedModel {
  public:
    DistributedModel(const RawCase& c, const PartitionSpec& spec, ModelVariant variant);

    ModelVariant variant() const { return variant_; }
    const Decomposition& decomposition() const { return decomposition_; }
    const std::vector<RegionModel>& regions() const { return decomposition_.regions; }
    const std::vector<StateLayout>& layouts() const { return layouts_; }
    const ConsensusSystem& consensus() const { return consensus_; }
    std::size_t n_regions() const { return layouts_.size(); }
    Index size() const { return consensus_.offsets.back(); }
    Index offset(std::size_t k) const { return consensus_.offsets[k]; }
    Index block_size(std::size_t k) const { return layouts_[k].size(); }

    VectorXd initial_state() const;
    /// Σ_ℓ ½‖r_ℓ(χ_ℓ)‖².
    double objective(const VectorXd& x) const;
    /// Per-bus values in case order; copy entries are ignored.
    PfSolution extract_solution(const VectorXd& x) const;
    /// Stacked state that represents `reference` (copies take their originals' values).
    VectorXd embed(const PfSolution& reference) const;

  private:
    ModelVariant variant_;
    std::vector<int> case_order_;
    Decomposition decomposition_;
    std::vector<StateLayout> layouts_;
    ConsensusSystem consensus_;
};

}  // namespace dpf
