#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "dpf/case_io.hpp"
#include "dpf/pf_model.hpp"
#include "dpf/solution.hpp"

namespace dpf::test {

std::filesystem::path data_dir();
std::filesystem::path case_path(const std::string& name);
std::filesystem::path partition_path(const std::string& name);

struct Reference {
    std::size_t buses = 0, gens = 0, branches = 0;
    PfSolution solution;
    /// (row bus id, column bus id, re, im), empty for large cases.
    std::vector<std::tuple<int, int, double, double>> ybus;
};

/// Values produced offline by an independent MATPOWER implementation.
Reference load_reference(const std::string& case_name);

struct Fixture {
    RawCase c;
    PartitionSpec spec;
};

/// Loads tests/data/cases/<name>.m with tests/data/partitions/<partition>.json.
Fixture load_fixture(const std::string& name, const std::string& partition);

/// Radial regions of near-equal size joined by `n_conn` tie lines whose
/// endpoints are all distinct; bus 1 is the only REF bus. Structure only, no
/// meaningful operating point.
Fixture synthetic_fixture(int n_bus, int n_reg, int n_conn);

/// Random state with θ ∈ [−0.5, 0.5], v ∈ [0.9, 1.1], injections ∈ [−2, 2].
VectorXd random_state(const StateLayout& layout, std::uint64_t seed);

/// max_ij |J_fd − J| / max(1, |J|) with central differences of step h.
double jacobian_fd_error(const RegionModel& region, const StateLayout& layout, const VectorXd& x, double h = 1e-6);

/// max |Jᵀ(Jw) − dense(JᵀJ)w| / max(1, ‖dense(JᵀJ)w‖∞).
double hessian_apply_error(const RegionModel& region, const StateLayout& layout, const VectorXd& x,
                           const VectorXd& w);

struct FuzzStats {
    int accepted = 0;
    int rejected = 0;  ///< threw dpf::Error
    int foreign = 0;   ///< threw anything else
    std::string first_foreign;
};

/// Feeds `samples` mutations of `seed_text` (byte flips, insertions,
/// deletions, truncations, token swaps) to parse_matpower.
FuzzStats fuzz_matpower(const std::string& seed_text, int samples, unsigned long long seed);

}  // namespace dpf::test
