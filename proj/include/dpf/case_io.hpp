#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dpf/errors.hpp"

namespace dpf {

enum class BusType { PQ = 1, PV = 2, REF = 3 };

std::string_view to_string(BusType type);

/// Bus data in per-unit on the case base and radians.
struct BusRecord {
    int id = 0;
    BusType bus_type = BusType::PQ;
    double p_load = 0.0;
    double q_load = 0.0;
    double gs = 0.0;  ///< shunt conductance, p.u. power at 1 p.u. voltage
    double bs = 0.0;  ///< shunt susceptance, p.u. power at 1 p.u. voltage
    double v_init = 1.0;
    double theta_init = 0.0;

    bool operator==(const BusRecord&) const = default;
};

struct GenRecord {
    int bus = 0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double v_set = 1.0;
    bool status = true;

    bool operator==(const GenRecord&) const = default;
};

/// π-model branch. `tap` is the off-nominal ratio (never 0 after parsing);
/// `shift` is the phase shift in radians.
struct BranchRecord {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0;
    double tap = 1.0;
    double shift = 0.0;
    bool status = true;

    bool operator==(const BranchRecord&) const = default;
};

struct RawCase {
    double base_mva = 100.0;
    std::vector<BusRecord> buses;
    std::vector<GenRecord> gens;
    std::vector<BranchRecord> branches;

    bool operator==(const RawCase&) const = default;

    /// Position of bus `id` in `buses`.
    std::optional<std::size_t> bus_index(int id) const;
};

/// Bus id → position lookup built once for repeated queries.
class BusIndex {
  public:
    explicit BusIndex(const RawCase& c);
    std::optional<std::size_t> find(int id) const;
    std::size_t at(int id) const;

  private:
    std::unordered_map<int, std::size_t> index_;
};

struct PartitionSpec {
    std::map<int, int> region_of;  ///< bus id → region id (1-based)

    int region_count() const;
    bool operator==(const PartitionSpec&) const = default;
};

/// Parses the MATPOWER function-file subset: the `baseMVA`, `bus`, `gen` and
/// `branch` assignments with numeric literals. Other statements are skipped.
/// Throws SyntaxError, MissingSection or ValidationError.
RawCase parse_matpower(std::string_view text);

/// Canonical JSON mirror of RawCase (per-unit, radians).
RawCase parse_case_json(std::string_view text);
std::string case_to_json(const RawCase& c);

/// Dispatches on the extension: `.json` is the canonical mirror, anything
/// else is read as MATPOWER.
RawCase load_case(const std::filesystem::path& path);

/// Reads `{"<bus_id>": <region_id>, ...}` without checking it against a case.
PartitionSpec parse_partition(std::string_view text);
/// Reads and validates against `c`.
PartitionSpec parse_partition(std::string_view text, const RawCase& c);
PartitionSpec load_partition(const std::filesystem::path& path, const RawCase& c);

/// Empty iff every RawCase invariant holds.
std::vector<Diagnostic> validate_case(const RawCase& c);

/// Coverage, non-empty regions and a connected region graph.
std::vector<Diagnostic> validate_partition(const PartitionSpec& spec, const RawCase& c);

/// Demotes PV buses without an in-service generator to PQ and reads a zero
/// tap as 1.0. Both parsers apply this before validation.
void normalize_case(RawCase& c);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace dpf
