#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpf/aladin.hpp"
#include "dpf/partition.hpp"

namespace dpf {

enum class Algorithm { Centralized, AladinStandard, AladinGn };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kNoConvergence = 2;
}  // namespace exit_code

/// One solver run. Unset overrides fall back to ρ = μ = 1e2, ε = 1e-8 and
/// 50 outer iterations.
struct RunManifest {
    std::filesystem::path case_path;
    std::optional<std::filesystem::path> partition_path;
    ModelVariant model = ModelVariant::Reduced;
    Algorithm algorithm = Algorithm::Centralized;
    std::optional<double> rho, mu, tol;
    std::optional<int> max_iter;
    std::optional<std::filesystem::path> trace_out, solution_out, reference;
    int threads = 1;
    int repeat = 1;

    /// Throws Error when a distributed algorithm has no partition.
    void validate() const;
    SolverConfig solver_config() const;
};

/// Applies the keys of a JSON manifest object on top of `base`; relative
/// paths resolve against `base_dir`.
RunManifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir,
                           RunManifest base = {});

/// Expands a bench manifest file: an array of objects (or {"runs": [...]}).
/// An entry without "algorithm" runs both ALADIN variants, one without
/// "model" runs both models, and each distinct case adds a centralized row.
std::vector<RunManifest> parse_bench_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
/// Same expansion for a single case/partition pair.
std::vector<RunManifest> expand_bench(const RunManifest& base);

/// Writes the solution (JSON) and traces, prints a one-line summary.
/// Returns 0 on convergence, 2 on non-convergence, 1 on input errors.
int cmd_solve(const RunManifest& manifest, std::ostream& out, std::ostream& err);

/// Prints the dimension report as a table followed by one JSON line. Without
/// a partition the whole case is one region.
int cmd_dims(const std::filesystem::path& case_path, const std::optional<std::filesystem::path>& partition_path,
             std::ostream& out, std::ostream& err);

/// One CSV row per run: case, buses, n_reg, n_conn, model, algorithm,
/// dimension, iterations, time_s, converged, status. Failed rows are recorded
/// and the run continues. Empty input is a usage error.
int cmd_bench(const std::vector<RunManifest>& runs, std::ostream& csv, std::ostream& err);

/// Prints case (and partition) diagnostics; 0 when clean.
int cmd_validate(const std::filesystem::path& case_path, const std::optional<std::filesystem::path>& partition_path,
                 std::ostream& out, std::ostream& err);

}  // namespace dpf
