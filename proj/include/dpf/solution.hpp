#pragma once

#include <optional>
#include <string>
#include <vector>

namespace dpf {

struct BusSolution {
    int id = 0;
    double theta = 0.0;  ///< rad
    double v = 0.0;      ///< p.u.
    double p = 0.0;      ///< net injection, p.u.
    double q = 0.0;
};

/// Per-bus power-flow result in case bus order, plus solver diagnostics.
struct PfSolution {
    std::vector<BusSolution> buses;
    int iterations = 0;
    double mismatch = 0.0;  ///< final ∞-norm the solver terminated on
    std::vector<double> mismatch_history;  ///< per iteration, starting point first (Newton-Raphson only)
    double wall_time_s = 0.0;
    bool converged = false;

    const BusSolution* find(int id) const;
};

std::string solution_to_json(const PfSolution& s, const std::string& algorithm);
PfSolution parse_solution_json(const std::string& text);

/// Max elementwise deviations between two solutions over the buses of `a`.
struct SolutionDeviation {
    double theta = 0.0, v = 0.0, p = 0.0, q = 0.0;
};
SolutionDeviation compare_solutions(const PfSolution& a, const PfSolution& b);

}  // namespace dpf
