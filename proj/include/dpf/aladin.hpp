#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "dpf/pf_model.hpp"
#include "dpf/solution.hpp"
#include "dpf/sparse_linalg.hpp"

namespace dpf {

/// Damped Gauss-Newton settings for the regional NLPs of standard ALADIN.
struct InnerSettings {
    /// Gradient ∞-norm. The effective value is min(tol, ε/10), raised to the
    /// rounding floor eps·‖J‖₁‖J‖∞ on badly scaled regions.
    double tol = 1e-10;
    int max_iter = 50;
    double armijo_c = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 40;
};

struct SolverConfig {
    double rho = 1e2;  ///< local proximal penalty
    double mu = 1e2;   ///< consensus penalty in the coordinator
    double eps = 1e-8;
    int max_outer_iter = 50;
    InnerSettings inner;
    CgOptions cg{.rel_tol = 1e-10, .max_iter = 0, .precondition = true};
    /// Diagonal of the scaling Σ_ℓ per region; empty means identity.
    std::vector<VectorXd> sigma;
    int threads = 1;

    double inner_tol() const;
    /// Throws Error unless ρ, μ, ε > 0 and every Σ_ℓ diagonal is positive.
    void validate(const DistributedModel& model) const;
};

struct TraceRecord {
    int iter = 0;
    double primal_inf = 0.0;  ///< ‖Ax − b‖∞
    double dual_inf = 0.0;    ///< max_ℓ ‖Σ_ℓ(x_ℓ − z_ℓ)‖∞
    double objective = 0.0;   ///< f(x)
    double gap = 0.0;         ///< |f(x) − f(x*)|
    std::optional<double> deviation_inf;  ///< ‖x − x*‖∞ when a reference is known
};

struct IterationTrace {
    std::vector<TraceRecord> records;

    std::size_t size() const { return records.size(); }
    /// Columns `iter,primal_inf,dual_inf,objective,gap,deviation_inf`.
    std::string to_csv() const;
    std::string to_jsonl() const;
};

/// Known solution used for the gap and deviation trace columns.
struct TraceReference {
    VectorXd state;
    double objective = 0.0;
};

struct RunResult {
    PfSolution solution;
    IterationTrace trace;
    VectorXd x;       ///< local iterate that passed (or last failed) the termination check
    VectorXd z;
    VectorXd lambda;
    bool converged = false;
    int iterations = 0;
};

struct Termination {
    bool converged = false;
    double primal = 0.0;
    double dual = 0.0;
};

/// ‖Ax − b‖∞ ≤ ε and max_ℓ ‖Σ_ℓ(x_ℓ − z_ℓ)‖∞ ≤ ε; both residuals are always returned.
Termination termination_check(const VectorXd& x, const VectorXd& z, const ConsensusSystem& consensus,
                              std::span<const VectorXd> sigma, double eps);

struct LocalNlpResult {
    VectorXd x;
    double gradient_norm = 0.0;
    int iterations = 0;
};

/// Minimizes f_ℓ(x) + cᵀx + ρ/2‖x − z‖²_Σ with c = A_ℓᵀλ by damped Gauss-Newton
/// and Armijo backtracking, starting from z. Throws InnerNoConvergence.
LocalNlpResult local_nlp_solve(const RegionModel& region, const StateLayout& layout, const VectorXd& z,
                               const VectorXd& linear_term, const SolverConfig& cfg, const VectorXd& sigma = {},
                               int region_id = 0);

/// Block-diagonal Σ J_ℓᵀJ_ℓ plus μAᵀA, applied matrix-free. Carries a
/// region-block preconditioner built from local sparse LDLT factors.
LinearOperator coupled_operator(std::span<const SparseMatrix> jacobians, const ConsensusSystem& consensus,
                                double mu);

struct QpStep {
    VectorXd dx;
    VectorXd s;
    VectorXd lambda_qp;
    int cg_iterations = 0;
};

/// Coordinator QP of standard ALADIN with the slack eliminated:
/// (H + μAᵀA)Δx = −(g + Aᵀλ + μAᵀ(Ax − b)), s = A(x + Δx) − b, λ_QP = λ + μs.
/// H_ℓ = J_ℓᵀJ_ℓ. Retries a CG breakdown once with +1e-10·I, then throws
/// SingularSystem.
QpStep coupled_qp_solve(std::span<const SparseMatrix> jacobians, const VectorXd& gradient,
                        const ConsensusSystem& consensus, const VectorXd& x, const VectorXd& lambda, double mu,
                        const CgOptions& cg = {});

struct DecoupledStep {
    VectorXd x;  ///< z + p
    VectorXd p;
    VectorXd gradient;  ///< J(x)ᵀr(x)
    SparseMatrix jacobian;  ///< J(x); H_ℓ = JᵀJ
    int cg_iterations = 0;
};

/// Solves (J(z)ᵀJ(z) + ρI)p = −J(z)ᵀr(z) by CG and evaluates the sensitivities
/// at the new point x = z + p.
DecoupledStep decoupled_linear_step(const RegionModel& region, const StateLayout& layout, const VectorXd& z,
                                    double rho, const CgOptions& cg = {});

/// (H + μAᵀA)Δx = −μAᵀ(Ax − b) − g, matrix-free by CG.
VectorXd coupled_linear_step(std::span<const SparseMatrix> jacobians, const VectorXd& gradient,
                             const ConsensusSystem& consensus, const VectorXd& x, double mu,
                             const CgOptions& cg = {}, int* cg_iterations = nullptr);

/// Standard ALADIN with full primal and dual steps.
RunResult run_standard(const DistributedModel& model, const SolverConfig& cfg, const VectorXd& x0,
                       const TraceReference* reference = nullptr);

/// Gauss-Newton inexact ALADIN: λ frozen at 0, both steps are linear solves.
RunResult run_gn_inexact(const DistributedModel& model, const SolverConfig& cfg, const VectorXd& x0,
                         const TraceReference* reference = nullptr);

}  // namespace dpf
