#include "dpf/aladin.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace dpf {

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn(k) for k in [0, n). Each k writes only its own slice, so any
// thread count gives the same result.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                fn(k);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(workers, n); ++t) pool.emplace_back(work);
    work();
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

VectorXd sigma_or_ones(std::span<const VectorXd> sigma, std::size_t k, Index n) {
    if (sigma.empty() || sigma[k].size() == 0) return VectorXd::Ones(n);
    return sigma[k];
}

// x ↦ Σ (J_ℓᵀJ_ℓ x_ℓ) + μAᵀAx.
void apply_coupled(std::span<const SparseMatrix> jacobians, const ConsensusSystem& consensus, double mu,
                   const VectorXd& in, VectorXd& out) {
    out.resize(in.size());
    for (std::size_t k = 0; k < jacobians.size(); ++k) {
        const Index begin = consensus.offsets[k];
        const Index width = consensus.offsets[k + 1] - begin;
        const VectorXd jw = jacobians[k] * in.segment(begin, width);
        out.segment(begin, width).noalias() = jacobians[k].transpose() * jw;
    }
    if (consensus.n_rows() > 0) {
        const VectorXd aw = consensus.a * in;
        out.noalias() += mu * (consensus.a.transpose() * aw);
    }
}

VectorXd solve_coupled(std::span<const SparseMatrix> jacobians, const ConsensusSystem& consensus, double mu,
                       const VectorXd& rhs, const CgOptions& cg, int* iterations) {
    const LinearOperator op = coupled_operator(jacobians, consensus, mu);
    const VectorXd x0 = VectorXd::Zero(rhs.size());
    CgResult result;
    try {
        result = cg_solve(op, rhs, x0, cg);
    } catch (const BreakdownError&) {
        try {
            result = cg_solve(op.shifted(1e-10), rhs, x0, cg);
        } catch (const BreakdownError& e) {
            throw SingularSystem(std::string("coupled system is singular: ") + e.what());
        }
    }
    if (iterations) *iterations = result.iterations;
    return result.x;
}

VectorXd block(const VectorXd& stacked, const DistributedModel& model, std::size_t k) {
    return stacked.segment(model.offset(k), model.block_size(k));
}

TraceRecord make_record(int iter, const Termination& term, const DistributedModel& model, const VectorXd& x,
                        const TraceReference* reference) {
    TraceRecord rec;
    rec.iter = iter;
    rec.primal_inf = term.primal;
    rec.dual_inf = term.dual;
    rec.objective = model.objective(x);
    rec.gap = std::abs(rec.objective - (reference ? reference->objective : 0.0));
    if (reference) rec.deviation_inf = (x - reference->state).lpNorm<Eigen::Infinity>();
    return rec;
}

RunResult finish(const DistributedModel& model, RunResult result, const Termination& term, Clock::time_point start) {
    result.solution = model.extract_solution(result.x);
    result.solution.iterations = result.iterations;
    result.solution.converged = result.converged;
    result.solution.mismatch = std::max(term.primal, term.dual);
    result.solution.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

}  // namespace

double SolverConfig::inner_tol() const { return std::min(inner.tol, eps / 10.0); }

void SolverConfig::validate(const DistributedModel& model) const {
    if (!(rho > 0.0) || !(mu > 0.0) || !(eps > 0.0)) throw Error("rho, mu and eps must be positive");
    if (max_outer_iter < 1) throw Error("max_outer_iter must be at least 1");
    if (!sigma.empty()) {
        if (sigma.size() != model.n_regions()) throw DimensionMismatch("one scaling diagonal per region required");
        for (std::size_t k = 0; k < sigma.size(); ++k) {
            if (sigma[k].size() == 0) continue;
            if (sigma[k].size() != model.block_size(k)) throw DimensionMismatch("scaling diagonal has wrong length");
            if (!(sigma[k].minCoeff() > 0.0)) throw Error("scaling matrices must be positive definite");
        }
    }
}

std::string IterationTrace::to_csv() const {
    std::string out = "iter,primal_inf,dual_inf,objective,gap,deviation_inf\n";
    for (const auto& r : records) {
        out += std::to_string(r.iter) + "," + format_double(r.primal_inf) + "," + format_double(r.dual_inf) + "," +
               format_double(r.objective) + "," + format_double(r.gap) + "," +
               (r.deviation_inf ? format_double(*r.deviation_inf) : "") + "\n";
    }
    return out;
}

std::string IterationTrace::to_jsonl() const {
    std::string out;
    for (const auto& r : records) {
        out += "{\"iter\":" + std::to_string(r.iter) + ",\"primal_inf\":" + format_double(r.primal_inf) +
               ",\"dual_inf\":" + format_double(r.dual_inf) + ",\"objective\":" + format_double(r.objective) +
               ",\"gap\":" + format_double(r.gap) +
               ",\"deviation_inf\":" + (r.deviation_inf ? format_double(*r.deviation_inf) : "null") + "}\n";
    }
    return out;
}

Termination termination_check(const VectorXd& x, const VectorXd& z, const ConsensusSystem& consensus,
                              std::span<const VectorXd> sigma, double eps) {
    if (x.size() != consensus.n_cols() || z.size() != consensus.n_cols())
        throw DimensionMismatch("termination_check: state size does not match the consensus system");
    Termination t;
    if (consensus.n_rows() > 0) t.primal = (consensus.a * x - consensus.b).lpNorm<Eigen::Infinity>();
    for (std::size_t k = 0; k + 1 < consensus.offsets.size(); ++k) {
        const Index begin = consensus.offsets[k];
        const Index width = consensus.offsets[k + 1] - begin;
        if (width == 0) continue;
        VectorXd diff = x.segment(begin, width) - z.segment(begin, width);
        if (!sigma.empty() && sigma[k].size() > 0) diff = diff.cwiseProduct(sigma[k]);
        t.dual = std::max(t.dual, diff.lpNorm<Eigen::Infinity>());
    }
    t.converged = t.primal <= eps && t.dual <= eps;
    return t;
}

LocalNlpResult local_nlp_solve(const RegionModel& region, const StateLayout& layout, const VectorXd& z,
                               const VectorXd& linear_term, const SolverConfig& cfg, const VectorXd& sigma,
                               int region_id) {
    const Index n = layout.size();
    if (z.size() != n || linear_term.size() != n) throw DimensionMismatch("local_nlp_solve: operand sizes differ");
    const VectorXd weights = sigma.size() == 0 ? VectorXd::Ones(n) : sigma;
    const double rho = cfg.rho;

    auto merit = [&](const VectorXd& x, const VectorXd& r) {
        const VectorXd d = x - z;
        return 0.5 * r.squaredNorm() + linear_term.dot(x) + 0.5 * rho * d.dot(weights.cwiseProduct(d));
    };

    auto gradient_at = [&](const SparseMatrix& jac, const VectorXd& x, const VectorXd& r) -> VectorXd {
        return jac.transpose() * r + linear_term + rho * weights.cwiseProduct(x - z);
    };

    LocalNlpResult result;
    result.x = z;
    VectorXd r = residual(region, layout, result.x);
    SparseMatrix jac = jacobian(region, layout, result.x);
    VectorXd grad = gradient_at(jac, result.x, r);
    // Rounding in Jᵀr limits the attainable gradient to about eps·‖J‖₁‖J‖∞.
    const SparseMatrix abs_jac = jac.cwiseAbs();
    const double col_sum = (VectorXd::Ones(abs_jac.rows()).transpose() * abs_jac).maxCoeff();
    const double row_sum = (abs_jac * VectorXd::Ones(n)).maxCoeff();
    const double tol = std::max(cfg.inner_tol(), std::numeric_limits<double>::epsilon() * col_sum * row_sum);
    for (int it = 0;; ++it) {
        result.gradient_norm = grad.lpNorm<Eigen::Infinity>();
        result.iterations = it;
        if (result.gradient_norm <= tol) return result;
        if (it >= cfg.inner.max_iter)
            throw InnerNoConvergence("region " + std::to_string(region_id) + ": local NLP stopped at gradient norm " +
                                         format_double(result.gradient_norm) + " after " + std::to_string(it) +
                                         " iterations",
                                     region_id, result.gradient_norm,
                                     std::vector<double>(result.x.data(), result.x.data() + n));

        // Gauss-Newton model Hessian JᵀJ + ρΣ.
        VectorXd diag = gram_diagonal(jac) + rho * weights;
        const LinearOperator op(
            n,
            [&](const VectorXd& in, VectorXd& out) {
                const VectorXd jw = jac * in;
                out.noalias() = jac.transpose() * jw;
                out += rho * weights.cwiseProduct(in);
            },
            std::move(diag));
        const VectorXd step = cg_solve(op, -grad, VectorXd::Zero(n), cfg.cg).x;
        // Stationary to working precision.
        if (step.lpNorm<Eigen::Infinity>() <= 8.0 * std::numeric_limits<double>::epsilon() *
                                                  (1.0 + result.x.lpNorm<Eigen::Infinity>()))
            return result;

        const double phi0 = merit(result.x, r);
        const double slope = grad.dot(step);
        VectorXd trial = result.x + step;
        VectorXd r_trial = residual(region, layout, trial);
        SparseMatrix jac_trial = jacobian(region, layout, trial);
        VectorXd grad_trial = gradient_at(jac_trial, trial, r_trial);
        // Close to the minimizer the merit decrease drops below its rounding
        // error; a full step that halves the gradient is taken regardless.
        const double phi = merit(trial, r_trial);
        const bool accept_full = phi <= phi0 + cfg.inner.armijo_c * slope ||
                                 (phi <= phi0 + 1e-12 * (1.0 + std::abs(phi0)) &&
                                  grad_trial.lpNorm<Eigen::Infinity>() <= 0.5 * result.gradient_norm);
        if (!accept_full) {
            double t = 1.0;
            for (int b = 0; b < cfg.inner.max_backtracks; ++b) {
                t *= cfg.inner.backtrack;
                trial = result.x + t * step;
                r_trial = residual(region, layout, trial);
                if (merit(trial, r_trial) <= phi0 + cfg.inner.armijo_c * t * slope) break;
            }
            jac_trial = jacobian(region, layout, trial);
            grad_trial = gradient_at(jac_trial, trial, r_trial);
        }
        result.x = std::move(trial);
        r = std::move(r_trial);
        jac = std::move(jac_trial);
        grad = std::move(grad_trial);
    }
}

LinearOperator coupled_operator(std::span<const SparseMatrix> jacobians, const ConsensusSystem& consensus,
                                double mu) {
    VectorXd diag(consensus.n_cols());
    for (std::size_t k = 0; k < jacobians.size(); ++k)
        diag.segment(consensus.offsets[k], consensus.offsets[k + 1] - consensus.offsets[k]) =
            gram_diagonal(jacobians[k]);
    if (consensus.n_rows() > 0) {
        const Eigen::SparseMatrix<double> a = consensus.a;
        diag += mu * gram_diagonal(a);
    }
    LinearOperator op(
        consensus.n_cols(),
        [jacobians, &consensus, mu](const VectorXd& in, VectorXd& out) {
            apply_coupled(jacobians, consensus, mu, in, out);
        },
        diag);

    // Block Jacobi over regions: each block J_ℓᵀJ_ℓ + μA_ℓᵀA_ℓ is factored
    // locally. A block that fails to factor falls back to its diagonal.
    using Factor = Eigen::SimplicialLDLT<SparseMatrix>;
    auto factors = std::make_shared<std::vector<std::unique_ptr<Factor>>>();
    for (std::size_t k = 0; k < jacobians.size(); ++k) {
        const Index begin = consensus.offsets[k];
        const Index width = consensus.offsets[k + 1] - begin;
        SparseMatrix block = SparseMatrix(jacobians[k].transpose()) * jacobians[k];
        if (consensus.n_rows() > 0) {
            const SparseMatrix a_k = consensus.a.middleCols(begin, width);
            block += mu * SparseMatrix(a_k.transpose()) * a_k;
        }
        auto factor = std::make_unique<Factor>(block);
        const bool ok = factor->info() == Eigen::Success && (factor->vectorD().array() > 0.0).all();
        factors->push_back(ok ? std::move(factor) : nullptr);
    }
    op.with_inverse([factors, offsets = consensus.offsets, diag](const VectorXd& in, VectorXd& out) {
        out.resize(in.size());
        for (std::size_t k = 0; k < factors->size(); ++k) {
            const Index begin = offsets[k];
            const Index width = offsets[k + 1] - begin;
            if (const auto& f = (*factors)[k])
                out.segment(begin, width) = f->solve(in.segment(begin, width));
            else
                out.segment(begin, width) = in.segment(begin, width).cwiseQuotient(diag.segment(begin, width));
        }
    });
    return op;
}

QpStep coupled_qp_solve(std::span<const SparseMatrix> jacobians, const VectorXd& gradient,
                        const ConsensusSystem& consensus, const VectorXd& x, const VectorXd& lambda, double mu,
                        const CgOptions& cg) {
    if (x.size() != consensus.n_cols() || gradient.size() != x.size() || lambda.size() != consensus.n_rows())
        throw DimensionMismatch("coupled_qp_solve: operand sizes differ");
    const VectorXd violation = consensus.a * x - consensus.b;
    const VectorXd rhs = -(gradient + consensus.a.transpose() * (lambda + mu * violation));
    QpStep step;
    step.dx = solve_coupled(jacobians, consensus, mu, rhs, cg, &step.cg_iterations);
    step.s = consensus.a * (x + step.dx) - consensus.b;
    step.lambda_qp = lambda + mu * step.s;
    return step;
}

DecoupledStep decoupled_linear_step(const RegionModel& region, const StateLayout& layout, const VectorXd& z,
                                    double rho, const CgOptions& cg) {
    const SparseMatrix jac_z = jacobian(region, layout, z);
    const VectorXd r_z = residual(region, layout, z);
    const VectorXd rhs = -(jac_z.transpose() * r_z);
    const LinearOperator op = normal_operator(jac_z, rho);
    const CgResult solved = cg_solve(op, rhs, VectorXd::Zero(z.size()), cg);

    DecoupledStep step;
    step.p = solved.x;
    step.x = z + step.p;
    step.cg_iterations = solved.iterations;
    step.jacobian = jacobian(region, layout, step.x);
    step.gradient = step.jacobian.transpose() * residual(region, layout, step.x);
    return step;
}

VectorXd coupled_linear_step(std::span<const SparseMatrix> jacobians, const VectorXd& gradient,
                             const ConsensusSystem& consensus, const VectorXd& x, double mu, const CgOptions& cg,
                             int* cg_iterations) {
    if (x.size() != consensus.n_cols() || gradient.size() != x.size())
        throw DimensionMismatch("coupled_linear_step: operand sizes differ");
    const VectorXd rhs = -mu * (consensus.a.transpose() * (consensus.a * x - consensus.b)) - gradient;
    return solve_coupled(jacobians, consensus, mu, rhs, cg, cg_iterations);
}

RunResult run_standard(const DistributedModel& model, const SolverConfig& cfg, const VectorXd& x0,
                       const TraceReference* reference) {
    const auto start = Clock::now();
    cfg.validate(model);
    if (x0.size() != model.size()) throw DimensionMismatch("initial state has the wrong size");
    const ConsensusSystem& consensus = model.consensus();
    const std::size_t n_reg = model.n_regions();

    RunResult result;
    result.z = x0;
    result.x = x0;
    result.lambda = VectorXd::Zero(consensus.n_rows());
    std::vector<SparseMatrix> jacobians(n_reg);
    VectorXd gradient(model.size());
    Termination term;

    for (int iter = 1; iter <= cfg.max_outer_iter; ++iter) {
        // (i) decoupled NLPs and sensitivities at their solutions
        const VectorXd linear = consensus.a.transpose() * result.lambda;
        parallel_for(n_reg, cfg.threads, [&](std::size_t k) {
            const auto& region = model.regions()[k];
            const auto& layout = model.layouts()[k];
            const VectorXd sigma = sigma_or_ones(cfg.sigma, k, model.block_size(k));
            const LocalNlpResult local = local_nlp_solve(region, layout, block(result.z, model, k),
                                                         block(linear, model, k), cfg, sigma, region.id);
            result.x.segment(model.offset(k), model.block_size(k)) = local.x;
            jacobians[k] = jacobian(region, layout, local.x);
            gradient.segment(model.offset(k), model.block_size(k)) =
                jacobians[k].transpose() * residual(region, layout, local.x);
        });
        result.iterations = iter;

        // (ii) termination
        term = termination_check(result.x, result.z, consensus, cfg.sigma, cfg.eps);
        result.trace.records.push_back(make_record(iter, term, model, result.x, reference));
        if (term.converged) {
            result.converged = true;
            break;
        }

        // (iii) coupled QP, (iv) full primal and dual step
        const QpStep qp = coupled_qp_solve(jacobians, gradient, consensus, result.x, result.lambda, cfg.mu, cfg.cg);
        result.z = result.x + qp.dx;
        result.lambda = qp.lambda_qp;
    }
    return finish(model, std::move(result), term, start);
}

RunResult run_gn_inexact(const DistributedModel& model, const SolverConfig& cfg, const VectorXd& x0,
                         const TraceReference* reference) {
    const auto start = Clock::now();
    cfg.validate(model);
    if (x0.size() != model.size()) throw DimensionMismatch("initial state has the wrong size");
    const ConsensusSystem& consensus = model.consensus();
    const std::size_t n_reg = model.n_regions();

    RunResult result;
    result.z = x0;
    result.x = x0;
    result.lambda = VectorXd::Zero(consensus.n_rows());
    std::vector<SparseMatrix> jacobians(n_reg);
    VectorXd gradient(model.size());
    Termination term;

    for (int iter = 1; iter <= cfg.max_outer_iter; ++iter) {
        // (i) decoupled linear systems at z, sensitivities at the new x
        parallel_for(n_reg, cfg.threads, [&](std::size_t k) {
            DecoupledStep step = decoupled_linear_step(model.regions()[k], model.layouts()[k],
                                                       block(result.z, model, k), cfg.rho, cfg.cg);
            result.x.segment(model.offset(k), model.block_size(k)) = step.x;
            gradient.segment(model.offset(k), model.block_size(k)) = step.gradient;
            jacobians[k] = std::move(step.jacobian);
        });
        result.iterations = iter;

        // (ii) termination
        term = termination_check(result.x, result.z, consensus, cfg.sigma, cfg.eps);
        result.trace.records.push_back(make_record(iter, term, model, result.x, reference));
        if (term.converged) {
            result.converged = true;
            break;
        }

        // (iii) coupled linear system, (iv) full primal step
        result.z = result.x + coupled_linear_step(jacobians, gradient, consensus, result.x, cfg.mu, cfg.cg);
    }
    return finish(model, std::move(result), term, start);
}

}  // namespace dpf
