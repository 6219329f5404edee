#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "dpf/errors.hpp"

namespace dpf {

/// Symmetric operator known only through its action w ↦ M·w.
class LinearOperator {
  public:
    using Apply = std::function<void(const Eigen::VectorXd& in, Eigen::VectorXd& out)>;

    LinearOperator(Eigen::Index n, Apply apply, std::optional<Eigen::VectorXd> diagonal = std::nullopt)
        : n_(n), apply_(std::move(apply)), diagonal_(std::move(diagonal)) {}

    /// Attaches an SPD approximation of M⁻¹; CG prefers it over Jacobi.
    LinearOperator& with_inverse(Apply approximate_inverse) {
        inverse_ = std::move(approximate_inverse);
        return *this;
    }

    Eigen::Index size() const { return n_; }
    void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out) const { apply_(in, out); }
    Eigen::VectorXd operator*(const Eigen::VectorXd& w) const {
        Eigen::VectorXd out(n_);
        apply_(w, out);
        return out;
    }
    /// Diagonal of M when cheaply known; enables the Jacobi preconditioner.
    const std::optional<Eigen::VectorXd>& diagonal() const { return diagonal_; }
    const Apply& approximate_inverse() const { return inverse_; }

    /// M + δI. Keeps the diagonal, drops an attached inverse.
    LinearOperator shifted(double delta) const;

  private:
    Eigen::Index n_;
    Apply apply_;
    std::optional<Eigen::VectorXd> diagonal_;
    Apply inverse_;
};

/// JᵀJ + shift·I as two sparse products per application.
LinearOperator normal_operator(const Eigen::SparseMatrix<double>& jac, double shift);

/// Squared column norms of `m`, i.e. diag(mᵀm).
Eigen::VectorXd gram_diagonal(const Eigen::SparseMatrix<double>& m);

struct CgOptions {
    double rel_tol = 1e-10;
    int max_iter = 0;     ///< 0 means 2n
    /// Use the operator's attached inverse, or else Jacobi from its diagonal.
    bool precondition = false;
};

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual_norm = 0.0;  ///< ‖M·x − rhs‖₂ (recurrence value)
    bool converged = false;
};

/// Conjugate gradients for symmetric positive definite M. Stops once
/// ‖M·x − rhs‖ ≤ rel_tol·‖rhs‖ or after max_iter iterations (reported through
/// `converged`, not thrown). Throws BreakdownError on pᵀMp ≤ 0.
CgResult cg_solve(const LinearOperator& op, const Eigen::VectorXd& rhs, const Eigen::VectorXd& x0,
                  const CgOptions& options = {});

}  // namespace dpf
