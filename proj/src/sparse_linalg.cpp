#include "dpf/sparse_linalg.hpp"

#include <cmath>

namespace dpf {

LinearOperator LinearOperator::shifted(double delta) const {
    std::optional<Eigen::VectorXd> diag;
    if (diagonal_) diag = diagonal_->array() + delta;
    return LinearOperator(
        n_,
        [inner = apply_, delta](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
            inner(in, out);
            out += delta * in;
        },
        std::move(diag));
}

Eigen::VectorXd gram_diagonal(const Eigen::SparseMatrix<double>& m) {
    Eigen::VectorXd d(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) d[j] = m.col(j).squaredNorm();
    return d;
}

LinearOperator normal_operator(const Eigen::SparseMatrix<double>& jac, double shift) {
    Eigen::VectorXd diag = gram_diagonal(jac).array() + shift;
    return LinearOperator(
        jac.cols(),
        [&jac, shift](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
            const Eigen::VectorXd jw = jac * in;
            out.noalias() = jac.transpose() * jw;
            out += shift * in;
        },
        std::move(diag));
}

CgResult cg_solve(const LinearOperator& op, const Eigen::VectorXd& rhs, const Eigen::VectorXd& x0,
                  const CgOptions& options) {
    const Eigen::Index n = op.size();
    if (rhs.size() != n || x0.size() != n) throw DimensionMismatch("cg_solve: operand sizes differ");
    if (!(options.rel_tol > 0.0)) throw Error("cg_solve: rel_tol must be positive");
    const bool use_inverse = options.precondition && op.approximate_inverse();
    const bool use_jacobi = options.precondition && !use_inverse;
    if (use_jacobi && !op.diagonal()) throw Error("cg_solve: preconditioning needs an inverse or the diagonal");

    const int max_iter = options.max_iter > 0 ? options.max_iter : static_cast<int>(2 * n);
    const double target = options.rel_tol * rhs.norm();

    CgResult result;
    result.x = x0;
    Eigen::VectorXd r(n), mp(n);
    op.apply(result.x, mp);
    r = rhs - mp;
    result.residual_norm = r.norm();
    if (result.residual_norm <= target) {
        result.converged = true;
        return result;
    }

    Eigen::VectorXd inv_diag;
    if (use_jacobi) inv_diag = op.diagonal()->cwiseInverse();
    auto precondition = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        if (use_inverse) {
            Eigen::VectorXd out(n);
            op.approximate_inverse()(v, out);
            return out;
        }
        if (use_jacobi) return inv_diag.cwiseProduct(v);
        return v;
    };

    Eigen::VectorXd y = precondition(r);
    Eigen::VectorXd p = y;
    double ry = r.dot(y);
    for (int k = 0; k < max_iter; ++k) {
        op.apply(p, mp);
        const double curvature = p.dot(mp);
        if (!(curvature > 0.0))
            throw BreakdownError("cg_solve: non-positive curvature pᵀMp = " + std::to_string(curvature));
        const double alpha = ry / curvature;
        result.x += alpha * p;
        r -= alpha * mp;
        result.iterations = k + 1;
        result.residual_norm = r.norm();
        if (result.residual_norm <= target) {
            result.converged = true;
            return result;
        }
        y = precondition(r);
        const double ry_next = r.dot(y);
        p = y + (ry_next / ry) * p;
        ry = ry_next;
    }
    return result;
}

}  // namespace dpf
