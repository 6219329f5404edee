#include <doctest.h>

#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "dpf/errors.hpp"
#include "dpf/sparse_linalg.hpp"

using namespace dpf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LinearOperator dense_operator(const MatrixXd& m) {
    return LinearOperator(
        m.rows(), [m](const VectorXd& in, VectorXd& out) { out = m * in; }, VectorXd(m.diagonal()));
}

// Random orthogonal basis with eigenvalues drawn uniformly from [1, kappa],
// both ends included.
MatrixXd random_spd(Eigen::Index n, double kappa, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) g(i, k) = normal(rng);
    const Eigen::HouseholderQR<MatrixXd> qr(g);
    const MatrixXd q = qr.householderQ();
    std::uniform_real_distribution<double> spread(1.0, kappa);
    VectorXd eig(n);
    for (Eigen::Index i = 0; i < n; ++i) eig[i] = spread(rng);
    eig[0] = 1.0;
    eig[n - 1] = kappa;
    return q * eig.asDiagonal() * q.transpose();
}

VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    VectorXd v(n);
    for (auto& e : v) e = normal(rng);
    return v;
}

}  // namespace

TEST_SUITE("sparse_linalg") {

TEST_CASE("identity solves in one iteration") {
    const LinearOperator id(5, [](const VectorXd& in, VectorXd& out) { out = in; });
    const VectorXd b = random_vector(5, 1);
    const CgResult r = cg_solve(id, b, VectorXd::Zero(5));
    CHECK(r.converged);
    CHECK(r.iterations == 1);
    CHECK((r.x - b).norm() == 0.0);
}

TEST_CASE("random SPD system matches a dense solve") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const MatrixXd m = random_spd(20, 1e3, seed);
        const VectorXd b = random_vector(20, 100 + seed);
        const VectorXd direct = m.ldlt().solve(b);
        for (bool jacobi : {false, true}) {
            const CgResult r = cg_solve(dense_operator(m), b, VectorXd::Zero(20), {.precondition = jacobi});
            CHECK(r.converged);
            CHECK((r.x - direct).lpNorm<Eigen::Infinity>() <= 1e-8);
        }
    }
}

TEST_CASE("an attached exact inverse converges in one iteration") {
    const MatrixXd m = random_spd(25, 1e5, 4);
    const MatrixXd inv = m.inverse();
    LinearOperator op = dense_operator(m);
    op.with_inverse([inv](const VectorXd& in, VectorXd& out) { out = inv * in; });
    const VectorXd b = random_vector(25, 5);
    const CgResult r = cg_solve(op, b, VectorXd::Zero(25), {.rel_tol = 1e-9, .precondition = true});
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK((m * r.x - b).norm() <= 1e-8 * b.norm());
    // Without the flag the inverse is ignored.
    CHECK(cg_solve(op, b, VectorXd::Zero(25), {.rel_tol = 1e-9, .max_iter = 1000}).iterations > 2);
}

TEST_CASE("zero right-hand side returns zero without iterating") {
    const MatrixXd m = random_spd(8, 10, 3);
    const CgResult r = cg_solve(dense_operator(m), VectorXd::Zero(8), VectorXd::Zero(8));
    CHECK(r.iterations == 0);
    CHECK(r.x.isZero(0.0));
    CHECK(r.converged);
}

TEST_CASE("well-conditioned systems converge within n + 5 iterations") {
    for (Eigen::Index n : {10, 40, 80}) {
        const MatrixXd m = random_spd(n, 1e4, static_cast<std::uint64_t>(n));
        const VectorXd b = random_vector(n, 7);
        const CgResult r = cg_solve(dense_operator(m), b, VectorXd::Zero(n), {.max_iter = static_cast<int>(n) + 5});
        CAPTURE(n);
        CHECK(r.converged);
        CHECK(r.iterations <= n + 5);
        CHECK((m * r.x - b).norm() <= 1e-9 * b.norm());
    }
}

TEST_CASE("solution scales with the right-hand side") {
    const MatrixXd m = random_spd(30, 100, 9);
    const VectorXd b = random_vector(30, 10);
    const VectorXd x1 = cg_solve(dense_operator(m), b, VectorXd::Zero(30)).x;
    const VectorXd x2 = cg_solve(dense_operator(m), 3.5 * b, VectorXd::Zero(30)).x;
    CHECK((x2 - 3.5 * x1).norm() <= 1e-10 * x2.norm());
}

TEST_CASE("iteration cap is reported, not thrown") {
    const MatrixXd m = random_spd(30, 1e6, 12);
    const CgResult r = cg_solve(dense_operator(m), random_vector(30, 13), VectorXd::Zero(30), {.max_iter = 3});
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
}

TEST_CASE("indefinite operator raises BreakdownError") {
    MatrixXd m = MatrixXd::Identity(4, 4);
    m(2, 2) = -1.0;
    VectorXd b = VectorXd::Zero(4);
    b[2] = 1.0;
    CHECK_THROWS_AS(cg_solve(dense_operator(m), b, VectorXd::Zero(4)), BreakdownError);
}

TEST_CASE("normal operator is linear and symmetric") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < 60; ++k)
        t.emplace_back(static_cast<int>(rng() % 25), static_cast<int>(rng() % 15), u(rng));
    Eigen::SparseMatrix<double> j(25, 15);
    j.setFromTriplets(t.begin(), t.end());
    const LinearOperator op = normal_operator(j, 0.5);
    const MatrixXd dense = MatrixXd(j).transpose() * MatrixXd(j) + 0.5 * MatrixXd::Identity(15, 15);
    CHECK((*op.diagonal() - dense.diagonal()).norm() <= 1e-14);
    for (int probe = 0; probe < 20; ++probe) {
        const VectorXd a = random_vector(15, 200 + probe), w = random_vector(15, 300 + probe);
        const double alpha = u(rng), beta = u(rng);
        const VectorXd lhs = op * (alpha * a + beta * w);
        const VectorXd rhs = alpha * (op * a) + beta * (op * w);
        CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()));
        CHECK(std::abs(a.dot(op * w) - w.dot(op * a)) <= 1e-10);
        CHECK((op * w - dense * w).norm() <= 1e-12 * std::max(1.0, (dense * w).norm()));
    }
}

TEST_CASE("shifted operator adds to the diagonal") {
    const MatrixXd m = random_spd(6, 10, 21);
    const LinearOperator s = dense_operator(m).shifted(2.0);
    const VectorXd w = random_vector(6, 22);
    CHECK((s * w - (m * w + 2.0 * w)).norm() <= 1e-13);
    CHECK((*s.diagonal() - (m.diagonal().array() + 2.0).matrix()).norm() == 0.0);
}

TEST_CASE("operand size checks") {
    const MatrixXd m = MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(cg_solve(dense_operator(m), VectorXd::Zero(4), VectorXd::Zero(3)), DimensionMismatch);
    CHECK_THROWS_AS(cg_solve(dense_operator(m), VectorXd::Ones(3), VectorXd::Zero(3), {.rel_tol = 0.0}), Error);
}

}
