#include "dpf/nr_central.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/SparseLU>
#include <json.hpp>

#include "dpf/grid_model.hpp"

namespace dpf {

using nlohmann::json;

const BusSolution* PfSolution::find(int id) const {
    for (const auto& b : buses)
        if (b.id == id) return &b;
    return nullptr;
}

std::string solution_to_json(const PfSolution& s, const std::string& algorithm) {
    json doc;
    doc["algorithm"] = algorithm;
    doc["converged"] = s.converged;
    doc["iterations"] = s.iterations;
    doc["mismatch"] = s.mismatch;
    doc["wall_time_s"] = s.wall_time_s;
    doc["buses"] = json::array();
    for (const auto& b : s.buses)
        doc["buses"].push_back({{"id", b.id}, {"theta", b.theta}, {"v", b.v}, {"p", b.p}, {"q", b.q}});
    return doc.dump(1);
}

PfSolution parse_solution_json(const std::string& text) {
    PfSolution s;
    try {
        const json doc = json::parse(text);
        s.converged = doc.value("converged", true);
        s.iterations = doc.value("iterations", 0);
        s.mismatch = doc.value("mismatch", 0.0);
        s.wall_time_s = doc.value("wall_time_s", 0.0);
        for (const auto& b : doc.at("buses"))
            s.buses.push_back({b.at("id").get<int>(), b.at("theta").get<double>(), b.at("v").get<double>(),
                               b.at("p").get<double>(), b.at("q").get<double>()});
    } catch (const json::exception& e) {
        throw SyntaxError(std::string("malformed solution JSON: ") + e.what());
    }
    return s;
}

SolutionDeviation compare_solutions(const PfSolution& a, const PfSolution& b) {
    SolutionDeviation d;
    for (const auto& x : a.buses) {
        const BusSolution* y = b.find(x.id);
        if (!y) throw DimensionMismatch("bus " + std::to_string(x.id) + " missing from the compared solution");
        d.theta = std::max(d.theta, std::abs(x.theta - y->theta));
        d.v = std::max(d.v, std::abs(x.v - y->v));
        d.p = std::max(d.p, std::abs(x.p - y->p));
        d.q = std::max(d.q, std::abs(x.q - y->q));
    }
    return d;
}

PfSolution nr_solve(const RawCase& c, const NrOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const auto ids = all_bus_ids(c);
    const auto n = static_cast<Eigen::Index>(ids.size());
    const ComplexSparse y = build_ybus(c).y;
    const BusInjectionSpec spec = injections(c, ids);

    std::vector<Eigen::Index> pvpq, pq;
    Eigen::VectorXd theta(n), vm(n);
    Eigen::VectorXcd scheduled(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = spec.buses[static_cast<std::size_t>(i)];
        theta[i] = s.theta;
        vm[i] = s.v;
        scheduled[i] = Complex(s.p, s.q);
        if (s.type != BusType::REF) pvpq.push_back(i);
        if (s.type == BusType::PQ) pq.push_back(i);
        if (options.flat_start) {
            if (s.type != BusType::REF) theta[i] = 0.0;
            if (s.type == BusType::PQ) vm[i] = 1.0;
        }
    }
    const auto n_pvpq = static_cast<Eigen::Index>(pvpq.size());
    const auto n_pq = static_cast<Eigen::Index>(pq.size());
    const Eigen::Index dim = n_pvpq + n_pq;
    // Position of each bus's θ and v in the unknown vector, -1 when known.
    std::vector<Eigen::Index> theta_pos(static_cast<std::size_t>(n), -1), v_pos(static_cast<std::size_t>(n), -1);
    for (Eigen::Index k = 0; k < n_pvpq; ++k) theta_pos[static_cast<std::size_t>(pvpq[static_cast<std::size_t>(k)])] = k;
    for (Eigen::Index k = 0; k < n_pq; ++k) v_pos[static_cast<std::size_t>(pq[static_cast<std::size_t>(k)])] = n_pvpq + k;

    auto voltage = [&] {
        Eigen::VectorXcd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], theta[i]);
        return v;
    };
    auto mismatch = [&](const Eigen::VectorXcd& v) {
        const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate()) - scheduled;
        Eigen::VectorXd f(dim);
        for (Eigen::Index k = 0; k < n_pvpq; ++k) f[k] = s[pvpq[static_cast<std::size_t>(k)]].real();
        for (Eigen::Index k = 0; k < n_pq; ++k) f[n_pvpq + k] = s[pq[static_cast<std::size_t>(k)]].imag();
        return f;
    };

    PfSolution solution;
    Eigen::VectorXcd v = voltage();
    Eigen::VectorXd f = mismatch(v);
    double norm = dim ? f.lpNorm<Eigen::Infinity>() : 0.0;
    solution.mismatch_history.push_back(norm);
    int iter = 0;
    while (norm > options.tol) {
        if (iter >= options.max_iter)
            throw NoConvergence("Newton-Raphson did not converge in " + std::to_string(options.max_iter) +
                                " iterations (mismatch " + std::to_string(norm) + ")");
        // dS/dθ = j·diag(V)·conj(diag(I) − Y·diag(V)),
        // dS/dv = diag(V)·conj(Y·diag(V/|V|)) + conj(diag(I))·diag(V/|V|).
        const Eigen::VectorXcd current = y * v;
        const Eigen::VectorXcd unit = v.cwiseQuotient(vm.cast<Complex>());
        std::vector<Eigen::Triplet<double>> entries;
        auto add = [&](Eigen::Index i, Eigen::Index k, Complex d_theta, Complex d_v) {
            const Eigen::Index p_row = theta_pos[i], q_row = v_pos[i];
            const Eigen::Index t_col = theta_pos[k], v_col = v_pos[k];
            if (p_row >= 0) {
                if (t_col >= 0) entries.emplace_back(p_row, t_col, d_theta.real());
                if (v_col >= 0) entries.emplace_back(p_row, v_col, d_v.real());
            }
            if (q_row >= 0) {
                if (t_col >= 0) entries.emplace_back(q_row, t_col, d_theta.imag());
                if (v_col >= 0) entries.emplace_back(q_row, v_col, d_v.imag());
            }
        };
        const Complex j(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (ComplexSparse::InnerIterator it(y, i); it; ++it) {
                const Eigen::Index k = it.col();
                add(i, k, -j * v[i] * std::conj(it.value() * v[k]), v[i] * std::conj(it.value() * unit[k]));
            }
            add(i, i, j * v[i] * std::conj(current[i]), std::conj(current[i]) * unit[i]);
        }
        Eigen::SparseMatrix<double> jac(dim, dim);
        jac.setFromTriplets(entries.begin(), entries.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(jac);
        if (lu.info() != Eigen::Success) throw SingularJacobian("Newton-Raphson Jacobian is singular");
        const Eigen::VectorXd dx = lu.solve(-f);
        for (Eigen::Index k = 0; k < n_pvpq; ++k) theta[pvpq[static_cast<std::size_t>(k)]] += dx[k];
        for (Eigen::Index k = 0; k < n_pq; ++k) vm[pq[static_cast<std::size_t>(k)]] += dx[n_pvpq + k];
        ++iter;

        v = voltage();
        f = mismatch(v);
        norm = f.lpNorm<Eigen::Infinity>();
        solution.mismatch_history.push_back(norm);
        if (!std::isfinite(norm) || norm > 1e10) throw NoConvergence("Newton-Raphson diverged");
    }

    const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate());
    solution.buses.reserve(ids.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        // Known injections keep their scheduled values exactly.
        const auto type = spec.buses[static_cast<std::size_t>(i)].type;
        const double p = type == BusType::REF ? s[i].real() : scheduled[i].real();
        const double q = type == BusType::PQ ? scheduled[i].imag() : s[i].imag();
        solution.buses.push_back({ids[static_cast<std::size_t>(i)], theta[i], vm[i], p, q});
    }
    solution.iterations = iter;
    solution.mismatch = norm;
    solution.converged = true;
    solution.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return solution;
}

}  // namespace dpf
