#include "support.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

namespace dpf::test {

using nlohmann::json;

std::filesystem::path data_dir() { return DPF_TEST_DATA_DIR; }

std::filesystem::path case_path(const std::string& name) { return data_dir() / "cases" / (name + ".m"); }

std::filesystem::path partition_path(const std::string& name) {
    return data_dir() / "partitions" / (name + ".json");
}

Reference load_reference(const std::string& case_name) {
    const json doc = json::parse(read_text_file(data_dir() / "reference" / (case_name + ".json")));
    Reference ref;
    ref.buses = doc["counts"]["buses"].get<std::size_t>();
    ref.gens = doc["counts"]["gens"].get<std::size_t>();
    ref.branches = doc["counts"]["branches"].get<std::size_t>();
    for (const auto& b : doc["solution"])
        ref.solution.buses.push_back({b["id"].get<int>(), b["theta"].get<double>(), b["v"].get<double>(),
                                      b["p"].get<double>(), b["q"].get<double>()});
    ref.solution.converged = true;
    if (doc.contains("ybus"))
        for (const auto& e : doc["ybus"])
            ref.ybus.emplace_back(e[0].get<int>(), e[1].get<int>(), e[2].get<double>(), e[3].get<double>());
    return ref;
}

Fixture load_fixture(const std::string& name, const std::string& partition) {
    Fixture f;
    f.c = load_case(case_path(name));
    f.spec = load_partition(partition_path(partition), f.c);
    return f;
}

Fixture synthetic_fixture(int n_bus, int n_reg, int n_conn) {
    if (n_reg < 1 || n_bus < n_reg || n_conn < n_reg - 1 || 2 * n_conn > n_bus || (n_reg == 1 && n_conn > 0))
        throw std::invalid_argument("synthetic_fixture: infeasible shape");
    Fixture f;
    f.c.base_mva = 100.0;
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n_reg));
    for (int id = 1; id <= n_bus; ++id) {
        const int region = static_cast<int>(static_cast<long long>(id - 1) * n_reg / n_bus);
        members[static_cast<std::size_t>(region)].push_back(id);
        f.spec.region_of[id] = region + 1;
        BusRecord bus;
        bus.id = id;
        bus.bus_type = id == 1 ? BusType::REF : BusType::PQ;
        f.c.buses.push_back(bus);
    }
    f.c.gens.push_back({1, 0.0, 0.0, 1.0, true});

    auto line = [](int from, int to) {
        BranchRecord br;
        br.from = from;
        br.to = to;
        br.r = 0.01;
        br.x = 0.1;
        return br;
    };
    for (const auto& m : members)
        for (std::size_t k = 1; k < m.size(); ++k) f.c.branches.push_back(line(m[k - 1], m[k]));

    // Endpoints are drawn from the back of each region so none repeats.
    std::vector<std::size_t> used(members.size(), 0);
    auto take = [&](int region) {
        auto& m = members[static_cast<std::size_t>(region)];
        auto& u = used[static_cast<std::size_t>(region)];
        if (u >= m.size()) throw std::invalid_argument("synthetic_fixture: region too small");
        return m[m.size() - 1 - u++];
    };
    int added = 0;
    for (int r = 0; r + 1 < n_reg; ++r, ++added) f.c.branches.push_back(line(take(r), take(r + 1)));
    for (int k = 0; added < n_conn; ++k, ++added) {
        const int a = k % n_reg;
        const int b = (a + 1 + (k / n_reg) % (n_reg - 1)) % n_reg;
        f.c.branches.push_back(line(take(a), take(b)));
    }
    return f;
}

VectorXd random_state(const StateLayout& layout, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-0.5, 0.5), mag(0.9, 1.1), inj(-2.0, 2.0);
    VectorXd x(layout.size());
    for (Index k = 0; k < layout.size(); ++k) {
        switch (layout.entries()[static_cast<std::size_t>(k)].quantity) {
            case Quantity::Theta: x[k] = angle(rng); break;
            case Quantity::V: x[k] = mag(rng); break;
            default: x[k] = inj(rng); break;
        }
    }
    return x;
}

double jacobian_fd_error(const RegionModel& region, const StateLayout& layout, const VectorXd& x, double h) {
    const Eigen::MatrixXd analytic = Eigen::MatrixXd(jacobian(region, layout, x));
    double worst = 0.0;
    for (Index k = 0; k < x.size(); ++k) {
        VectorXd up = x, down = x;
        up[k] += h;
        down[k] -= h;
        const VectorXd fd = (residual(region, layout, up) - residual(region, layout, down)) / (2.0 * h);
        for (Index i = 0; i < fd.size(); ++i)
            worst = std::max(worst, std::abs(fd[i] - analytic(i, k)) / std::max(1.0, std::abs(analytic(i, k))));
    }
    return worst;
}

double hessian_apply_error(const RegionModel& region, const StateLayout& layout, const VectorXd& x,
                           const VectorXd& w) {
    const Eigen::MatrixXd j = Eigen::MatrixXd(jacobian(region, layout, x));
    const VectorXd dense = (j.transpose() * j) * w;
    const VectorXd applied = gn_hessian_apply(region, layout, x, w);
    return (applied - dense).lpNorm<Eigen::Infinity>() / std::max(1.0, dense.lpNorm<Eigen::Infinity>());
}

FuzzStats fuzz_matpower(const std::string& seed_text, int samples, unsigned long long seed) {
    static const std::vector<std::string> tokens = {"[", "]", ";", "=", "%", "\n", "mpc.bus", "mpc.branch",
                                                    "mpc.gen", "mpc.baseMVA", "nan", "inf", "-", "1e999",
                                                    "0x1F", "'", "...", "\t", "99999999999999999999", "."};
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return n == 0 ? std::size_t{0} : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
    FuzzStats stats;
    for (int k = 0; k < samples; ++k) {
        std::string text = seed_text;
        const int edits = 1 + static_cast<int>(pick(8));
        for (int e = 0; e < edits; ++e) {
            switch (pick(6)) {
                case 0:  // flip a byte
                    if (!text.empty()) text[pick(text.size())] = static_cast<char>(pick(256));
                    break;
                case 1:  // insert random bytes
                    text.insert(pick(text.size() + 1), std::string(1 + pick(4), static_cast<char>(pick(256))));
                    break;
                case 2:  // delete a span
                    if (!text.empty()) {
                        const std::size_t at = pick(text.size());
                        text.erase(at, 1 + pick(64));
                    }
                    break;
                case 3:  // truncate
                    text.resize(pick(text.size() + 1));
                    break;
                case 4:  // insert a token
                    text.insert(pick(text.size() + 1), tokens[pick(tokens.size())]);
                    break;
                default:  // duplicate a span
                    if (!text.empty()) {
                        const std::size_t at = pick(text.size());
                        text.insert(pick(text.size() + 1), text.substr(at, 1 + pick(80)));
                    }
                    break;
            }
        }
        try {
            (void)parse_matpower(text);
            ++stats.accepted;
        } catch (const Error&) {
            ++stats.rejected;
        } catch (const std::exception& ex) {
            if (stats.foreign++ == 0) stats.first_foreign = ex.what();
        } catch (...) {
            if (stats.foreign++ == 0) stats.first_foreign = "non-standard exception";
        }
    }
    return stats;
}

}  // namespace dpf::test
