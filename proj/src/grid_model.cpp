#include "dpf/grid_model.hpp"

#include <unordered_map>

namespace dpf {

AdmittanceMatrix build_ybus(const RawCase& c, std::span<const int> bus_subset,
                            std::span<const BranchRecord> branch_subset) {
    const auto n = static_cast<Eigen::Index>(bus_subset.size());
    std::unordered_map<int, Eigen::Index> local;
    local.reserve(bus_subset.size());
    for (Eigen::Index k = 0; k < n; ++k) local.emplace(bus_subset[static_cast<std::size_t>(k)], k);

    BusIndex index(c);
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(bus_subset.size() + 4 * branch_subset.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& bus = c.buses[index.at(bus_subset[static_cast<std::size_t>(k)])];
        // Keep an explicit diagonal even when it is zero.
        triplets.emplace_back(k, k, Complex(bus.gs, bus.bs));
    }
    for (const auto& br : branch_subset) {
        if (!br.status) continue;
        auto f = local.find(br.from);
        auto t = local.find(br.to);
        if (f == local.end() || t == local.end())
            throw EndpointOutsideSubset("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                                        " has an endpoint outside the bus subset");
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ytt = ys + Complex(0.0, br.b_charge / 2.0);
        const double ratio = br.tap == 0.0 ? 1.0 : br.tap;
        const Complex tap = std::polar(ratio, br.shift);
        triplets.emplace_back(f->second, f->second, ytt / (ratio * ratio));
        triplets.emplace_back(t->second, t->second, ytt);
        triplets.emplace_back(f->second, t->second, -ys / std::conj(tap));
        triplets.emplace_back(t->second, f->second, -ys / tap);
    }
    AdmittanceMatrix y;
    y.bus_ids.assign(bus_subset.begin(), bus_subset.end());
    y.y.resize(n, n);
    y.y.setFromTriplets(triplets.begin(), triplets.end());
    y.y.makeCompressed();
    return y;
}

std::vector<int> all_bus_ids(const RawCase& c) {
    std::vector<int> ids;
    ids.reserve(c.buses.size());
    for (const auto& b : c.buses) ids.push_back(b.id);
    return ids;
}

AdmittanceMatrix build_ybus(const RawCase& c) {
    const auto ids = all_bus_ids(c);
    return build_ybus(c, ids, c.branches);
}

BusInjectionSpec injections(const RawCase& c, std::span<const int> bus_subset) {
    struct GenSum {
        double p = 0.0, q = 0.0, v = 0.0;
        bool any = false;
    };
    std::unordered_map<int, GenSum> gen;
    for (const auto& g : c.gens) {
        if (!g.status) continue;
        auto& s = gen[g.bus];
        s.p += g.p_gen;
        s.q += g.q_gen;
        if (!s.any) s.v = g.v_set;
        s.any = true;
    }
    BusIndex index(c);
    BusInjectionSpec spec;
    spec.buses.reserve(bus_subset.size());
    for (int id : bus_subset) {
        const auto& bus = c.buses[index.at(id)];
        BusSpec s;
        s.id = id;
        s.type = bus.bus_type;
        s.theta = bus.theta_init;
        s.v = bus.v_init;
        s.p = -bus.p_load;
        s.q = -bus.q_load;
        if (auto it = gen.find(id); it != gen.end()) {
            s.p += it->second.p;
            s.q += it->second.q;
            if (bus.bus_type != BusType::PQ) s.v = it->second.v;
        }
        spec.buses.push_back(s);
    }
    return spec;
}

}  // namespace dpf
