#include "dpf/pf_model.hpp"

#include <cmath>
#include <unordered_map>

namespace dpf {

namespace {

constexpr std::size_t idx(Quantity q) { return static_cast<std::size_t>(q); }

// Full (θ, v, p, q) of every local bus: state entries where present, bus
// specifications otherwise.
struct LocalValues {
    std::vector<std::array<double, 4>> bus;
};

void check_size(const StateLayout& layout, const VectorXd& x) {
    if (x.size() != layout.size())
        throw DimensionMismatch("state has " + std::to_string(x.size()) + " entries, layout expects " +
                                std::to_string(layout.size()));
}

LocalValues unpack(const RegionModel& region, const StateLayout& layout, const VectorXd& x) {
    check_size(layout, x);
    LocalValues values;
    values.bus.resize(region.n_local());
    for (std::size_t k = 0; k < region.n_local(); ++k) {
        const auto& s = region.spec.buses[k];
        values.bus[k] = {s.theta, s.v, s.p, s.q};
    }
    const auto& entries = layout.entries();
    for (std::size_t e = 0; e < entries.size(); ++e)
        values.bus[static_cast<std::size_t>(entries[e].bus)][idx(entries[e].quantity)] = x[static_cast<Index>(e)];
    return values;
}

double known_value(const BusSpec& s, Quantity q) {
    switch (q) {
        case Quantity::Theta: return s.theta;
        case Quantity::V: return s.v;
        case Quantity::P: return s.p;
        case Quantity::Q: return s.q;
    }
    return 0.0;
}

// Computed injection P_i, Q_i of local bus i.
std::pair<double, double> computed_injection(const RegionModel& region, const LocalValues& values, Index i) {
    const auto& vi = values.bus[static_cast<std::size_t>(i)];
    double p = 0.0, q = 0.0;
    for (ComplexSparse::InnerIterator it(region.ybus.y, i); it; ++it) {
        const auto& vk = values.bus[static_cast<std::size_t>(it.col())];
        const double g = it.value().real();
        const double b = it.value().imag();
        const double angle = vi[idx(Quantity::Theta)] - vk[idx(Quantity::Theta)];
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        p += vk[idx(Quantity::V)] * (g * c + b * s);
        q += vk[idx(Quantity::V)] * (g * s - b * c);
    }
    return {vi[idx(Quantity::V)] * p, vi[idx(Quantity::V)] * q};
}

}  // namespace

std::array<Quantity, 2> known_quantities(BusType type) {
    switch (type) {
        case BusType::REF: return {Quantity::Theta, Quantity::V};
        case BusType::PQ: return {Quantity::P, Quantity::Q};
        case BusType::PV: return {Quantity::V, Quantity::P};
    }
    return {Quantity::P, Quantity::Q};
}

std::array<Quantity, 2> unknown_quantities(BusType type) {
    switch (type) {
        case BusType::REF: return {Quantity::P, Quantity::Q};
        case BusType::PQ: return {Quantity::Theta, Quantity::V};
        case BusType::PV: return {Quantity::Theta, Quantity::Q};
    }
    return {Quantity::Theta, Quantity::V};
}

StateLayout::StateLayout(const RegionModel& region, ModelVariant variant)
    : variant_(variant), n_core_(static_cast<Index>(region.n_core())) {
    positions_.assign(region.n_local(), {-1, -1, -1, -1});
    auto add = [&](Index bus, Quantity q) {
        positions_[static_cast<std::size_t>(bus)][idx(q)] = static_cast<Index>(entries_.size());
        entries_.push_back({bus, q});
    };
    for (Index i = 0; i < n_core_; ++i) {
        if (variant == ModelVariant::Reduced) {
            for (Quantity q : unknown_quantities(region.spec.buses[static_cast<std::size_t>(i)].type)) add(i, q);
        } else {
            for (Quantity q : {Quantity::Theta, Quantity::V, Quantity::P, Quantity::Q}) add(i, q);
        }
    }
    for (auto j = static_cast<Index>(region.n_core()); j < static_cast<Index>(region.n_local()); ++j) {
        add(j, Quantity::Theta);
        add(j, Quantity::V);
    }
    n_residuals_ = variant == ModelVariant::Reduced ? 2 * n_core_ : 4 * n_core_;

    const auto n_copy = static_cast<Index>(region.n_copy());
    const Index expected = variant == ModelVariant::Reduced ? 2 * n_core_ + 2 * n_copy : 4 * n_core_ + 2 * n_copy;
    if (size() != expected) throw DimensionMismatch("state layout size does not match its dimension formula");
}

VectorXd residual(const RegionModel& region, const StateLayout& layout, const VectorXd& x) {
    const LocalValues values = unpack(region, layout, x);
    const Index n_core = layout.n_core();
    VectorXd r(layout.n_residuals());
    for (Index i = 0; i < n_core; ++i) {
        const auto [p, q] = computed_injection(region, values, i);
        const auto& vi = values.bus[static_cast<std::size_t>(i)];
        r[2 * i] = vi[idx(Quantity::P)] - p;
        r[2 * i + 1] = vi[idx(Quantity::Q)] - q;
    }
    if (layout.variant() == ModelVariant::Original) {
        for (Index i = 0; i < n_core; ++i) {
            const auto& s = region.spec.buses[static_cast<std::size_t>(i)];
            const auto known = known_quantities(s.type);
            for (std::size_t j = 0; j < 2; ++j)
                r[2 * n_core + 2 * i + static_cast<Index>(j)] =
                    known_value(s, known[j]) - values.bus[static_cast<std::size_t>(i)][idx(known[j])];
        }
    }
    return r;
}

SparseMatrix jacobian(const RegionModel& region, const StateLayout& layout, const VectorXd& x) {
    const LocalValues values = unpack(region, layout, x);
    const Index n_core = layout.n_core();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(region.ybus.y.nonZeros()) * 4 + static_cast<std::size_t>(layout.size()));

    // Adds -d(computed)/d(var) to row `row` when `var` is a state entry.
    auto push = [&](Index row, Index bus, Quantity q, double d_computed) {
        const Index col = layout.position(bus, q);
        if (col >= 0) triplets.emplace_back(row, col, -d_computed);
    };

    for (Index i = 0; i < n_core; ++i) {
        const auto& vi = values.bus[static_cast<std::size_t>(i)];
        const double ti = vi[idx(Quantity::Theta)];
        const double mi = vi[idx(Quantity::V)];
        double dp_dti = 0.0, dq_dti = 0.0, dp_dvi = 0.0, dq_dvi = 0.0;
        for (ComplexSparse::InnerIterator it(region.ybus.y, i); it; ++it) {
            const Index k = it.col();
            const double g = it.value().real();
            const double b = it.value().imag();
            if (k == i) {
                dp_dvi += 2.0 * mi * g;
                dq_dvi -= 2.0 * mi * b;
                continue;
            }
            const auto& vk = values.bus[static_cast<std::size_t>(k)];
            const double mk = vk[idx(Quantity::V)];
            const double angle = ti - vk[idx(Quantity::Theta)];
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            const double gc_bs = g * c + b * s;
            const double gs_bc = g * s - b * c;
            push(2 * i, k, Quantity::Theta, mi * mk * gs_bc);
            push(2 * i, k, Quantity::V, mi * gc_bs);
            push(2 * i + 1, k, Quantity::Theta, -mi * mk * gc_bs);
            push(2 * i + 1, k, Quantity::V, mi * gs_bc);
            dp_dti -= mi * mk * gs_bc;
            dq_dti += mi * mk * gc_bs;
            dp_dvi += mk * gc_bs;
            dq_dvi += mk * gs_bc;
        }
        push(2 * i, i, Quantity::Theta, dp_dti);
        push(2 * i, i, Quantity::V, dp_dvi);
        push(2 * i + 1, i, Quantity::Theta, dq_dti);
        push(2 * i + 1, i, Quantity::V, dq_dvi);
        // Scheduled injections enter with +1.
        push(2 * i, i, Quantity::P, -1.0);
        push(2 * i + 1, i, Quantity::Q, -1.0);
    }
    if (layout.variant() == ModelVariant::Original) {
        for (Index i = 0; i < n_core; ++i) {
            const auto known = known_quantities(region.spec.buses[static_cast<std::size_t>(i)].type);
            for (std::size_t j = 0; j < 2; ++j)
                push(2 * n_core + 2 * i + static_cast<Index>(j), i, known[j], 1.0);
        }
    }
    SparseMatrix jac(layout.n_residuals(), layout.size());
    jac.setFromTriplets(triplets.begin(), triplets.end());
    jac.makeCompressed();
    return jac;
}

ObjectiveGradient objective_grad(const RegionModel& region, const StateLayout& layout, const VectorXd& x) {
    const VectorXd r = residual(region, layout, x);
    const SparseMatrix jac = jacobian(region, layout, x);
    return {0.5 * r.squaredNorm(), jac.transpose() * r};
}

VectorXd gn_hessian_apply(const SparseMatrix& jac, const VectorXd& w) {
    if (w.size() != jac.cols()) throw DimensionMismatch("direction length does not match the Jacobian");
    const VectorXd jw = jac * w;
    return jac.transpose() * jw;
}

VectorXd gn_hessian_apply(const RegionModel& region, const StateLayout& layout, const VectorXd& x,
                          const VectorXd& w) {
    return gn_hessian_apply(jacobian(region, layout, x), w);
}

VectorXd initial_state(const RegionModel& region, const StateLayout& layout) {
    VectorXd x(layout.size());
    const auto& entries = layout.entries();
    for (std::size_t e = 0; e < entries.size(); ++e)
        x[static_cast<Index>(e)] =
            known_value(region.spec.buses[static_cast<std::size_t>(entries[e].bus)], entries[e].quantity);
    return x;
}

DistributedModel::DistributedModel(const RawCase& c, const PartitionSpec& spec, ModelVariant variant)
    : variant_(variant), case_order_(all_bus_ids(c)), decomposition_(decompose(c, spec)) {
    layouts_.reserve(decomposition_.regions.size());
    for (const auto& region : decomposition_.regions) layouts_.emplace_back(region, variant);
    consensus_ = build_consensus(decomposition_, layouts_);
}

VectorXd DistributedModel::initial_state() const {
    VectorXd x(size());
    for (std::size_t k = 0; k < n_regions(); ++k)
        x.segment(offset(k), block_size(k)) = dpf::initial_state(regions()[k], layouts_[k]);
    return x;
}

double DistributedModel::objective(const VectorXd& x) const {
    double f = 0.0;
    for (std::size_t k = 0; k < n_regions(); ++k)
        f += 0.5 * residual(regions()[k], layouts_[k], x.segment(offset(k), block_size(k))).squaredNorm();
    return f;
}

PfSolution DistributedModel::extract_solution(const VectorXd& x) const {
    std::unordered_map<int, BusSolution> by_id;
    for (std::size_t k = 0; k < n_regions(); ++k) {
        const auto& region = regions()[k];
        const LocalValues values = unpack(region, layouts_[k], x.segment(offset(k), block_size(k)));
        for (std::size_t i = 0; i < region.n_core(); ++i) {
            const auto& v = values.bus[i];
            by_id[region.core[i]] = {region.core[i], v[idx(Quantity::Theta)], v[idx(Quantity::V)],
                                     v[idx(Quantity::P)], v[idx(Quantity::Q)]};
        }
    }
    PfSolution s;
    s.buses.reserve(case_order_.size());
    for (int id : case_order_) s.buses.push_back(by_id.at(id));
    return s;
}

VectorXd DistributedModel::embed(const PfSolution& reference) const {
    VectorXd x(size());
    for (std::size_t k = 0; k < n_regions(); ++k) {
        const auto& region = regions()[k];
        const auto& entries = layouts_[k].entries();
        for (std::size_t e = 0; e < entries.size(); ++e) {
            const int id = region.spec.buses[static_cast<std::size_t>(entries[e].bus)].id;
            const BusSolution* bus = reference.find(id);
            if (!bus) throw DimensionMismatch("reference solution lacks bus " + std::to_string(id));
            const double values[4] = {bus->theta, bus->v, bus->p, bus->q};
            x[offset(k) + static_cast<Index>(e)] = values[idx(entries[e].quantity)];
        }
    }
    return x;
}

}  // namespace dpf
