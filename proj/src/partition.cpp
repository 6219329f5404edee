#include "dpf/partition.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dpf/pf_model.hpp"

namespace dpf {

std::string_view to_string(ModelVariant variant) {
    return variant == ModelVariant::Reduced ? "reduced" : "original";
}

std::string_view to_string(Quantity quantity) {
    switch (quantity) {
        case Quantity::Theta: return "theta";
        case Quantity::V: return "v";
        case Quantity::P: return "p";
        case Quantity::Q: return "q";
    }
    return "?";
}

ModelVariant parse_model_variant(std::string_view text) {
    if (text == "reduced") return ModelVariant::Reduced;
    if (text == "original") return ModelVariant::Original;
    throw Error("unknown model '" + std::string(text) + "' (expected original or reduced)");
}

Eigen::Index RegionModel::local_index(int bus) const {
    auto it = local.find(bus);
    return it == local.end() ? -1 : it->second;
}

Decomposition decompose(const RawCase& c, const PartitionSpec& spec) {
    if (auto diagnostics = validate_partition(spec, c); !diagnostics.empty())
        throw ValidationError(std::move(diagnostics));

    const int n_reg = spec.region_count();
    Decomposition d;
    d.n_bus = c.buses.size();
    d.regions.resize(static_cast<std::size_t>(n_reg));
    std::vector<std::set<int>> copies(static_cast<std::size_t>(n_reg));

    for (int r = 1; r <= n_reg; ++r) d.regions[static_cast<std::size_t>(r - 1)].id = r;
    for (const auto& bus : c.buses)
        d.regions[static_cast<std::size_t>(spec.region_of.at(bus.id) - 1)].core.push_back(bus.id);

    for (const auto& br : c.branches) {
        if (!br.status) continue;
        const int rf = spec.region_of.at(br.from);
        const int rt = spec.region_of.at(br.to);
        auto& from_region = d.regions[static_cast<std::size_t>(rf - 1)];
        from_region.branches.push_back(br);
        if (rf == rt) continue;
        ++d.n_conn;
        d.regions[static_cast<std::size_t>(rt - 1)].branches.push_back(br);
        copies[static_cast<std::size_t>(rf - 1)].insert(br.to);
        copies[static_cast<std::size_t>(rt - 1)].insert(br.from);
    }

    for (std::size_t k = 0; k < d.regions.size(); ++k) {
        auto& region = d.regions[k];
        region.copy.assign(copies[k].begin(), copies[k].end());
        for (int bus : region.copy) region.copy_owner.push_back(spec.region_of.at(bus));
        std::vector<int> local_ids = region.core;
        local_ids.insert(local_ids.end(), region.copy.begin(), region.copy.end());
        for (std::size_t i = 0; i < local_ids.size(); ++i)
            region.local.emplace(local_ids[i], static_cast<Eigen::Index>(i));
        region.ybus = build_ybus(c, local_ids, region.branches);
        region.spec = injections(c, local_ids);
        for (std::size_t j = 0; j < region.copy.size(); ++j) {
            ConsensusRow row{region.id, region.copy[j], region.copy_owner[j], Quantity::Theta};
            d.rows.push_back(row);
            row.quantity = Quantity::V;
            d.rows.push_back(row);
        }
    }
    return d;
}

DimensionReport dimension_report(const Decomposition& d) {
    DimensionReport report;
    report.n_bus = d.n_bus;
    report.n_reg = d.regions.size();
    report.n_conn = d.n_conn;
    for (const auto& region : d.regions) {
        report.n_core.push_back(region.n_core());
        report.n_copy.push_back(region.n_copy());
        report.reduced += 2 * region.n_core() + 2 * region.n_copy();
        report.original += 4 * region.n_core() + 2 * region.n_copy();
    }
    return report;
}

Eigen::SparseMatrix<double> ConsensusSystem::block(std::size_t k) const {
    const Eigen::Index begin = offsets[k];
    const Eigen::Index width = offsets[k + 1] - begin;
    Eigen::SparseMatrix<double> col_major = a;
    return col_major.middleCols(begin, width);
}

ConsensusSystem build_consensus(const Decomposition& d, std::span<const StateLayout> layouts) {
    if (layouts.size() != d.regions.size()) throw DimensionMismatch("one layout per region required");
    ConsensusSystem cs;
    cs.rows = d.rows;
    cs.offsets.push_back(0);
    for (const auto& layout : layouts) cs.offsets.push_back(cs.offsets.back() + layout.size());

    const auto n_rows = static_cast<Eigen::Index>(d.rows.size());
    cs.b = Eigen::VectorXd::Zero(n_rows);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * d.rows.size());
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        const auto& row = d.rows[static_cast<std::size_t>(r)];
        const auto copy_k = static_cast<std::size_t>(row.region - 1);
        const auto core_k = static_cast<std::size_t>(row.core_region - 1);
        const auto& copy_region = d.regions[copy_k];
        const auto& core_region = d.regions[core_k];

        const Eigen::Index copy_pos = layouts[copy_k].position(copy_region.local_index(row.copy_bus), row.quantity);
        triplets.emplace_back(r, cs.offsets[copy_k] + copy_pos, -1.0);

        const Eigen::Index core_local = core_region.local_index(row.copy_bus);
        const Eigen::Index core_pos = layouts[core_k].position(core_local, row.quantity);
        if (core_pos >= 0) {
            triplets.emplace_back(r, cs.offsets[core_k] + core_pos, 1.0);
        } else {
            const auto& known = core_region.spec.buses[static_cast<std::size_t>(core_local)];
            cs.b[r] = -(row.quantity == Quantity::Theta ? known.theta : known.v);
        }
    }
    cs.a.resize(n_rows, cs.offsets.back());
    cs.a.setFromTriplets(triplets.begin(), triplets.end());
    cs.a.makeCompressed();
    return cs;
}

}  // namespace dpf
