#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "dpf/grid_model.hpp"
#include "support.hpp"

using namespace dpf;

namespace {

RawCase bare_case(int n) {
    RawCase c;
    for (int id = 1; id <= n; ++id) {
        BusRecord b;
        b.id = id;
        b.bus_type = id == 1 ? BusType::REF : BusType::PQ;
        c.buses.push_back(b);
    }
    return c;
}

BranchRecord line(int from, int to, double r, double x, double b = 0.0) {
    BranchRecord br;
    br.from = from;
    br.to = to;
    br.r = r;
    br.x = x;
    br.b_charge = b;
    return br;
}

}  // namespace

TEST_SUITE("grid_model") {

TEST_CASE("single lossless line") {
    RawCase c = bare_case(2);
    c.branches.push_back(line(1, 2, 0.0, 0.1));
    const AdmittanceMatrix y = build_ybus(c);
    REQUIRE(y.size() == 2);
    CHECK(std::abs(y.coeff(0, 0) - Complex(0, -10)) < 1e-12);
    CHECK(std::abs(y.coeff(0, 1) - Complex(0, 10)) < 1e-12);
    CHECK(std::abs(y.coeff(1, 0) - Complex(0, 10)) < 1e-12);
    CHECK(std::abs(y.coeff(1, 1) - Complex(0, -10)) < 1e-12);
}

TEST_CASE("shunt-only bus") {
    RawCase c = bare_case(1);
    c.buses[0].gs = 0.05;
    const int ids[] = {1};
    const AdmittanceMatrix y = build_ybus(c, ids, {});
    REQUIRE(y.size() == 1);
    CHECK(y.coeff(0, 0) == Complex(0.05, 0.0));
}

TEST_CASE("matches the reference admittance matrices") {
    for (const std::string name : {"case9", "case14", "six_bus", "phase_shift4", "case30"}) {
        CAPTURE(name);
        const RawCase c = load_case(test::case_path(name));
        const auto ref = test::load_reference(name);
        REQUIRE(!ref.ybus.empty());
        const AdmittanceMatrix y = build_ybus(c);
        const BusIndex index(c);
        std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
        for (const auto& [i, k, re, im] : ref.ybus) {
            const auto r = static_cast<Eigen::Index>(index.at(i));
            const auto s = static_cast<Eigen::Index>(index.at(k));
            seen.emplace(r, s);
            const Complex got = y.coeff(r, s);
            CHECK(std::abs(got.real() - re) <= 1e-12 * std::max(1.0, std::abs(re)));
            CHECK(std::abs(got.imag() - im) <= 1e-12 * std::max(1.0, std::abs(im)));
        }
        for (int r = 0; r < y.y.outerSize(); ++r)
            for (ComplexSparse::InnerIterator it(y.y, r); it; ++it)
                if (it.value() != Complex(0.0, 0.0)) CHECK(seen.contains({it.row(), it.col()}));
    }
}

TEST_CASE("sparsity pattern is symmetric under phase shifts") {
    const RawCase c = load_case(test::case_path("phase_shift4"));
    bool asymmetric_values = false;
    const AdmittanceMatrix y = build_ybus(c);
    const Eigen::MatrixXcd dense = Eigen::MatrixXcd(y.y);
    for (Eigen::Index i = 0; i < dense.rows(); ++i)
        for (Eigen::Index k = 0; k < dense.cols(); ++k) {
            CHECK((dense(i, k) != Complex(0, 0)) == (dense(k, i) != Complex(0, 0)));
            if (std::abs(dense(i, k) - dense(k, i)) > 1e-9) asymmetric_values = true;
        }
    CHECK(asymmetric_values);
}

TEST_CASE("rows touch only adjacent buses") {
    const RawCase c = load_case(test::case_path("case30"));
    const AdmittanceMatrix y = build_ybus(c);
    const BusIndex index(c);
    std::set<std::pair<std::size_t, std::size_t>> adjacent;
    for (const auto& br : c.branches) {
        if (!br.status) continue;
        adjacent.emplace(index.at(br.from), index.at(br.to));
        adjacent.emplace(index.at(br.to), index.at(br.from));
    }
    for (int r = 0; r < y.y.outerSize(); ++r)
        for (ComplexSparse::InnerIterator it(y.y, r); it; ++it)
            if (it.row() != it.col())
                CHECK(adjacent.contains({static_cast<std::size_t>(it.row()), static_cast<std::size_t>(it.col())}));
}

TEST_CASE("out-of-service branches are dropped") {
    RawCase c = bare_case(3);
    c.branches.push_back(line(1, 2, 0.0, 0.1));
    c.branches.push_back(line(2, 3, 0.0, 0.2));
    c.branches[1].status = false;
    const AdmittanceMatrix y = build_ybus(c);
    CHECK(y.coeff(2, 2) == Complex(0, 0));
    CHECK(y.coeff(1, 2) == Complex(0, 0));
}

TEST_CASE("endpoint outside the subset is rejected") {
    RawCase c = bare_case(3);
    c.branches.push_back(line(1, 3, 0.0, 0.1));
    const int ids[] = {1, 2};
    CHECK_THROWS_AS(build_ybus(c, ids, c.branches), EndpointOutsideSubset);
}

TEST_CASE("subset order defines the indices") {
    RawCase c = bare_case(2);
    c.branches.push_back(line(1, 2, 0.0, 0.1));
    c.buses[1].bs = 0.3;
    const int ids[] = {2, 1};
    const AdmittanceMatrix y = build_ybus(c, ids, c.branches);
    CHECK(y.bus_ids == std::vector<int>{2, 1});
    CHECK(std::abs(y.coeff(0, 0) - Complex(0, -10 + 0.3)) < 1e-12);
}

TEST_CASE("injections sum generators minus load") {
    RawCase c = bare_case(2);
    c.buses[1].p_load = 0.3;
    c.buses[1].bus_type = BusType::PV;
    c.gens.push_back({2, 1.0, 0.0, 1.02, true});
    const int ids[] = {1, 2};
    BusInjectionSpec spec = injections(c, ids);
    CHECK(spec.buses[1].p == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(spec.buses[1].v == 1.02);
    CHECK(spec.buses[1].type == BusType::PV);

    c.gens[0].p_gen = 0.5;
    c.gens.push_back({2, 0.5, 0.1, 1.02, true});
    c.gens.push_back({2, 9.0, 9.0, 1.02, false});
    spec = injections(c, ids);
    CHECK(spec.buses[1].p == doctest::Approx(1.0 - 0.3).epsilon(1e-15));
    CHECK(spec.buses[1].q == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("lossless network conserves active power") {
    RawCase c = load_case(test::case_path("case30"));
    for (auto& b : c.buses) b.gs = b.bs = 0.0;
    for (auto& br : c.branches) br.r = br.b_charge = 0.0;
    const Eigen::MatrixXcd y = Eigen::MatrixXcd(build_ybus(c).y);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(-0.5, 0.5), mag(0.9, 1.1);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXcd v(y.rows());
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::polar(mag(rng), angle(rng));
        const Eigen::VectorXcd s = v.cwiseProduct((y * v).conjugate());
        CHECK(std::abs(s.real().sum()) <= 1e-10);
    }
}

TEST_CASE("row sums equal the shunt and charging terms") {
    for (const std::string name : {"phase_shift4", "case118"}) {
        CAPTURE(name);
        const RawCase c = load_case(test::case_path(name));
        const AdmittanceMatrix y = build_ybus(c);
        const BusIndex index(c);
        std::vector<Complex> expected(c.buses.size());
        for (std::size_t i = 0; i < c.buses.size(); ++i) expected[i] = Complex(c.buses[i].gs, c.buses[i].bs);
        for (const auto& br : c.branches) {
            if (!br.status) continue;
            const Complex ys = 1.0 / Complex(br.r, br.x);
            const Complex a = std::polar(br.tap, br.shift);
            const Complex half = Complex(0.0, br.b_charge / 2.0);
            expected[index.at(br.from)] += (ys + half) / (br.tap * br.tap) - ys / std::conj(a);
            expected[index.at(br.to)] += ys + half - ys / a;
        }
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            Complex sum = 0.0;
            for (ComplexSparse::InnerIterator it(y.y, i); it; ++it) sum += it.value();
            CHECK(std::abs(sum - expected[static_cast<std::size_t>(i)]) <= 1e-9);
        }
    }
}

TEST_CASE("case bus ids in file order") {
    const RawCase c = load_case(test::case_path("case118"));
    const auto ids = all_bus_ids(c);
    REQUIRE(ids.size() == 118);
    CHECK(ids.front() == 1);
    CHECK(ids.back() == 118);
}

}
