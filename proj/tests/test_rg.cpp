#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rgdl/rg.hpp"
#include "rgdl/rng.hpp"

using namespace rgdl;

namespace {

// Hidden weights of a periodic chain after summing out the odd sites,
// computed by brute force over all visible states.
std::vector<double> marginalize_odd_sites(int n, double coupling) {
    std::vector<double> w(std::size_t{1} << (n / 2), 0.0);
    oracle::for_each_pm1(n, [&](std::uint64_t, const oracle::Spins& s) {
        std::uint64_t h = 0;
        for (int j = 0; j < n / 2; ++j)
            if (s[2 * j] > 0) h |= std::uint64_t{1} << j;
        w[h] += std::exp(-oracle::bond_energy(s, oracle::ring_bonds(n), coupling));
    });
    return w;
}

double coupling_of(const Hamiltonian& h, std::vector<std::uint32_t> sites) {
    for (const auto& t : h.terms())
        if (t.sites == sites) return t.coupling;
    return 0.0;
}

}  // namespace

TEST_CASE("decimation recursion") {
    SUBCASE("matches brute-force marginalization of a ring") {
        const std::pair<double, double> frozen[] = {
            {1.0, 0.6625013736789322}, {0.5, 0.2168904152415136}, {0.7, 0.382942822864013}};
        for (auto [j, expected] : frozen) {
            // Hidden 4-ring weights: aligned neighbour pairs are favoured by exp(2J').
            const auto w = marginalize_odd_sites(8, j);
            const double ratio = w[0b0000] / w[0b0101];  // all aligned vs all anti-aligned
            CHECK(std::log(ratio) / 8.0 == doctest::Approx(expected).epsilon(1e-13));
            CHECK(decimation_step_coupling(j) == doctest::Approx(expected).epsilon(1e-14));
        }
    }
    SUBCASE("fixed point and errors") {
        CHECK(decimation_step_coupling(0.0) == 0.0);
        CHECK_THROWS_AS(decimation_step_coupling(-0.1), Error);
        CHECK_THROWS_AS(decimation_step_coupling(std::nan("")), Error);
        CHECK(std::isfinite(decimation_step_coupling(400.0)));
    }
    SUBCASE("large couplings contract slowly") {
        double previous_gap = 0.0;
        for (double j : {1.0, 2.0, 4.0, 8.0, 16.0}) {
            const double gap = j - decimation_step_coupling(j);
            CHECK(gap > previous_gap);
            CHECK(gap < std::log(2.0));
            previous_gap = gap;
        }
    }
    SUBCASE("closed form guard") {
        CHECK_THROWS_AS(guarded_atanh(1.0), Error);
        CHECK_THROWS_AS(closed_form_coupling(20.0, 1), Error);
        CHECK(guarded_atanh(0.5) == doctest::Approx(std::atanh(0.5)).epsilon(1e-15));
    }
}

TEST_CASE("coupling flow") {
    SUBCASE("J0=0 stays zero") {
        for (double j : rg_flow(0.0, 5).couplings) CHECK(j == 0.0);
    }
    SUBCASE("J0=1") {
        const auto flow = rg_flow(1.0, 4);
        const double expected[] = {1.0, 0.6625013736789321, 0.3500611389452525, 0.11367206746021138,
                                   0.012811542035819601};
        REQUIRE(flow.couplings.size() == 5);
        for (int k = 0; k < 5; ++k) CHECK(flow.couplings[k] == doctest::Approx(expected[k]).epsilon(1e-12));
        CHECK(flow.couplings.back() < 0.02);
    }
    SUBCASE("agrees with the closed form and is monotone") {
        for (double j0 : {0.05, 0.3, 1.0, 2.0, 3.0}) {
            const auto flow = rg_flow(j0, 6);
            for (std::size_t n = 0; n <= 6; ++n) {
                CHECK(std::abs(flow.couplings[n] - closed_form_coupling(j0, n)) < 1e-12);
                if (n > 0 && flow.couplings[n - 1] > 0.0) CHECK(flow.couplings[n] < flow.couplings[n - 1]);
            }
        }
    }
    SUBCASE("CSV export") {
        const auto csv = rg_flow_csv(rg_flow(1.0, 2));
        CHECK(csv.rfind("step,J,J_closed_form\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
        // Closed form saturates for huge couplings; the cell is left empty.
        const auto big = rg_flow_csv(rg_flow(30.0, 1));
        CHECK(big.find("0,30,\n") != std::string::npos);
    }
}

TEST_CASE("decimation operator") {
    SUBCASE("N=2 is an indicator") {
        const auto op = decimation_operator_1d(2);
        CHECK(op.n_hidden() == 1);
        // v index bit 0 is site 0 (the kept site); h index bit 0 is hidden unit 0.
        CHECK(op.weight(0b00, 0) == 1.0);
        CHECK(op.weight(0b10, 0) == 1.0);
        CHECK(op.weight(0b01, 1) == 1.0);
        CHECK(op.weight(0b00, 1) == 0.0);
        CHECK(op.weight(0b01, 0) == 0.0);
    }
    SUBCASE("odd or empty chains are rejected") {
        CHECK_THROWS_AS(decimation_operator_1d(5), Error);
        CHECK_THROWS_AS(decimation_operator_1d(0), Error);
    }
    SUBCASE("exact operator") {
        for (std::size_t n : {2, 4, 8}) CHECK(exactness_residual(decimation_operator_1d(n)) <= 1e-14);
        const auto h = Hamiltonian::ising(Lattice::chain(8, Boundary::Periodic), 0.9);
        CHECK(std::abs(free_energy_difference(decimation_operator_1d(8), h)) < 1e-10);
    }
    SUBCASE("N=4 free chain at J=0.7 gives a two-spin chain with the decimated coupling") {
        const auto h = Hamiltonian::ising(Lattice::chain(4, Boundary::Free), 0.7);
        const auto rh = renormalized_hamiltonian(decimation_operator_1d(4), h);
        const auto fit = fit_couplings(rh, all_subsets_basis(2, 2));
        CHECK(fit.residual < 1e-12);
        CHECK(coupling_of(fit.hamiltonian, {0, 1}) == doctest::Approx(std::atanh(std::pow(std::tanh(0.7), 2))).epsilon(1e-12));
        CHECK(std::abs(coupling_of(fit.hamiltonian, {0})) < 1e-12);
    }
    SUBCASE("periodic chains renormalize to nearest-neighbour rings") {
        const double j = 0.8;
        const double jp = decimation_step_coupling(j);
        for (int n : {4, 6, 8}) {
            const int m = n / 2;
            const auto h = Hamiltonian::ising(Lattice::chain(n, Boundary::Periodic), j);
            const auto rh = renormalized_hamiltonian(decimation_operator_1d(n), h);
            const auto fit = fit_couplings(rh, all_subsets_basis(m, m));
            CHECK(fit.residual < 1e-10);

            // Independent check of the table itself.
            const auto brute = marginalize_odd_sites(n, j);
            for (std::size_t s = 0; s < brute.size(); ++s)
                CHECK(rh.log_weight[s] == doctest::Approx(std::log(brute[s])).epsilon(1e-12));

            for (const auto& t : fit.hamiltonian.terms()) {
                if (t.sites.empty()) continue;
                const bool nn = t.sites.size() == 2 &&
                                ((t.sites[1] - t.sites[0]) == 1 || (t.sites[0] == 0 && t.sites[1] == std::uint32_t(m - 1)));
                if (!nn) {
                    CHECK(std::abs(t.coupling) <= 1e-10);
                } else {
                    // A 2-ring carries its bond twice.
                    CHECK(std::abs(t.coupling - (m == 2 ? 2.0 : 1.0) * jp) <= 1e-10);
                }
            }
        }
    }
}

TEST_CASE("block spin operator") {
    const auto lat = Lattice::square(2, 2, Boundary::Free);
    const auto op = block_spin_operator_2d(lat);
    auto grain = [&](std::vector<std::int8_t> v) { return op.coarse_grain(v).at(0); };
    CHECK(grain({1, 1, 1, -1}) == 1);
    CHECK(grain({-1, -1, 1, -1}) == -1);
    CHECK(grain({1, 1, -1, -1}) == 1);
    CHECK(grain({-1, 1, 1, -1}) == -1);
    CHECK(grain({-1, -1, 1, 1}) == -1);

    const auto lat4 = Lattice::square(4, 4, Boundary::Periodic);
    const auto op4 = block_spin_operator_2d(lat4);
    for (auto s : op4.coarse_grain(std::vector<std::int8_t>(16, 1))) CHECK(s == 1);
    CHECK(block_lattice(lat4) == Lattice::square(2, 2, Boundary::Free));
    CHECK(block_lattice(Lattice::square(8, 6, Boundary::Periodic)) == Lattice::square(4, 3, Boundary::Periodic));
    CHECK(decimated_lattice(Lattice::chain(4, Boundary::Periodic)) == Lattice::chain(2, Boundary::Free));
    CHECK_THROWS_AS(block_spin_operator_2d(Lattice::square(3, 4, Boundary::Periodic)), Error);
    CHECK_THROWS_AS(block_spin_operator_2d(Lattice::chain(4, Boundary::Free)), Error);

    CHECK(exactness_residual(op4) <= 1e-14);
    const auto h = Hamiltonian::ising(lat4, 0.3);
    CHECK(std::abs(free_energy_difference(op4, h)) < 1e-10);
    const auto rh = renormalized_hamiltonian(op4, h);
    CHECK(std::exp(rh.log_norm) == doctest::Approx(exact_partition(h)).epsilon(1e-12));
}

TEST_CASE("renormalized Hamiltonian and free-energy difference") {
    SUBCASE("H=0 with an exact operator is uniform") {
        const auto rh = renormalized_hamiltonian(decimation_operator_1d(6), Hamiltonian(6));
        for (double p : rh.probability) CHECK(p == doctest::Approx(1.0 / 8.0).epsilon(1e-14));
    }
    SUBCASE("doubling the operator shifts the free energy by -log 2") {
        auto table = decimation_operator_1d(4).tabulated();
        auto weights = std::get<OperatorTable>(table.representation()).weights;
        for (auto& w : weights) w *= 2.0;
        const RGOperator doubled(4, 2, OperatorTable{weights});
        const auto h = Hamiltonian::ising(Lattice::chain(4, Boundary::Free), 0.4);
        CHECK(free_energy_difference(doubled, h) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
        CHECK(exactness_residual(doubled) == doctest::Approx(1.0));
    }
    SUBCASE("generic operators are inexact") {
        Rng rng(31);
        std::vector<double> t(64);
        for (auto& x : t) x = rng.normal();
        const RGOperator op(4, 2, InducedOperator{[&](std::uint64_t v, std::uint64_t h) { return t[v * 4 + h]; }, "random"});
        CHECK(exactness_residual(op) > 0.0);
        const auto h = Hamiltonian::ising(Lattice::chain(4, Boundary::Free), 0.5);
        // Independent enumeration of both free energies.
        double zv = 0.0, zvh = 0.0;
        oracle::for_each_pm1(4, [&](std::uint64_t v, const oracle::Spins& s) {
            const double bw = std::exp(-oracle::bond_energy(s, oracle::open_chain_bonds(4), 0.5));
            zv += bw;
            for (std::uint64_t hh = 0; hh < 4; ++hh) zvh += bw * std::exp(t[v * 4 + hh]);
        });
        CHECK(free_energy_difference(op, h) == doctest::Approx(std::log(zv) - std::log(zvh)).epsilon(1e-12));
    }
    SUBCASE("annihilated visible states are reported as-is") {
        std::vector<double> w(16, 0.0);
        w[0 * 2 + 0] = 1.0;  // only v=0 maps anywhere
        const RGOperator op(3, 1, OperatorTable{w});
        const auto rh = renormalized_hamiltonian(op, Hamiltonian(3));
        CHECK(rh.log_weight[0] == doctest::Approx(0.0));
        CHECK(std::isinf(rh.log_weight[1]));
    }
}

TEST_CASE("operator table dump") {
    const auto path = std::filesystem::temp_directory_path() / "rgdl_test_table.bin";
    decimation_operator_1d(2).dump_table(path.string());
    std::ifstream in(path, std::ios::binary);
    std::uint32_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    CHECK(dims[0] == 2);
    CHECK(dims[1] == 1);
    std::vector<double> w(8);
    in.read(reinterpret_cast<char*>(w.data()), 64);
    CHECK(in.good());
    CHECK(w == std::vector<double>{1, 0, 0, 1, 1, 0, 0, 1});
    std::filesystem::remove(path);
}
