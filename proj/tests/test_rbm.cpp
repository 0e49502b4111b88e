#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "rbm_oracles.hpp"
#include "rgdl/rbm.hpp"

using namespace rgdl;
using oracle::dot;
using oracle::expected_cd1_direction;
using oracle::flatten;
using oracle::random_params;

namespace {

// Energy straight from the definition, on integer spins.
double energy_oracle(const oracle::Spins& v, const oracle::Spins& h, const RBMParams& p) {
    double e = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) e += p.b[j] * h[j];
    for (std::size_t i = 0; i < v.size(); ++i) {
        e += p.c[i] * v[i];
        for (std::size_t j = 0; j < h.size(); ++j) e += v[i] * p.w[i * h.size() + j] * h[j];
    }
    return e;
}

// Unnormalized joint weights exp(-E), index v * 2^M + h, in either domain.
std::vector<double> joint_oracle(const RBMParams& p) {
    const auto each = p.domain == SpinDomain::PlusMinusOne ? oracle::for_each_pm1 : oracle::for_each_01;
    std::vector<double> w(std::size_t{1} << (p.n_visible + p.n_hidden));
    each(p.n_visible, [&](std::uint64_t vi, const oracle::Spins& v) {
        each(p.n_hidden, [&](std::uint64_t hi, const oracle::Spins& h) {
            w[(vi << p.n_hidden) | hi] = std::exp(-energy_oracle(v, h, p));
        });
    });
    return w;
}

std::vector<std::int8_t> spins(std::uint64_t index, std::size_t n, SpinDomain d) {
    return config_from_index(index, n, d).values;
}

double sum(const std::vector<double>& xs) { return std::accumulate(xs.begin(), xs.end(), 0.0); }

}  // namespace

TEST_CASE("energy") {
    const RBMParams zero(3, 2);
    for (std::uint64_t v = 0; v < 8; ++v)
        for (std::uint64_t h = 0; h < 4; ++h)
            CHECK(rbm_energy(spins(v, 3, zero.domain), spins(h, 2, zero.domain), zero) == 0.0);

    RBMParams one(1, 1);
    one.w[0] = 1.0;
    const std::vector<std::int8_t> up{1};
    CHECK(rbm_energy(up, up, one) == 1.0);

    Rng rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        const auto p = random_params(2, 1, rng);
        const auto w = joint_oracle(p);
        const double z = sum(w);
        double total = 0.0;
        for (std::uint64_t v = 0; v < 4; ++v)
            for (std::uint64_t h = 0; h < 2; ++h) {
                const double e = rbm_energy(spins(v, 2, p.domain), spins(h, 1, p.domain), p);
                CHECK(std::exp(-e) == doctest::Approx(w[v * 2 + h]).epsilon(1e-13));
                total += std::exp(-e) / z;
            }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK_THROWS_AS(rbm_energy(std::vector<std::int8_t>{1, 1}, up, one), Error);
}

TEST_CASE("conditionals") {
    SUBCASE("zero parameters give one half") {
        const RBMParams zero(3, 2);
        for (double p : cond_hidden_given_visible(std::vector<std::int8_t>{1, -1, 1}, zero)) CHECK(p == 0.5);
        for (double p : cond_visible_given_hidden(std::vector<std::int8_t>{1, -1}, zero)) CHECK(p == 0.5);
    }
    SUBCASE("large positive input switches the unit off") {
        CHECK(up_probability(800.0, SpinDomain::PlusMinusOne) == 0.0);
        CHECK(up_probability(-800.0, SpinDomain::PlusMinusOne) == 1.0);
        CHECK(up_probability(40.0, SpinDomain::ZeroOne) < 1e-17);
        CHECK(up_probability(0.3, SpinDomain::PlusMinusOne) == doctest::Approx(1.0 / (1.0 + std::exp(0.6))));
    }
    SUBCASE("agree with the joint by enumeration") {
        Rng rng(2);
        for (auto domain : {SpinDomain::PlusMinusOne, SpinDomain::ZeroOne}) {
            for (int rep = 0; rep < 10; ++rep) {
                const auto p = random_params(2, 2, rng, 1.0, domain);
                const auto w = joint_oracle(p);
                for (std::uint64_t v = 0; v < 4; ++v) {
                    const double pv = w[v * 4] + w[v * 4 + 1] + w[v * 4 + 2] + w[v * 4 + 3];
                    const auto ph = cond_hidden_given_visible(spins(v, 2, domain), p);
                    // h index bit j set means hidden unit j is up.
                    CHECK(std::abs(ph[0] - (w[v * 4 + 1] + w[v * 4 + 3]) / pv) < 1e-12);
                    CHECK(std::abs(ph[1] - (w[v * 4 + 2] + w[v * 4 + 3]) / pv) < 1e-12);
                }
                for (std::uint64_t h = 0; h < 4; ++h) {
                    const double ph = w[h] + w[4 + h] + w[8 + h] + w[12 + h];
                    const auto pv = cond_visible_given_hidden(spins(h, 2, domain), p);
                    CHECK(std::abs(pv[0] - (w[4 + h] + w[12 + h]) / ph) < 1e-12);
                    CHECK(std::abs(pv[1] - (w[8 + h] + w[12 + h]) / ph) < 1e-12);
                }
            }
        }
    }
    SUBCASE("transposition swaps the conditionals") {
        Rng rng(3);
        const auto p = random_params(4, 3, rng);
        const auto t = transposed(p);
        const std::vector<std::int8_t> v{1, -1, -1, 1}, h{-1, 1, 1};
        CHECK(cond_hidden_given_visible(v, p) == cond_visible_given_hidden(v, t));
        CHECK(cond_visible_given_hidden(h, p) == cond_hidden_given_visible(h, t));
        const auto back = from_conventional(to_conventional(p));
        CHECK(back.w == p.w);
        CHECK(to_conventional(p).b[0] == -p.b[0]);
    }
}

TEST_CASE("exact marginals") {
    SUBCASE("zero parameters are uniform") {
        for (double x : exact_visible_marginal(RBMParams(4, 3)).probability) CHECK(x == doctest::Approx(1.0 / 16));
        for (double x : exact_hidden_marginal(RBMParams(4, 3)).probability) CHECK(x == doctest::Approx(1.0 / 8));
    }
    SUBCASE("no hidden units leaves the visible fields") {
        RBMParams p(2, 0);
        p.c = {0.4, -1.1};
        const auto m = exact_visible_marginal(p);
        const double z = 4.0 * std::cosh(0.4) * std::cosh(1.1);
        CHECK(m.probability[0] == doctest::Approx(std::exp(0.4 - 1.1) / z).epsilon(1e-14));
        CHECK(m.probability[3] == doctest::Approx(std::exp(-0.4 + 1.1) / z).epsilon(1e-14));
        RBMParams q(0, 2);
        q.b = {0.4, -1.1};
        CHECK(exact_hidden_marginal(q).probability[3] == doctest::Approx(m.probability[3]).epsilon(1e-14));
    }
    SUBCASE("traces of the joint, normalization and product rule") {
        Rng rng(4);
        for (auto domain : {SpinDomain::PlusMinusOne, SpinDomain::ZeroOne}) {
            for (auto [n, m] : {std::pair{4, 3}, std::pair{6, 5}, std::pair{8, 8}}) {
                const auto p = random_params(n, m, rng, 0.7, domain);
                const auto joint = exact_joint(p);
                const auto oracle_w = joint_oracle(p);
                long double z = 0.0L;
                for (double x : oracle_w) z += x;
                CHECK(std::abs(sum(joint) - 1.0) < 1e-12);
                const auto pv = exact_visible_marginal(p);
                const auto ph = exact_hidden_marginal(p);
                CHECK(std::abs(sum(pv.probability) - 1.0) < 1e-12);
                CHECK(std::abs(sum(ph.probability) - 1.0) < 1e-12);
                CHECK(pv.log_partition == doctest::Approx(static_cast<double>(std::log(z))).epsilon(1e-13));
                double hsum = 0.0;
                for (double hval : pv.hamiltonian) hsum += std::exp(-hval);
                CHECK(hsum == doctest::Approx(static_cast<double>(z)).epsilon(1e-12));

                const std::size_t nh = std::size_t{1} << m;
                for (std::size_t v = 0; v < pv.probability.size(); ++v) {
                    long double trace = 0.0L;
                    for (std::size_t h = 0; h < nh; ++h) trace += oracle_w[v * nh + h] / z;
                    CHECK(std::abs(pv.probability[v] - static_cast<double>(trace)) < 1e-14);
                    const auto cond = cond_hidden_given_visible(spins(v, n, domain), p);
                    for (std::size_t h = 0; h < nh; h += 3) {
                        double phv = 1.0;
                        for (int j = 0; j < m; ++j) phv *= (h >> j & 1) ? cond[j] : 1.0 - cond[j];
                        CHECK(std::abs(joint[v * nh + h] - phv * pv.probability[v]) < 1e-12);
                    }
                }
                for (std::size_t h = 0; h < nh; ++h) {
                    long double trace = 0.0L;
                    for (std::size_t v = 0; v < pv.probability.size(); ++v) trace += oracle_w[v * nh + h] / z;
                    CHECK(std::abs(ph.probability[h] - static_cast<double>(trace)) < 1e-14);
                }
            }
        }
    }
    SUBCASE("capacity") { CHECK_THROWS_AS(exact_joint(RBMParams(13, 12)), Error); }
}

TEST_CASE("KL divergence") {
    const RBMParams zero(2, 1);
    CHECK(exact_kl(std::vector<double>(4, 0.25), zero) == doctest::Approx(0.0));
    const std::vector<double> p{0.7, 0.1, 0.1, 0.1};
    double expected = 0.0;
    for (double x : p) expected += x * std::log(4 * x);
    CHECK(expected == doctest::Approx(0.44584637246456404).epsilon(1e-14));
    CHECK(exact_kl(p, zero) == doctest::Approx(expected).epsilon(1e-13));

    Rng rng(5);
    const auto params = random_params(3, 2, rng);
    const auto model = exact_visible_marginal(params).probability;
    CHECK(std::abs(exact_kl(model, params)) < 1e-13);
    CHECK(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}) == INFINITY);
    CHECK(kl_divergence(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(exact_kl(std::vector<double>(3, 1.0 / 3), zero), Error);
}

TEST_CASE("log-likelihood gradient") {
    Rng rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const auto params = random_params(5, 4, rng, 0.5);
        std::vector<double> p_data(32);
        for (auto& x : p_data) x = rng.uniform();
        const double total = sum(p_data);
        for (auto& x : p_data) x /= total;

        const auto grad = flatten(exact_log_likelihood_gradient(p_data, params));
        const auto base = flatten(params);
        const double eps = 1e-5;
        for (std::size_t k = 0; k < base.size(); ++k) {
            auto shifted = [&](double delta) {
                auto q = params;
                auto flat = base;
                flat[k] += delta;
                std::copy_n(flat.begin(), q.b.size(), q.b.begin());
                std::copy_n(flat.begin() + q.b.size(), q.w.size(), q.w.begin());
                std::copy_n(flat.begin() + q.b.size() + q.w.size(), q.c.size(), q.c.begin());
                return exact_log_likelihood(p_data, q);
            };
            const double fd = (shifted(eps) - shifted(-eps)) / (2 * eps);
            CHECK(std::abs(fd - grad[k]) <= 1e-5 * std::max(1.0, std::abs(grad[k])));
        }
    }
}

TEST_CASE("expected CD-1 direction points uphill") {
    Rng rng(7);
    int positive = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const auto params = random_params(3, 2, rng, 0.5);
        std::vector<double> p_data(8);
        for (auto& x : p_data) x = rng.uniform() * rng.uniform();
        const double total = sum(p_data);
        for (auto& x : p_data) x /= total;
        if (dot(expected_cd1_direction(p_data, params), flatten(exact_log_likelihood_gradient(p_data, params))) > 0)
            ++positive;
    }
    CHECK(positive >= 90);
}

TEST_CASE("cd_k_update") {
    Rng rng(8);
    const auto params = random_params(3, 2, rng, 0.5);
    std::vector<double> p_data{0.3, 0.05, 0.05, 0.1, 0.02, 0.08, 0.1, 0.3};
    const auto batch = sample_from_distribution(p_data, 3, SpinDomain::PlusMinusOne, 200000, rng);

    SUBCASE("zero learning rate leaves parameters unchanged") {
        TrainConfig cfg;
        cfg.learning_rate = 0.0;
        auto p = params;
        Velocity vel(p);
        cd_k_update(p, vel, batch, cfg, rng);
        CHECK(flatten(p) == flatten(params));
    }
    SUBCASE("one large-batch step follows the expected CD-1 direction") {
        TrainConfig cfg;
        cfg.learning_rate = 1.0;
        cfg.momentum = 0.0;
        cfg.l1_strength = 0.0;
        auto p = params;
        Velocity vel(p);
        cd_k_update(p, vel, batch, cfg, rng);
        auto step = flatten(p);
        const auto before = flatten(params);
        for (std::size_t k = 0; k < step.size(); ++k) step[k] -= before[k];
        const auto expected = expected_cd1_direction(p_data, params);
        for (std::size_t k = 0; k < step.size(); ++k) CHECK(std::abs(step[k] - expected[k]) < 0.01);
    }
    SUBCASE("empty minibatch") {
        auto p = params;
        Velocity vel(p);
        CHECK_THROWS_AS(cd_k_update(p, vel, SpinMatrix(0, 3, SpinDomain::PlusMinusOne), TrainConfig{}, rng), Error);
    }
}

TEST_CASE("training") {
    SUBCASE("student recovers a teacher") {
        Rng teacher_rng(9);
        int passed = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto teacher = random_params(3, 2, teacher_rng, 1.0);
            const auto p_teacher = exact_visible_marginal(teacher).probability;
            Rng data_rng(seed, 7);
            const auto data = sample_from_distribution(p_teacher, 3, SpinDomain::PlusMinusOne, 10000, data_rng);
            TrainConfig cfg;
            cfg.epochs = 500;
            cfg.seed = seed;
            cfg.epochs = 0;
            const auto init = train(data, 2, cfg).params;
            cfg.epochs = 500;
            const auto student = train(data, init, cfg).params;
            const double before = exact_kl(p_teacher, init);
            const double after = exact_kl(p_teacher, student);
            MESSAGE("seed " << seed << ": KL " << before << " -> " << after);
            if (after * 5.0 <= before) ++passed;
        }
        CHECK(passed >= 3);
    }
    SUBCASE("strong L1 kills the weights") {
        Rng rng(10);
        const auto data = sample_from_distribution(exact_visible_marginal(random_params(4, 2, rng)).probability, 4,
                                                   SpinDomain::PlusMinusOne, 500, rng);
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.l1_strength = 1.0;
        for (double w : train(data, 3, cfg).params.w) CHECK(std::abs(w) < 1e-3);
    }
    SUBCASE("epochs=0 returns the initialization and training is deterministic") {
        Rng rng(11);
        SpinMatrix data(300, 5, SpinDomain::ZeroOne);
        for (auto& x : data.data) x = rng.bernoulli(0.3) ? 1 : 0;
        const auto init = random_params(5, 3, rng, 0.1, SpinDomain::ZeroOne);
        TrainConfig cfg;
        cfg.epochs = 0;
        CHECK(flatten(train(data, init, cfg).params) == flatten(init));
        cfg.epochs = 5;
        cfg.seed = 3;
        const auto a = train(data, 3, cfg);
        const auto b = train(data, 3, cfg);
        CHECK(flatten(a.params) == flatten(b.params));
        CHECK(a.reconstruction_error.size() == 5);
        cfg.seed = 4;
        CHECK(flatten(train(data, 3, cfg).params) != flatten(a.params));
    }
    SUBCASE("all-up data makes all-up the most likely state") {
        for (auto domain : {SpinDomain::PlusMinusOne, SpinDomain::ZeroOne}) {
            SpinMatrix data(500, 10, domain);
            std::fill(data.data.begin(), data.data.end(), spin_up(domain));
            TrainConfig cfg;
            cfg.epochs = 30;
            const auto p = exact_visible_marginal(train(data, 4, cfg).params).probability;
            CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1023);
        }
    }
    SUBCASE("dimension mismatch") {
        SpinMatrix data(10, 4, SpinDomain::PlusMinusOne);
        CHECK_THROWS_AS(train(data, RBMParams(5, 2), TrainConfig{}), Error);
        CHECK_THROWS_AS(train(data, RBMParams(4, 2, SpinDomain::ZeroOne), TrainConfig{}), Error);
        TrainConfig bad;
        bad.momentum = 1.0;
        CHECK_THROWS_AS(bad.validate(), Error);
    }
}

TEST_CASE("model files round-trip exactly") {
    Rng rng(12);
    const auto p = random_params(7, 5, rng, 1e-3, SpinDomain::ZeroOne);
    const auto back = rbm_from_json(rbm_to_json(p));
    CHECK(back.domain == p.domain);
    CHECK(flatten(back) == flatten(p));
    const auto path = std::filesystem::temp_directory_path() / "rgdl_test_rbm.json";
    save_rbm(p, path.string());
    CHECK(flatten(load_rbm(path.string())) == flatten(p));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(rbm_from_json("{\"domain\": \"pm1\"}"), Error);
    CHECK_THROWS_AS(rbm_from_json("not json"), Error);
}
