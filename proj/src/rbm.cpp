#include "rgdl/rbm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include "json.hpp"
#include <numeric>
#include <sstream>

namespace rgdl {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const Matrix>;
using Weights = Eigen::Map<Matrix>;

// log sum_{s in domain} exp(-a s)
double log_unit_trace(double a, SpinDomain domain) noexcept {
    if (domain == SpinDomain::PlusMinusOne) {
        const double x = std::abs(a);
        return x + std::log1p(std::exp(-2.0 * x));
    }
    // log(1 + exp(-a))
    return a > 0 ? std::log1p(std::exp(-a)) : -a + std::log1p(std::exp(a));
}

void check_input(std::size_t got, std::size_t want) {
    if (got != want) fail(Errc::dimension, "input length does not match layer size");
}

}  // namespace

void RBMParams::validate() const {
    if (b.size() != n_hidden || c.size() != n_visible || w.size() != n_visible * n_hidden)
        fail(Errc::dimension, "RBM parameter arrays inconsistent with dimensions");
    auto finite = [](const std::vector<double>& x) {
        return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
    };
    if (!finite(b) || !finite(w) || !finite(c)) fail(Errc::validation, "RBM parameters must be finite");
}

RBMParams to_conventional(const RBMParams& params) {
    RBMParams out = params;
    for (auto* v : {&out.b, &out.w, &out.c})
        for (auto& x : *v) x = -x;
    return out;
}

RBMParams from_conventional(const RBMParams& params) { return to_conventional(params); }

RBMParams transposed(const RBMParams& params) {
    RBMParams out(params.n_hidden, params.n_visible, params.domain);
    out.b = params.c;
    out.c = params.b;
    for (std::size_t i = 0; i < params.n_visible; ++i)
        for (std::size_t j = 0; j < params.n_hidden; ++j) out.weight(j, i) = params.weight(i, j);
    return out;
}

RBMParams random_init(std::size_t n_visible, std::size_t n_hidden, SpinDomain domain, Rng& rng, double scale) {
    RBMParams p(n_visible, n_hidden, domain);
    for (auto& x : p.w) x = rng.uniform(-0.01, 0.01) * scale;
    return p;
}

double rbm_energy(std::span<const std::int8_t> v, std::span<const std::int8_t> h, const RBMParams& params) {
    check_input(v.size(), params.n_visible);
    check_input(h.size(), params.n_hidden);
    double e = 0.0;
    for (std::size_t j = 0; j < params.n_hidden; ++j) e += params.b[j] * h[j];
    for (std::size_t i = 0; i < params.n_visible; ++i) {
        e += params.c[i] * v[i];
        if (v[i] == 0) continue;
        double row = 0.0;
        for (std::size_t j = 0; j < params.n_hidden; ++j) row += params.weight(i, j) * h[j];
        e += v[i] * row;
    }
    return e;
}

double up_probability(double a, SpinDomain domain) noexcept {
    const double x = domain == SpinDomain::PlusMinusOne ? 2.0 * a : a;
    // 1 / (1 + exp(x)) without overflow
    if (x > 0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

double expected_spin(double p_up, SpinDomain domain) noexcept {
    return domain == SpinDomain::PlusMinusOne ? 2.0 * p_up - 1.0 : p_up;
}

std::vector<double> cond_hidden_given_visible(std::span<const double> v, const RBMParams& params) {
    check_input(v.size(), params.n_visible);
    std::vector<double> a(params.b);
    for (std::size_t i = 0; i < params.n_visible; ++i) {
        if (v[i] == 0.0) continue;
        for (std::size_t j = 0; j < params.n_hidden; ++j) a[j] += v[i] * params.weight(i, j);
    }
    for (auto& x : a) x = up_probability(x, params.domain);
    return a;
}

std::vector<double> cond_visible_given_hidden(std::span<const double> h, const RBMParams& params) {
    check_input(h.size(), params.n_hidden);
    std::vector<double> a(params.c);
    for (std::size_t i = 0; i < params.n_visible; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < params.n_hidden; ++j) sum += params.weight(i, j) * h[j];
        a[i] += sum;
    }
    for (auto& x : a) x = up_probability(x, params.domain);
    return a;
}

std::vector<double> cond_hidden_given_visible(std::span<const std::int8_t> v, const RBMParams& params) {
    std::vector<double> real(v.begin(), v.end());
    return cond_hidden_given_visible(std::span<const double>(real), params);
}

std::vector<double> cond_visible_given_hidden(std::span<const std::int8_t> h, const RBMParams& params) {
    std::vector<double> real(h.begin(), h.end());
    return cond_visible_given_hidden(std::span<const double>(real), params);
}

void sample_units(std::span<const double> p_up, SpinDomain domain, Rng& rng, std::span<std::int8_t> out) {
    check_input(out.size(), p_up.size());
    for (std::size_t k = 0; k < p_up.size(); ++k) out[k] = rng.uniform() < p_up[k] ? spin_up(domain) : spin_down(domain);
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), Errc::validation, "learning_rate must be >= 0");
    require(momentum >= 0.0 && momentum < 1.0, Errc::validation, "momentum must lie in [0, 1)");
    require(minibatch >= 1, Errc::validation, "minibatch must be at least 1");
    require(cd_k >= 1, Errc::validation, "cd_k must be at least 1");
    require(l1_strength >= 0.0 && std::isfinite(l1_strength), Errc::validation, "l1_strength must be >= 0");
}

namespace {

void to_up_probability(Matrix& a, SpinDomain domain) {
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = up_probability(a.data()[k], domain);
}

void sample_matrix(const Matrix& p, SpinDomain domain, Rng& rng, Matrix& out) {
    out.resize(p.rows(), p.cols());
    const double up = spin_up(domain), down = spin_down(domain);
    for (Eigen::Index k = 0; k < p.size(); ++k) out.data()[k] = rng.uniform() < p.data()[k] ? up : down;
}

void expected_spins(Matrix& p, SpinDomain domain) {
    if (domain == SpinDomain::PlusMinusOne) p = (2.0 * p.array() - 1.0).matrix();
}

}  // namespace

double cd_k_update(RBMParams& params, Velocity& velocity, const SpinMatrix& batch, const TrainConfig& cfg,
                   Rng& rng) {
    require(batch.rows >= 1, Errc::validation, "empty minibatch");
    check_input(batch.cols, params.n_visible);
    if (batch.domain != params.domain) fail(Errc::validation, "minibatch domain differs from model domain");

    const auto rows = static_cast<Eigen::Index>(batch.rows);
    const auto nv = static_cast<Eigen::Index>(params.n_visible);
    const auto nh = static_cast<Eigen::Index>(params.n_hidden);
    const SpinDomain domain = params.domain;
    ConstWeights w(params.w.data(), nv, nh);
    const Eigen::Map<const Eigen::RowVectorXd> b(params.b.data(), nh);
    const Eigen::Map<const Eigen::RowVectorXd> c(params.c.data(), nv);

    Matrix v0(rows, nv);
    for (Eigen::Index k = 0; k < v0.size(); ++k) v0.data()[k] = batch.data[static_cast<std::size_t>(k)];

    Matrix ph0 = (v0 * w).rowwise() + b;
    to_up_probability(ph0, domain);
    Matrix h_sample;
    sample_matrix(ph0, domain, rng, h_sample);
    Matrix h0_mean = ph0;
    expected_spins(h0_mean, domain);

    Matrix vk, hk, pv, ph;
    double recon = 0.0;
    for (std::size_t step = 0; step < cfg.cd_k; ++step) {
        pv = (h_sample * w.transpose()).rowwise() + c;
        to_up_probability(pv, domain);
        if (step == 0) {
            Matrix v_mean = pv;
            expected_spins(v_mean, domain);
            const double scale = domain == SpinDomain::PlusMinusOne ? 1.0 : 2.0;
            recon = ((v0 - v_mean) * scale).squaredNorm() / static_cast<double>(v0.size());
        }
        sample_matrix(pv, domain, rng, vk);
        ph = (vk * w).rowwise() + b;
        to_up_probability(ph, domain);
        sample_matrix(ph, domain, rng, hk);
        h_sample = hk;
    }

    const double inv = 1.0 / static_cast<double>(rows);
    const Matrix grad_w = (vk.transpose() * hk - v0.transpose() * h0_mean) * inv;
    const Eigen::RowVectorXd grad_b = (hk.colwise().sum() - h0_mean.colwise().sum()) * inv;
    const Eigen::RowVectorXd grad_c = (vk.colwise().sum() - v0.colwise().sum()) * inv;

    Weights vw(velocity.w.data(), nv, nh);
    Eigen::Map<Eigen::RowVectorXd> vb(velocity.b.data(), nh), vc(velocity.c.data(), nv);
    vw = cfg.momentum * vw + cfg.learning_rate * grad_w;
    vb = cfg.momentum * vb + cfg.learning_rate * grad_b;
    vc = cfg.momentum * vc + cfg.learning_rate * grad_c;

    Weights pw(params.w.data(), nv, nh);
    Eigen::Map<Eigen::RowVectorXd> pb(params.b.data(), nh), pc(params.c.data(), nv);
    pw += vw;
    pb += vb;
    pc += vc;

    const double shrink = cfg.learning_rate * cfg.l1_strength;
    if (shrink > 0.0) {
        for (auto& x : params.w) {
            const double mag = std::abs(x) - shrink;
            x = mag > 0.0 ? std::copysign(mag, x) : 0.0;
        }
    }
    return recon;
}

TrainResult train(const SpinMatrix& data, RBMParams init, const TrainConfig& cfg) {
    cfg.validate();
    init.validate();
    if (data.cols != init.n_visible) fail(Errc::dimension, "dataset width does not match visible layer");
    if (data.domain != init.domain) fail(Errc::validation, "dataset domain differs from model domain");

    TrainResult result{std::move(init), {}};
    if (cfg.epochs == 0) return result;
    require(data.rows >= 1, Errc::validation, "cannot train on an empty dataset");

    Rng rng(cfg.seed, 1);
    Velocity velocity(result.params);
    std::vector<std::size_t> order(data.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SpinMatrix batch(0, data.cols, data.domain);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double err = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < data.rows; start += cfg.minibatch) {
            const std::size_t stop = std::min(data.rows, start + cfg.minibatch);
            batch.rows = stop - start;
            batch.data.resize(batch.rows * batch.cols);
            for (std::size_t r = start; r < stop; ++r) {
                auto src = data.row(order[r]);
                std::copy(src.begin(), src.end(), batch.row(r - start).begin());
            }
            err += cd_k_update(result.params, velocity, batch, cfg, rng) * static_cast<double>(batch.rows);
            seen += batch.rows;
        }
        result.reconstruction_error.push_back(err / static_cast<double>(seen));
    }
    return result;
}

TrainResult train(const SpinMatrix& data, std::size_t n_hidden, const TrainConfig& cfg) {
    Rng rng(cfg.seed, 0);
    return train(data, random_init(data.cols, n_hidden, data.domain, rng, cfg.init_scale), cfg);
}

// ---------------------------------------------------------------------------

ExactMarginal exact_visible_marginal(const RBMParams& params, std::size_t limit) {
    params.validate();
    require_enumerable(params.n_visible + params.n_hidden, limit);
    const std::size_t n = params.n_visible;
    const std::size_t states = std::size_t{1} << n;
    ExactMarginal out;
    out.hamiltonian.resize(states);
    std::vector<std::int8_t> v(n);
    std::vector<double> a(params.n_hidden);
    for (std::size_t s = 0; s < states; ++s) {
        decode_state(s, params.domain, v);
        double h = 0.0;
        std::copy(params.b.begin(), params.b.end(), a.begin());
        for (std::size_t i = 0; i < n; ++i) {
            h += params.c[i] * v[i];
            if (v[i] == 0) continue;
            for (std::size_t j = 0; j < params.n_hidden; ++j) a[j] += v[i] * params.weight(i, j);
        }
        for (double aj : a) h -= log_unit_trace(aj, params.domain);
        out.hamiltonian[s] = h;
    }
    out.log_partition = log_sum_states(n, [&](std::uint64_t s) { return -out.hamiltonian[s]; });
    out.probability.resize(states);
    for (std::size_t s = 0; s < states; ++s) out.probability[s] = std::exp(-out.hamiltonian[s] - out.log_partition);
    return out;
}

ExactMarginal exact_hidden_marginal(const RBMParams& params, std::size_t limit) {
    return exact_visible_marginal(transposed(params), limit);
}

std::vector<double> exact_joint(const RBMParams& params, std::size_t limit) {
    params.validate();
    require_enumerable(params.n_visible + params.n_hidden, limit);
    const std::size_t nh = params.n_hidden;
    const std::size_t total_bits = params.n_visible + nh;
    std::vector<std::int8_t> v(params.n_visible), h(nh);
    std::vector<double> log_w(std::size_t{1} << total_bits);
    for (std::size_t k = 0; k < log_w.size(); ++k) {
        decode_state(k >> nh, params.domain, v);
        decode_state(k & ((std::size_t{1} << nh) - 1), params.domain, h);
        log_w[k] = -rbm_energy(v, h, params);
    }
    const double log_z = log_sum_states(total_bits, [&](std::uint64_t k) { return log_w[k]; });
    for (auto& x : log_w) x = std::exp(x - log_z);
    return log_w;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) fail(Errc::dimension, "distributions over different state spaces");
    double kl = 0.0;
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (p[s] <= 0.0) continue;
        if (q[s] <= 0.0) return std::numeric_limits<double>::infinity();
        kl += p[s] * std::log(p[s] / q[s]);
    }
    return std::max(kl, 0.0);
}

double exact_kl(std::span<const double> p_data, const RBMParams& params, std::size_t limit) {
    const auto model = exact_visible_marginal(params, limit);
    if (p_data.size() != model.probability.size()) fail(Errc::dimension, "data distribution has wrong size");
    double kl = 0.0;
    for (std::size_t s = 0; s < p_data.size(); ++s) {
        if (p_data[s] <= 0.0) continue;
        if (model.probability[s] <= 0.0) return std::numeric_limits<double>::infinity();
        // log p_model computed from the Hamiltonian to keep precision when p is tiny
        kl += p_data[s] * (std::log(p_data[s]) + model.hamiltonian[s] + model.log_partition);
    }
    return std::max(kl, 0.0);
}

double exact_log_likelihood(std::span<const double> p_data, const RBMParams& params) {
    const auto model = exact_visible_marginal(params);
    if (p_data.size() != model.probability.size()) fail(Errc::dimension, "data distribution has wrong size");
    double ll = 0.0;
    for (std::size_t s = 0; s < p_data.size(); ++s)
        if (p_data[s] > 0.0) ll -= p_data[s] * (model.hamiltonian[s] + model.log_partition);
    return ll;
}

RBMParams exact_log_likelihood_gradient(std::span<const double> p_data, const RBMParams& params) {
    const auto model = exact_visible_marginal(params);
    if (p_data.size() != model.probability.size()) fail(Errc::dimension, "data distribution has wrong size");
    RBMParams grad(params.n_visible, params.n_hidden, params.domain);
    std::vector<std::int8_t> v(params.n_visible);
    for (std::size_t s = 0; s < p_data.size(); ++s) {
        const double weight = model.probability[s] - p_data[s];
        if (weight == 0.0) continue;
        decode_state(s, params.domain, v);
        auto p_up = cond_hidden_given_visible(std::span<const std::int8_t>(v), params);
        for (std::size_t j = 0; j < params.n_hidden; ++j) {
            const double m = expected_spin(p_up[j], params.domain);
            grad.b[j] += weight * m;
            for (std::size_t i = 0; i < params.n_visible; ++i) grad.weight(i, j) += weight * v[i] * m;
        }
        for (std::size_t i = 0; i < params.n_visible; ++i) grad.c[i] += weight * v[i];
    }
    return grad;
}

SpinMatrix sample_from_distribution(std::span<const double> p, std::size_t num_sites, SpinDomain domain,
                                    std::size_t rows, Rng& rng) {
    if (p.size() != (std::size_t{1} << num_sites)) fail(Errc::dimension, "distribution must have 2^N entries");
    std::vector<double> cdf(p.size());
    std::partial_sum(p.begin(), p.end(), cdf.begin());
    SpinMatrix out(rows, num_sites, domain);
    for (std::size_t r = 0; r < rows; ++r) {
        const double u = rng.uniform() * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const auto s = static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(p.size()) - 1));
        decode_state(s, domain, out.row(r));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string rbm_to_json(const RBMParams& params) {
    params.validate();
    nlohmann::json j;
    j["domain"] = domain_name(params.domain);
    j["n_visible"] = params.n_visible;
    j["n_hidden"] = params.n_hidden;
    j["b"] = params.b;
    j["w"] = params.w;
    j["c"] = params.c;
    return j.dump(1);
}

RBMParams rbm_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        RBMParams p(j.at("n_visible").get<std::size_t>(), j.at("n_hidden").get<std::size_t>(),
                    parse_domain(j.at("domain").get<std::string>()));
        p.b = j.at("b").get<std::vector<double>>();
        p.w = j.at("w").get<std::vector<double>>();
        p.c = j.at("c").get<std::vector<double>>();
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::io, std::string("bad model file: ") + e.what());
    }
}

void save_rbm(const RBMParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
    out << rbm_to_json(params) << '\n';
    if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

RBMParams load_rbm(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return rbm_from_json(ss.str());
}

}  // namespace rgdl
