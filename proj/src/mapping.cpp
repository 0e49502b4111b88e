#include "rgdl/mapping.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace rgdl {

BoltzmannMachine::BoltzmannMachine(RBMParams params, Hamiltonian visible, Hamiltonian hidden)
    : rbm(std::move(params)), visible_coupling(std::move(visible)), hidden_coupling(std::move(hidden)) {
    if (visible_coupling.num_sites() != rbm.n_visible || hidden_coupling.num_sites() != rbm.n_hidden)
        fail(Errc::dimension, "intra-layer couplings do not match machine layers");
}

double BoltzmannMachine::energy(std::span<const std::int8_t> v, std::span<const std::int8_t> h) const {
    double e = rbm_energy(v, h, rbm);
    if (!visible_coupling.terms().empty()) e += visible_coupling.energy(v);
    if (!hidden_coupling.terms().empty()) e += hidden_coupling.energy(h);
    return e;
}

namespace {

std::vector<double> joint_log_weights(const BoltzmannMachine& bm, std::size_t limit) {
    bm.rbm.validate();
    const std::size_t nv = bm.rbm.n_visible, nh = bm.rbm.n_hidden;
    require_enumerable(nv + nh, limit);
    std::vector<std::int8_t> v(nv), h(nh);
    std::vector<double> out(std::size_t{1} << (nv + nh));
    for (std::size_t k = 0; k < out.size(); ++k) {
        decode_state(k >> nh, bm.rbm.domain, v);
        decode_state(k & ((std::size_t{1} << nh) - 1), bm.rbm.domain, h);
        out[k] = -bm.energy(v, h);
    }
    return out;
}

// Marginal over one layer from the joint log-weights by direct summation.
ExactMarginal marginal_by_summation(const BoltzmannMachine& bm, bool visible, std::size_t limit) {
    const auto log_w = joint_log_weights(bm, limit);
    const std::size_t nv = bm.rbm.n_visible, nh = bm.rbm.n_hidden;
    const std::size_t keep = visible ? nv : nh, other = visible ? nh : nv;
    ExactMarginal m;
    m.hamiltonian.resize(std::size_t{1} << keep);
    for (std::uint64_t s = 0; s < m.hamiltonian.size(); ++s) {
        m.hamiltonian[s] = -log_sum_states(other, [&](std::uint64_t t) {
            return visible ? log_w[(s << nh) | t] : log_w[(t << nh) | s];
        });
    }
    m.log_partition = log_sum_states(keep, [&](std::uint64_t s) { return -m.hamiltonian[s]; });
    m.probability.resize(m.hamiltonian.size());
    for (std::size_t s = 0; s < m.probability.size(); ++s) m.probability[s] = std::exp(-m.hamiltonian[s] - m.log_partition);
    return m;
}

}  // namespace

std::vector<double> machine_joint(const BoltzmannMachine& bm, std::size_t limit) {
    auto log_w = joint_log_weights(bm, limit);
    const double log_z = log_sum_states(bm.rbm.n_visible + bm.rbm.n_hidden, [&](std::uint64_t k) { return log_w[k]; });
    for (auto& x : log_w) x = std::exp(x - log_z);
    return log_w;
}

ExactMarginal machine_visible_marginal(const BoltzmannMachine& bm, std::size_t limit) {
    if (bm.restricted()) return exact_visible_marginal(bm.rbm, limit);
    return marginal_by_summation(bm, true, limit);
}

ExactMarginal machine_hidden_marginal(const BoltzmannMachine& bm, std::size_t limit) {
    if (bm.restricted()) return exact_hidden_marginal(bm.rbm, limit);
    return marginal_by_summation(bm, false, limit);
}

Hamiltonian extract_visible_hamiltonian(const BoltzmannMachine& bm, std::size_t limit) {
    const auto m = machine_visible_marginal(bm, limit);
    return hamiltonian_from_energies(m.hamiltonian, bm.rbm.n_visible, bm.rbm.domain);
}

RGOperator rg_operator_from_rbm(const BoltzmannMachine& bm, const Hamiltonian& data, std::size_t limit) {
    bm.rbm.validate();
    const std::size_t nv = bm.rbm.n_visible, nh = bm.rbm.n_hidden;
    if (data.num_sites() != nv) fail(Errc::dimension, "data Hamiltonian does not match visible layer");
    require_enumerable(nv + nh, limit);
    const SpinDomain domain = bm.rbm.domain;
    InducedOperator induced;
    induced.description = "T = -E + H";
    induced.log_weight = [bm, data, nv, nh, domain](std::uint64_t vs, std::uint64_t hs) {
        std::vector<std::int8_t> v(nv), h(nh);
        decode_state(vs, domain, v);
        decode_state(hs, domain, h);
        return -bm.energy(v, h) + data.energy(v);
    };
    return RGOperator(nv, nh, std::move(induced), domain);
}

double hidden_distribution_distance(const BoltzmannMachine& bm, const Hamiltonian& data, std::size_t limit) {
    const auto op = rg_operator_from_rbm(bm, data, limit);
    const auto rh = renormalized_hamiltonian(op, data, limit);
    const auto hidden = machine_hidden_marginal(bm, limit);
    return total_variation(rh.probability, hidden.probability);
}

namespace {

struct IdentityResidual {
    double absolute = 0.0;
    double scaled = 0.0;
};

IdentityResidual identity_residual(const BoltzmannMachine& bm, const Hamiltonian& data, std::size_t limit) {
    const auto op = rg_operator_from_rbm(bm, data, limit);
    const auto visible = machine_visible_marginal(bm, limit);
    const std::size_t nv = bm.rbm.n_visible, nh = bm.rbm.n_hidden;
    const SpinDomain domain = bm.rbm.domain;
    std::vector<std::int8_t> v(nv);

    // p(h|v): factorized conditionals for an RBM, joint / marginal otherwise.
    std::vector<double> joint;
    if (!bm.restricted()) joint = machine_joint(bm, limit);
    const double log_z = visible.log_partition;

    IdentityResidual worst;
    std::vector<double> input(nh);
    for (std::uint64_t vs = 0; vs < (std::uint64_t{1} << nv); ++vs) {
        decode_state(vs, domain, v);
        const double data_energy = data.energy(v);
        if (bm.restricted()) {
            for (std::size_t j = 0; j < nh; ++j) {
                input[j] = bm.rbm.b[j];
                for (std::size_t i = 0; i < nv; ++i) input[j] += v[i] * bm.rbm.weight(i, j);
            }
        }
        for (std::uint64_t hs = 0; hs < (std::uint64_t{1} << nh); ++hs) {
            double p_cond = 1.0;
            if (bm.restricted()) {
                // The down probability is evaluated directly rather than as
                // 1 - p_up, which cancels when the unit is nearly always up.
                for (std::size_t j = 0; j < nh; ++j)
                    p_cond *= up_probability(((hs >> j) & 1U) ? input[j] : -input[j], domain);
            } else {
                // p(v) = exp(-H^RBM[v]) / Z
                p_cond = joint[(vs << nh) | hs] / std::exp(-visible.hamiltonian[vs] - log_z);
            }
            const double lhs = op.weight(vs, hs);
            const double rhs = p_cond * std::exp(data_energy - visible.hamiltonian[vs]);
            const double diff = std::abs(lhs - rhs);
            worst.absolute = std::max(worst.absolute, diff);
            worst.scaled = std::max(worst.scaled, diff / std::max(1.0, std::abs(lhs)));
        }
    }
    return worst;
}

}  // namespace

double conditional_identity_residual(const BoltzmannMachine& bm, const Hamiltonian& data, std::size_t limit) {
    return identity_residual(bm, data, limit).absolute;
}

double conditional_identity_scaled_residual(const BoltzmannMachine& bm, const Hamiltonian& data, std::size_t limit) {
    return identity_residual(bm, data, limit).scaled;
}

MappingReport verify_hidden_hamiltonian_equality(const BoltzmannMachine& bm, const Hamiltonian& data,
                                                 std::size_t limit) {
    const auto op = rg_operator_from_rbm(bm, data, limit);
    MappingReport r;
    r.exactness_residual = exactness_residual(op, limit);
    r.hidden_distribution_distance = hidden_distribution_distance(bm, data, limit);
    const auto identity = identity_residual(bm, data, limit);
    r.conditional_identity_residual = identity.absolute;
    r.conditional_identity_scaled_residual = identity.scaled;
    r.delta_F = free_energy_difference(op, data, limit);
    const auto target = boltzmann_distribution(data, bm.rbm.domain, limit);
    r.kl_visible = kl_divergence(target, machine_visible_marginal(bm, limit).probability);
    return r;
}

MappingReport operator_report(const RGOperator& op, const Hamiltonian& data, std::size_t limit) {
    MappingReport r;
    r.exactness_residual = exactness_residual(op, limit);
    r.delta_F = free_energy_difference(op, data, limit);
    return r;
}

std::string mapping_report_json(const MappingReport& report) {
    nlohmann::json j;
    j["exactness_residual"] = report.exactness_residual;
    j["hidden_distribution_distance"] = report.hidden_distribution_distance;
    j["conditional_identity_residual"] = report.conditional_identity_residual;
    j["delta_F"] = report.delta_F;
    j["kl_visible"] = report.kl_visible;
    j["conditional_identity_scaled_residual"] = report.conditional_identity_scaled_residual;
    return j.dump(2);
}

}  // namespace rgdl
