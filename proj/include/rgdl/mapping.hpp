#pragma once

#include <string>
#include <vector>

#include "rgdl/rbm.hpp"
#include "rgdl/rg.hpp"

namespace rgdl {

/// RBM energy optionally augmented with intra-layer couplings, turning it
/// into a general Boltzmann machine:
///   E(v, h) = E_rbm(v, h) + visible_coupling[v] + hidden_coupling[h].
/// Empty coupling Hamiltonians (zero terms) give back the plain RBM.
struct BoltzmannMachine {
    RBMParams rbm;
    Hamiltonian visible_coupling;
    Hamiltonian hidden_coupling;

    BoltzmannMachine(RBMParams params)  // NOLINT(google-explicit-constructor)
        : rbm(std::move(params)), visible_coupling(rbm.n_visible), hidden_coupling(rbm.n_hidden) {}
    BoltzmannMachine(RBMParams params, Hamiltonian visible, Hamiltonian hidden);

    bool restricted() const noexcept { return visible_coupling.terms().empty() && hidden_coupling.terms().empty(); }
    double energy(std::span<const std::int8_t> v, std::span<const std::int8_t> h) const;
};

/// Joint table p(v, h), index v * 2^M + h.
std::vector<double> machine_joint(const BoltzmannMachine& bm, std::size_t limit = kDefaultEnumerationLimit);
/// Visible marginal with H^RBM fixed so that sum_v exp(-H^RBM) equals the
/// joint partition function.
ExactMarginal machine_visible_marginal(const BoltzmannMachine& bm, std::size_t limit = kDefaultEnumerationLimit);
ExactMarginal machine_hidden_marginal(const BoltzmannMachine& bm, std::size_t limit = kDefaultEnumerationLimit);

/// H^RBM[v] as explicit interaction terms (every subset of visible sites,
/// constant included). Using it as the data Hamiltonian makes the induced
/// operator exact.
Hamiltonian extract_visible_hamiltonian(const BoltzmannMachine& bm, std::size_t limit = kDefaultEnumerationLimit);

/// T(v, h) = -E(v, h) + H[v].
RGOperator rg_operator_from_rbm(const BoltzmannMachine& bm, const Hamiltonian& data,
                                std::size_t limit = kDefaultEnumerationLimit);

struct MappingReport {
    double exactness_residual = 0.0;
    double hidden_distribution_distance = 0.0;
    double conditional_identity_residual = 0.0;
    double delta_F = 0.0;
    double kl_visible = 0.0;
    /// Identity residual divided by max(1, exp(T)) per entry. The absolute
    /// residual inherits the magnitude of exp(T), which depends on the data
    /// Hamiltonian's scale and additive constant; this one does not.
    double conditional_identity_scaled_residual = 0.0;
};

/// Total variation between the hidden distribution from
/// exp(-H^RG) = Tr_v exp(T - H) and the machine's own hidden marginal.
double hidden_distribution_distance(const BoltzmannMachine& bm, const Hamiltonian& data,
                                    std::size_t limit = kDefaultEnumerationLimit);

/// max over (v, h) of |exp(T) - p(h|v) exp(H[v] - H^RBM[v])|.
double conditional_identity_residual(const BoltzmannMachine& bm, const Hamiltonian& data,
                                     std::size_t limit = kDefaultEnumerationLimit);

double conditional_identity_scaled_residual(const BoltzmannMachine& bm, const Hamiltonian& data,
                                            std::size_t limit = kDefaultEnumerationLimit);
MappingReport verify_hidden_hamiltonian_equality(const BoltzmannMachine& bm, const Hamiltonian& data,
                                                 std::size_t limit = kDefaultEnumerationLimit);

/// Report for a tabulated or deterministic operator where no machine is
/// involved: exactness residual and delta F only, other fields zero.
MappingReport operator_report(const RGOperator& op, const Hamiltonian& data,
                              std::size_t limit = kDefaultEnumerationLimit);

std::string mapping_report_json(const MappingReport& report);

}  // namespace rgdl
