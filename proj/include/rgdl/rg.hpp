#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rgdl/spin.hpp"

namespace rgdl {

// ---------------------------------------------------------------------------
// 1D coupling flow
// ---------------------------------------------------------------------------

/// Coupling of the chain obtained by summing out every other spin:
/// tanh J' = tanh^2 J, evaluated as J' = log(cosh 2J) / 2. Domain error for
/// negative or non-finite J.
double decimation_step_coupling(double coupling);

/// atanh(tanh^(2^steps)(J0)). Domain error once the argument of atanh
/// reaches 1 - 1e-15.
double closed_form_coupling(double initial, std::size_t steps);

/// atanh(x) = log((1+x)/(1-x)) / 2, domain error for |x| >= 1 - 1e-15.
double guarded_atanh(double x);

struct RGFlow {
    std::vector<double> couplings;  // J^(0) ... J^(n)
};

RGFlow rg_flow(double initial, std::size_t steps);

/// CSV with header "step,J,J_closed_form". The closed form column is empty
/// where it cannot be evaluated.
std::string rg_flow_csv(const RGFlow& flow);

// ---------------------------------------------------------------------------
// RG operators
// ---------------------------------------------------------------------------

/// Deterministic coarse graining: hidden unit j takes the majority value of
/// the visible sites in blocks[j]; ties copy blocks[j][0]. Single-site
/// blocks are decimation.
struct Coarsener {
    std::vector<std::vector<std::uint32_t>> blocks;
};

/// Dense table of exp(T(v, h)), index v * 2^M + h.
struct OperatorTable {
    std::vector<double> weights;
};

/// T(v, h) given as a function returning T (the log of the weight).
struct InducedOperator {
    std::function<double(std::uint64_t v, std::uint64_t h)> log_weight;
    std::string description;
};

/// Kadanoff operator T(v, h) coupling visible and hidden spins. All state
/// indices follow decode_state in the operator's domain.
class RGOperator {
public:
    using Representation = std::variant<Coarsener, OperatorTable, InducedOperator>;

    RGOperator(std::size_t n_visible, std::size_t n_hidden, Representation rep,
               SpinDomain domain = SpinDomain::PlusMinusOne);

    std::size_t n_visible() const noexcept { return n_visible_; }
    std::size_t n_hidden() const noexcept { return n_hidden_; }
    SpinDomain domain() const noexcept { return domain_; }
    const Representation& representation() const noexcept { return rep_; }

    /// T(v, h); -inf where exp(T) = 0.
    double log_weight(std::uint64_t v, std::uint64_t h) const;
    double weight(std::uint64_t v, std::uint64_t h) const { return std::exp(log_weight(v, h)); }

    /// Applies a coarsener to a full configuration. Validation error for
    /// other representations.
    std::vector<std::int8_t> coarse_grain(std::span<const std::int8_t> v) const;

    /// Tabulated copy of any representation.
    RGOperator tabulated(std::size_t limit = kDefaultEnumerationLimit) const;

    /// Binary dump: u32 n_visible, u32 n_hidden, then 2^(N+M) little-endian
    /// doubles of exp(T) in row-major (v, h) order.
    void dump_table(const std::string& path, std::size_t limit = kDefaultEnumerationLimit) const;

private:
    std::size_t n_visible_;
    std::size_t n_hidden_;
    Representation rep_;
    SpinDomain domain_;
};

/// exp(T) = prod_j (1 + h_j v_{2j}) / 2: hidden j copies even site 2j.
RGOperator decimation_operator_1d(std::size_t n_visible);

/// Majority rule over 2x2 blocks; ties copy the block's top-left spin.
/// Hidden units are numbered row major on the (w/2) x (h/2) lattice.
RGOperator block_spin_operator_2d(const Lattice& lattice);

/// Coarse lattice produced by the operators above. Periodic lattices whose
/// coarse extent drops below 3 come back with free boundaries.
Lattice decimated_lattice(const Lattice& lattice);
Lattice block_lattice(const Lattice& lattice);

// ---------------------------------------------------------------------------
// Renormalized Hamiltonians and the exactness condition
// ---------------------------------------------------------------------------

struct RenormalizedHamiltonian {
    std::size_t n_hidden = 0;
    /// -H^RG(h) = log Tr_v exp(T(v,h) - H(v)), constant included.
    std::vector<double> log_weight;
    /// Normalized hidden distribution.
    std::vector<double> probability;
    /// log Tr_h exp(-H^RG) = -F^h.
    double log_norm = 0.0;
};

RenormalizedHamiltonian renormalized_hamiltonian(const RGOperator& op, const Hamiltonian& h,
                                                 std::size_t limit = kDefaultEnumerationLimit);

struct FittedHamiltonian {
    Hamiltonian hamiltonian;  // includes the constant as an empty-set term
    double residual = 0.0;    // max |log weight - fitted| over states
};

/// Least-squares fit of -H^RG over the given term basis plus a constant.
/// States with zero weight are excluded from the fit.
FittedHamiltonian fit_couplings(const RenormalizedHamiltonian& rh, std::span<const std::vector<std::uint32_t>> basis,
                                SpinDomain domain = SpinDomain::PlusMinusOne);

/// Fields and nearest-neighbour pairs of `lattice`.
std::vector<std::vector<std::uint32_t>> nearest_neighbor_basis(const Lattice& lattice);
/// Every non-empty subset of up to max_order sites out of n.
std::vector<std::vector<std::uint32_t>> all_subsets_basis(std::size_t n, std::size_t max_order);

/// F^h - F^v with F^h = -log Tr_h Tr_v exp(T - H) and F^v = -log Tr_v exp(-H).
double free_energy_difference(const RGOperator& op, const Hamiltonian& h,
                              std::size_t limit = kDefaultEnumerationLimit);

/// max over v of |Tr_h exp(T(v, h)) - 1|.
double exactness_residual(const RGOperator& op, std::size_t limit = kDefaultEnumerationLimit);

}  // namespace rgdl
