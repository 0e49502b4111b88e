#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rgdl/error.hpp"

namespace rgdl {

// ---------------------------------------------------------------------------
// Spin domains
// ---------------------------------------------------------------------------

enum class SpinDomain : std::uint8_t { PlusMinusOne = 0, ZeroOne = 1 };

constexpr std::int8_t spin_up(SpinDomain) noexcept { return 1; }
constexpr std::int8_t spin_down(SpinDomain d) noexcept { return d == SpinDomain::PlusMinusOne ? -1 : 0; }
constexpr bool in_domain(std::int8_t s, SpinDomain d) noexcept { return s == spin_up(d) || s == spin_down(d); }

/// Bijection between domains: s -> (s+1)/2 and its inverse.
constexpr std::int8_t convert_spin(std::int8_t s, SpinDomain from, SpinDomain to) noexcept {
    if (from == to) return s;
    return from == SpinDomain::PlusMinusOne ? static_cast<std::int8_t>((s + 1) / 2)
                                            : static_cast<std::int8_t>(2 * s - 1);
}

const char* domain_name(SpinDomain d) noexcept;
SpinDomain parse_domain(std::string_view text);

// ---------------------------------------------------------------------------
// Lattices
// ---------------------------------------------------------------------------

enum class LatticeKind : std::uint8_t { Chain1D = 0, Square2D = 1 };
enum class Boundary : std::uint8_t { Periodic = 0, Free = 1 };

/// Nearest-neighbour lattice. Sites of a Square2D lattice are numbered row
/// major, index = row * width + col. Periodic extents must be at least 3 so
/// that wrap-around bonds never coincide with interior ones.
class Lattice {
public:
    static Lattice chain(std::size_t length, Boundary boundary);
    static Lattice square(std::size_t width, std::size_t height, Boundary boundary);

    /// Parses "1d:<n>:<periodic|free>" or "2d:<w>x<h>:<periodic|free>".
    static Lattice parse(std::string_view text);
    std::string to_string() const;

    LatticeKind kind() const noexcept { return kind_; }
    Boundary boundary() const noexcept { return boundary_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t num_sites() const noexcept { return width_ * height_; }

    std::size_t site(std::size_t col, std::size_t row) const noexcept { return row * width_ + col; }
    std::pair<std::size_t, std::size_t> coords(std::size_t site) const noexcept {
        return {site % width_, site / width_};
    }

    /// Unique bonds (i < j).
    const std::vector<std::pair<std::uint32_t, std::uint32_t>>& bonds() const noexcept { return bonds_; }
    std::span<const std::uint32_t> neighbors(std::size_t site) const noexcept {
        return {nbr_.data() + nbr_offset_[site], nbr_offset_[site + 1] - nbr_offset_[site]};
    }

    friend bool operator==(const Lattice& a, const Lattice& b) noexcept {
        return a.kind_ == b.kind_ && a.boundary_ == b.boundary_ && a.width_ == b.width_ && a.height_ == b.height_;
    }

private:
    Lattice(LatticeKind kind, std::size_t width, std::size_t height, Boundary boundary);

    LatticeKind kind_;
    Boundary boundary_;
    std::size_t width_;
    std::size_t height_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> bonds_;
    std::vector<std::size_t> nbr_offset_;
    std::vector<std::uint32_t> nbr_;
};

// ---------------------------------------------------------------------------
// Configurations
// ---------------------------------------------------------------------------

struct SpinConfig {
    SpinDomain domain = SpinDomain::PlusMinusOne;
    std::vector<std::int8_t> values;

    std::size_t size() const noexcept { return values.size(); }
};

/// Throws validation error unless every value lies in the domain and, when
/// given, the length matches the lattice.
void validate(const SpinConfig& config, const Lattice* lattice = nullptr);

// State index <-> configuration. Bit i of the index is site i; a set bit is
// the "up" value of the domain.
void decode_state(std::uint64_t index, SpinDomain domain, std::span<std::int8_t> out) noexcept;
std::uint64_t encode_state(std::span<const std::int8_t> values, SpinDomain domain) noexcept;
SpinConfig config_from_index(std::uint64_t index, std::size_t num_sites, SpinDomain domain);

/// Dense rows x cols matrix of spins, row major; one configuration per row.
struct SpinMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    SpinDomain domain = SpinDomain::PlusMinusOne;
    std::vector<std::int8_t> data;

    SpinMatrix() = default;
    SpinMatrix(std::size_t r, std::size_t c, SpinDomain d)
        : rows(r), cols(c), domain(d), data(r * c, spin_down(d)) {}

    std::span<std::int8_t> row(std::size_t i) noexcept { return {data.data() + i * cols, cols}; }
    std::span<const std::int8_t> row(std::size_t i) const noexcept { return {data.data() + i * cols, cols}; }
};

// ---------------------------------------------------------------------------
// Hamiltonians
// ---------------------------------------------------------------------------

/// One coupling term: contributes -coupling * prod_{i in sites} v_i to the
/// energy. An empty site set is an additive constant.
struct Term {
    std::vector<std::uint32_t> sites;
    double coupling = 0.0;
};

class Hamiltonian {
public:
    Hamiltonian() = default;
    explicit Hamiltonian(std::size_t num_sites) : num_sites_(num_sites) {}

    /// Nearest-neighbour Ising model -J sum v_i v_j - field sum v_i.
    static Hamiltonian ising(const Lattice& lattice, double coupling, double field = 0.0);

    /// Appends a term. Site indices must be in range and distinct.
    Hamiltonian& add(std::vector<std::uint32_t> sites, double coupling);

    std::size_t num_sites() const noexcept { return num_sites_; }
    const std::vector<Term>& terms() const noexcept { return terms_; }
    bool pair_only() const noexcept;

    /// Sum of the coupling of every empty-set term.
    double constant() const noexcept;

    /// H[v] = -sum_terms K * prod v_i. Throws domain error when the
    /// configuration is shorter than the highest site index.
    double energy(std::span<const std::int8_t> values) const;
    double energy(const SpinConfig& config) const { return energy(config.values); }

    /// Operates on two independent systems side by side; sites of `other`
    /// are shifted by num_sites().
    Hamiltonian disjoint_union(const Hamiltonian& other) const;

    /// Text form, one term per line: "K <coupling> <idx...>", '#' comments.
    std::string to_text() const;
    /// num_sites == 0 infers the site count from the highest index.
    static Hamiltonian parse_text(std::string_view text, std::size_t num_sites = 0);

private:
    std::size_t num_sites_ = 0;
    std::vector<Term> terms_;
};

inline double energy(const SpinConfig& config, const Hamiltonian& h) { return h.energy(config); }

/// Expands an arbitrary energy table over all 2^n states into interaction
/// terms (Walsh transform for +-1 spins, Moebius transform for 0/1 spins).
/// The result reproduces the table exactly up to rounding, including the
/// constant term. Terms with |K| <= drop_below are omitted.
Hamiltonian hamiltonian_from_energies(std::span<const double> energies, std::size_t num_sites,
                                      SpinDomain domain, double drop_below = 0.0);

// ---------------------------------------------------------------------------
// Exact enumeration
// ---------------------------------------------------------------------------

inline constexpr std::size_t kDefaultEnumerationLimit = 24;

/// Throws capacity error when 2^bits states exceed the limit.
void require_enumerable(std::size_t bits, std::size_t limit = kDefaultEnumerationLimit);

double log_add_exp(double a, double b) noexcept;

/// log sum_{s=0}^{2^bits - 1} exp(log_weight(s)), accumulated in fixed-size
/// blocks and combined by a pairwise tree so the result does not depend on
/// how the work is scheduled.
template <class LogWeight>
double log_sum_states(std::size_t bits, LogWeight&& log_weight) {
    constexpr std::size_t kBlockBits = 10;
    const std::uint64_t total = std::uint64_t{1} << bits;
    const std::uint64_t block = std::uint64_t{1} << std::min(bits, kBlockBits);
    std::vector<double> partial;
    partial.reserve(static_cast<std::size_t>(total / block));
    std::vector<double> buf(static_cast<std::size_t>(block));
    for (std::uint64_t start = 0; start < total; start += block) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::uint64_t k = 0; k < block; ++k) {
            buf[k] = log_weight(start + k);
            if (buf[k] > mx) mx = buf[k];
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
            partial.push_back(mx);
            continue;
        }
        double sum = 0.0;
        for (std::uint64_t k = 0; k < block; ++k) sum += std::exp(buf[k] - mx);
        partial.push_back(mx + std::log(sum));
    }
    while (partial.size() > 1) {
        std::vector<double> next((partial.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < partial.size(); i += 2) next[i / 2] = log_add_exp(partial[i], partial[i + 1]);
        if (partial.size() % 2 == 1) next.back() = partial.back();
        partial = std::move(next);
    }
    return partial.front();
}

double log_partition(const Hamiltonian& h, SpinDomain domain = SpinDomain::PlusMinusOne,
                     std::size_t limit = kDefaultEnumerationLimit);
/// Z = Tr exp(-H) over all 2^N configurations.
double exact_partition(const Hamiltonian& h, SpinDomain domain = SpinDomain::PlusMinusOne,
                       std::size_t limit = kDefaultEnumerationLimit);
/// F = -log Z.
double exact_free_energy(const Hamiltonian& h, SpinDomain domain = SpinDomain::PlusMinusOne,
                         std::size_t limit = kDefaultEnumerationLimit);

/// exp(-H)/Z for every state index.
std::vector<double> boltzmann_distribution(const Hamiltonian& h, SpinDomain domain = SpinDomain::PlusMinusOne,
                                           std::size_t limit = kDefaultEnumerationLimit);

/// Energy of every state index.
std::vector<double> energy_table(const Hamiltonian& h, SpinDomain domain = SpinDomain::PlusMinusOne,
                                 std::size_t limit = kDefaultEnumerationLimit);

/// log Z of the +-1 nearest-neighbour chain from products of the 2x2
/// transfer matrix, rescaled at every step. Valid for lengths up to 10^6
/// and beyond; periodic chains need length >= 3.
double transfer_matrix_log_partition_1d(double coupling, std::size_t length, Boundary boundary);
double transfer_matrix_partition_1d(double coupling, std::size_t length, Boundary boundary);
/// Domain error unless the lattice is a chain.
double transfer_matrix_partition_1d(const Lattice& lattice, double coupling);

/// Half the L1 distance.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace rgdl
