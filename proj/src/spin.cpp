#include "rgdl/spin.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace rgdl {

const char* errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::domain: return "domain";
        case Errc::capacity: return "capacity";
        case Errc::validation: return "validation";
        case Errc::dimension: return "dimension";
        case Errc::io: return "io";
    }
    return "unknown";
}

const char* domain_name(SpinDomain d) noexcept { return d == SpinDomain::PlusMinusOne ? "pm1" : "01"; }

SpinDomain parse_domain(std::string_view text) {
    if (text == "pm1" || text == "+-1" || text == "pm") return SpinDomain::PlusMinusOne;
    if (text == "01" || text == "binary") return SpinDomain::ZeroOne;
    fail(Errc::validation, "unknown spin domain '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

Lattice::Lattice(LatticeKind kind, std::size_t width, std::size_t height, Boundary boundary)
    : kind_(kind), boundary_(boundary), width_(width), height_(height) {
    require(width >= 1 && height >= 1, Errc::validation, "lattice extents must be positive");
    if (boundary == Boundary::Periodic) {
        require(width >= 3 && (kind == LatticeKind::Chain1D || height >= 3), Errc::validation,
                "periodic lattice extents must be at least 3");
    }
    require(num_sites() <= std::numeric_limits<std::uint32_t>::max(), Errc::capacity, "lattice too large");

    auto add_bond = [this](std::size_t a, std::size_t b) {
        bonds_.emplace_back(static_cast<std::uint32_t>(std::min(a, b)), static_cast<std::uint32_t>(std::max(a, b)));
    };
    const bool periodic = boundary == Boundary::Periodic;
    for (std::size_t row = 0; row < height_; ++row) {
        for (std::size_t col = 0; col < width_; ++col) {
            const std::size_t i = site(col, row);
            if (col + 1 < width_) add_bond(i, site(col + 1, row));
            else if (periodic) add_bond(i, site(0, row));
            if (kind_ == LatticeKind::Square2D) {
                if (row + 1 < height_) add_bond(i, site(col, row + 1));
                else if (periodic) add_bond(i, site(col, 0));
            }
        }
    }
    std::sort(bonds_.begin(), bonds_.end());

    std::vector<std::size_t> degree(num_sites(), 0);
    for (auto [a, b] : bonds_) {
        ++degree[a];
        ++degree[b];
    }
    nbr_offset_.assign(num_sites() + 1, 0);
    for (std::size_t i = 0; i < num_sites(); ++i) nbr_offset_[i + 1] = nbr_offset_[i] + degree[i];
    nbr_.resize(nbr_offset_.back());
    std::vector<std::size_t> fill(nbr_offset_.begin(), nbr_offset_.end() - 1);
    for (auto [a, b] : bonds_) {
        nbr_[fill[a]++] = b;
        nbr_[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < num_sites(); ++i)
        std::sort(nbr_.begin() + static_cast<std::ptrdiff_t>(nbr_offset_[i]),
                  nbr_.begin() + static_cast<std::ptrdiff_t>(nbr_offset_[i + 1]));
}

Lattice Lattice::chain(std::size_t length, Boundary boundary) {
    return Lattice(LatticeKind::Chain1D, length, 1, boundary);
}

Lattice Lattice::square(std::size_t width, std::size_t height, Boundary boundary) {
    return Lattice(LatticeKind::Square2D, width, height, boundary);
}

namespace {

std::size_t parse_size(std::string_view text, const char* what) {
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        fail(Errc::validation, std::string("bad ") + what + " '" + std::string(text) + "'");
    return value;
}

}  // namespace

Lattice Lattice::parse(std::string_view text) {
    const auto c1 = text.find(':');
    const auto c2 = text.rfind(':');
    if (c1 == std::string_view::npos || c2 == c1)
        fail(Errc::validation, "lattice must look like 1d:<n>:<bc> or 2d:<w>x<h>:<bc>");
    const auto kind = text.substr(0, c1);
    const auto dims = text.substr(c1 + 1, c2 - c1 - 1);
    const auto bc_text = text.substr(c2 + 1);
    Boundary bc;
    if (bc_text == "periodic" || bc_text == "pbc") bc = Boundary::Periodic;
    else if (bc_text == "free" || bc_text == "open") bc = Boundary::Free;
    else fail(Errc::validation, "unknown boundary '" + std::string(bc_text) + "'");

    if (kind == "1d") return chain(parse_size(dims, "chain length"), bc);
    if (kind == "2d") {
        const auto x = dims.find('x');
        if (x == std::string_view::npos) fail(Errc::validation, "2d extents must look like <w>x<h>");
        return square(parse_size(dims.substr(0, x), "width"), parse_size(dims.substr(x + 1), "height"), bc);
    }
    fail(Errc::validation, "unknown lattice kind '" + std::string(kind) + "'");
}

std::string Lattice::to_string() const {
    std::string out = kind_ == LatticeKind::Chain1D ? "1d:" + std::to_string(width_)
                                                   : "2d:" + std::to_string(width_) + "x" + std::to_string(height_);
    out += boundary_ == Boundary::Periodic ? ":periodic" : ":free";
    return out;
}

// ---------------------------------------------------------------------------

void validate(const SpinConfig& config, const Lattice* lattice) {
    if (lattice && config.size() != lattice->num_sites())
        fail(Errc::validation, "configuration length does not match lattice");
    for (auto s : config.values)
        if (!in_domain(s, config.domain)) fail(Errc::validation, "spin value outside its domain");
}

void decode_state(std::uint64_t index, SpinDomain domain, std::span<std::int8_t> out) noexcept {
    const std::int8_t up = spin_up(domain), down = spin_down(domain);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ((index >> i) & 1U) ? up : down;
}

std::uint64_t encode_state(std::span<const std::int8_t> values, SpinDomain domain) noexcept {
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] == spin_up(domain)) index |= std::uint64_t{1} << i;
    return index;
}

SpinConfig config_from_index(std::uint64_t index, std::size_t num_sites, SpinDomain domain) {
    SpinConfig c{domain, std::vector<std::int8_t>(num_sites)};
    decode_state(index, domain, c.values);
    return c;
}

// ---------------------------------------------------------------------------

Hamiltonian Hamiltonian::ising(const Lattice& lattice, double coupling, double field) {
    Hamiltonian h(lattice.num_sites());
    for (auto [a, b] : lattice.bonds()) h.add({a, b}, coupling);
    if (field != 0.0)
        for (std::uint32_t i = 0; i < lattice.num_sites(); ++i) h.add({i}, field);
    return h;
}

Hamiltonian& Hamiltonian::add(std::vector<std::uint32_t> sites, double coupling) {
    for (auto s : sites)
        if (s >= num_sites_) fail(Errc::domain, "term site index out of range");
    auto sorted = sites;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        fail(Errc::validation, "duplicate site index within one term");
    if (!std::isfinite(coupling)) fail(Errc::validation, "coupling must be finite");
    terms_.push_back({std::move(sites), coupling});
    return *this;
}

bool Hamiltonian::pair_only() const noexcept {
    return std::all_of(terms_.begin(), terms_.end(), [](const Term& t) { return t.sites.size() == 2; });
}

double Hamiltonian::constant() const noexcept {
    double c = 0.0;
    for (const auto& t : terms_)
        if (t.sites.empty()) c += t.coupling;
    return c;
}

double Hamiltonian::energy(std::span<const std::int8_t> values) const {
    if (values.size() < num_sites_) fail(Errc::domain, "configuration shorter than Hamiltonian index range");
    double e = 0.0;
    for (const auto& t : terms_) {
        int prod = 1;
        for (auto s : t.sites) prod *= values[s];
        e -= t.coupling * prod;
    }
    return e;
}

Hamiltonian Hamiltonian::disjoint_union(const Hamiltonian& other) const {
    Hamiltonian out(num_sites_ + other.num_sites_);
    out.terms_ = terms_;
    for (const auto& t : other.terms_) {
        Term shifted = t;
        for (auto& s : shifted.sites) s += static_cast<std::uint32_t>(num_sites_);
        out.terms_.push_back(std::move(shifted));
    }
    return out;
}

std::string Hamiltonian::to_text() const {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "# sites " << num_sites_ << "\n";
    for (const auto& t : terms_) {
        os << "K " << t.coupling;
        for (auto s : t.sites) os << ' ' << s;
        os << '\n';
    }
    return os.str();
}

Hamiltonian Hamiltonian::parse_text(std::string_view text, std::size_t num_sites) {
    std::vector<Term> terms;
    std::size_t max_index = 0;
    bool any_index = false;
    std::istringstream in{std::string(text)};
    in.imbue(std::locale::classic());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        ls.imbue(std::locale::classic());
        std::string tag;
        if (!(ls >> tag)) continue;
        const auto where = "line " + std::to_string(line_no);
        if (tag != "K") fail(Errc::io, where + ": expected 'K <coupling> <idx...>'");
        Term t;
        if (!(ls >> t.coupling)) fail(Errc::io, where + ": missing coupling");
        long long idx;
        while (ls >> idx) {
            if (idx < 0) fail(Errc::domain, where + ": negative site index");
            t.sites.push_back(static_cast<std::uint32_t>(idx));
            max_index = std::max<std::size_t>(max_index, static_cast<std::size_t>(idx));
            any_index = true;
        }
        if (!ls.eof()) fail(Errc::io, where + ": malformed site index");
        terms.push_back(std::move(t));
    }
    if (num_sites == 0) num_sites = any_index ? max_index + 1 : 0;
    Hamiltonian h(num_sites);
    for (auto& t : terms) h.add(std::move(t.sites), t.coupling);
    return h;
}

Hamiltonian hamiltonian_from_energies(std::span<const double> energies, std::size_t num_sites, SpinDomain domain,
                                      double drop_below) {
    require_enumerable(num_sites);
    const std::size_t states = std::size_t{1} << num_sites;
    if (energies.size() != states) fail(Errc::dimension, "energy table must have 2^N entries");
    // Expand f = -E so that f(s) = sum_S K_S prod_{i in S} s_i.
    std::vector<double> coef(states);
    for (std::size_t s = 0; s < states; ++s) coef[s] = -energies[s];
    for (std::size_t bit = 0; bit < num_sites; ++bit) {
        const std::size_t step = std::size_t{1} << bit;
        for (std::size_t s = 0; s < states; ++s) {
            if (s & step) continue;
            const double lo = coef[s], hi = coef[s | step];
            if (domain == SpinDomain::PlusMinusOne) {
                coef[s] = lo + hi;
                coef[s | step] = hi - lo;
            } else {
                coef[s | step] = hi - lo;
            }
        }
    }
    if (domain == SpinDomain::PlusMinusOne)
        for (auto& c : coef) c /= static_cast<double>(states);

    Hamiltonian h(num_sites);
    for (std::size_t subset = 0; subset < states; ++subset) {
        if (std::abs(coef[subset]) <= drop_below) continue;
        std::vector<std::uint32_t> sites;
        for (std::size_t i = 0; i < num_sites; ++i)
            if (subset & (std::size_t{1} << i)) sites.push_back(static_cast<std::uint32_t>(i));
        h.add(std::move(sites), coef[subset]);
    }
    return h;
}

// ---------------------------------------------------------------------------

void require_enumerable(std::size_t bits, std::size_t limit) {
    if (bits > limit || bits >= 63)
        fail(Errc::capacity, "enumeration over " + std::to_string(bits) + " spins exceeds limit of " +
                                 std::to_string(limit));
}

double log_add_exp(double a, double b) noexcept {
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
}

double log_partition(const Hamiltonian& h, SpinDomain domain, std::size_t limit) {
    require_enumerable(h.num_sites(), limit);
    std::vector<std::int8_t> v(h.num_sites());
    return log_sum_states(h.num_sites(), [&](std::uint64_t s) {
        decode_state(s, domain, v);
        return -h.energy(v);
    });
}

double exact_partition(const Hamiltonian& h, SpinDomain domain, std::size_t limit) {
    return std::exp(log_partition(h, domain, limit));
}

double exact_free_energy(const Hamiltonian& h, SpinDomain domain, std::size_t limit) {
    return -log_partition(h, domain, limit);
}

std::vector<double> energy_table(const Hamiltonian& h, SpinDomain domain, std::size_t limit) {
    require_enumerable(h.num_sites(), limit);
    const std::size_t states = std::size_t{1} << h.num_sites();
    std::vector<double> out(states);
    std::vector<std::int8_t> v(h.num_sites());
    for (std::size_t s = 0; s < states; ++s) {
        decode_state(s, domain, v);
        out[s] = h.energy(v);
    }
    return out;
}

std::vector<double> boltzmann_distribution(const Hamiltonian& h, SpinDomain domain, std::size_t limit) {
    auto p = energy_table(h, domain, limit);
    const double log_z = log_sum_states(h.num_sites(), [&](std::uint64_t s) { return -p[s]; });
    for (auto& x : p) x = std::exp(-x - log_z);
    return p;
}

namespace {

using Mat2 = std::array<double, 4>;  // row major

Mat2 mul(const Mat2& a, const Mat2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3]};
}

// Returns M^n / exp(log_scale) with log_scale accumulated into *log_scale.
Mat2 scaled_power(Mat2 m, std::size_t n, double* log_scale) {
    auto renorm = [](Mat2& x, double* acc) {
        const double s = std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2]), std::abs(x[3])});
        for (auto& e : x) e /= s;
        *acc += std::log(s);
    };
    Mat2 result{1.0, 0.0, 0.0, 1.0};
    double base_scale = 0.0;
    renorm(m, &base_scale);
    double acc = 0.0;
    double base_acc = base_scale;
    while (n > 0) {
        if (n & 1U) {
            result = mul(result, m);
            acc += base_acc;
            renorm(result, &acc);
        }
        n >>= 1U;
        if (n > 0) {
            m = mul(m, m);
            base_acc *= 2.0;
            renorm(m, &base_acc);
        }
    }
    *log_scale += acc;
    return result;
}

}  // namespace

double transfer_matrix_log_partition_1d(double coupling, std::size_t length, Boundary boundary) {
    require(length >= 1, Errc::validation, "chain length must be positive");
    // T(s, s') = exp(J s s'), states ordered (+1, -1).
    const Mat2 t{std::exp(coupling), std::exp(-coupling), std::exp(-coupling), std::exp(coupling)};
    double log_scale = 0.0;
    if (boundary == Boundary::Periodic) {
        require(length >= 3, Errc::validation, "periodic chain length must be at least 3");
        const Mat2 p = scaled_power(t, length, &log_scale);
        return log_scale + std::log(p[0] + p[3]);
    }
    const Mat2 p = scaled_power(t, length - 1, &log_scale);
    return log_scale + std::log(p[0] + p[1] + p[2] + p[3]);
}

double transfer_matrix_partition_1d(double coupling, std::size_t length, Boundary boundary) {
    return std::exp(transfer_matrix_log_partition_1d(coupling, length, boundary));
}

double transfer_matrix_partition_1d(const Lattice& lattice, double coupling) {
    if (lattice.kind() != LatticeKind::Chain1D) fail(Errc::domain, "transfer matrix requires a 1D chain");
    return transfer_matrix_partition_1d(coupling, lattice.num_sites(), lattice.boundary());
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) fail(Errc::dimension, "distributions over different state spaces");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p[i] - q[i]);
    return 0.5 * d;
}

}  // namespace rgdl
