#include "rgdl/rg.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rgdl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

double guarded_atanh(double x) {
    if (!(std::abs(x) < 1.0 - 1e-15)) fail(Errc::domain, "atanh argument too close to +-1");
    return 0.5 * std::log((1.0 + x) / (1.0 - x));
}

double decimation_step_coupling(double coupling) {
    if (!(coupling >= 0.0) || !std::isfinite(coupling))
        fail(Errc::domain, "decimation requires a finite non-negative coupling");
    // atanh(tanh^2 J) = log(cosh 2J) / 2 = J + log1p(exp(-4J))/2 - log(2)/2
    return coupling + 0.5 * std::log1p(std::exp(-4.0 * coupling)) - 0.5 * std::log(2.0);
}

double closed_form_coupling(double initial, std::size_t steps) {
    if (!(initial >= 0.0) || !std::isfinite(initial))
        fail(Errc::domain, "decimation requires a finite non-negative coupling");
    double t = std::tanh(initial);
    for (std::size_t k = 0; k < steps; ++k) t *= t;
    return guarded_atanh(t);
}

RGFlow rg_flow(double initial, std::size_t steps) {
    RGFlow flow;
    flow.couplings.reserve(steps + 1);
    if (!(initial >= 0.0) || !std::isfinite(initial))
        fail(Errc::domain, "decimation requires a finite non-negative coupling");
    flow.couplings.push_back(initial);
    for (std::size_t k = 0; k < steps; ++k) flow.couplings.push_back(decimation_step_coupling(flow.couplings.back()));
    return flow;
}

std::string rg_flow_csv(const RGFlow& flow) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "step,J,J_closed_form\n";
    for (std::size_t k = 0; k < flow.couplings.size(); ++k) {
        os << k << ',' << flow.couplings[k] << ',';
        try {
            os << closed_form_coupling(flow.couplings.front(), k);
        } catch (const Error&) {
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------

RGOperator::RGOperator(std::size_t n_visible, std::size_t n_hidden, Representation rep, SpinDomain domain)
    : n_visible_(n_visible), n_hidden_(n_hidden), rep_(std::move(rep)), domain_(domain) {
    if (auto* c = std::get_if<Coarsener>(&rep_)) {
        if (c->blocks.size() != n_hidden) fail(Errc::dimension, "one block per hidden unit required");
        for (const auto& block : c->blocks) {
            if (block.empty()) fail(Errc::validation, "empty coarse-graining block");
            for (auto s : block)
                if (s >= n_visible) fail(Errc::domain, "block site out of range");
        }
    } else if (auto* t = std::get_if<OperatorTable>(&rep_)) {
        require_enumerable(n_visible + n_hidden);
        if (t->weights.size() != (std::size_t{1} << (n_visible + n_hidden)))
            fail(Errc::dimension, "operator table must have 2^(N+M) entries");
        for (double x : t->weights)
            if (!(x >= 0.0)) fail(Errc::validation, "operator table entries must be non-negative");
    } else if (!std::get<InducedOperator>(rep_).log_weight) {
        fail(Errc::validation, "induced operator without a weight function");
    }
}

double RGOperator::log_weight(std::uint64_t v, std::uint64_t h) const {
    if (auto* c = std::get_if<Coarsener>(&rep_)) {
        for (std::size_t j = 0; j < c->blocks.size(); ++j) {
            const auto& block = c->blocks[j];
            int sum = 0;
            for (auto s : block) sum += ((v >> s) & 1U) ? 1 : -1;
            const bool up = sum > 0 || (sum == 0 && ((v >> block.front()) & 1U));
            if (up != static_cast<bool>((h >> j) & 1U)) return kNegInf;
        }
        return 0.0;
    }
    if (auto* t = std::get_if<OperatorTable>(&rep_)) return std::log(t->weights[(v << n_hidden_) | h]);
    return std::get<InducedOperator>(rep_).log_weight(v, h);
}

std::vector<std::int8_t> RGOperator::coarse_grain(std::span<const std::int8_t> v) const {
    const auto* c = std::get_if<Coarsener>(&rep_);
    if (!c) fail(Errc::validation, "only deterministic operators can coarse-grain a configuration");
    if (v.size() != n_visible_) fail(Errc::dimension, "configuration does not match operator");
    std::vector<std::int8_t> h(n_hidden_);
    const std::int8_t up = spin_up(domain_), down = spin_down(domain_);
    for (std::size_t j = 0; j < n_hidden_; ++j) {
        int sum = 0;
        for (auto s : c->blocks[j]) sum += v[s] == up ? 1 : -1;
        h[j] = (sum > 0 || (sum == 0 && v[c->blocks[j].front()] == up)) ? up : down;
    }
    return h;
}

RGOperator RGOperator::tabulated(std::size_t limit) const {
    require_enumerable(n_visible_ + n_hidden_, limit);
    OperatorTable table;
    table.weights.resize(std::size_t{1} << (n_visible_ + n_hidden_));
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << n_visible_); ++v)
        for (std::uint64_t h = 0; h < (std::uint64_t{1} << n_hidden_); ++h)
            table.weights[(v << n_hidden_) | h] = weight(v, h);
    return RGOperator(n_visible_, n_hidden_, std::move(table), domain_);
}

void RGOperator::dump_table(const std::string& path, std::size_t limit) const {
    const RGOperator t = tabulated(limit);
    const auto& w = std::get<OperatorTable>(t.rep_).weights;
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
    auto put = [&out](std::uint64_t value, int bytes) {
        for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xFFU));
    };
    put(n_visible_, 4);
    put(n_hidden_, 4);
    for (double x : w) put(std::bit_cast<std::uint64_t>(x), 8);
    if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

RGOperator decimation_operator_1d(std::size_t n_visible) {
    if (n_visible == 0 || n_visible % 2 != 0) fail(Errc::validation, "decimation needs an even, positive chain length");
    Coarsener c;
    for (std::uint32_t j = 0; j < n_visible / 2; ++j) c.blocks.push_back({2 * j});
    return RGOperator(n_visible, n_visible / 2, std::move(c));
}

RGOperator block_spin_operator_2d(const Lattice& lattice) {
    if (lattice.kind() != LatticeKind::Square2D) fail(Errc::domain, "block spin needs a square lattice");
    if (lattice.width() % 2 != 0 || lattice.height() % 2 != 0)
        fail(Errc::validation, "block spin needs even lattice extents");
    Coarsener c;
    for (std::size_t by = 0; by < lattice.height() / 2; ++by) {
        for (std::size_t bx = 0; bx < lattice.width() / 2; ++bx) {
            const std::size_t x = 2 * bx, y = 2 * by;
            c.blocks.push_back({static_cast<std::uint32_t>(lattice.site(x, y)),
                                static_cast<std::uint32_t>(lattice.site(x + 1, y)),
                                static_cast<std::uint32_t>(lattice.site(x, y + 1)),
                                static_cast<std::uint32_t>(lattice.site(x + 1, y + 1))});
        }
    }
    const std::size_t m = c.blocks.size();
    return RGOperator(lattice.num_sites(), m, std::move(c));
}

Lattice decimated_lattice(const Lattice& lattice) {
    if (lattice.kind() != LatticeKind::Chain1D || lattice.num_sites() % 2 != 0)
        fail(Errc::validation, "decimation needs an even chain");
    const std::size_t n = lattice.num_sites() / 2;
    return Lattice::chain(n, n < 3 ? Boundary::Free : lattice.boundary());
}

Lattice block_lattice(const Lattice& lattice) {
    if (lattice.kind() != LatticeKind::Square2D || lattice.width() % 2 || lattice.height() % 2)
        fail(Errc::validation, "block spin needs a square lattice with even extents");
    const std::size_t w = lattice.width() / 2, h = lattice.height() / 2;
    return Lattice::square(w, h, std::min(w, h) < 3 ? Boundary::Free : lattice.boundary());
}

// ---------------------------------------------------------------------------

RenormalizedHamiltonian renormalized_hamiltonian(const RGOperator& op, const Hamiltonian& h, std::size_t limit) {
    if (h.num_sites() != op.n_visible()) fail(Errc::dimension, "Hamiltonian does not match operator visible layer");
    require_enumerable(op.n_visible() + op.n_hidden(), limit);
    const std::size_t nv = op.n_visible(), nh = op.n_hidden();
    const auto energies = energy_table(h, op.domain(), limit);

    RenormalizedHamiltonian rh;
    rh.n_hidden = nh;
    rh.log_weight.resize(std::size_t{1} << nh);
    for (std::uint64_t hs = 0; hs < rh.log_weight.size(); ++hs)
        rh.log_weight[hs] = log_sum_states(nv, [&](std::uint64_t v) { return op.log_weight(v, hs) - energies[v]; });
    rh.log_norm = log_sum_states(nh, [&](std::uint64_t hs) { return rh.log_weight[hs]; });
    rh.probability.resize(rh.log_weight.size());
    for (std::size_t k = 0; k < rh.probability.size(); ++k)
        rh.probability[k] = std::exp(rh.log_weight[k] - rh.log_norm);
    return rh;
}

FittedHamiltonian fit_couplings(const RenormalizedHamiltonian& rh, std::span<const std::vector<std::uint32_t>> basis,
                                SpinDomain domain) {
    for (const auto& term : basis)
        for (auto s : term)
            if (s >= rh.n_hidden) fail(Errc::domain, "basis term site out of range");
    std::vector<std::uint64_t> rows;
    for (std::uint64_t s = 0; s < rh.log_weight.size(); ++s)
        if (std::isfinite(rh.log_weight[s])) rows.push_back(s);
    const auto cols = static_cast<Eigen::Index>(basis.size() + 1);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), cols);
    Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
    std::vector<std::int8_t> spins(rh.n_hidden);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        decode_state(rows[r], domain, spins);
        const auto ri = static_cast<Eigen::Index>(r);
        design(ri, 0) = 1.0;
        for (std::size_t k = 0; k < basis.size(); ++k) {
            double prod = 1.0;
            for (auto s : basis[k]) prod *= spins[s];
            design(ri, static_cast<Eigen::Index>(k + 1)) = prod;
        }
        target(ri) = rh.log_weight[rows[r]];
    }
    // -H = sum_S K_S prod h, so the fitted coefficients are the couplings.
    const Eigen::VectorXd coef = design.completeOrthogonalDecomposition().solve(target);

    FittedHamiltonian out{Hamiltonian(rh.n_hidden), 0.0};
    out.hamiltonian.add({}, coef(0));
    for (std::size_t k = 0; k < basis.size(); ++k) out.hamiltonian.add(basis[k], coef(static_cast<Eigen::Index>(k + 1)));
    if (!rows.empty()) out.residual = (design * coef - target).cwiseAbs().maxCoeff();
    return out;
}

std::vector<std::vector<std::uint32_t>> nearest_neighbor_basis(const Lattice& lattice) {
    std::vector<std::vector<std::uint32_t>> basis;
    for (std::uint32_t i = 0; i < lattice.num_sites(); ++i) basis.push_back({i});
    for (auto [a, b] : lattice.bonds()) basis.push_back({a, b});
    return basis;
}

std::vector<std::vector<std::uint32_t>> all_subsets_basis(std::size_t n, std::size_t max_order) {
    require_enumerable(n);
    std::vector<std::vector<std::uint32_t>> basis;
    for (std::size_t order = 1; order <= std::min(n, max_order); ++order) {
        for (std::uint64_t s = 1; s < (std::uint64_t{1} << n); ++s) {
            if (static_cast<std::size_t>(std::popcount(s)) != order) continue;
            std::vector<std::uint32_t> term;
            for (std::uint32_t i = 0; i < n; ++i)
                if ((s >> i) & 1U) term.push_back(i);
            basis.push_back(std::move(term));
        }
    }
    return basis;
}

double free_energy_difference(const RGOperator& op, const Hamiltonian& h, std::size_t limit) {
    const auto rh = renormalized_hamiltonian(op, h, limit);
    const double free_hidden = -rh.log_norm;
    const double free_visible = -log_partition(h, op.domain(), limit);
    return free_hidden - free_visible;
}

double exactness_residual(const RGOperator& op, std::size_t limit) {
    require_enumerable(op.n_visible() + op.n_hidden(), limit);
    double worst = 0.0;
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << op.n_visible()); ++v) {
        const double log_trace = log_sum_states(op.n_hidden(), [&](std::uint64_t h) { return op.log_weight(v, h); });
        worst = std::max(worst, std::abs(std::exp(log_trace) - 1.0));
    }
    return worst;
}

}  // namespace rgdl
