#include "rgdl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>

namespace rgdl {

MetropolisSampler::MetropolisSampler(const Hamiltonian& h) : h_(h) {
    const std::size_t n = h.num_sites();
    std::vector<std::size_t> count(n, 0);
    for (const auto& t : h.terms())
        for (auto s : t.sites) ++count[s];
    offset_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) offset_[i + 1] = offset_[i] + count[i];
    terms_of_site_.resize(offset_.back());
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (std::uint32_t k = 0; k < h.terms().size(); ++k)
        for (auto s : h.terms()[k].sites) terms_of_site_[fill[s]++] = k;
}

double MetropolisSampler::delta_energy(const SpinConfig& config, std::size_t site) const {
    const auto& v = config.values;
    const int old_value = v[site];
    const int new_value = old_value == spin_up(config.domain) ? spin_down(config.domain) : spin_up(config.domain);
    double delta = 0.0;
    for (std::size_t k = offset_[site]; k < offset_[site + 1]; ++k) {
        const Term& t = h_.terms()[terms_of_site_[k]];
        int rest = 1;
        for (auto s : t.sites)
            if (s != site) rest *= v[s];
        delta -= t.coupling * rest * (new_value - old_value);
    }
    return delta;
}

void MetropolisSampler::sweep(SpinConfig& config, Rng& rng) const {
    if (config.size() != h_.num_sites()) fail(Errc::dimension, "configuration does not match Hamiltonian");
    const std::int8_t up = spin_up(config.domain), down = spin_down(config.domain);
    for (std::size_t i = 0; i < config.size(); ++i) {
        const double delta = delta_energy(config, i);
        // Always draw so the stream position does not depend on the state.
        const double u = rng.uniform();
        if (delta <= 0.0 || u < std::exp(-delta)) config.values[i] = config.values[i] == up ? down : up;
    }
}

SampleDataset sample_ensemble(const Hamiltonian& h, const Lattice& lattice, const SamplerConfig& cfg,
                              SpinDomain domain) {
    require(cfg.num_samples >= 1, Errc::validation, "num_samples must be at least 1");
    require(cfg.chains >= 1, Errc::validation, "chains must be at least 1");
    require(cfg.thinning_sweeps >= 1, Errc::validation, "thinning_sweeps must be at least 1");
    if (h.num_sites() != lattice.num_sites()) fail(Errc::dimension, "Hamiltonian does not match lattice");

    const std::size_t n = lattice.num_sites();
    SampleDataset ds{lattice, SpinMatrix(cfg.num_samples, n, domain)};
    const MetropolisSampler sampler(h);

    const std::size_t chains = std::min(cfg.chains, cfg.num_samples);
    auto run_chain = [&](std::size_t chain) {
        const std::size_t first = chain * cfg.num_samples / chains;
        const std::size_t last = (chain + 1) * cfg.num_samples / chains;
        Rng rng(cfg.seed, chain);
        SpinConfig config{domain, std::vector<std::int8_t>(n)};
        for (auto& s : config.values) s = rng.bernoulli(0.5) ? spin_up(domain) : spin_down(domain);
        for (std::size_t k = 0; k < cfg.burn_in_sweeps; ++k) sampler.sweep(config, rng);
        for (std::size_t row = first; row < last; ++row) {
            for (std::size_t k = 0; k < cfg.thinning_sweeps; ++k) sampler.sweep(config, rng);
            std::copy(config.values.begin(), config.values.end(), ds.samples.row(row).begin());
        }
    };

    const std::size_t workers = std::min<std::size_t>(chains, std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t c = 0; c < chains; ++c) run_chain(c);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t c = w; c < chains; c += workers) run_chain(c);
            });
    }
    return ds;
}

Observables estimate_observables(const SampleDataset& ds) {
    const std::size_t rows = ds.num_samples();
    require(rows >= 1, Errc::validation, "cannot estimate observables of an empty dataset");
    const auto& bonds = ds.lattice.bonds();
    const SpinDomain domain = ds.samples.domain;

    std::vector<double> m(rows), am(rows), c(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = ds.samples.row(r);
        double sum = 0.0;
        for (auto s : row) sum += convert_spin(s, domain, SpinDomain::PlusMinusOne);
        m[r] = sum / static_cast<double>(row.size());
        am[r] = std::abs(m[r]);
        double corr = 0.0;
        for (auto [a, b] : bonds)
            corr += convert_spin(row[a], domain, SpinDomain::PlusMinusOne) *
                    convert_spin(row[b], domain, SpinDomain::PlusMinusOne);
        c[r] = bonds.empty() ? 0.0 : corr / static_cast<double>(bonds.size());
    }

    const std::size_t batches = rows >= 40 ? 20 : rows;
    auto batch_estimate = [&](const std::vector<double>& x) {
        Estimate e;
        for (double v : x) e.mean += v;
        e.mean /= static_cast<double>(rows);
        if (batches < 2) return e;
        std::vector<double> means(batches, 0.0);
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t lo = b * rows / batches, hi = (b + 1) * rows / batches;
            for (std::size_t r = lo; r < hi; ++r) means[b] += x[r];
            means[b] /= static_cast<double>(hi - lo);
        }
        double var = 0.0;
        for (double bm : means) var += (bm - e.mean) * (bm - e.mean);
        var /= static_cast<double>(batches - 1);
        e.std_error = std::sqrt(var / static_cast<double>(batches));
        return e;
    };
    return {batch_estimate(m), batch_estimate(am), batch_estimate(c), rows, batches};
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'G', 'D', 'L'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 2 + 4 + 4 + 1 + 1 + 1 + 4 + 4;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t value, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t& pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > in.size()) fail(Errc::io, "dataset file truncated");
    std::uint64_t value = 0;
    for (int i = 0; i < bytes; ++i) value |= std::uint64_t{in[pos + i]} << (8 * i);
    pos += static_cast<std::size_t>(bytes);
    return value;
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const SampleDataset& ds) {
    if (ds.num_sites() != ds.lattice.num_sites()) fail(Errc::dimension, "dataset width does not match lattice");
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le(out, kVersion, 2);
    put_le(out, ds.num_sites(), 4);
    put_le(out, ds.num_samples(), 4);
    put_le(out, static_cast<std::uint8_t>(ds.samples.domain), 1);
    put_le(out, static_cast<std::uint8_t>(ds.lattice.kind()), 1);
    put_le(out, static_cast<std::uint8_t>(ds.lattice.boundary()), 1);
    put_le(out, ds.lattice.width(), 4);
    put_le(out, ds.lattice.height(), 4);
    const std::size_t bits = ds.samples.data.size();
    std::vector<std::uint8_t> payload((bits + 7) / 8, 0);
    const std::int8_t up = spin_up(ds.samples.domain);
    for (std::size_t k = 0; k < bits; ++k)
        if (ds.samples.data[k] == up) payload[k / 8] |= static_cast<std::uint8_t>(1U << (k % 8));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

SampleDataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
        fail(Errc::io, "not an RGDL dataset");
    std::size_t pos = 4;
    if (get_le(bytes, pos, 2) != kVersion) fail(Errc::io, "unsupported dataset version");
    const std::size_t n = get_le(bytes, pos, 4);
    const std::size_t rows = get_le(bytes, pos, 4);
    const auto domain_raw = get_le(bytes, pos, 1);
    const auto kind_raw = get_le(bytes, pos, 1);
    const auto bc_raw = get_le(bytes, pos, 1);
    const std::size_t width = get_le(bytes, pos, 4);
    const std::size_t height = get_le(bytes, pos, 4);
    if (domain_raw > 1 || kind_raw > 1 || bc_raw > 1) fail(Errc::io, "corrupt dataset header");
    const auto domain = static_cast<SpinDomain>(domain_raw);
    const auto bc = static_cast<Boundary>(bc_raw);
    Lattice lattice = kind_raw == 0 ? Lattice::chain(width, bc) : Lattice::square(width, height, bc);
    if (lattice.num_sites() != n) fail(Errc::io, "dataset header inconsistent with lattice");

    const std::size_t total = n * rows;
    if (bytes.size() - pos != (total + 7) / 8) fail(Errc::io, "dataset payload has wrong length");
    SampleDataset ds{std::move(lattice), SpinMatrix(rows, n, domain)};
    const std::int8_t up = spin_up(domain), down = spin_down(domain);
    for (std::size_t k = 0; k < total; ++k) ds.samples.data[k] = (bytes[pos + k / 8] >> (k % 8)) & 1U ? up : down;
    return ds;
}

void save_dataset(const SampleDataset& ds, const std::string& path) {
    const auto bytes = encode_dataset(ds);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

SampleDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io, "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_dataset(bytes);
}

SampleDataset convert_domain(const SampleDataset& ds, SpinDomain domain) {
    SampleDataset out{ds.lattice, SpinMatrix(ds.num_samples(), ds.num_sites(), domain)};
    for (std::size_t k = 0; k < ds.samples.data.size(); ++k)
        out.samples.data[k] = convert_spin(ds.samples.data[k], ds.samples.domain, domain);
    return out;
}

void save_dataset_csv(const SampleDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(Errc::io, "cannot open '" + path + "' for writing");
    std::string line;
    for (std::size_t r = 0; r < ds.num_samples(); ++r) {
        line.clear();
        auto row = ds.samples.row(r);
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) line += ',';
            line += std::to_string(static_cast<int>(row[i]));
        }
        line += '\n';
        out << line;
    }
    if (!out) fail(Errc::io, "failed writing '" + path + "'");
}

}  // namespace rgdl
