#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgdl/rng.hpp"
#include "rgdl/spin.hpp"

namespace rgdl {

struct SamplerConfig {
    std::uint64_t seed = 0;
    std::size_t burn_in_sweeps = 1000;
    std::size_t thinning_sweeps = 10;
    std::size_t num_samples = 1;
    /// Independent chains; chain c uses RNG stream c and contributes a
    /// contiguous block of rows in chain order.
    std::size_t chains = 1;
};

struct SampleDataset {
    Lattice lattice;
    SpinMatrix samples;

    std::size_t num_samples() const noexcept { return samples.rows; }
    std::size_t num_sites() const noexcept { return samples.cols; }
};

/// Single-site Metropolis over a general Hamiltonian. Holds per-site term
/// lists so that an energy change only touches terms containing the site.
class MetropolisSampler {
public:
    explicit MetropolisSampler(const Hamiltonian& h);

    /// One sweep: each site proposed once in raster order, accepted with
    /// probability min(1, exp(-dH)).
    void sweep(SpinConfig& config, Rng& rng) const;

    double delta_energy(const SpinConfig& config, std::size_t site) const;

private:
    Hamiltonian h_;
    std::vector<std::size_t> offset_;
    std::vector<std::uint32_t> terms_of_site_;
};

inline void metropolis_sweep(SpinConfig& config, const Hamiltonian& h, Rng& rng) {
    MetropolisSampler(h).sweep(config, rng);
}

/// Runs cfg.chains independent chains from uniformly random starts and
/// keeps one configuration every thinning_sweeps sweeps after burn-in.
SampleDataset sample_ensemble(const Hamiltonian& h, const Lattice& lattice, const SamplerConfig& cfg,
                              SpinDomain domain = SpinDomain::PlusMinusOne);

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
};

struct Observables {
    Estimate magnetization;
    Estimate abs_magnetization;
    Estimate nn_correlation;
    std::size_t num_samples = 0;
    std::size_t num_batches = 0;
};

/// Per-sample magnetization per site, its absolute value and the mean
/// nearest-neighbour product, all in +-1 units. Standard errors from batch
/// means over up to 20 contiguous batches.
Observables estimate_observables(const SampleDataset& ds);

/// Binary file: "RGDL", u16 version, u32 N, u32 rows, u8 domain, lattice
/// descriptor (u8 kind, u8 boundary, u32 width, u32 height), then the
/// samples bit-packed row major, LSB first, up-spin = 1. Little endian.
void save_dataset(const SampleDataset& ds, const std::string& path);
SampleDataset load_dataset(const std::string& path);
std::vector<std::uint8_t> encode_dataset(const SampleDataset& ds);
SampleDataset decode_dataset(const std::vector<std::uint8_t>& bytes);

/// Same samples expressed in another spin domain.
SampleDataset convert_domain(const SampleDataset& ds, SpinDomain domain);

/// One sample per line, comma separated, values in the dataset's domain.
void save_dataset_csv(const SampleDataset& ds, const std::string& path);

}  // namespace rgdl
