#define RGDL_BUILDING
#include "rgdl/rgdl.h"

#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include "rgdl/dnn.hpp"
#include "rgdl/mapping.hpp"
#include "rgdl/rbm.hpp"
#include "rgdl/rg.hpp"
#include "rgdl/sampler.hpp"

struct rgdl_lattice {
    rgdl::Lattice value;
};
struct rgdl_hamiltonian {
    rgdl::Hamiltonian value;
};
struct rgdl_dataset {
    rgdl::SampleDataset value;
};
struct rgdl_rbm {
    rgdl::RBMParams value;
};
struct rgdl_stack {
    rgdl::DNNStack value;
};

namespace {

thread_local std::string last_error;

rgdl_status to_status(rgdl::Errc code) {
    switch (code) {
        case rgdl::Errc::domain: return RGDL_ERR_DOMAIN;
        case rgdl::Errc::capacity: return RGDL_ERR_CAPACITY;
        case rgdl::Errc::validation: return RGDL_ERR_VALIDATION;
        case rgdl::Errc::dimension: return RGDL_ERR_DIMENSION;
        case rgdl::Errc::io: return RGDL_ERR_IO;
    }
    return RGDL_ERR_INTERNAL;
}

template <class F>
rgdl_status guarded(F&& body) {
    try {
        last_error.clear();
        body();
        return RGDL_OK;
    } catch (const rgdl::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return RGDL_ERR_CAPACITY;
    } catch (const std::exception& e) {
        last_error = e.what();
        return RGDL_ERR_INTERNAL;
    }
}

rgdl_status null_status() {
    last_error = "null argument";
    return RGDL_ERR_NULL;
}

rgdl_status write_string(const std::string& s, char* buf, size_t cap, size_t* needed) {
    if (needed) *needed = s.size();
    if (buf && cap > 0) {
        const size_t n = std::min(cap - 1, s.size());
        std::memcpy(buf, s.data(), n);
        buf[n] = '\0';
    }
    return RGDL_OK;
}

rgdl::SpinDomain to_domain(rgdl_domain d) {
    if (d != RGDL_DOMAIN_PM1 && d != RGDL_DOMAIN_01) throw rgdl::Error(rgdl::Errc::validation, "unknown domain");
    return d == RGDL_DOMAIN_PM1 ? rgdl::SpinDomain::PlusMinusOne : rgdl::SpinDomain::ZeroOne;
}

rgdl::TrainConfig to_train_config(const rgdl_train_config& c) {
    rgdl::TrainConfig t;
    t.learning_rate = c.learning_rate;
    t.momentum = c.momentum;
    t.minibatch = c.minibatch;
    t.epochs = c.epochs;
    t.cd_k = c.cd_k;
    t.l1_strength = c.l1_strength;
    t.seed = c.seed;
    t.init_scale = c.init_scale;
    return t;
}

void fill_report(const rgdl::MappingReport& r, rgdl_mapping_report* out) {
    out->exactness_residual = r.exactness_residual;
    out->hidden_distribution_distance = r.hidden_distribution_distance;
    out->conditional_identity_residual = r.conditional_identity_residual;
    out->delta_F = r.delta_F;
    out->kl_visible = r.kl_visible;
    out->conditional_identity_scaled_residual = r.conditional_identity_scaled_residual;
}

// exp(T) of `op` with one entry scaled by (1 + perturbation).
rgdl::RGOperator perturbed(const rgdl::RGOperator& op, double perturbation) {
    if (perturbation == 0.0) return op;
    auto table = op.tabulated();
    auto weights = std::get<rgdl::OperatorTable>(table.representation()).weights;
    weights[0] *= 1.0 + perturbation;
    return rgdl::RGOperator(op.n_visible(), op.n_hidden(), rgdl::OperatorTable{std::move(weights)}, op.domain());
}

}  // namespace

extern "C" {

const char* rgdl_last_error(void) { return last_error.c_str(); }

const char* rgdl_status_name(rgdl_status status) {
    switch (status) {
        case RGDL_OK: return "ok";
        case RGDL_ERR_DOMAIN: return "domain";
        case RGDL_ERR_CAPACITY: return "capacity";
        case RGDL_ERR_VALIDATION: return "validation";
        case RGDL_ERR_DIMENSION: return "dimension";
        case RGDL_ERR_IO: return "io";
        case RGDL_ERR_NULL: return "null";
        case RGDL_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* rgdl_version(void) { return "1.0.0"; }

// ---- lattices and Hamiltonians --------------------------------------------

rgdl_status rgdl_lattice_parse(const char* text, rgdl_lattice** out) {
    if (!text || !out) return null_status();
    return guarded([&] { *out = new rgdl_lattice{rgdl::Lattice::parse(text)}; });
}

void rgdl_lattice_free(rgdl_lattice* lattice) { delete lattice; }

size_t rgdl_lattice_num_sites(const rgdl_lattice* lattice) { return lattice ? lattice->value.num_sites() : 0; }

rgdl_status rgdl_lattice_describe(const rgdl_lattice* lattice, char* buf, size_t cap, size_t* needed) {
    if (!lattice) return null_status();
    return write_string(lattice->value.to_string(), buf, cap, needed);
}

rgdl_status rgdl_hamiltonian_ising(const rgdl_lattice* lattice, double coupling, double field, rgdl_hamiltonian** out) {
    if (!lattice || !out) return null_status();
    return guarded([&] { *out = new rgdl_hamiltonian{rgdl::Hamiltonian::ising(lattice->value, coupling, field)}; });
}

rgdl_status rgdl_hamiltonian_parse(const char* text, size_t num_sites, rgdl_hamiltonian** out) {
    if (!text || !out) return null_status();
    return guarded([&] { *out = new rgdl_hamiltonian{rgdl::Hamiltonian::parse_text(text, num_sites)}; });
}

rgdl_status rgdl_hamiltonian_load(const char* path, size_t num_sites, rgdl_hamiltonian** out) {
    if (!path || !out) return null_status();
    return guarded([&] {
        std::ifstream in(path);
        if (!in) throw rgdl::Error(rgdl::Errc::io, std::string("cannot open '") + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        *out = new rgdl_hamiltonian{rgdl::Hamiltonian::parse_text(ss.str(), num_sites)};
    });
}

rgdl_status rgdl_hamiltonian_save(const rgdl_hamiltonian* h, const char* path) {
    if (!h || !path) return null_status();
    return guarded([&] {
        std::ofstream out(path);
        out << h->value.to_text();
        if (!out) throw rgdl::Error(rgdl::Errc::io, std::string("cannot write '") + path + "'");
    });
}

rgdl_status rgdl_hamiltonian_random_pairs(size_t num_sites, double scale, uint64_t seed, rgdl_hamiltonian** out) {
    if (!out) return null_status();
    return guarded([&] {
        rgdl::Rng rng(seed, 7);
        rgdl::Hamiltonian h(num_sites);
        for (std::uint32_t i = 0; i < num_sites; ++i)
            for (std::uint32_t j = i + 1; j < num_sites; ++j) h.add({i, j}, scale * rng.normal());
        *out = new rgdl_hamiltonian{std::move(h)};
    });
}

void rgdl_hamiltonian_free(rgdl_hamiltonian* h) { delete h; }

size_t rgdl_hamiltonian_num_sites(const rgdl_hamiltonian* h) { return h ? h->value.num_sites() : 0; }

rgdl_status rgdl_hamiltonian_energy(const rgdl_hamiltonian* h, const int8_t* config, size_t n, double* out) {
    if (!h || !config || !out) return null_status();
    return guarded([&] { *out = h->value.energy(std::span<const std::int8_t>(config, n)); });
}

rgdl_status rgdl_exact_free_energy(const rgdl_hamiltonian* h, rgdl_domain domain, double* out) {
    if (!h || !out) return null_status();
    return guarded([&] { *out = rgdl::exact_free_energy(h->value, to_domain(domain)); });
}

// ---- sampling ---------------------------------------------------------------

rgdl_sampler_config rgdl_sampler_config_default(void) {
    const rgdl::SamplerConfig d;
    return {d.seed, d.burn_in_sweeps, d.thinning_sweeps, d.num_samples, d.chains};
}

rgdl_status rgdl_sample(const rgdl_hamiltonian* h, const rgdl_lattice* lattice, const rgdl_sampler_config* cfg,
                        rgdl_domain domain, rgdl_dataset** out) {
    if (!h || !lattice || !cfg || !out) return null_status();
    return guarded([&] {
        rgdl::SamplerConfig c;
        c.seed = cfg->seed;
        c.burn_in_sweeps = cfg->burn_in_sweeps;
        c.thinning_sweeps = cfg->thinning_sweeps;
        c.num_samples = cfg->num_samples;
        c.chains = cfg->chains;
        const auto target = to_domain(domain);
        auto ds = rgdl::sample_ensemble(h->value, lattice->value, c);
        if (target != ds.samples.domain) ds = rgdl::convert_domain(ds, target);
        *out = new rgdl_dataset{std::move(ds)};
    });
}

rgdl_status rgdl_dataset_load(const char* path, rgdl_dataset** out) {
    if (!path || !out) return null_status();
    return guarded([&] { *out = new rgdl_dataset{rgdl::load_dataset(path)}; });
}

rgdl_status rgdl_dataset_save(const rgdl_dataset* ds, const char* path) {
    if (!ds || !path) return null_status();
    return guarded([&] { rgdl::save_dataset(ds->value, path); });
}

rgdl_status rgdl_dataset_save_csv(const rgdl_dataset* ds, const char* path) {
    if (!ds || !path) return null_status();
    return guarded([&] { rgdl::save_dataset_csv(ds->value, path); });
}

void rgdl_dataset_free(rgdl_dataset* ds) { delete ds; }

size_t rgdl_dataset_num_samples(const rgdl_dataset* ds) { return ds ? ds->value.num_samples() : 0; }

size_t rgdl_dataset_num_sites(const rgdl_dataset* ds) { return ds ? ds->value.num_sites() : 0; }

rgdl_domain rgdl_dataset_domain(const rgdl_dataset* ds) {
    return ds && ds->value.samples.domain == rgdl::SpinDomain::ZeroOne ? RGDL_DOMAIN_01 : RGDL_DOMAIN_PM1;
}

rgdl_status rgdl_dataset_lattice(const rgdl_dataset* ds, rgdl_lattice** out) {
    if (!ds || !out) return null_status();
    return guarded([&] { *out = new rgdl_lattice{ds->value.lattice}; });
}

rgdl_status rgdl_dataset_row(const rgdl_dataset* ds, size_t row, int8_t* out, size_t n) {
    if (!ds || !out) return null_status();
    return guarded([&] {
        if (row >= ds->value.num_samples()) throw rgdl::Error(rgdl::Errc::domain, "row out of range");
        if (n != ds->value.num_sites()) throw rgdl::Error(rgdl::Errc::dimension, "buffer size must equal site count");
        auto r = ds->value.samples.row(row);
        std::copy(r.begin(), r.end(), out);
    });
}

rgdl_status rgdl_dataset_observables(const rgdl_dataset* ds, rgdl_observables* out) {
    if (!ds || !out) return null_status();
    return guarded([&] {
        const auto o = rgdl::estimate_observables(ds->value);
        *out = {o.magnetization.mean,      o.magnetization.std_error,  o.abs_magnetization.mean,
                o.abs_magnetization.std_error, o.nn_correlation.mean, o.nn_correlation.std_error,
                o.num_samples};
    });
}

// ---- RG flow ----------------------------------------------------------------

rgdl_status rgdl_decimation_step(double coupling, double* out) {
    if (!out) return null_status();
    return guarded([&] { *out = rgdl::decimation_step_coupling(coupling); });
}

rgdl_status rgdl_rg_flow(double initial, size_t steps, double* couplings, double* closed_form) {
    if (!couplings) return null_status();
    return guarded([&] {
        const auto flow = rgdl::rg_flow(initial, steps);
        std::copy(flow.couplings.begin(), flow.couplings.end(), couplings);
        if (closed_form) {
            for (size_t k = 0; k <= steps; ++k) {
                try {
                    closed_form[k] = rgdl::closed_form_coupling(initial, k);
                } catch (const rgdl::Error&) {
                    closed_form[k] = std::numeric_limits<double>::quiet_NaN();
                }
            }
        }
    });
}

// ---- RBMs and stacks ----------------------------------------------------------

rgdl_train_config rgdl_train_config_default(void) {
    const rgdl::TrainConfig d;
    return {d.learning_rate, d.momentum, d.minibatch, d.epochs, d.cd_k, d.l1_strength, d.seed, d.init_scale};
}

rgdl_status rgdl_rbm_random(size_t n_visible, size_t n_hidden, double scale, uint64_t seed, rgdl_rbm** out) {
    if (!out) return null_status();
    return guarded([&] {
        rgdl::Rng rng(seed, 11);
        rgdl::RBMParams p(n_visible, n_hidden);
        for (auto* v : {&p.b, &p.w, &p.c})
            for (auto& x : *v) x = scale * rng.normal();
        *out = new rgdl_rbm{std::move(p)};
    });
}

rgdl_status rgdl_rbm_load(const char* path, rgdl_rbm** out) {
    if (!path || !out) return null_status();
    return guarded([&] { *out = new rgdl_rbm{rgdl::load_rbm(path)}; });
}

rgdl_status rgdl_rbm_save(const rgdl_rbm* rbm, const char* path) {
    if (!rbm || !path) return null_status();
    return guarded([&] { rgdl::save_rbm(rbm->value, path); });
}

void rgdl_rbm_free(rgdl_rbm* rbm) { delete rbm; }

size_t rgdl_rbm_num_visible(const rgdl_rbm* rbm) { return rbm ? rbm->value.n_visible : 0; }

size_t rgdl_rbm_num_hidden(const rgdl_rbm* rbm) { return rbm ? rbm->value.n_hidden : 0; }

rgdl_status rgdl_train_stack(const rgdl_dataset* ds, size_t first_row, size_t row_count, const size_t* sizes,
                             size_t num_sizes, const rgdl_train_config* cfg, rgdl_stack** out, double* recon_error) {
    if (!ds || !sizes || !cfg || !out) return null_status();
    return guarded([&] {
        const auto& all = ds->value.samples;
        if (first_row > all.rows || row_count > all.rows - first_row)
            throw rgdl::Error(rgdl::Errc::domain, "training rows out of range");
        rgdl::SpinMatrix rows(row_count, all.cols, all.domain);
        std::copy(all.data.begin() + static_cast<std::ptrdiff_t>(first_row * all.cols),
                  all.data.begin() + static_cast<std::ptrdiff_t>((first_row + row_count) * all.cols),
                  rows.data.begin());
        auto result = rgdl::train_stack(rows, std::span<const size_t>(sizes, num_sizes), to_train_config(*cfg));
        if (recon_error) {
            size_t k = 0;
            for (const auto& layer : result.reconstruction_error)
                for (double e : layer) recon_error[k++] = e;
        }
        *out = new rgdl_stack{std::move(result.stack)};
    });
}

rgdl_status rgdl_stack_load(const char* directory, rgdl_stack** out) {
    if (!directory || !out) return null_status();
    return guarded([&] { *out = new rgdl_stack{rgdl::load_stack(directory)}; });
}

rgdl_status rgdl_stack_save(const rgdl_stack* stack, const char* directory) {
    if (!stack || !directory) return null_status();
    return guarded([&] { rgdl::save_stack(stack->value, directory); });
}

rgdl_status rgdl_stack_zero(const size_t* sizes, size_t num_sizes, rgdl_stack** out) {
    if (!sizes || !out) return null_status();
    return guarded([&] {
        if (num_sizes < 2) throw rgdl::Error(rgdl::Errc::validation, "a stack needs at least two layer sizes");
        rgdl::DNNStack stack;
        for (size_t l = 1; l < num_sizes; ++l) stack.layers.emplace_back(sizes[l - 1], sizes[l]);
        *out = new rgdl_stack{std::move(stack)};
    });
}

void rgdl_stack_free(rgdl_stack* stack) { delete stack; }

size_t rgdl_stack_num_layers(const rgdl_stack* stack) { return stack ? stack->value.layers.size() : 0; }

size_t rgdl_stack_layer_size(const rgdl_stack* stack, size_t layer) {
    if (!stack) return 0;
    const auto sizes = stack->value.layer_sizes();
    return layer < sizes.size() ? sizes[layer] : 0;
}

rgdl_status rgdl_reconstruct(const rgdl_stack* stack, const int8_t* input, size_t n, double* probability,
                             int8_t* config) {
    if (!stack || !input) return null_status();
    return guarded([&] {
        const auto r = rgdl::reconstruct(stack->value, std::span<const std::int8_t>(input, n));
        if (probability) std::copy(r.probability.begin(), r.probability.end(), probability);
        if (config) std::copy(r.config.values.begin(), r.config.values.end(), config);
    });
}

rgdl_status rgdl_receptive_field_sizes(const rgdl_stack* stack, const rgdl_lattice* lattice, double* out) {
    if (!stack || !lattice || !out) return null_status();
    return guarded([&] {
        if (stack->value.layers.empty()) throw rgdl::Error(rgdl::Errc::validation, "stack has no layers");
        const auto sizes = rgdl::receptive_field_size(rgdl::receptive_fields(stack->value), lattice->value);
        std::copy(sizes.begin(), sizes.end(), out);
    });
}

rgdl_status rgdl_receptive_fields_export(const rgdl_stack* stack, const rgdl_lattice* lattice, const char* directory) {
    if (!stack || !lattice || !directory) return null_status();
    return guarded([&] {
        if (stack->value.layers.empty()) throw rgdl::Error(rgdl::Errc::validation, "stack has no layers");
        rgdl::export_receptive_fields(rgdl::receptive_fields(stack->value), lattice->value, directory);
    });
}

// ---- mapping verification -------------------------------------------------------

rgdl_status rgdl_verify_mapping(const rgdl_rbm* rbm, const rgdl_hamiltonian* visible_coupling,
                                const rgdl_hamiltonian* data, rgdl_mapping_report* out) {
    if (!rbm || !data || !out) return null_status();
    return guarded([&] {
        rgdl::BoltzmannMachine bm(rbm->value);
        if (visible_coupling) bm = rgdl::BoltzmannMachine(rbm->value, visible_coupling->value,
                                                           rgdl::Hamiltonian(rbm->value.n_hidden));
        fill_report(rgdl::verify_hidden_hamiltonian_equality(bm, data->value), out);
    });
}

rgdl_status rgdl_extract_visible_hamiltonian(const rgdl_rbm* rbm, const rgdl_hamiltonian* visible_coupling,
                                             rgdl_hamiltonian** out) {
    if (!rbm || !out) return null_status();
    return guarded([&] {
        rgdl::BoltzmannMachine bm(rbm->value);
        if (visible_coupling) bm = rgdl::BoltzmannMachine(rbm->value, visible_coupling->value,
                                                           rgdl::Hamiltonian(rbm->value.n_hidden));
        *out = new rgdl_hamiltonian{rgdl::extract_visible_hamiltonian(bm)};
    });
}

rgdl_status rgdl_verify_decimation(size_t n, double coupling, double perturbation, rgdl_mapping_report* out) {
    if (!out) return null_status();
    return guarded([&] {
        const auto chain = rgdl::Lattice::chain(n, rgdl::Boundary::Periodic);
        const auto op = perturbed(rgdl::decimation_operator_1d(n), perturbation);
        fill_report(rgdl::operator_report(op, rgdl::Hamiltonian::ising(chain, coupling)), out);
    });
}

rgdl_status rgdl_verify_block_spin(const rgdl_lattice* lattice, double coupling, double perturbation,
                                   rgdl_mapping_report* out) {
    if (!lattice || !out) return null_status();
    return guarded([&] {
        const auto op = perturbed(rgdl::block_spin_operator_2d(lattice->value), perturbation);
        fill_report(rgdl::operator_report(op, rgdl::Hamiltonian::ising(lattice->value, coupling)), out);
    });
}

rgdl_status rgdl_mapping_report_json(const rgdl_mapping_report* report, char* buf, size_t cap, size_t* needed) {
    if (!report) return null_status();
    rgdl::MappingReport r{report->exactness_residual, report->hidden_distribution_distance,
                          report->conditional_identity_residual, report->delta_F, report->kl_visible,
                          report->conditional_identity_scaled_residual};
    return write_string(rgdl::mapping_report_json(r), buf, cap, needed);
}

}  // extern "C"
