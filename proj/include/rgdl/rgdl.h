/* C interface to the rgdl library.
 *
 * Every function returns an rgdl_status. On failure a description of the
 * most recent error on the calling thread is available from
 * rgdl_last_error(). Objects are opaque handles released with the matching
 * *_free function; passing NULL to a *_free function is a no-op.
 */
#ifndef RGDL_H
#define RGDL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(RGDL_BUILDING)
#    define RGDL_API __declspec(dllexport)
#  else
#    define RGDL_API __declspec(dllimport)
#  endif
#else
#  define RGDL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  RGDL_OK = 0,
  RGDL_ERR_DOMAIN = 1,
  RGDL_ERR_CAPACITY = 2,
  RGDL_ERR_VALIDATION = 3,
  RGDL_ERR_DIMENSION = 4,
  RGDL_ERR_IO = 5,
  RGDL_ERR_NULL = 6,
  RGDL_ERR_INTERNAL = 7
} rgdl_status;

typedef enum { RGDL_DOMAIN_PM1 = 0, RGDL_DOMAIN_01 = 1 } rgdl_domain;

typedef struct rgdl_lattice rgdl_lattice;
typedef struct rgdl_hamiltonian rgdl_hamiltonian;
typedef struct rgdl_dataset rgdl_dataset;
typedef struct rgdl_rbm rgdl_rbm;
typedef struct rgdl_stack rgdl_stack;

RGDL_API const char* rgdl_last_error(void);
RGDL_API const char* rgdl_status_name(rgdl_status status);
RGDL_API const char* rgdl_version(void);

/* ---- lattices and Hamiltonians ---------------------------------------- */

/* "1d:<n>:<periodic|free>" or "2d:<w>x<h>:<periodic|free>" */
RGDL_API rgdl_status rgdl_lattice_parse(const char* text, rgdl_lattice** out);
RGDL_API void rgdl_lattice_free(rgdl_lattice* lattice);
RGDL_API size_t rgdl_lattice_num_sites(const rgdl_lattice* lattice);
/* Writes the canonical description into buf (NUL terminated, truncated to
 * cap); *needed receives the full length without the terminator. */
RGDL_API rgdl_status rgdl_lattice_describe(const rgdl_lattice* lattice, char* buf, size_t cap, size_t* needed);

/* -J sum_<ij> v_i v_j - field sum_i v_i on the lattice. */
RGDL_API rgdl_status rgdl_hamiltonian_ising(const rgdl_lattice* lattice, double coupling, double field,
                                            rgdl_hamiltonian** out);
/* Text format "K <coupling> <idx...>" per line. num_sites == 0 infers. */
RGDL_API rgdl_status rgdl_hamiltonian_parse(const char* text, size_t num_sites, rgdl_hamiltonian** out);
RGDL_API rgdl_status rgdl_hamiltonian_load(const char* path, size_t num_sites, rgdl_hamiltonian** out);
RGDL_API rgdl_status rgdl_hamiltonian_save(const rgdl_hamiltonian* h, const char* path);
/* Random pair couplings N(0, scale^2) between every pair of n sites. */
RGDL_API rgdl_status rgdl_hamiltonian_random_pairs(size_t num_sites, double scale, uint64_t seed,
                                                   rgdl_hamiltonian** out);
RGDL_API void rgdl_hamiltonian_free(rgdl_hamiltonian* h);
RGDL_API size_t rgdl_hamiltonian_num_sites(const rgdl_hamiltonian* h);
RGDL_API rgdl_status rgdl_hamiltonian_energy(const rgdl_hamiltonian* h, const int8_t* config, size_t n, double* out);
RGDL_API rgdl_status rgdl_exact_free_energy(const rgdl_hamiltonian* h, rgdl_domain domain, double* out);

/* ---- sampling --------------------------------------------------------- */

typedef struct {
  uint64_t seed;
  uint64_t burn_in_sweeps;
  uint64_t thinning_sweeps;
  uint64_t num_samples;
  uint64_t chains;
} rgdl_sampler_config;

typedef struct {
  double magnetization, magnetization_stderr;
  double abs_magnetization, abs_magnetization_stderr;
  double nn_correlation, nn_correlation_stderr;
  uint64_t num_samples;
} rgdl_observables;

RGDL_API rgdl_sampler_config rgdl_sampler_config_default(void);
/* Metropolis sampling of h on the lattice; the dataset is stored in the
 * requested domain (h is always evaluated on +-1 spins). */
RGDL_API rgdl_status rgdl_sample(const rgdl_hamiltonian* h, const rgdl_lattice* lattice,
                                 const rgdl_sampler_config* cfg, rgdl_domain domain, rgdl_dataset** out);
RGDL_API rgdl_status rgdl_dataset_load(const char* path, rgdl_dataset** out);
RGDL_API rgdl_status rgdl_dataset_save(const rgdl_dataset* ds, const char* path);
RGDL_API rgdl_status rgdl_dataset_save_csv(const rgdl_dataset* ds, const char* path);
RGDL_API void rgdl_dataset_free(rgdl_dataset* ds);
RGDL_API size_t rgdl_dataset_num_samples(const rgdl_dataset* ds);
RGDL_API size_t rgdl_dataset_num_sites(const rgdl_dataset* ds);
RGDL_API rgdl_domain rgdl_dataset_domain(const rgdl_dataset* ds);
RGDL_API rgdl_status rgdl_dataset_lattice(const rgdl_dataset* ds, rgdl_lattice** out);
RGDL_API rgdl_status rgdl_dataset_row(const rgdl_dataset* ds, size_t row, int8_t* out, size_t n);
RGDL_API rgdl_status rgdl_dataset_observables(const rgdl_dataset* ds, rgdl_observables* out);

/* ---- RG flow ---------------------------------------------------------- */

RGDL_API rgdl_status rgdl_decimation_step(double coupling, double* out);
/* Fills couplings[0..steps] with the iterated flow. closed_form may be
 * NULL; entries that cannot be evaluated are set to NaN. */
RGDL_API rgdl_status rgdl_rg_flow(double initial, size_t steps, double* couplings, double* closed_form);

/* ---- RBMs and stacks -------------------------------------------------- */

typedef struct {
  double learning_rate;
  double momentum;
  uint64_t minibatch;
  uint64_t epochs;
  uint64_t cd_k;
  double l1_strength;
  uint64_t seed;
  double init_scale;
} rgdl_train_config;

RGDL_API rgdl_train_config rgdl_train_config_default(void);

/* Random parameters, every entry N(0, scale^2). */
RGDL_API rgdl_status rgdl_rbm_random(size_t n_visible, size_t n_hidden, double scale, uint64_t seed,
                                     rgdl_rbm** out);
RGDL_API rgdl_status rgdl_rbm_load(const char* path, rgdl_rbm** out);
RGDL_API rgdl_status rgdl_rbm_save(const rgdl_rbm* rbm, const char* path);
RGDL_API void rgdl_rbm_free(rgdl_rbm* rbm);
RGDL_API size_t rgdl_rbm_num_visible(const rgdl_rbm* rbm);
RGDL_API size_t rgdl_rbm_num_hidden(const rgdl_rbm* rbm);

/* Greedy training on rows [first_row, first_row + row_count) of ds.
 * recon_error, when not NULL, receives layers * epochs values. */
RGDL_API rgdl_status rgdl_train_stack(const rgdl_dataset* ds, size_t first_row, size_t row_count,
                                      const size_t* sizes, size_t num_sizes, const rgdl_train_config* cfg,
                                      rgdl_stack** out, double* recon_error);
RGDL_API rgdl_status rgdl_stack_load(const char* directory, rgdl_stack** out);
RGDL_API rgdl_status rgdl_stack_save(const rgdl_stack* stack, const char* directory);
/* Stack with the given sizes and all parameters zero. */
RGDL_API rgdl_status rgdl_stack_zero(const size_t* sizes, size_t num_sizes, rgdl_stack** out);
RGDL_API void rgdl_stack_free(rgdl_stack* stack);
RGDL_API size_t rgdl_stack_num_layers(const rgdl_stack* stack);
/* Size of layer l, l = 0 is the input layer. */
RGDL_API size_t rgdl_stack_layer_size(const rgdl_stack* stack, size_t layer);

/* Mean-field up and down pass. probability and config hold n entries. */
RGDL_API rgdl_status rgdl_reconstruct(const rgdl_stack* stack, const int8_t* input, size_t n, double* probability,
                                      int8_t* config);

/* Median radius of gyration per layer (num_layers entries). */
RGDL_API rgdl_status rgdl_receptive_field_sizes(const rgdl_stack* stack, const rgdl_lattice* lattice, double* out);
RGDL_API rgdl_status rgdl_receptive_fields_export(const rgdl_stack* stack, const rgdl_lattice* lattice,
                                                  const char* directory);

/* ---- mapping verification --------------------------------------------- */

typedef struct {
  double exactness_residual;
  double hidden_distribution_distance;
  double conditional_identity_residual;
  double delta_F;
  double kl_visible;
  /* identity residual per entry divided by max(1, exp(T)) */
  double conditional_identity_scaled_residual;
} rgdl_mapping_report;

/* Verifies T = -E + H for the RBM (plus optional visible-visible couplings,
 * may be NULL) against the data Hamiltonian. */
RGDL_API rgdl_status rgdl_verify_mapping(const rgdl_rbm* rbm, const rgdl_hamiltonian* visible_coupling,
                                         const rgdl_hamiltonian* data, rgdl_mapping_report* out);
/* H^RBM[v] of the machine as explicit terms. */
RGDL_API rgdl_status rgdl_extract_visible_hamiltonian(const rgdl_rbm* rbm, const rgdl_hamiltonian* visible_coupling,
                                                      rgdl_hamiltonian** out);
/* Decimation of a periodic chain of n sites at coupling J. A non-zero
 * perturbation multiplies the exp(T) entry at (v = 0, h = 0) by
 * (1 + perturbation). Only exactness_residual and delta_F are filled. */
RGDL_API rgdl_status rgdl_verify_decimation(size_t n, double coupling, double perturbation,
                                            rgdl_mapping_report* out);
/* Same for 2x2 majority block spins with the Ising model on a square
 * lattice with even extents. */
RGDL_API rgdl_status rgdl_verify_block_spin(const rgdl_lattice* lattice, double coupling, double perturbation,
                                            rgdl_mapping_report* out);
/* JSON text of a report, same buffer contract as rgdl_lattice_describe. */
RGDL_API rgdl_status rgdl_mapping_report_json(const rgdl_mapping_report* report, char* buf, size_t cap,
                                              size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* RGDL_H */
