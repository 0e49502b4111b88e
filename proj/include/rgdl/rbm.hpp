#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rgdl/rng.hpp"
#include "rgdl/spin.hpp"

namespace rgdl {

/// RBM parameters with the energy
///
///   E(v, h) = sum_j b_j h_j + sum_ij v_i w_ij h_j + sum_i c_i v_i,
///   p(v, h) = exp(-E(v, h)) / Z.
///
/// Note the plus signs: a positive w_ij favours anti-aligned v_i and h_j.
/// Weights are stored row major, w[i * n_hidden + j].
struct RBMParams {
    SpinDomain domain = SpinDomain::PlusMinusOne;
    std::size_t n_visible = 0;
    std::size_t n_hidden = 0;
    std::vector<double> b;  // hidden biases, length n_hidden
    std::vector<double> w;  // n_visible x n_hidden
    std::vector<double> c;  // visible biases, length n_visible

    RBMParams() = default;
    RBMParams(std::size_t nv, std::size_t nh, SpinDomain d = SpinDomain::PlusMinusOne)
        : domain(d), n_visible(nv), n_hidden(nh), b(nh, 0.0), w(nv * nh, 0.0), c(nv, 0.0) {}

    double& weight(std::size_t i, std::size_t j) { return w[i * n_hidden + j]; }
    double weight(std::size_t i, std::size_t j) const { return w[i * n_hidden + j]; }

    /// Throws dimension error on inconsistent sizes, validation error on
    /// non-finite entries.
    void validate() const;
};

/// Maps to and from the common convention E = -b.h - v.W.h - c.v.
RBMParams to_conventional(const RBMParams& params);
RBMParams from_conventional(const RBMParams& params);

/// Swaps the roles of the two layers (transposes w, exchanges b and c).
RBMParams transposed(const RBMParams& params);

/// w ~ uniform(-0.01, 0.01) * scale, biases zero.
RBMParams random_init(std::size_t n_visible, std::size_t n_hidden, SpinDomain domain, Rng& rng,
                      double scale = 1.0);

double rbm_energy(std::span<const std::int8_t> v, std::span<const std::int8_t> h, const RBMParams& params);

// Conditionals. Each returns the probability that a unit takes its "up"
// value (+1, or 1 in the 0/1 domain). With a_j = b_j + sum_i v_i w_ij,
//   +-1:  p(h_j = +1 | v) = 1 / (1 + exp(2 a_j))
//   0/1:  p(h_j =  1 | v) = 1 / (1 + exp(a_j))
// The inputs may be real valued (mean-field activities).
std::vector<double> cond_hidden_given_visible(std::span<const double> v, const RBMParams& params);
std::vector<double> cond_visible_given_hidden(std::span<const double> h, const RBMParams& params);
std::vector<double> cond_hidden_given_visible(std::span<const std::int8_t> v, const RBMParams& params);
std::vector<double> cond_visible_given_hidden(std::span<const std::int8_t> h, const RBMParams& params);

/// Probability of the up value for a unit with total input `a`.
double up_probability(double a, SpinDomain domain) noexcept;
/// Expected spin value given the up probability.
double expected_spin(double p_up, SpinDomain domain) noexcept;

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.5;
    std::size_t minibatch = 100;
    std::size_t epochs = 200;
    std::size_t cd_k = 1;
    double l1_strength = 2e-4;
    std::uint64_t seed = 0;
    double init_scale = 1.0;

    void validate() const;
};

/// Momentum buffers, same layout as the parameters.
struct Velocity {
    std::vector<double> b, w, c;
    explicit Velocity(const RBMParams& p) : b(p.b.size(), 0.0), w(p.w.size(), 0.0), c(p.c.size(), 0.0) {}
};

/// One CD-k step on a minibatch.
///
/// Data phase uses mean-field hidden expectations; the negative phase runs
/// k Gibbs steps from the data with sampled binary states. The likelihood
/// ascent direction under the plus-sign energy is
/// grad_w = <v h>_model - <v h>_data (likewise for biases). The velocity is
/// updated as momentum * velocity + learning_rate * grad, added to the
/// parameters, then weights alone are soft-thresholded by
/// learning_rate * l1_strength. Returns the batch's mean squared
/// reconstruction error per unit (in +-1 units).
double cd_k_update(RBMParams& params, Velocity& velocity, const SpinMatrix& batch, const TrainConfig& cfg,
                   Rng& rng);

struct TrainResult {
    RBMParams params;
    std::vector<double> reconstruction_error;  // one entry per epoch
};

/// Full CD schedule: every epoch reshuffles rows with a seeded Fisher-Yates
/// permutation and applies cd_k_update per minibatch. Starts from `init`.
TrainResult train(const SpinMatrix& data, RBMParams init, const TrainConfig& cfg);
/// Starts from random_init(data.cols, n_hidden, ...).
TrainResult train(const SpinMatrix& data, std::size_t n_hidden, const TrainConfig& cfg);

/// Samples hidden (or visible) states from the conditionals.
void sample_units(std::span<const double> p_up, SpinDomain domain, Rng& rng, std::span<std::int8_t> out);

// ---------------------------------------------------------------------------
// Exact small-system quantities
// ---------------------------------------------------------------------------

struct ExactMarginal {
    std::vector<double> probability;   // normalized, indexed by state
    std::vector<double> hamiltonian;   // H^RBM per state, exp(-H) summed over states = Z
    double log_partition = 0.0;        // log Z of the joint model
};

/// p(v) = Tr_h p(v, h), using the factorized hidden trace.
ExactMarginal exact_visible_marginal(const RBMParams& params, std::size_t limit = kDefaultEnumerationLimit);
/// p(h) = Tr_v p(v, h).
ExactMarginal exact_hidden_marginal(const RBMParams& params, std::size_t limit = kDefaultEnumerationLimit);

/// Full joint table p(v, h), index v * 2^M + h, by brute force.
std::vector<double> exact_joint(const RBMParams& params, std::size_t limit = kDefaultEnumerationLimit);

/// D_KL(P || p_lambda) over visible states. +inf when P has support where
/// the model has none.
double exact_kl(std::span<const double> p_data, const RBMParams& params, std::size_t limit = kDefaultEnumerationLimit);
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Average log-likelihood sum_v P(v) log p(v) and its exact gradient.
double exact_log_likelihood(std::span<const double> p_data, const RBMParams& params);
RBMParams exact_log_likelihood_gradient(std::span<const double> p_data, const RBMParams& params);

/// Draws i.i.d. rows from an explicit distribution over 2^n states.
SpinMatrix sample_from_distribution(std::span<const double> p, std::size_t num_sites, SpinDomain domain,
                                    std::size_t rows, Rng& rng);

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

std::string rbm_to_json(const RBMParams& params);
RBMParams rbm_from_json(const std::string& text);
void save_rbm(const RBMParams& params, const std::string& path);
RBMParams load_rbm(const std::string& path);

}  // namespace rgdl
