#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgdl/rbm.hpp"
#include "rgdl/rg.hpp"

namespace rgdl {

/// Stack of RBMs; layer l maps n^(l-1) units to n^(l).
struct DNNStack {
    std::vector<RBMParams> layers;
    /// Optional hard ties, one vector per layer (or none at all): ties[l][j]
    /// is the input unit that hidden unit j copies exactly, or -1. A tied
    /// pair behaves like an infinitely strong ferromagnetic weight; the
    /// corresponding weight row is ignored for the tied input unit.
    std::vector<std::vector<std::int32_t>> ties;
    /// Optional Hamiltonian over the top layer used as the generative prior.
    /// Without it the top RBM's own hidden marginal is the prior.
    std::optional<Hamiltonian> top_prior;

    std::vector<std::size_t> layer_sizes() const;
    SpinDomain domain() const;
    void validate() const;

    bool tied(std::size_t layer, std::size_t input_unit, std::size_t* hidden = nullptr) const;
};

/// Called with (layer index starting at 1, training input of that layer)
/// before each layer is trained.
using LayerInputObserver = std::function<void(std::size_t, const SpinMatrix&)>;

struct StackTrainResult {
    DNNStack stack;
    std::vector<std::vector<double>> reconstruction_error;  // per layer, per epoch
};

/// Greedy layer-wise training. Layer 1 sees the data; layer l > 1 sees the
/// sampled hidden states of trained layer l-1 in response to its inputs.
/// Layer l uses seed cfg.seed + l - 1, so a one-layer stack matches train().
StackTrainResult train_stack(const SpinMatrix& data, std::span<const std::size_t> layer_sizes, const TrainConfig& cfg,
                             const LayerInputObserver& observer = {});

/// Sampled hidden states of `params` for every row of `input`.
SpinMatrix hidden_activities(const RBMParams& params, const SpinMatrix& input, Rng& rng);

enum class PropagationMode { Sample, Mean };

/// Upward pass. Entry 0 is the input. In Mean mode hidden entries are
/// up-probabilities and the next layer is driven by the expected spins; in
/// Sample mode hidden entries are sampled spin values (rng required).
std::vector<std::vector<double>> propagate_up(const DNNStack& stack, std::span<const double> v, PropagationMode mode,
                                              Rng* rng = nullptr);

struct Reconstruction {
    std::vector<double> probability;  // up-probability per input site
    SpinConfig config;                // thresholded at 0.5
};

/// Mean-field pass to the top layer and back down.
Reconstruction reconstruct(const DNNStack& stack, std::span<const std::int8_t> v);

/// Row-major n^(0) x n^(l) matrix per layer.
struct ReceptiveField {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct ReceptiveFieldSet {
    std::vector<ReceptiveField> layers;  // layers[0] is r^(1)
};

/// r^(1) = W^(1), r^(l) = r^(l-1) W^(l).
ReceptiveFieldSet receptive_fields(const DNNStack& stack);

/// Radius of gyration of |r| for every hidden unit of one layer, using
/// minimum-image displacements from a circular-mean centroid on periodic
/// axes. A unit with no weight has radius 0.
std::vector<double> unit_receptive_radii(const ReceptiveField& rf, const Lattice& lattice);

/// Median radius of gyration per layer. Domain error unless the lattice is
/// a square lattice.
std::vector<double> receptive_field_size(const ReceptiveFieldSet& rf, const Lattice& lattice);

/// Writes, per layer l: layer<l>.csv (raw matrix), one 8-bit PGM per unit
/// (layer<l>_unit<j>.pgm, min-max normalized signed values) and
/// layer<l>_normalization.txt with the per-unit min and max.
void export_receptive_fields(const ReceptiveFieldSet& rf, const Lattice& lattice, const std::string& directory);

// ---------------------------------------------------------------------------
// Analytic decimation network
// ---------------------------------------------------------------------------

struct DecimationNetwork {
    DNNStack stack;
    RGFlow flow;
};

/// Periodic ring Hamiltonian -J sum_i v_i v_{i+1 mod n}. Rings of two sites
/// carry the doubled bond and a one-site ring reduces to a constant.
Hamiltonian ring_hamiltonian(std::size_t n, double coupling);

/// Stack realizing num_layers decimations of a periodic chain. In layer l
/// hidden unit j is tied to input site 2j and input site 2j+1 couples to
/// hidden units j and j+1 with weight -J^(l-1). The top prior is the ring at
/// J^(num_layers).
DecimationNetwork build_decimation_dnn(double initial_coupling, std::size_t num_layers, std::size_t chain_length);

/// Exact distribution of every layer under the generative model: top prior,
/// then the visible-given-hidden conditionals of each layer going down.
/// Entry l is the distribution over layer l.
std::vector<std::vector<double>> exact_layer_marginals(const DNNStack& stack,
                                                       std::size_t limit = kDefaultEnumerationLimit);

// ---------------------------------------------------------------------------
// Stack files
// ---------------------------------------------------------------------------

/// Directory with manifest.json (layer order, sizes, ties, top prior) and
/// one model file per layer.
void save_stack(const DNNStack& stack, const std::string& directory);
DNNStack load_stack(const std::string& directory);

}  // namespace rgdl
