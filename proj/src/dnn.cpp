#include "rgdl/dnn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace rgdl {

namespace fs = std::filesystem;

std::vector<std::size_t> DNNStack::layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(layers.front().n_visible);
    for (const auto& l : layers) sizes.push_back(l.n_hidden);
    return sizes;
}

SpinDomain DNNStack::domain() const {
    return layers.empty() ? SpinDomain::PlusMinusOne : layers.front().domain;
}

void DNNStack::validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].validate();
        if (l > 0 && layers[l].n_visible != layers[l - 1].n_hidden)
            fail(Errc::dimension, "layer " + std::to_string(l + 1) + " input does not match previous layer");
        if (layers[l].domain != layers.front().domain) fail(Errc::validation, "layers use different spin domains");
    }
    if (!ties.empty()) {
        if (ties.size() != layers.size()) fail(Errc::dimension, "ties must be given for every layer or none");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (ties[l].empty()) continue;
            if (ties[l].size() != layers[l].n_hidden) fail(Errc::dimension, "ties must list every hidden unit");
            std::vector<bool> used(layers[l].n_visible, false);
            for (auto t : ties[l]) {
                if (t < 0) continue;
                if (static_cast<std::size_t>(t) >= layers[l].n_visible) fail(Errc::domain, "tie target out of range");
                if (used[static_cast<std::size_t>(t)]) fail(Errc::validation, "input unit tied twice");
                used[static_cast<std::size_t>(t)] = true;
            }
        }
    }
    if (top_prior && !layers.empty() && top_prior->num_sites() != layers.back().n_hidden)
        fail(Errc::dimension, "top prior does not match top layer");
}

bool DNNStack::tied(std::size_t layer, std::size_t input_unit, std::size_t* hidden) const {
    if (ties.empty() || ties[layer].empty()) return false;
    for (std::size_t j = 0; j < ties[layer].size(); ++j) {
        if (ties[layer][j] == static_cast<std::int32_t>(input_unit)) {
            if (hidden) *hidden = j;
            return true;
        }
    }
    return false;
}

namespace {

// input unit -> tied hidden unit (or -1) for one layer
std::vector<std::int32_t> reverse_ties(const DNNStack& stack, std::size_t layer) {
    std::vector<std::int32_t> back(stack.layers[layer].n_visible, -1);
    if (stack.ties.empty() || stack.ties[layer].empty()) return back;
    for (std::size_t j = 0; j < stack.ties[layer].size(); ++j)
        if (stack.ties[layer][j] >= 0) back[static_cast<std::size_t>(stack.ties[layer][j])] = static_cast<std::int32_t>(j);
    return back;
}

double up_probability_of_value(double x, SpinDomain domain) {
    return domain == SpinDomain::PlusMinusOne ? 0.5 * (x + 1.0) : x;
}

// Up-probabilities of a layer's outputs given real-valued inputs.
std::vector<double> layer_up(const DNNStack& stack, std::size_t l, std::span<const double> input) {
    auto p = cond_hidden_given_visible(input, stack.layers[l]);
    if (!stack.ties.empty() && !stack.ties[l].empty())
        for (std::size_t j = 0; j < p.size(); ++j)
            if (auto t = stack.ties[l][j]; t >= 0)
                p[j] = up_probability_of_value(input[static_cast<std::size_t>(t)], stack.layers[l].domain);
    return p;
}

// Up-probabilities of a layer's inputs given real-valued outputs.
std::vector<double> layer_down(const DNNStack& stack, std::size_t l, std::span<const double> hidden) {
    auto p = cond_visible_given_hidden(hidden, stack.layers[l]);
    const auto back = reverse_ties(stack, l);
    for (std::size_t i = 0; i < p.size(); ++i)
        if (back[i] >= 0) p[i] = up_probability_of_value(hidden[static_cast<std::size_t>(back[i])], stack.layers[l].domain);
    return p;
}

}  // namespace

SpinMatrix hidden_activities(const RBMParams& params, const SpinMatrix& input, Rng& rng) {
    if (input.cols != params.n_visible) fail(Errc::dimension, "input width does not match layer");
    SpinMatrix out(input.rows, params.n_hidden, params.domain);
    for (std::size_t r = 0; r < input.rows; ++r) {
        const auto p = cond_hidden_given_visible(input.row(r), params);
        sample_units(p, params.domain, rng, out.row(r));
    }
    return out;
}

StackTrainResult train_stack(const SpinMatrix& data, std::span<const std::size_t> layer_sizes, const TrainConfig& cfg,
                             const LayerInputObserver& observer) {
    if (layer_sizes.size() < 2) fail(Errc::validation, "a stack needs at least an input and one hidden layer size");
    if (layer_sizes[0] != data.cols) fail(Errc::dimension, "first layer size must equal the number of sites");
    StackTrainResult result;
    SpinMatrix input = data;
    for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
        require(layer_sizes[l] >= 1, Errc::validation, "layer sizes must be positive");
        if (observer) observer(l, input);
        TrainConfig layer_cfg = cfg;
        layer_cfg.seed = cfg.seed + l - 1;
        auto trained = train(input, layer_sizes[l], layer_cfg);
        if (l + 1 < layer_sizes.size()) {
            Rng rng(layer_cfg.seed, 2);
            input = hidden_activities(trained.params, input, rng);
        }
        result.stack.layers.push_back(std::move(trained.params));
        result.reconstruction_error.push_back(std::move(trained.reconstruction_error));
    }
    return result;
}

std::vector<std::vector<double>> propagate_up(const DNNStack& stack, std::span<const double> v, PropagationMode mode,
                                              Rng* rng) {
    stack.validate();
    if (!stack.layers.empty() && v.size() != stack.layers.front().n_visible)
        fail(Errc::dimension, "input does not match the first layer");
    if (mode == PropagationMode::Sample && !rng) fail(Errc::validation, "sample mode needs a random stream");
    const SpinDomain domain = stack.domain();
    std::vector<std::vector<double>> out{std::vector<double>(v.begin(), v.end())};
    std::vector<double> drive(v.begin(), v.end());
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        auto p = layer_up(stack, l, drive);
        if (mode == PropagationMode::Mean) {
            drive.resize(p.size());
            for (std::size_t j = 0; j < p.size(); ++j) drive[j] = expected_spin(p[j], domain);
            out.push_back(std::move(p));
        } else {
            std::vector<std::int8_t> s(p.size());
            sample_units(p, domain, *rng, s);
            drive.assign(s.begin(), s.end());
            out.push_back(drive);
        }
    }
    return out;
}

Reconstruction reconstruct(const DNNStack& stack, std::span<const std::int8_t> v) {
    stack.validate();
    const SpinDomain domain = stack.domain();
    std::vector<double> x(v.begin(), v.end());
    if (stack.layers.empty()) {
        Reconstruction r;
        for (double s : x) r.probability.push_back(up_probability_of_value(s, domain));
        r.config = {domain, std::vector<std::int8_t>(v.begin(), v.end())};
        return r;
    }
    if (v.size() != stack.layers.front().n_visible) fail(Errc::dimension, "input does not match the first layer");
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const auto p = layer_up(stack, l, x);
        x.resize(p.size());
        for (std::size_t j = 0; j < p.size(); ++j) x[j] = expected_spin(p[j], domain);
    }
    std::vector<double> p;
    for (std::size_t l = stack.layers.size(); l-- > 0;) {
        p = layer_down(stack, l, x);
        x.resize(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) x[i] = expected_spin(p[i], domain);
    }
    Reconstruction r{p, {domain, std::vector<std::int8_t>(p.size())}};
    for (std::size_t i = 0; i < p.size(); ++i) r.config.values[i] = p[i] >= 0.5 ? spin_up(domain) : spin_down(domain);
    return r;
}

// ---------------------------------------------------------------------------

ReceptiveFieldSet receptive_fields(const DNNStack& stack) {
    stack.validate();
    if (stack.layers.empty()) fail(Errc::validation, "stack has no layers");
    using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    ReceptiveFieldSet set;
    Matrix r;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const auto& layer = stack.layers[l];
        const Eigen::Map<const Matrix> w(layer.w.data(), static_cast<Eigen::Index>(layer.n_visible),
                                         static_cast<Eigen::Index>(layer.n_hidden));
        r = l == 0 ? Matrix(w) : Matrix(r * w);
        ReceptiveField f{static_cast<std::size_t>(r.rows()), static_cast<std::size_t>(r.cols()),
                         std::vector<double>(r.data(), r.data() + r.size())};
        set.layers.push_back(std::move(f));
    }
    return set;
}

std::vector<double> unit_receptive_radii(const ReceptiveField& rf, const Lattice& lattice) {
    if (rf.rows != lattice.num_sites()) fail(Errc::dimension, "receptive field does not match lattice");
    const bool periodic = lattice.boundary() == Boundary::Periodic;
    const std::size_t extent[2] = {lattice.width(), lattice.height()};

    std::vector<double> radii(rf.cols, 0.0);
    for (std::size_t j = 0; j < rf.cols; ++j) {
        double mass = 0.0;
        double centre[2] = {0.0, 0.0};
        double sum_cos[2] = {0.0, 0.0}, sum_sin[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < rf.rows; ++i) {
            const double m = std::abs(rf.at(i, j));
            if (m == 0.0) continue;
            const auto [x, y] = lattice.coords(i);
            const double pos[2] = {static_cast<double>(x), static_cast<double>(y)};
            mass += m;
            for (int a = 0; a < 2; ++a) {
                const double theta = 2.0 * std::numbers::pi * pos[a] / static_cast<double>(extent[a]);
                sum_cos[a] += m * std::cos(theta);
                sum_sin[a] += m * std::sin(theta);
                centre[a] += m * pos[a];
            }
        }
        if (mass == 0.0) continue;
        for (int a = 0; a < 2; ++a) {
            if (periodic) {
                const double theta = std::atan2(sum_sin[a], sum_cos[a]);
                centre[a] = theta * static_cast<double>(extent[a]) / (2.0 * std::numbers::pi);
            } else {
                centre[a] /= mass;
            }
        }
        double second = 0.0;
        for (std::size_t i = 0; i < rf.rows; ++i) {
            const double m = std::abs(rf.at(i, j));
            if (m == 0.0) continue;
            const auto [x, y] = lattice.coords(i);
            const double pos[2] = {static_cast<double>(x), static_cast<double>(y)};
            for (int a = 0; a < 2; ++a) {
                double d = pos[a] - centre[a];
                if (periodic) {
                    const double len = static_cast<double>(extent[a]);
                    d -= len * std::floor(d / len + 0.5);
                }
                second += m * d * d;
            }
        }
        radii[j] = std::sqrt(second / mass);
    }
    return radii;
}

std::vector<double> receptive_field_size(const ReceptiveFieldSet& rf, const Lattice& lattice) {
    if (lattice.kind() != LatticeKind::Square2D) fail(Errc::domain, "receptive field sizes need a square lattice");
    std::vector<double> sizes;
    for (const auto& layer : rf.layers) {
        auto radii = unit_receptive_radii(layer, lattice);
        if (radii.empty()) {
            sizes.push_back(0.0);
            continue;
        }
        std::sort(radii.begin(), radii.end());
        const std::size_t n = radii.size();
        sizes.push_back(n % 2 ? radii[n / 2] : 0.5 * (radii[n / 2 - 1] + radii[n / 2]));
    }
    return sizes;
}

void export_receptive_fields(const ReceptiveFieldSet& rf, const Lattice& lattice, const std::string& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) fail(Errc::io, "cannot create '" + directory + "'");
    for (std::size_t l = 0; l < rf.layers.size(); ++l) {
        const auto& layer = rf.layers[l];
        if (layer.rows != lattice.num_sites()) fail(Errc::dimension, "receptive field does not match lattice");
        const std::string stem = (fs::path(directory) / ("layer" + std::to_string(l + 1))).string();

        std::ofstream csv(stem + ".csv");
        csv.imbue(std::locale::classic());
        csv.precision(17);
        for (std::size_t i = 0; i < layer.rows; ++i) {
            for (std::size_t j = 0; j < layer.cols; ++j) csv << (j ? "," : "") << layer.at(i, j);
            csv << '\n';
        }
        std::ofstream norm(stem + "_normalization.txt");
        norm.imbue(std::locale::classic());
        norm.precision(17);
        norm << "# unit min max (pixel = 255 * (r - min) / (max - min))\n";
        for (std::size_t j = 0; j < layer.cols; ++j) {
            double lo = layer.at(0, j), hi = lo;
            for (std::size_t i = 1; i < layer.rows; ++i) {
                lo = std::min(lo, layer.at(i, j));
                hi = std::max(hi, layer.at(i, j));
            }
            norm << j << ' ' << lo << ' ' << hi << '\n';
            std::ofstream pgm(stem + "_unit" + std::to_string(j) + ".pgm", std::ios::binary);
            pgm << "P5\n" << lattice.width() << ' ' << lattice.height() << "\n255\n";
            for (std::size_t i = 0; i < layer.rows; ++i) {
                const double t = hi > lo ? (layer.at(i, j) - lo) / (hi - lo) : 0.5;
                pgm.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
            }
            if (!pgm) fail(Errc::io, "failed writing receptive field image");
        }
        if (!csv || !norm) fail(Errc::io, "failed writing receptive field export");
    }
}

// ---------------------------------------------------------------------------

Hamiltonian ring_hamiltonian(std::size_t n, double coupling) {
    require(n >= 1, Errc::validation, "ring needs at least one site");
    Hamiltonian h(n);
    if (n == 1) {
        h.add({}, coupling);
        return h;
    }
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto next = static_cast<std::uint32_t>((i + 1) % n);
        h.add({i, next}, coupling);
    }
    return h;
}

DecimationNetwork build_decimation_dnn(double initial_coupling, std::size_t num_layers, std::size_t chain_length) {
    require(chain_length >= 1, Errc::validation, "chain length must be positive");
    if (num_layers >= 63 || chain_length % (std::size_t{1} << num_layers) != 0)
        fail(Errc::validation, "chain length must be divisible by 2^num_layers");
    DecimationNetwork net;
    net.flow = rg_flow(initial_coupling, num_layers);
    std::size_t n = chain_length;
    for (std::size_t l = 0; l < num_layers; ++l) {
        const std::size_t m = n / 2;
        RBMParams layer(n, m);
        std::vector<std::int32_t> tie(m);
        const double j_in = net.flow.couplings[l];
        for (std::size_t j = 0; j < m; ++j) {
            tie[j] = static_cast<std::int32_t>(2 * j);
            layer.weight(2 * j + 1, j) += -j_in;
            layer.weight(2 * j + 1, (j + 1) % m) += -j_in;
        }
        net.stack.layers.push_back(std::move(layer));
        net.stack.ties.push_back(std::move(tie));
        n = m;
    }
    net.stack.top_prior = ring_hamiltonian(n, net.flow.couplings.back());
    return net;
}

std::vector<std::vector<double>> exact_layer_marginals(const DNNStack& stack, std::size_t limit) {
    stack.validate();
    if (stack.layers.empty()) {
        if (!stack.top_prior) fail(Errc::validation, "an empty stack needs a prior");
        return {boltzmann_distribution(*stack.top_prior, SpinDomain::PlusMinusOne, limit)};
    }
    const SpinDomain domain = stack.domain();
    const auto sizes = stack.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) require_enumerable(sizes[l] + sizes[l + 1], limit);

    std::vector<std::vector<double>> out(sizes.size());
    out.back() = stack.top_prior ? boltzmann_distribution(*stack.top_prior, domain, limit)
                                 : exact_hidden_marginal(stack.layers.back(), limit).probability;
    for (std::size_t l = stack.layers.size(); l-- > 0;) {
        const std::size_t nv = sizes[l], nh = sizes[l + 1];
        std::vector<double> below(std::size_t{1} << nv, 0.0);
        std::vector<std::int8_t> h(nh);
        std::vector<double> hv(nh), cond(std::size_t{1} << nv);
        for (std::uint64_t hs = 0; hs < (std::uint64_t{1} << nh); ++hs) {
            const double prior = out[l + 1][hs];
            if (prior == 0.0) continue;
            decode_state(hs, domain, h);
            std::copy(h.begin(), h.end(), hv.begin());
            const auto p_up = layer_down(stack, l, hv);
            // product distribution over the inputs, built one site at a time
            cond[0] = 1.0;
            for (std::size_t i = 0; i < nv; ++i) {
                const std::size_t half = std::size_t{1} << i;
                for (std::size_t s = 0; s < half; ++s) {
                    cond[s | half] = cond[s] * p_up[i];
                    cond[s] *= 1.0 - p_up[i];
                }
            }
            for (std::size_t s = 0; s < below.size(); ++s) below[s] += prior * cond[s];
        }
        out[l] = std::move(below);
    }
    return out;
}

// ---------------------------------------------------------------------------

void save_stack(const DNNStack& stack, const std::string& directory) {
    stack.validate();
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) fail(Errc::io, "cannot create '" + directory + "'");
    nlohmann::json manifest;
    manifest["format"] = "rgdl-stack";
    manifest["version"] = 1;
    manifest["sizes"] = stack.layer_sizes();
    manifest["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const std::string name = "layer" + std::to_string(l + 1) + ".json";
        save_rbm(stack.layers[l], (fs::path(directory) / name).string());
        nlohmann::json entry{{"file", name},
                             {"n_visible", stack.layers[l].n_visible},
                             {"n_hidden", stack.layers[l].n_hidden}};
        if (!stack.ties.empty() && !stack.ties[l].empty()) entry["ties"] = stack.ties[l];
        manifest["layers"].push_back(std::move(entry));
    }
    if (stack.top_prior) manifest["top_prior"] = stack.top_prior->to_text();
    std::ofstream out(fs::path(directory) / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) fail(Errc::io, "failed writing stack manifest");
}

DNNStack load_stack(const std::string& directory) {
    std::ifstream in(fs::path(directory) / "manifest.json");
    if (!in) fail(Errc::io, "no manifest.json in '" + directory + "'");
    DNNStack stack;
    try {
        const auto manifest = nlohmann::json::parse(in);
        if (manifest.at("format") != "rgdl-stack") fail(Errc::io, "not a stack manifest");
        bool any_ties = false;
        for (const auto& entry : manifest.at("layers")) {
            auto params = load_rbm((fs::path(directory) / entry.at("file").get<std::string>()).string());
            if (params.n_visible != entry.at("n_visible").get<std::size_t>() ||
                params.n_hidden != entry.at("n_hidden").get<std::size_t>())
                fail(Errc::io, "layer file disagrees with manifest");
            stack.layers.push_back(std::move(params));
            stack.ties.push_back(entry.contains("ties") ? entry["ties"].get<std::vector<std::int32_t>>()
                                                        : std::vector<std::int32_t>{});
            any_ties = any_ties || entry.contains("ties");
        }
        if (!any_ties) stack.ties.clear();
        if (manifest.contains("top_prior") && !stack.layers.empty())
            stack.top_prior = Hamiltonian::parse_text(manifest["top_prior"].get<std::string>(), stack.layers.back().n_hidden);
        if (manifest.at("sizes").get<std::vector<std::size_t>>() != stack.layer_sizes())
            fail(Errc::io, "manifest sizes disagree with layer files");
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::io, std::string("bad stack manifest: ") + e.what());
    }
    stack.validate();
    return stack;
}

}  // namespace rgdl
