// Command-line driver. Talks to the library only through rgdl.h.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rgdl/rgdl.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
    std::string code;
    std::string message;
};

void check(rgdl_status status) {
    if (status != RGDL_OK) throw Failure{rgdl_status_name(status), rgdl_last_error()};
}

[[noreturn]] void invalid(const std::string& message) { throw Failure{"validation", message}; }

template <class T, void (*Free)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(ptr); }
    T** out() { return &ptr; }
    T* get() const { return ptr; }
};

using Lattice = Handle<rgdl_lattice, rgdl_lattice_free>;
using Hamiltonian = Handle<rgdl_hamiltonian, rgdl_hamiltonian_free>;
using Dataset = Handle<rgdl_dataset, rgdl_dataset_free>;
using Rbm = Handle<rgdl_rbm, rgdl_rbm_free>;
using Stack = Handle<rgdl_stack, rgdl_stack_free>;

// Reads the config.json echoed by an earlier run. Each subcommand section
// becomes a configurable CLI11 section; command-line flags take precedence.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json root;
        try {
            root = json::parse(input);
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config is not valid JSON: " + std::string(e.what()));
        }
        std::vector<CLI::ConfigItem> items;
        for (const auto& [section, body] : root.items()) {
            if (!body.is_object()) continue;  // "command" and other metadata
            items.push_back({{section}, "++", {}});
            for (const auto& [key, value] : body.items()) {
                CLI::ConfigItem item{{section}, key, {}};
                if (value.is_array()) {
                    for (const auto& v : value) item.inputs.push_back(scalar(v));
                } else {
                    item.inputs.push_back(scalar(value));
                }
                items.push_back(std::move(item));
            }
            items.push_back({{section}, "--", {}});
        }
        return items;
    }

private:
    static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }
};

// Output directory with config echo and log.
class Run {
public:
    Run(const std::string& dir, const std::string& command, const json& options) : dir_(dir) {
        if (dir.empty()) invalid("--out is required");
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Failure{"io", "cannot create '" + dir + "': " + ec.message()};
        json echo;
        echo["command"] = command;
        echo[command] = options;
        write("config.json", echo.dump(2) + "\n");
        log_.open(dir_ / "log.txt");
        if (!log_) throw Failure{"io", "cannot write log in '" + dir + "'"};
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void log(const std::string& line) {
        log_ << line << '\n';
        std::cout << line << '\n';
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << text;
        if (!out) throw Failure{"io", "cannot write '" + (dir_ / name).string() + "'"};
    }

private:
    fs::path dir_;
    std::ofstream log_;
};

// Shortest text that reads back to the same double, locale independent.
std::string num(double x) {
    if (std::isnan(x)) return "";
    return json(x).dump();
}

std::string describe(const rgdl_lattice* lat) {
    size_t needed = 0;
    check(rgdl_lattice_describe(lat, nullptr, 0, &needed));
    std::string s(needed + 1, '\0');
    check(rgdl_lattice_describe(lat, s.data(), s.size(), nullptr));
    s.resize(needed);
    return s;
}

rgdl_domain parse_domain(const std::string& d) {
    if (d == "pm1") return RGDL_DOMAIN_PM1;
    if (d == "01") return RGDL_DOMAIN_01;
    invalid("unknown domain '" + d + "' (expected pm1 or 01)");
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nan("");
    return sxy / std::sqrt(sxx * syy);
}

double magnetization(const std::vector<int8_t>& s, rgdl_domain domain) {
    double m = 0;
    for (auto x : s) m += domain == RGDL_DOMAIN_PM1 ? x : 2 * x - 1;
    return m / static_cast<double>(s.size());
}

// ---------------------------------------------------------------------------

struct SampleOptions {
    std::string out, lattice = "2d:16x16:periodic", domain = "pm1";
    double coupling = 0.408, field = 0.0;
    std::uint64_t samples = 40000, burn_in = 1000, thinning = 10, chains = 1, seed = 0;
    bool csv = false;
};

void cmd_ising_sample(const SampleOptions& o) {
    Run run(o.out, "ising-sample",
            {{"out", o.out}, {"lattice", o.lattice}, {"J", o.coupling}, {"field", o.field}, {"samples", o.samples},
             {"burn-in", o.burn_in}, {"thinning", o.thinning}, {"chains", o.chains}, {"seed", o.seed},
             {"domain", o.domain}, {"csv", o.csv}});
    Lattice lat;
    check(rgdl_lattice_parse(o.lattice.c_str(), lat.out()));
    Hamiltonian h;
    check(rgdl_hamiltonian_ising(lat.get(), o.coupling, o.field, h.out()));
    rgdl_sampler_config cfg{o.seed, o.burn_in, o.thinning, o.samples, o.chains};
    Dataset ds;
    run.log("sampling " + std::to_string(o.samples) + " configurations on " + describe(lat.get()) + " at J=" +
            num(o.coupling));
    check(rgdl_sample(h.get(), lat.get(), &cfg, parse_domain(o.domain), ds.out()));
    check(rgdl_dataset_save(ds.get(), run.path("dataset.bin").c_str()));
    if (o.csv) check(rgdl_dataset_save_csv(ds.get(), run.path("samples.csv").c_str()));

    rgdl_observables obs{};
    check(rgdl_dataset_observables(ds.get(), &obs));
    const json report = {{"num_samples", obs.num_samples},
                         {"num_sites", rgdl_dataset_num_sites(ds.get())},
                         {"magnetization", {{"mean", obs.magnetization}, {"stderr", obs.magnetization_stderr}}},
                         {"abs_magnetization", {{"mean", obs.abs_magnetization}, {"stderr", obs.abs_magnetization_stderr}}},
                         {"nn_correlation", {{"mean", obs.nn_correlation}, {"stderr", obs.nn_correlation_stderr}}}};
    run.write("observables.json", report.dump(2) + "\n");
    run.log("|m| = " + num(obs.abs_magnetization) + " +- " + num(obs.abs_magnetization_stderr) +
            ", nn correlation = " + num(obs.nn_correlation) + " +- " + num(obs.nn_correlation_stderr));
    run.log("wrote dataset.bin, observables.json");
}

// ---------------------------------------------------------------------------

struct FlowOptions {
    std::string out;
    double initial = 1.0;
    std::uint64_t steps = 4;
};

void cmd_rg_flow(const FlowOptions& o) {
    Run run(o.out, "rg-flow", {{"out", o.out}, {"J0", o.initial}, {"steps", o.steps}});
    std::vector<double> flow(o.steps + 1), closed(o.steps + 1);
    check(rgdl_rg_flow(o.initial, o.steps, flow.data(), closed.data()));
    std::string csv = "step,J,J_closed_form\n";
    for (std::size_t k = 0; k <= o.steps; ++k)
        csv += std::to_string(k) + "," + num(flow[k]) + "," + num(closed[k]) + "\n";
    run.write("flow.csv", csv);
    for (std::size_t k = 0; k <= o.steps; ++k) run.log("J(" + std::to_string(k) + ") = " + num(flow[k]));
}

// ---------------------------------------------------------------------------

std::vector<size_t> resolve_sizes(std::vector<std::size_t> sizes, size_t num_sites) {
    if (sizes.empty()) invalid("--sizes is required");
    if (sizes.front() != num_sites) sizes.insert(sizes.begin(), num_sites);
    if (sizes.size() < 2) invalid("--sizes needs at least one hidden layer");
    return {sizes.begin(), sizes.end()};
}

struct TrainOptions {
    std::string out, data;
    std::vector<std::size_t> sizes;
    double learning_rate = 0.05, momentum = 0.5, l1 = 2e-4, init_scale = 1.0, holdout = 0.1;
    std::uint64_t minibatch = 100, epochs = 200, cd_k = 1, seed = 0;
};

void cmd_train(const TrainOptions& o) {
    Run run(o.out, "train",
            {{"out", o.out}, {"data", o.data}, {"sizes", o.sizes}, {"learning-rate", o.learning_rate},
             {"momentum", o.momentum}, {"minibatch", o.minibatch}, {"epochs", o.epochs}, {"cd-k", o.cd_k},
             {"l1", o.l1}, {"init-scale", o.init_scale}, {"holdout", o.holdout}, {"seed", o.seed}});
    if (o.holdout < 0 || o.holdout >= 1) invalid("--holdout must lie in [0, 1)");
    Dataset ds;
    check(rgdl_dataset_load(o.data.c_str(), ds.out()));
    const auto sizes = resolve_sizes(o.sizes, rgdl_dataset_num_sites(ds.get()));
    const size_t rows = rgdl_dataset_num_samples(ds.get());
    const auto held_out = static_cast<size_t>(std::llround(o.holdout * static_cast<double>(rows)));
    const size_t train_rows = rows - held_out;

    rgdl_train_config cfg{o.learning_rate, o.momentum, o.minibatch, o.epochs, o.cd_k, o.l1, o.seed, o.init_scale};
    std::string shape;
    for (auto s : sizes) shape += (shape.empty() ? "" : "-") + std::to_string(s);
    run.log("training stack " + shape + " on rows [0, " + std::to_string(train_rows) + "), holding out " +
            std::to_string(held_out));
    run.log("epochs " + std::to_string(o.epochs) + ", momentum " + num(o.momentum) + ", minibatch " +
            std::to_string(o.minibatch) + ", L1 " + num(o.l1) + ", learning rate " + num(o.learning_rate));

    std::vector<double> recon((sizes.size() - 1) * o.epochs);
    Stack stack;
    check(rgdl_train_stack(ds.get(), 0, train_rows, sizes.data(), sizes.size(), &cfg, stack.out(), recon.data()));
    check(rgdl_stack_save(stack.get(), run.path("stack").c_str()));

    std::string csv = "layer,epoch,reconstruction_error\n";
    for (size_t l = 0; l + 1 < sizes.size(); ++l)
        for (size_t e = 0; e < o.epochs; ++e)
            csv += std::to_string(l + 1) + "," + std::to_string(e + 1) + "," + num(recon[l * o.epochs + e]) + "\n";
    run.write("reconstruction_error.csv", csv);
    for (size_t l = 0; l + 1 < sizes.size() && o.epochs > 0; ++l)
        run.log("layer " + std::to_string(l + 1) + " final reconstruction error " +
                num(recon[l * o.epochs + o.epochs - 1]));
    run.log("wrote stack/, reconstruction_error.csv");
}

// ---------------------------------------------------------------------------

struct FieldOptions {
    std::string out, stack, lattice = "2d:16x16:periodic";
    bool check_increasing = false;
};

void cmd_receptive_fields(const FieldOptions& o) {
    Run run(o.out, "receptive-fields",
            {{"out", o.out}, {"stack", o.stack}, {"lattice", o.lattice}, {"check-increasing", o.check_increasing}});
    Stack stack;
    check(rgdl_stack_load(o.stack.c_str(), stack.out()));
    Lattice lat;
    check(rgdl_lattice_parse(o.lattice.c_str(), lat.out()));
    const size_t layers = rgdl_stack_num_layers(stack.get());
    std::vector<double> sizes(layers);
    check(rgdl_receptive_field_sizes(stack.get(), lat.get(), sizes.data()));
    check(rgdl_receptive_fields_export(stack.get(), lat.get(), run.path("fields").c_str()));

    std::string csv = "layer,median_radius_of_gyration\n";
    bool increasing = true;
    for (size_t l = 0; l < layers; ++l) {
        csv += std::to_string(l + 1) + "," + num(sizes[l]) + "\n";
        run.log("layer " + std::to_string(l + 1) + " median radius " + num(sizes[l]));
        if (l > 0 && !(sizes[l] > sizes[l - 1])) increasing = false;
    }
    run.write("sizes.csv", csv);
    run.log(std::string("strictly increasing: ") + (increasing ? "yes" : "no"));
    if (o.check_increasing && !increasing) throw Failure{"check", "receptive field sizes are not strictly increasing"};
}

// ---------------------------------------------------------------------------

struct ReconstructOptions {
    std::string out, stack, data;
    std::vector<std::size_t> zero_sizes;
    double holdout = 0.1;
};

void cmd_reconstruct(const ReconstructOptions& o) {
    Run run(o.out, "reconstruct",
            {{"out", o.out}, {"stack", o.stack}, {"data", o.data}, {"zero-sizes", o.zero_sizes}, {"holdout", o.holdout}});
    if (o.holdout <= 0 || o.holdout > 1) invalid("--holdout must lie in (0, 1]");
    Dataset ds;
    check(rgdl_dataset_load(o.data.c_str(), ds.out()));
    const size_t n = rgdl_dataset_num_sites(ds.get()), rows = rgdl_dataset_num_samples(ds.get());
    const rgdl_domain domain = rgdl_dataset_domain(ds.get());

    Stack stack;
    if (!o.zero_sizes.empty()) {
        const auto sizes = resolve_sizes(o.zero_sizes, n);
        check(rgdl_stack_zero(sizes.data(), sizes.size(), stack.out()));
    } else {
        if (o.stack.empty()) invalid("either --stack or --zero-sizes is required");
        check(rgdl_stack_load(o.stack.c_str(), stack.out()));
    }
    const size_t layers = rgdl_stack_num_layers(stack.get());
    if (layers == 0) invalid("stack has no layers");
    if (rgdl_stack_layer_size(stack.get(), 0) != n) invalid("stack input size does not match the dataset");
    const size_t top = rgdl_stack_layer_size(stack.get(), layers);

    const auto count = std::max<size_t>(1, static_cast<size_t>(std::llround(o.holdout * static_cast<double>(rows))));
    const size_t first = rows - count;
    std::vector<int8_t> input(n), output(n);
    std::vector<double> prob(n), m_in, m_out, m_prob;
    double agreement = 0.0, mean_prob = 0.0;
    std::string csv = "row,m_input,m_reconstruction,m_expected,agreement\n";
    for (size_t r = first; r < rows; ++r) {
        check(rgdl_dataset_row(ds.get(), r, input.data(), n));
        check(rgdl_reconstruct(stack.get(), input.data(), n, prob.data(), output.data()));
        double agree = 0.0, expected = 0.0;
        for (size_t i = 0; i < n; ++i) {
            agree += input[i] == output[i];
            expected += 2.0 * prob[i] - 1.0;
            mean_prob += prob[i];
        }
        agree /= static_cast<double>(n);
        expected /= static_cast<double>(n);
        m_in.push_back(magnetization(input, domain));
        m_out.push_back(magnetization(output, domain));
        m_prob.push_back(expected);
        agreement += agree;
        csv += std::to_string(r) + "," + num(m_in.back()) + "," + num(m_out.back()) + "," + num(expected) + "," +
               num(agree) + "\n";
    }
    run.write("reconstructions.csv", csv);

    const double corr = pearson(m_in, m_out);
    const json summary = {{"samples", count},
                          {"first_row", first},
                          {"magnetization_correlation", std::isnan(corr) ? json(nullptr) : json(corr)},
                          {"mean_agreement", agreement / static_cast<double>(count)},
                          {"mean_probability", mean_prob / static_cast<double>(count * n)},
                          {"input_size", n},
                          {"top_size", top},
                          {"compression_ratio", static_cast<double>(n) / static_cast<double>(top)}};
    run.write("summary.json", summary.dump(2) + "\n");
    run.log("reconstructed " + std::to_string(count) + " held-out samples (rows " + std::to_string(first) + "+)");
    run.log("magnetization correlation " + (std::isnan(corr) ? std::string("undefined") : num(corr)) +
            ", mean agreement " + num(agreement / static_cast<double>(count)));
    run.log("compression ratio " + std::to_string(n) + "/" + std::to_string(top) + " = " +
            num(static_cast<double>(n) / static_cast<double>(top)));
}

// ---------------------------------------------------------------------------

struct VerifyOptions {
    std::string out, rbm, visible_coupling, hamiltonian, lattice = "2d:4x4:periodic";
    std::uint64_t instances = 100, seed = 0, chain = 8;
    double h_scale = 1.0, param_scale = 1.0, coupling = 0.7, block_coupling = 0.408, perturbation = 1e-3;
};

json report_json(const rgdl_mapping_report& r) {
    size_t needed = 0;
    check(rgdl_mapping_report_json(&r, nullptr, 0, &needed));
    std::string s(needed + 1, '\0');
    check(rgdl_mapping_report_json(&r, s.data(), s.size(), nullptr));
    s.resize(needed);
    return json::parse(s);
}

void cmd_verify_mapping(const VerifyOptions& o) {
    Run run(o.out, "verify-mapping",
            {{"out", o.out}, {"rbm", o.rbm}, {"visible-coupling", o.visible_coupling}, {"hamiltonian", o.hamiltonian},
             {"instances", o.instances}, {"seed", o.seed}, {"h-scale", o.h_scale}, {"param-scale", o.param_scale},
             {"chain", o.chain}, {"J", o.coupling}, {"lattice", o.lattice}, {"block-J", o.block_coupling},
             {"perturbation", o.perturbation}});
    json result;

    if (!o.rbm.empty()) {
        // Single user-supplied case.
        Rbm rbm;
        check(rgdl_rbm_load(o.rbm.c_str(), rbm.out()));
        const size_t nv = rgdl_rbm_num_visible(rbm.get());
        Hamiltonian vv, data;
        if (!o.visible_coupling.empty()) check(rgdl_hamiltonian_load(o.visible_coupling.c_str(), nv, vv.out()));
        if (o.hamiltonian.empty())
            check(rgdl_extract_visible_hamiltonian(rbm.get(), vv.get(), data.out()));
        else
            check(rgdl_hamiltonian_load(o.hamiltonian.c_str(), nv, data.out()));
        rgdl_mapping_report r{};
        check(rgdl_verify_mapping(rbm.get(), vv.get(), data.get(), &r));
        result["case"] = report_json(r);
        run.write("report.json", result.dump(2) + "\n");
        run.log(result["case"].dump());
        return;
    }

    // Bundled suite. Instance k has N = 1 + k mod 5 visible and
    // M = 1 + (k / 5) mod 4 hidden units, covering every size pair.
    struct Worst {
        double distance = 0, identity = 0, identity_scaled = 0, exactness = 0, delta_f = 0, kl = 0;
        void add(const rgdl_mapping_report& r) {
            distance = std::max(distance, r.hidden_distribution_distance);
            identity = std::max(identity, r.conditional_identity_residual);
            identity_scaled = std::max(identity_scaled, r.conditional_identity_scaled_residual);
            exactness = std::max(exactness, r.exactness_residual);
            delta_f = std::max(delta_f, std::abs(r.delta_F));
            kl = std::max(kl, r.kl_visible);
        }
    } random_case, general_case, exact_case;

    for (std::uint64_t k = 0; k < o.instances; ++k) {
        const size_t n = 1 + k % 5, m = 1 + (k / 5) % 4;
        Rbm rbm;
        check(rgdl_rbm_random(n, m, o.param_scale, o.seed * 1000003 + k, rbm.out()));
        Hamiltonian data, vv, exact;
        check(rgdl_hamiltonian_random_pairs(n, o.h_scale, o.seed * 1000003 + k + 500000, data.out()));
        rgdl_mapping_report r{};
        check(rgdl_verify_mapping(rbm.get(), nullptr, data.get(), &r));
        random_case.add(r);
        const std::string term = n >= 2 ? "K 0.7 0 " + std::to_string(n - 1) + "\n" : "K 0.7 0\n";
        check(rgdl_hamiltonian_parse(term.c_str(), n, vv.out()));
        check(rgdl_verify_mapping(rbm.get(), vv.get(), data.get(), &r));
        general_case.add(r);
        check(rgdl_extract_visible_hamiltonian(rbm.get(), nullptr, exact.out()));
        check(rgdl_verify_mapping(rbm.get(), nullptr, exact.get(), &r));
        exact_case.add(r);
    }
    auto identity_json = [](const Worst& w) {
        return json{{"max_hidden_distribution_distance", w.distance},
                    {"max_conditional_identity_residual", w.identity},
                    {"max_conditional_identity_scaled_residual", w.identity_scaled},
                    {"pass_distance", w.distance <= 1e-12},
                    {"pass_identity", w.identity <= 1e-10}};
    };
    result["instances"] = o.instances;
    result["random"] = identity_json(random_case);
    result["general_machine"] = identity_json(general_case);
    result["exact"] = {{"max_exactness_residual", exact_case.exactness},
                       {"max_abs_delta_F", exact_case.delta_f},
                       {"max_kl_visible", exact_case.kl},
                       {"pass", exact_case.exactness <= 1e-10 && exact_case.kl <= 1e-8}};

    rgdl_mapping_report dec{}, pert{}, block{};
    check(rgdl_verify_decimation(o.chain, o.coupling, 0.0, &dec));
    check(rgdl_verify_decimation(o.chain, o.coupling, o.perturbation, &pert));
    Lattice lat;
    check(rgdl_lattice_parse(o.lattice.c_str(), lat.out()));
    check(rgdl_verify_block_spin(lat.get(), o.block_coupling, 0.0, &block));
    result["decimation"] = report_json(dec);
    result["decimation"]["pass"] = dec.exactness_residual <= 1e-14 && std::abs(dec.delta_F) <= 1e-10;
    result["block_spin"] = report_json(block);
    result["block_spin"]["pass"] = block.exactness_residual <= 1e-14 && std::abs(block.delta_F) <= 1e-10;
    result["perturbed_decimation"] = report_json(pert);
    result["perturbed_decimation"]["pass"] = pert.exactness_residual > 0 && std::abs(pert.delta_F) > 0;

    run.write("report.json", result.dump(2) + "\n");
    for (const char* key : {"random", "general_machine", "exact", "decimation", "block_spin", "perturbed_decimation"})
        run.log(std::string(key) + ": " + result[key].dump());
}

void emit_error(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Renormalization group and deep learning toolkit"};
    app.set_version_flag("--version", std::string(rgdl_version()));
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "Re-run from a config.json written by an earlier run");
    app.require_subcommand(1);
    app.fallthrough();

    SampleOptions sample;
    auto* s = app.add_subcommand("ising-sample", "Metropolis samples of the Ising model")->configurable();
    s->add_option("--out", sample.out, "Output directory")->required();
    s->add_option("--lattice", sample.lattice, "1d:<n>:<bc> or 2d:<w>x<h>:<bc>")->capture_default_str();
    s->add_option("--J", sample.coupling, "Nearest-neighbour coupling")->capture_default_str();
    s->add_option("--field", sample.field, "Uniform field")->capture_default_str();
    s->add_option("--samples", sample.samples, "Retained configurations")->capture_default_str();
    s->add_option("--burn-in", sample.burn_in, "Sweeps discarded per chain")->capture_default_str();
    s->add_option("--thinning", sample.thinning, "Sweeps between retained samples")->capture_default_str();
    s->add_option("--chains", sample.chains, "Independent chains")->capture_default_str();
    s->add_option("--seed", sample.seed)->capture_default_str();
    s->add_option("--domain", sample.domain, "pm1 or 01")->capture_default_str();
    s->add_flag("--csv", sample.csv, "Also write samples.csv");

    FlowOptions flow;
    auto* f = app.add_subcommand("rg-flow", "Coupling flow under 1D decimation")->configurable();
    f->add_option("--out", flow.out, "Output directory")->required();
    f->add_option("--J0", flow.initial, "Initial coupling")->capture_default_str();
    f->add_option("--steps", flow.steps, "Decimation steps")->capture_default_str();

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Greedy layer-wise training of an RBM stack")->configurable();
    t->add_option("--out", train.out, "Output directory")->required();
    t->add_option("--data", train.data, "Dataset file from ising-sample")->required();
    t->add_option("--sizes", train.sizes, "Layer sizes, e.g. 256,64,16 (input size may be omitted)")
        ->delimiter(',')
        ->required();
    t->add_option("--learning-rate", train.learning_rate)->capture_default_str();
    t->add_option("--momentum", train.momentum)->capture_default_str();
    t->add_option("--minibatch", train.minibatch)->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--cd-k", train.cd_k)->capture_default_str();
    t->add_option("--l1", train.l1, "L1 strength on weights")->capture_default_str();
    t->add_option("--init-scale", train.init_scale)->capture_default_str();
    t->add_option("--holdout", train.holdout, "Fraction of rows at the end left out")->capture_default_str();
    t->add_option("--seed", train.seed)->capture_default_str();

    FieldOptions fields;
    auto* r = app.add_subcommand("receptive-fields", "Effective receptive fields of a trained stack")->configurable();
    r->add_option("--out", fields.out, "Output directory")->required();
    r->add_option("--stack", fields.stack, "Stack directory")->required();
    r->add_option("--lattice", fields.lattice, "Lattice of the input layer")->capture_default_str();
    r->add_flag("--check-increasing", fields.check_increasing, "Fail unless median sizes strictly increase");

    ReconstructOptions recon;
    auto* c = app.add_subcommand("reconstruct", "Reconstruct held-out samples through a stack")->configurable();
    c->add_option("--out", recon.out, "Output directory")->required();
    c->add_option("--stack", recon.stack, "Stack directory");
    c->add_option("--zero-sizes", recon.zero_sizes, "Use an all-zero stack with these sizes instead")->delimiter(',');
    c->add_option("--data", recon.data, "Dataset file")->required();
    c->add_option("--holdout", recon.holdout, "Fraction of rows at the end to reconstruct")->capture_default_str();

    VerifyOptions verify;
    auto* v = app.add_subcommand("verify-mapping", "Check the RG/RBM mapping identities by enumeration")->configurable();
    v->add_option("--out", verify.out, "Output directory")->required();
    v->add_option("--rbm", verify.rbm, "Check one model file instead of the bundled suite");
    v->add_option("--visible-coupling", verify.visible_coupling, "Extra visible-visible terms (text Hamiltonian)");
    v->add_option("--hamiltonian", verify.hamiltonian, "Data Hamiltonian (default: the model's own H^RBM)");
    v->add_option("--instances", verify.instances, "Random instances in the suite")->capture_default_str();
    v->add_option("--seed", verify.seed)->capture_default_str();
    v->add_option("--h-scale", verify.h_scale, "Std of data Hamiltonian pair couplings")->capture_default_str();
    v->add_option("--param-scale", verify.param_scale, "Std of RBM parameters")->capture_default_str();
    v->add_option("--chain", verify.chain, "Periodic chain length for the decimation case")->capture_default_str();
    v->add_option("--J", verify.coupling, "Chain coupling for the decimation case")->capture_default_str();
    v->add_option("--lattice", verify.lattice, "Lattice for the block-spin case")->capture_default_str();
    v->add_option("--block-J", verify.block_coupling, "Coupling for the block-spin case")->capture_default_str();
    v->add_option("--perturbation", verify.perturbation, "Relative change of one operator entry")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (app.got_subcommand(s)) cmd_ising_sample(sample);
        else if (app.got_subcommand(f)) cmd_rg_flow(flow);
        else if (app.got_subcommand(t)) cmd_train(train);
        else if (app.got_subcommand(r)) cmd_receptive_fields(fields);
        else if (app.got_subcommand(c)) cmd_reconstruct(recon);
        else if (app.got_subcommand(v)) cmd_verify_mapping(verify);
    } catch (const Failure& e) {
        emit_error(e.code, e.message);
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
    return 0;
}
