#pragma once

// Declarative experiment runner shared by the CLI and the acceptance suite.
// A JSON config names a dataset, graph parameters, a method and its
// parameters; `run_experiment` executes the seeded runs and writes the
// report and plots.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgl/assignment.hpp"
#include "mgl/baselines.hpp"
#include "mgl/datasets.hpp"
#include "mgl/error.hpp"
#include "mgl/eval.hpp"
#include "mgl/graph.hpp"
#include "mgl/solver.hpp"

namespace mgl {

using json = nlohmann::json;

struct DatasetSpec {
    std::string generator; // "three-moons" | "swiss-roll"; empty for files
    std::uint64_t seed = 1;
    std::string csv;
    std::optional<std::string> label_column;
    std::vector<std::string> idx_images;
    std::vector<std::string> idx_labels;
    std::optional<std::size_t> subsample; // stratified, seeded by `seed`

    std::string describe() const {
        if (!generator.empty()) return generator;
        if (!csv.empty()) return std::filesystem::path(csv).filename().string();
        return idx_images.empty() ? "dataset" : std::filesystem::path(idx_images.front()).filename().string();
    }
};

enum class Method { MulticlassGL, KMeans, Spectral };

inline std::string to_string(Method m) {
    switch (m) {
    case Method::MulticlassGL: return "multiclass_gl";
    case Method::KMeans: return "kmeans";
    case Method::Spectral: return "spectral";
    }
    return "?";
}

struct ExperimentConfig {
    std::string name;
    DatasetSpec dataset;
    GraphConfig graph;
    Method method = Method::MulticlassGL;
    SolverConfig solver;
    bool classes_given = false;
    FidelitySpec fidelity;
    std::size_t eigenvectors = 0; // 0: use K
    bool normalize_rows = false;
    KMeansOptions kmeans;
    std::size_t runs = 1;
    bool vary_dataset = false; // regenerate synthetic data per run (seed + run)
    bool record_timing = false;
    bool exclude_fidelity = false;
    std::string output;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {
inline void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("key '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

// Expands ${VAR}; an unset variable is a config error.
inline std::string expand_env(const std::string& s) {
    static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
    std::string out;
    auto begin = std::sregex_iterator(s.begin(), s.end(), var);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        out += s.substr(last, static_cast<std::size_t>(m.position()) - last);
        const char* value = std::getenv(m[1].str().c_str());
        if (!value || !*value) throw ConfigError("environment variable " + m[1].str() + " is not set");
        out += value;
        last = static_cast<std::size_t>(m.position() + m.length());
    }
    return out + s.substr(last);
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path = expand_env(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path.lexically_normal().string();
}
} // namespace detail

// Relative dataset paths resolve against `base_dir`; the output directory
// is taken as given.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
    using detail::get_or;
    detail::reject_unknown(j, {"name", "dataset", "graph", "method", "solver", "fidelity", "spectral", "kmeans", "runs",
                               "vary_dataset", "record_timing", "exclude_fidelity_from_accuracy", "output"},
                           "config");
    ExperimentConfig c;
    c.name = get_or<std::string>(j, "name", "experiment", "config");

    if (!j.contains("dataset")) throw ConfigError("config is missing 'dataset'");
    const auto& d = j.at("dataset");
    detail::reject_unknown(d, {"generator", "seed", "csv", "label_column", "idx_images", "idx_labels", "subsample"}, "dataset");
    c.dataset.generator = get_or<std::string>(d, "generator", "", "dataset");
    c.dataset.seed = get_or<std::uint64_t>(d, "seed", 1, "dataset");
    if (d.contains("csv")) c.dataset.csv = detail::resolve_path(get_or<std::string>(d, "csv", "", "dataset"), base_dir);
    if (d.contains("label_column")) c.dataset.label_column = get_or<std::string>(d, "label_column", "", "dataset");
    for (const auto& p : get_or<std::vector<std::string>>(d, "idx_images", {}, "dataset"))
        c.dataset.idx_images.push_back(detail::resolve_path(p, base_dir));
    for (const auto& p : get_or<std::vector<std::string>>(d, "idx_labels", {}, "dataset"))
        c.dataset.idx_labels.push_back(detail::resolve_path(p, base_dir));
    if (d.contains("subsample")) c.dataset.subsample = get_or<std::size_t>(d, "subsample", 0, "dataset");
    const int sources = !c.dataset.generator.empty() + !c.dataset.csv.empty() + !c.dataset.idx_images.empty();
    if (sources != 1) throw ConfigError("dataset needs exactly one of 'generator', 'csv', 'idx_images'");
    if (!c.dataset.generator.empty() && c.dataset.generator != "three-moons" && c.dataset.generator != "swiss-roll")
        throw ConfigError("unknown generator '" + c.dataset.generator + "'");

    if (j.contains("graph")) {
        const auto& g = j.at("graph");
        detail::reject_unknown(g, {"N", "M", "tau_floor", "degree_floor"}, "graph");
        c.graph.neighbors = get_or<std::size_t>(g, "N", c.graph.neighbors, "graph");
        c.graph.scale_index = get_or<std::size_t>(g, "M", c.graph.scale_index, "graph");
        c.graph.tau_floor = get_or<double>(g, "tau_floor", c.graph.tau_floor, "graph");
        c.graph.degree_floor = get_or<double>(g, "degree_floor", c.graph.degree_floor, "graph");
    }

    const auto method = get_or<std::string>(j, "method", "multiclass_gl", "config");
    if (method == "multiclass_gl") c.method = Method::MulticlassGL;
    else if (method == "kmeans") c.method = Method::KMeans;
    else if (method == "spectral") c.method = Method::Spectral;
    else throw ConfigError("unknown method '" + method + "'");

    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        detail::reject_unknown(s, {"K", "mu", "dt", "eps", "eps0", "epsf", "delta_eps", "n_max", "seed", "early_stop_tol",
                                   "smoothing_scale"},
                               "solver");
        if (s.contains("K")) {
            c.solver.num_classes = get_or<int>(s, "K", 2, "solver");
            c.classes_given = true;
        }
        c.solver.mu = get_or<double>(s, "mu", c.solver.mu, "solver");
        c.solver.dt = get_or<double>(s, "dt", c.solver.dt, "solver");
        c.solver.n_max = get_or<std::size_t>(s, "n_max", c.solver.n_max, "solver");
        c.solver.seed = get_or<std::uint64_t>(s, "seed", c.solver.seed, "solver");
        if (s.contains("early_stop_tol")) c.solver.early_stop_tol = get_or<double>(s, "early_stop_tol", 0.0, "solver");
        c.solver.smoothing_scale = get_or<double>(s, "smoothing_scale", c.solver.smoothing_scale, "solver");
        const bool adaptive = s.contains("eps0") || s.contains("epsf") || s.contains("delta_eps");
        if (adaptive) {
            if (s.contains("eps")) throw ConfigError("solver: give either 'eps' or 'eps0'/'epsf'/'delta_eps'");
            if (!s.contains("eps0") || !s.contains("epsf") || !s.contains("delta_eps"))
                throw ConfigError("solver: adaptive schedule needs 'eps0', 'epsf' and 'delta_eps'");
            c.solver.schedule = AdaptiveEpsilon{get_or<double>(s, "eps0", 0, "solver"), get_or<double>(s, "epsf", 0, "solver"),
                                                get_or<double>(s, "delta_eps", 0, "solver")};
        } else {
            c.solver.schedule = FixedEpsilon{get_or<double>(s, "eps", 1.0, "solver")};
        }
    }

    if (j.contains("fidelity")) {
        const auto& f = j.at("fidelity");
        detail::reject_unknown(f, {"per_class", "fraction", "seed"}, "fidelity");
        if (f.contains("per_class") == f.contains("fraction"))
            throw ConfigError("fidelity needs exactly one of 'per_class' and 'fraction'");
        if (f.contains("per_class")) c.fidelity.mode = PerClassCount{get_or<std::size_t>(f, "per_class", 0, "fidelity")};
        else c.fidelity.mode = Fraction{get_or<double>(f, "fraction", 0.0, "fidelity")};
        c.fidelity.seed = get_or<std::uint64_t>(f, "seed", 0, "fidelity");
    }

    if (j.contains("spectral")) {
        const auto& s = j.at("spectral");
        detail::reject_unknown(s, {"eigenvectors", "normalize_rows"}, "spectral");
        c.eigenvectors = get_or<std::size_t>(s, "eigenvectors", 0, "spectral");
        c.normalize_rows = get_or<bool>(s, "normalize_rows", false, "spectral");
    }
    if (j.contains("kmeans")) {
        const auto& k = j.at("kmeans");
        detail::reject_unknown(k, {"restarts", "max_iter", "seed"}, "kmeans");
        c.kmeans.restarts = get_or<std::size_t>(k, "restarts", c.kmeans.restarts, "kmeans");
        c.kmeans.max_iter = get_or<std::size_t>(k, "max_iter", c.kmeans.max_iter, "kmeans");
        c.kmeans.seed = get_or<std::uint64_t>(k, "seed", c.kmeans.seed, "kmeans");
    }

    c.runs = get_or<std::size_t>(j, "runs", 1, "config");
    if (c.runs < 1) throw ConfigError("runs must be >= 1");
    c.vary_dataset = get_or<bool>(j, "vary_dataset", false, "config");
    c.record_timing = get_or<bool>(j, "record_timing", false, "config");
    c.exclude_fidelity = get_or<bool>(j, "exclude_fidelity_from_accuracy", false, "config");
    c.output = get_or<std::string>(j, "output", "", "config");
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j, path.parent_path());
}

// Echo of the resolved parameters for the report.
inline json config_params(const ExperimentConfig& c) {
    json p;
    p["graph"] = {{"N", c.graph.neighbors}, {"M", c.graph.scale_index}};
    p["runs"] = c.runs;
    p["dataset_seed"] = c.dataset.seed;
    if (c.dataset.subsample) p["subsample"] = *c.dataset.subsample;
    if (c.method == Method::MulticlassGL) {
        json s = {{"K", c.solver.num_classes}, {"mu", c.solver.mu}, {"dt", c.solver.dt}, {"n_max", c.solver.n_max},
                  {"seed", c.solver.seed}};
        if (auto* f = std::get_if<FixedEpsilon>(&c.solver.schedule)) s["eps"] = f->eps;
        else {
            const auto& a = std::get<AdaptiveEpsilon>(c.solver.schedule);
            s["eps0"] = a.eps0;
            s["epsf"] = a.eps_final;
            s["delta_eps"] = a.decay;
        }
        if (c.solver.early_stop_tol) s["early_stop_tol"] = *c.solver.early_stop_tol;
        s["smoothing_scale"] = c.solver.smoothing_scale;
        p["solver"] = s;
        if (auto* pc = std::get_if<PerClassCount>(&c.fidelity.mode)) p["fidelity"] = {{"per_class", pc->count}};
        else p["fidelity"] = {{"fraction", std::get<Fraction>(c.fidelity.mode).fraction}};
        p["fidelity"]["seed"] = c.fidelity.seed;
    } else {
        p["kmeans"] = {{"restarts", c.kmeans.restarts}, {"max_iter", c.kmeans.max_iter}, {"seed", c.kmeans.seed}};
        if (c.method == Method::Spectral)
            p["spectral"] = {{"eigenvectors", c.eigenvectors}, {"normalize_rows", c.normalize_rows}};
    }
    p["vary_dataset"] = c.vary_dataset;
    return p;
}

// ---------------------------------------------------------------------------
// Execution

inline DataSet load_dataset(const DatasetSpec& spec, std::uint64_t seed_offset = 0) {
    DataSet ds;
    if (spec.generator == "three-moons") ds = gen_three_moons(spec.seed + seed_offset);
    else if (spec.generator == "swiss-roll") ds = gen_swiss_roll(spec.seed + seed_offset);
    else if (!spec.generator.empty()) throw ConfigError("unknown generator '" + spec.generator + "'");
    else if (!spec.csv.empty()) ds = load_csv_dataset(spec.csv, spec.label_column);
    else ds = load_idx_dataset({spec.idx_images.begin(), spec.idx_images.end()}, {spec.idx_labels.begin(), spec.idx_labels.end()});
    if (spec.subsample) ds = stratified_subsample(ds, *spec.subsample, spec.seed);
    ds.validate();
    return ds;
}

struct ExperimentResult {
    EvalReport report;
    json report_json;
    std::vector<double> accuracies;
    std::vector<double> runtimes;
    std::vector<RunTrace> traces;   // multiclass GL only
    std::vector<int> first_labels;  // predictions of run 0 (aligned for baselines)
    DataSet first_dataset;
};

struct RunOptions {
    bool write_artifacts = true;
    std::ostream* log = nullptr;
};

inline ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
    ExperimentResult out;
    DataSet data = load_dataset(config.dataset);
    if (!data.labels) throw ConfigError("experiments need ground-truth labels for scoring");
    const int K = config.classes_given ? config.solver.num_classes : data.num_classes;
    if (K != data.num_classes)
        throw ConfigError("solver K = " + std::to_string(K) + " but the dataset has " + std::to_string(data.num_classes) +
                          " classes");

    std::optional<SimilarityGraph> graph;
    auto ensure_graph = [&](const DataSet& ds, bool rebuild) {
        if (config.method == Method::KMeans) return;
        if (!graph || rebuild) graph = build_graph(ds.points, config.graph);
    };

    ConfusionMatrix confusion;
    for (std::size_t r = 0; r < config.runs; ++r) {
        const bool fresh = config.vary_dataset && !config.dataset.generator.empty() && r > 0;
        if (fresh) data = load_dataset(config.dataset, r);
        ensure_graph(data, fresh);
        const auto start = std::chrono::steady_clock::now();
        const Labels& truth = *data.labels;
        std::vector<int> pred;
        std::vector<char> mask;

        if (config.method == Method::MulticlassGL) {
            SolverConfig solver = config.solver;
            solver.num_classes = K;
            solver.seed = config.solver.seed + r;
            FidelitySpec fspec = config.fidelity;
            fspec.seed = config.fidelity.seed + r;
            auto fidelity = sample_fidelity(truth, K, fspec, solver.mu);
            auto result = run(*graph, fidelity, solver);
            pred = std::move(result.labels);
            out.traces.push_back(std::move(result.trace));
            if (config.exclude_fidelity) {
                mask.assign(pred.size(), 0);
                for (const auto& e : fidelity.entries) mask[e.vertex] = 1;
            }
        } else {
            KMeansOptions km = config.kmeans;
            km.seed = config.kmeans.seed + r;
            ClusterResult cr;
            if (config.method == Method::KMeans) {
                cr = kmeans(data.points, K, km);
            } else {
                SpectralOptions so;
                so.normalize_rows = config.normalize_rows;
                so.kmeans = km;
                cr = spectral_clustering(*graph, K, config.eigenvectors ? config.eigenvectors : static_cast<std::size_t>(K), so);
            }
            pred = apply_permutation(cr.assignments, align_labels(cr.assignments, truth, K));
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double acc = accuracy(pred, truth, mask);
        out.accuracies.push_back(acc);
        out.runtimes.push_back(seconds);
        if (r == 0) {
            confusion = confusion_matrix(pred, truth, K);
            out.first_labels = pred;
            out.first_dataset = data;
        }
        if (options.log) *options.log << config.name << " run " << r + 1 << "/" << config.runs << ": accuracy " << acc << "\n";
    }

    out.report = aggregate(out.accuracies, out.runtimes);
    out.report.confusion = confusion;
    auto& j = out.report_json;
    j["dataset"] = config.dataset.describe();
    j["method"] = to_string(config.method);
    j["params"] = config_params(config);
    j["runs"] = out.report.runs;
    j["mean_accuracy"] = out.report.accuracy;
    j["stddev"] = out.report.stddev;
    j["mean_runtime_s"] = config.record_timing ? json(out.report.mean_runtime_s) : json(nullptr);
    j["confusion"] = out.report.confusion;
    j["per_run_accuracy"] = out.accuracies;

    if (options.write_artifacts && !config.output.empty()) {
        std::filesystem::path dir = config.output;
        std::filesystem::create_directories(dir);
        detail::write_text_file(dir / "report.json", j.dump(2) + "\n");
        json timing = {{"mean_runtime_s", out.report.mean_runtime_s}, {"per_run_s", out.runtimes}};
        detail::write_text_file(dir / "timing.json", timing.dump(2) + "\n");
        emit_scatter_svg(out.first_dataset.points, out.first_labels, K, dir / "scatter.svg", config.name);
        if (!out.traces.empty()) emit_energy_plot(out.traces.front(), dir / "energy.svg", dir / "trace.csv");
    }
    return out;
}

} // namespace mgl
