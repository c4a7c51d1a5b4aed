// mgl: command-line front end for graph construction, multiclass GL runs,
// baselines and scribble-driven image segmentation.
//
// Exit codes: 0 success, 2 config/data error, 3 numerical error, 1 other.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mgl/mgl.hpp"

namespace fs = std::filesystem;
using namespace mgl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
    std::optional<double> mu, eps, dt;
    std::optional<std::size_t> n_max, runs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    void attach(CLI::App* app) {
        app->add_option("--mu", mu, "fidelity weight");
        app->add_option("--eps", eps, "fixed interface parameter (replaces any schedule)");
        app->add_option("--dt", dt, "time step");
        app->add_option("--nmax", n_max, "iterations (per eps value when adaptive)");
        app->add_option("--seed", seed, "base seed for solver, fidelity and k-means");
        app->add_option("--runs", runs, "number of runs");
        app->add_option("--out", out, "output directory");
    }

    void apply(ExperimentConfig& c) const {
        if (mu) c.solver.mu = *mu;
        if (eps) c.solver.schedule = FixedEpsilon{*eps};
        if (dt) c.solver.dt = *dt;
        if (n_max) c.solver.n_max = *n_max;
        if (seed) c.solver.seed = c.fidelity.seed = c.kmeans.seed = *seed;
        if (runs) {
            if (*runs < 1) throw ConfigError("--runs must be >= 1");
            c.runs = *runs;
        }
        if (out) c.output = *out;
    }
};

void print_report(const ExperimentResult& r) {
    std::printf("runs %zu  accuracy %.2f%% (stddev %.2f%%)  mean time %.3f s\n", r.report.runs,
                100.0 * r.report.accuracy, 100.0 * r.report.stddev, r.report.mean_runtime_s);
}

ExperimentResult execute(ExperimentConfig& config, bool quiet) {
    RunOptions options;
    if (!quiet) options.log = &std::cerr;
    auto result = run_experiment(config, options);
    print_report(result);
    if (!config.output.empty()) std::printf("artifacts in %s\n", config.output.c_str());
    return result;
}

// x,y,class per line; a non-numeric first line is a header.
FidelitySet read_scribbles(const fs::path& path, const Image& image, int num_classes, double mu) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scribbles " + path.string());
    FidelitySet set;
    std::vector<char> seen(static_cast<std::size_t>(image.width) * image.height, 0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = detail::split_csv_line(line);
        const auto where = path.string() + ":" + std::to_string(line_no);
        if (cells.size() != 3) throw DataError(where + ": expected x,y,class");
        auto x = detail::parse_number(cells[0]), y = detail::parse_number(cells[1]), k = detail::parse_number(cells[2]);
        if (!x || !y || !k) {
            if (line_no == 1) continue;
            throw DataError(where + ": non-numeric cell");
        }
        const int xi = static_cast<int>(*x), yi = static_cast<int>(*y), ki = static_cast<int>(*k);
        if (xi != *x || yi != *y || ki != *k) throw DataError(where + ": coordinates and class must be integers");
        if (xi < 0 || yi < 0 || xi >= image.width || yi >= image.height)
            throw DataError(where + ": pixel (" + cells[0] + ", " + cells[1] + ") outside the image");
        if (ki < 0 || ki >= num_classes)
            throw ConfigError(where + ": class " + cells[2] + " outside [0, " + std::to_string(num_classes) + ")");
        const auto v = static_cast<std::size_t>(yi) * image.width + xi;
        if (seen[v]) continue;
        seen[v] = 1;
        set.entries.push_back({v, ki, mu});
    }
    std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
    for (const auto& e : set.entries) present[static_cast<std::size_t>(e.cls)] = 1;
    for (int k = 0; k < num_classes; ++k)
        if (!present[static_cast<std::size_t>(k)])
            throw ConfigError("scribbles have no pixel for class " + std::to_string(k));
    std::sort(set.entries.begin(), set.entries.end(), [](const auto& a, const auto& b) { return a.vertex < b.vertex; });
    return set;
}

DataSet dataset_from_flags(const std::string& config_path, const std::string& generator, std::uint64_t seed,
                           const std::string& csv, GraphConfig& graph) {
    if (!config_path.empty()) {
        auto c = load_config(config_path);
        graph = c.graph;
        return load_dataset(c.dataset);
    }
    DatasetSpec spec;
    spec.generator = generator;
    spec.seed = seed;
    spec.csv = csv;
    if (spec.generator.empty() && spec.csv.empty()) throw ConfigError("give --config, --generator or --csv");
    return load_dataset(spec);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiclass Ginzburg-Landau segmentation on similarity graphs"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no per-run log or warnings");

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset as CSV (features, label)");
    std::string gen_name, gen_out;
    std::uint64_t gen_seed = 1;
    gen->add_option("name", gen_name, "three-moons | swiss-roll")->required();
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("-o,--out", gen_out, "output CSV (default stdout)");

    // graph
    auto* gr = app.add_subcommand("graph", "build the similarity graph and write the binary cache");
    std::string gr_config, gr_generator, gr_csv, gr_out;
    std::uint64_t gr_seed = 1;
    std::optional<std::size_t> gr_n, gr_m;
    gr->add_option("--config", gr_config, "experiment config supplying dataset and graph parameters");
    gr->add_option("--generator", gr_generator, "three-moons | swiss-roll");
    gr->add_option("--seed", gr_seed, "generator seed");
    gr->add_option("--csv", gr_csv, "CSV dataset");
    gr->add_option("-N,--neighbors", gr_n, "nearest neighbors");
    gr->add_option("-M,--scale-index", gr_m, "neighbor used for local scaling");
    gr->add_option("-o,--out", gr_out, "graph cache file");

    // run
    auto* rn = app.add_subcommand("run", "run an experiment config");
    std::string rn_config;
    Overrides rn_over;
    rn->add_option("config", rn_config, "JSON config")->required()->check(CLI::ExistingFile);
    rn_over.attach(rn);

    // baseline
    auto* bl = app.add_subcommand("baseline", "k-means or spectral clustering on a config's dataset");
    std::string bl_config, bl_method = "kmeans";
    std::optional<std::size_t> bl_eig;
    Overrides bl_over;
    bl->add_option("config", bl_config, "JSON config")->required()->check(CLI::ExistingFile);
    bl->add_option("--method", bl_method, "kmeans | spectral")->check(CLI::IsMember({"kmeans", "spectral"}));
    bl->add_option("--eigenvectors", bl_eig, "eigenvectors for spectral clustering (default K)");
    bl_over.attach(bl);

    // segment-image
    auto* seg = app.add_subcommand("segment-image", "segment an image from scribbled pixels");
    std::string seg_image, seg_scribbles, seg_prefix = "segment";
    int seg_classes = 0, seg_patch = 5;
    std::size_t seg_n = 30, seg_m = 30;
    double seg_mu = 30.0, seg_eps = 1.0, seg_dt = 0.01;
    std::size_t seg_nmax = 800;
    std::uint64_t seg_seed = 0;
    seg->add_option("image", seg_image, "PPM/PGM or PNG image")->required()->check(CLI::ExistingFile);
    seg->add_option("scribbles", seg_scribbles, "CSV x,y,class")->required()->check(CLI::ExistingFile);
    seg->add_option("-K,--classes", seg_classes, "class count (default: largest scribbled class + 1)");
    seg->add_option("--patch", seg_patch, "odd patch size");
    seg->add_option("-N,--neighbors", seg_n, "nearest neighbors");
    seg->add_option("-M,--scale-index", seg_m, "neighbor used for local scaling");
    seg->add_option("--mu", seg_mu, "fidelity weight");
    seg->add_option("--eps", seg_eps, "interface parameter");
    seg->add_option("--dt", seg_dt, "time step");
    seg->add_option("--nmax", seg_nmax, "iterations");
    seg->add_option("--seed", seg_seed, "initial state seed");
    seg->add_option("-o,--out", seg_prefix, "mask path prefix (writes <prefix>_class<k>.ppm)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (quiet) set_warning_handler([](std::string_view) {});

    try {
        if (*gen) {
            DataSet ds;
            if (gen_name == "three-moons") ds = gen_three_moons(gen_seed);
            else if (gen_name == "swiss-roll") ds = gen_swiss_roll(gen_seed);
            else {
                std::cerr << "unknown generator '" << gen_name << "'\n\n" << gen->help();
                return kExitConfig;
            }
            if (gen_out.empty()) write_csv_dataset(ds, std::cout);
            else write_csv_dataset(ds, gen_out);
        } else if (*gr) {
            GraphConfig config;
            DataSet ds = dataset_from_flags(gr_config, gr_generator, gr_seed, gr_csv, config);
            if (gr_n) config.neighbors = *gr_n;
            if (gr_m) config.scale_index = *gr_m;
            auto g = build_graph(ds.points, config);
            std::printf("vertices %zu  stored entries %zu  components %zu\n", g.size(), g.num_entries(),
                        connected_components(g));
            if (!gr_out.empty()) save_graph(g, gr_out);
        } else if (*rn) {
            auto config = load_config(rn_config);
            rn_over.apply(config);
            execute(config, quiet);
        } else if (*bl) {
            auto config = load_config(bl_config);
            bl_over.apply(config);
            config.method = bl_method == "spectral" ? Method::Spectral : Method::KMeans;
            if (bl_eig) config.eigenvectors = *bl_eig;
            execute(config, quiet);
        } else if (*seg) {
            Image image = read_image(seg_image);
            if (seg_classes == 0) {
                // infer from the scribbles: largest class id + 1
                std::ifstream in(seg_scribbles);
                std::string line;
                while (std::getline(in, line)) {
                    auto cells = detail::split_csv_line(line);
                    if (cells.size() == 3)
                        if (auto k = detail::parse_number(cells[2])) seg_classes = std::max(seg_classes, static_cast<int>(*k) + 1);
                }
                if (seg_classes < 2) throw ConfigError("scribbles must name at least two classes");
            }
            auto fidelity = read_scribbles(seg_scribbles, image, seg_classes, seg_mu);
            DataSet ds = image_patch_features(image, ImageSpec{seg_patch});
            GraphConfig gc;
            gc.neighbors = seg_n;
            gc.scale_index = seg_m;
            auto g = build_graph(ds.points, gc);
            SolverConfig sc;
            sc.num_classes = seg_classes;
            sc.mu = seg_mu;
            sc.dt = seg_dt;
            sc.schedule = FixedEpsilon{seg_eps};
            sc.n_max = seg_nmax;
            sc.seed = seg_seed;
            auto result = run(g, fidelity, sc);
            auto masks = emit_class_masks(result.labels, image.width, image.height, seg_classes, seg_prefix);
            result.trace.write_csv(fs::path(seg_prefix + "_trace.csv"));
            std::size_t kept = 0;
            for (const auto& e : fidelity.entries) kept += result.labels[e.vertex] == e.cls;
            std::printf("%zu pixels, %zu scribbled (%zu kept their class), %.3f s\n", ds.size(),
                        fidelity.entries.size(), kept, result.trace.wall_seconds);
            for (const auto& m : masks) std::printf("%s\n", m.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
