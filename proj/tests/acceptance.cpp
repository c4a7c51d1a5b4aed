// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <string>

#include "mgl/mgl.hpp"

using namespace mgl;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(const std::string& id, const char* status, const std::string& detail) {
    std::printf("%-4s %-4s %s\n", status, id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (std::string(status) == "FAIL") ++failures;
}

void verdict(const std::string& id, bool ok, const std::string& detail) { line(id, ok ? "PASS" : "FAIL", detail); }

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * v);
    return buf;
}

std::string num(double v, const char* f = "%.3g") {
    char buf[48];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

fs::path config_path(const std::string& name) { return fs::path(MGL_SOURCE_DIR) / "configs" / name; }

ExperimentResult run_bundled(const std::string& file, const std::function<void(ExperimentConfig&)>& tweak = {}) {
    auto c = load_config(config_path(file));
    c.output = (fs::current_path() / "acceptance_out" / c.name).string();
    if (tweak) tweak(c);
    return run_experiment(c);
}

// Guards a criterion body so an exception becomes a FAIL line instead of aborting the suite.
void guarded(const std::string& id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        line(id, "FAIL", std::string("exception: ") + e.what());
    }
}

double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }

SimilarityGraph random_graph(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t N, std::size_t M) {
    std::normal_distribution<double> g;
    PointMatrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < p.rows(); ++i)
        for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = g(rng);
    return build_graph(p, GraphConfig{N, M});
}

// Values k + offset with |offset| in [0.05, 0.45]: away from wells and class boundaries.
StateVector smooth_state(std::mt19937_64& rng, std::size_t n, int K) {
    std::uniform_int_distribution<int> cls(0, K - 1);
    std::uniform_real_distribution<double> off(0.05, 0.45);
    std::bernoulli_distribution neg(0.5);
    StateVector s{std::vector<double>(n), K};
    for (auto& v : s.values) {
        const int k = cls(rng);
        double o = off(rng);
        if (k == 0) o = std::abs(o);
        else if (k == K - 1) o = -std::abs(o);
        else if (neg(rng)) o = -o;
        v = k + o;
    }
    return s;
}

// The part of energy() that depends on u_i: both ordered pairs of every edge at i,
// plus i's own well and fidelity terms. Differencing this instead of the full sum
// gives the same derivative with far less cancellation.
double energy_at(const StateVector& s, const SimilarityGraph& g, const FidelityField& f, double eps, std::size_t i) {
    const double ui = s.values[i];
    const double fr = ui - std::floor(ui);
    const double d = ui - f.target[i];
    return eps * local_smoothing_cost(s.values, g, i, ui, s.num_classes) + fr * fr * (fr - 1) * (fr - 1) / (2 * eps) +
           0.5 * f.mu[i] * d * d;
}

} // namespace

int main() {
    set_warning_handler([](std::string_view) {});
    std::printf("acceptance suite (GLM_THREADS=%s)\n", std::getenv("GLM_THREADS") ? std::getenv("GLM_THREADS") : "unset");

    // 1 + 7d: three moons, fixed eps
    std::string fixed_report;
    guarded("1", [&] {
        auto r = run_bundled("threemoons_fixed.cfg");
        fixed_report = r.report_json.dump(2);
        const double worst = max_of(r.runtimes);
        verdict("1", r.report.accuracy >= 0.925 && worst <= 30.0,
                "three moons fixed eps: mean " + pct(r.report.accuracy) + " (sd " + pct(r.report.stddev) +
                    ") over " + std::to_string(r.report.runs) + " runs, need >= 92.50%; slowest run " + num(worst) +
                    " s (limit 30 s)");
        std::size_t total_down = 0, smooth_down = 0;
        for (const auto& t : r.traces) {
            total_down += t.rows.back().energy.total < t.rows.front().energy.total;
            smooth_down += t.rows.front().energy.smoothing > t.rows.back().energy.smoothing;
        }
        const auto n = r.traces.size();
        verdict("7d", n > 0 && total_down == n && smooth_down == n,
                "energy decreases in " + std::to_string(total_down) + "/" + std::to_string(n) +
                    " runs, smoothing decays in " + std::to_string(smooth_down) + "/" + std::to_string(n));
    });

    guarded("2", [&] {
        auto r = run_bundled("threemoons_adaptive.cfg");
        verdict("2", r.report.accuracy >= 0.94,
                "three moons adaptive eps: mean " + pct(r.report.accuracy) + " (sd " + pct(r.report.stddev) +
                    "), need >= 94.00%");
    });

    guarded("3", [&] {
        auto r = run_bundled("swissroll.cfg");
        verdict("3", r.report.accuracy >= 0.875,
                "swiss roll: mean " + pct(r.report.accuracy) + " (sd " + pct(r.report.stddev) + "), need >= 87.50%");
    });

    struct Baseline {
        const char* id;
        const char* file;
        const char* what;
        double target, tol;
    };
    for (const auto& b : {Baseline{"4a", "threemoons_kmeans.cfg", "three moons k-means", 0.721, 0.04},
                          Baseline{"4b", "threemoons_spectral.cfg", "three moons spectral (3 eigenvectors)", 0.800, 0.04},
                          Baseline{"4c", "swissroll_kmeans.cfg", "swiss roll k-means", 0.379, 0.04},
                          Baseline{"4d", "swissroll_spectral.cfg", "swiss roll spectral (4 eigenvectors)", 0.497, 0.05}}) {
        guarded(b.id, [&] {
            auto r = run_bundled(b.file);
            verdict(b.id, std::abs(r.report.accuracy - b.target) <= b.tol,
                    std::string(b.what) + ": mean " + pct(r.report.accuracy) + " (sd " + pct(r.report.stddev) +
                        "), need " + pct(b.target) + " +- " + num(100 * b.tol, "%.0f") + " points");
        });
    }

    guarded("5", [&] {
        const char* coil = std::getenv("GLM_COIL_CSV");
        if (!coil || !*coil || !fs::exists(coil)) {
            line("5", "SKIP", "COIL benchmark CSV not supplied (set GLM_COIL_CSV)");
            return;
        }
        auto r = run_bundled("coil.cfg");
        verdict("5", r.report.accuracy >= 0.90,
                "COIL: mean " + pct(r.report.accuracy) + " (sd " + pct(r.report.stddev) + ") over " +
                    std::to_string(r.report.runs) + " runs, need >= 90.00%");
    });

    guarded("6", [&] {
        const auto dir = fs::path(MGL_SOURCE_DIR) / "data" / "mnist";
        if (!fs::exists(dir / "images.idx3-ubyte") || !fs::exists(dir / "labels.idx1-ubyte")) {
            line("6", "SKIP", "MNIST IDX files not found in data/mnist (run scripts/fetch_mnist.py)");
            return;
        }
        auto r = run_bundled("mnist_subsample.cfg");
        verdict("6", r.report.accuracy >= 0.80,
                "MNIST 7000-point subsample: accuracy " + pct(r.report.accuracy) + ", need >= 80.00%");
    });

    // 7a: analytic gradient vs central differences of energy()
    guarded("7a", [&] {
        std::mt19937_64 rng(7001);
        const double h = 1e-6;
        double worst_smooth = 0.0, worst_total = 0.0;
        for (int t = 0; t < 200; ++t) {
            auto g = random_graph(rng, 20, 3, 5, 5);
            const int K = 2 + t % 4;
            auto s = smooth_state(rng, 20, K);
            FidelitySet fset;
            for (std::size_t i = 0; i < 20; i += 4) fset.entries.push_back({i, static_cast<int>(i / 4) % K, 30.0});
            FidelityField field(fset, 20);
            FidelityField none(FidelitySet{}, 20);
            const double eps = 0.5 + 0.1 * (t % 10);
            const auto grad = gradient(s, g, field, eps);
            for (std::size_t i = 0; i < 20; ++i) {
                auto up = s, down = s;
                up.values[i] += h;
                down.values[i] -= h;
                const double fd_smooth =
                    (energy(up, g, none, eps).smoothing - energy(down, g, none, eps).smoothing) / (2 * h);
                const double fd_total = (energy_at(up, g, field, eps, i) - energy_at(down, g, field, eps, i)) / (2 * h);
                const double explicit_smooth = eps * 2.0 * smoothing_gradient_term(s, g, i);
                worst_smooth = std::max(worst_smooth, std::abs(explicit_smooth - fd_smooth) / std::abs(fd_smooth));
                worst_total = std::max(worst_total, std::abs(grad[i] - fd_total) / std::abs(fd_total));
            }
        }
        verdict("7a", worst_smooth < 1e-5 && worst_total < 1e-5,
                "gradient check, 200 states x 20 vertices: max rel err smoothing (eps*2*R^) " + num(worst_smooth) +
                    ", full gradient " + num(worst_total) + ", need < 1e-05");
    });

    // 7b: smoothing + potential under class relabeling
    guarded("7b", [&] {
        std::mt19937_64 rng(7002);
        double worst = 0.0;
        std::size_t states = 0;
        for (int K : {2, 3, 5}) {
            auto g = random_graph(rng, 60, 4, 8, 8);
            FidelityField none(FidelitySet{}, 60);
            std::vector<int> perm(static_cast<std::size_t>(K));
            for (int t = 0; t < 100; ++t, ++states) {
                StateVector s{std::vector<double>(60), K};
                std::uniform_real_distribution<double> U(-0.5, K - 0.5);
                for (auto& v : s.values) v = U(rng);
                std::iota(perm.begin(), perm.end(), 0);
                std::shuffle(perm.begin(), perm.end(), rng);
                StateVector p = s;
                for (auto& v : p.values) {
                    const int k = label_of(v, K);
                    v = perm[static_cast<std::size_t>(k)] + (v - k);
                }
                const auto a = energy(s, g, none, 1.0), b = energy(p, g, none, 1.0);
                const double ea = a.smoothing + a.potential, eb = b.smoothing + b.potential;
                worst = std::max(worst, std::abs(ea - eb) / std::abs(ea));
            }
        }
        verdict("7b", worst <= 1e-12,
                "label permutation invariance, " + std::to_string(states) + " states, K in {2,3,5}: max rel diff " +
                    num(worst) + ", need <= 1e-12");
    });

    // 7c: Laplacian invariants
    guarded("7c", [&] {
        std::mt19937_64 rng(7003);
        double worst_row = 0.0, lo = 1.0, hi = 0.0;
        bool symmetric = true;
        for (int t = 0; t < 50; ++t) {
            std::uniform_int_distribution<std::size_t> size(20, 200), dim(2, 10), nn(3, 12);
            const std::size_t N = nn(rng);
            auto g = random_graph(rng, size(rng), dim(rng), N, std::min<std::size_t>(N, 7));
            symmetric = symmetric && g.is_symmetric();
            const auto L = dense_laplacian(g);
            worst_row = std::max(worst_row, L.rowwise().sum().cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_normalized_laplacian(g), Eigen::EigenvaluesOnly);
            lo = std::min(lo, es.eigenvalues().minCoeff());
            hi = std::max(hi, es.eigenvalues().maxCoeff());
        }
        verdict("7c", worst_row < 1e-10 && lo >= -1e-9 && hi <= 2 + 1e-9 && symmetric,
                "50 random graphs: max |L row sum| " + num(worst_row) + ", L_s spectrum [" + num(lo) + ", " +
                    num(hi, "%.12g") + "], W bit-exact symmetric: " + (symmetric ? "yes" : "no"));
    });

    guarded("7e", [&] {
        auto r = run_bundled("threemoons_fixed.cfg", [](ExperimentConfig& c) {
            c.runs = 1;
            c.solver.mu = 1e4;
            c.fidelity.mode = Fraction{1.0};
            c.output.clear();
        });
        verdict("7e", r.report.accuracy == 1.0,
                "full fidelity, mu = 1e4: accuracy " + num(r.report.accuracy, "%.17g") + ", need exactly 1");
    });

    guarded("7f", [&] {
        bool same = !fixed_report.empty();
        if (same) same = run_bundled("threemoons_fixed.cfg").report_json.dump(2) == fixed_report;
        const auto a = run_bundled("swissroll_kmeans.cfg").report_json.dump(2);
        const auto b = run_bundled("swissroll_kmeans.cfg").report_json.dump(2);
        verdict("7f", same && a == b,
                std::string("repeat executions of threemoons_fixed.cfg and swissroll_kmeans.cfg: reports ") +
                    (same && a == b ? "byte-identical" : "differ"));
    });

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
