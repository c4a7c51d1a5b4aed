#pragma once

// Gradient-descent minimization of the multiclass GL energy with greedy
// class reassignment after every sweep.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mgl/error.hpp"
#include "mgl/gl_model.hpp"
#include "mgl/graph.hpp"
#include "mgl/parallel.hpp"
#include "mgl/rng.hpp"

namespace mgl {

struct FixedEpsilon {
    double eps = 1.0;
};

// eps0, eps0 (1 - decay), ... down to the last value >= eps_final.
struct AdaptiveEpsilon {
    double eps0 = 2.0;
    double eps_final = 0.01;
    double decay = 0.1;
};

using EpsilonSchedule = std::variant<FixedEpsilon, AdaptiveEpsilon>;

struct SolverConfig {
    int num_classes = 2;
    double mu = 30.0;
    double dt = 0.01;
    EpsilonSchedule schedule = FixedEpsilon{};
    std::size_t n_max = 1000; // iterations per epsilon value
    std::uint64_t seed = 0;
    std::optional<double> early_stop_tol; // max |du| threshold; off by default
    double smoothing_scale = kExactSmoothingScale; // 1 = single-sided R^

    void validate() const {
        if (num_classes < 2) throw ConfigError("solver needs K >= 2");
        if (!(mu > 0.0)) throw ConfigError("mu must be positive");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (n_max == 0) throw ConfigError("n_max must be positive");
        if (auto* f = std::get_if<FixedEpsilon>(&schedule)) {
            if (!(f->eps > 0.0)) throw ConfigError("eps must be positive");
        } else {
            const auto& a = std::get<AdaptiveEpsilon>(schedule);
            if (!(a.eps_final > 0.0 && a.eps0 > a.eps_final))
                throw ConfigError("adaptive schedule requires eps0 > eps_final > 0");
            if (!(a.decay > 0.0 && a.decay < 1.0))
                throw ConfigError("adaptive schedule requires 0 < delta_eps < 1");
        }
        if (early_stop_tol && !(*early_stop_tol > 0.0))
            throw ConfigError("early_stop_tol must be positive");
        if (!(smoothing_scale > 0.0)) throw ConfigError("smoothing_scale must be positive");
    }
};

inline std::vector<double> epsilon_values(const EpsilonSchedule& schedule) {
    if (auto* f = std::get_if<FixedEpsilon>(&schedule)) return {f->eps};
    const auto& a = std::get<AdaptiveEpsilon>(schedule);
    std::vector<double> out;
    for (double eps = a.eps0; eps >= a.eps_final; eps *= 1.0 - a.decay) out.push_back(eps);
    return out;
}

struct TraceRow {
    std::size_t iter = 0; // 1-based
    double epsilon = 0.0;
    EnergyBreakdown energy;
    std::size_t label_changes = 0;
};

struct RunTrace {
    std::vector<TraceRow> rows;
    double wall_seconds = 0.0;

    void write_csv(std::ostream& out) const {
        out << "iter,epsilon,smoothing,potential,fidelity,total,label_changes\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", r.iter, r.epsilon,
                          r.energy.smoothing, r.energy.potential, r.energy.fidelity, r.energy.total,
                          r.label_changes);
            out << buf;
        }
    }

    void write_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot open " + path.string() + " for writing");
        write_csv(out);
    }
};

// u_i ~ U(0, K) - 1/2 in ascending vertex order, then anchors set to their class.
inline StateVector init_state(std::size_t n, const SolverConfig& config, const FidelitySet& fidelity) {
    StateVector state{std::vector<double>(n), config.num_classes};
    auto rng = make_rng(config.seed, Stream::InitState);
    std::uniform_real_distribution<double> dist(0.0, static_cast<double>(config.num_classes));
    for (auto& v : state.values) v = state.clamp(dist(rng) - 0.5);
    for (const auto& e : fidelity.entries) {
        if (e.vertex >= n) throw ContractError("fidelity vertex out of range");
        state.values[e.vertex] = static_cast<double>(e.cls);
    }
    return state;
}

namespace detail {
// Jacobi update without the domain clamp; values may leave [-1/2, K-1/2).
inline std::vector<double> raw_sweep(const StateVector& state, const SimilarityGraph& graph,
                                     const FidelityField& fidelity, double eps, double dt,
                                     double smoothing_scale = kExactSmoothingScale) {
    auto grad = gradient(state, graph, fidelity, eps, smoothing_scale);
    std::vector<double> next(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) {
        next[i] = state.values[i] - dt * grad[i];
        if (!std::isfinite(next[i]))
            throw NumericalError("non-finite state at vertex " + std::to_string(i) + " (gradient " +
                                 std::to_string(grad[i]) + ")");
    }
    return next;
}

// Nearest integer without clamping.
inline long long raw_label(double x) { return static_cast<long long>(std::floor(x + 0.5)); }
} // namespace detail

// One Jacobi step: every vertex reads the previous iterate; the result is
// clamped to the state domain.
inline StateVector gradient_sweep(const StateVector& state, const SimilarityGraph& graph,
                                  const FidelityField& fidelity, double eps, double dt,
                                  double smoothing_scale = kExactSmoothingScale) {
    StateVector next{detail::raw_sweep(state, graph, fidelity, eps, dt, smoothing_scale), state.num_classes};
    for (auto& v : next.values) v = state.clamp(v);
    return next;
}

// Sequential, in-place pass in ascending index order. A vertex whose
// nearest integer differs from `labels_before` (including steps that leave
// the state domain) moves to the class minimizing its local smoothing cost.
// Its signed offset from the well center is kept, so the candidate for class
// k is k + (u_i - round(u_i)). Ties go to the smallest k. Every value is
// clamped to the state domain on exit.
inline StateVector greedy_relabel_pass(StateVector state, std::span<const int> labels_before,
                                       const SimilarityGraph& graph) {
    if (labels_before.size() != state.size() || graph.size() != state.size())
        throw ContractError("greedy_relabel_pass: size mismatch");
    const int K = state.num_classes;
    for (std::size_t i = 0; i < state.size(); ++i) {
        const double ui = state.values[i];
        const long long y = detail::raw_label(ui);
        if (y == labels_before[i]) {
            state.values[i] = state.clamp(ui);
            continue;
        }
        const double offset = ui - static_cast<double>(y);
        int best_k = 0;
        double best_cost = 0.0;
        for (int k = 0; k < K; ++k) {
            const double cost = local_smoothing_cost(state.values, graph, i, state.clamp(k + offset), K);
            if (k == 0 || cost < best_cost) {
                best_cost = cost;
                best_k = k;
            }
        }
        state.values[i] = state.clamp(best_k + offset);
    }
    return state;
}

struct RunResult {
    StateVector state;
    std::vector<int> labels;
    RunTrace trace;
};

inline RunResult run(const SimilarityGraph& graph, const FidelitySet& fidelity, const SolverConfig& config) {
    config.validate();
    const std::size_t n = graph.size();
    fidelity.validate(n, config.num_classes);
    if (fidelity.empty()) warn("empty fidelity set: the flow may settle on a single class");

    FidelityField field(fidelity, n);
    for (auto& m : field.mu)
        if (m > 0.0) m = config.mu;

    const auto start = std::chrono::steady_clock::now();
    RunResult result{init_state(n, config, fidelity), {}, {}};
    auto& state = result.state;
    std::vector<int> labels = state.labels();
    std::size_t iter = 0;

    for (double eps : epsilon_values(config.schedule)) {
        for (std::size_t step = 0; step < config.n_max; ++step) {
            StateVector swept{detail::raw_sweep(state, graph, field, eps, config.dt, config.smoothing_scale), config.num_classes};
            auto next = greedy_relabel_pass(std::move(swept), labels, graph);

            double max_change = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                max_change = std::max(max_change, std::abs(next.values[i] - state.values[i]));
            state = std::move(next);

            auto new_labels = state.labels();
            std::size_t changes = 0;
            for (std::size_t i = 0; i < n; ++i) changes += new_labels[i] != labels[i];
            labels = std::move(new_labels);

            result.trace.rows.push_back({++iter, eps, energy(state, graph, field, eps), changes});
            if (config.early_stop_tol && max_change < *config.early_stop_tol) break;
        }
    }
    result.labels = std::move(labels);
    result.trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace mgl
