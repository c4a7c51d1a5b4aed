#pragma once

// Multiclass Ginzburg-Landau energy on a graph: periodic-well potential,
// tree-distance smoothing through the generalized difference rho, and a
// quadratic fidelity term.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgl/error.hpp"
#include "mgl/graph.hpp"
#include "mgl/parallel.hpp"

namespace mgl {

// Fractional part with a true floor, in [0, 1).
inline double frac(double x) {
    const double f = x - std::floor(x);
    return f < 1.0 ? f : 0.0; // x = -tiny rounds to 1.0
}

inline double periodic_well(double x) {
    const double f = frac(x);
    return 0.5 * f * f * (f - 1.0) * (f - 1.0);
}

inline double periodic_well_deriv(double x) {
    const double f = frac(x);
    return 2.0 * f * f * f - 3.0 * f * f + f;
}

// Distance to the nearest half-integer.
inline double r_hat(double x) { return std::abs(0.5 - frac(x)); }

// Slope of r_hat; 0 at its kinks (half-integers and integers).
inline double r_hat_deriv(double x) {
    const double f = frac(x);
    if (f == 0.0 || f == 0.5) return 0.0;
    return f > 0.5 ? 1.0 : -1.0;
}

// Nearest integer (halves round up), clamped into [0, K).
inline int label_of(double x, int num_classes) {
    const double y = std::floor(x + 0.5);
    if (y < 0.0) return 0;
    if (y > num_classes - 1) return num_classes - 1;
    return static_cast<int>(y);
}

// Generalized difference: r_hat sum across classes, r_hat gap within one.
inline double rho(double a, double b, int num_classes) {
    const double ra = r_hat(a), rb = r_hat(b);
    if (label_of(a, num_classes) != label_of(b, num_classes)) return ra + rb;
    return std::abs(ra - rb);
}

inline constexpr double kClampMargin = 1e-9;

struct StateVector {
    std::vector<double> values;
    int num_classes = 2;

    std::size_t size() const { return values.size(); }
    double lower() const { return -0.5 + kClampMargin; }
    double upper() const { return num_classes - 0.5 - kClampMargin; }
    double clamp(double x) const { return std::clamp(x, lower(), upper()); }

    std::vector<int> labels() const {
        std::vector<int> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = label_of(values[i], num_classes);
        return out;
    }
};

struct FidelityEntry {
    std::size_t vertex;
    int cls;
    double mu;
};

struct FidelitySet {
    std::vector<FidelityEntry> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }

    // Throws on bad indices/weights; warns when a class has no anchor.
    void validate(std::size_t n, int num_classes) const {
        std::vector<char> seen(n, 0);
        std::vector<char> present(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
        for (const auto& e : entries) {
            if (e.vertex >= n)
                throw ContractError("fidelity vertex " + std::to_string(e.vertex) + " out of range");
            if (seen[e.vertex]) throw ContractError("duplicate fidelity vertex " + std::to_string(e.vertex));
            seen[e.vertex] = 1;
            if (e.cls < 0 || e.cls >= num_classes)
                throw ContractError("fidelity class " + std::to_string(e.cls) + " out of range");
            if (!(e.mu > 0.0)) throw ContractError("fidelity weight must be positive");
            present[static_cast<std::size_t>(e.cls)] = 1;
        }
        for (std::size_t k = 0; k < present.size(); ++k)
            if (!present[k]) warn("fidelity set has no anchor for class " + std::to_string(k));
    }
};

// Dense per-vertex view of a fidelity set: mu_i (0 when unlabelled) and target.
struct FidelityField {
    std::vector<double> mu;
    std::vector<double> target;

    FidelityField() = default;
    FidelityField(const FidelitySet& set, std::size_t n) : mu(n, 0.0), target(n, 0.0) {
        for (const auto& e : set.entries) {
            if (e.vertex >= n) throw ContractError("fidelity vertex out of range");
            mu[e.vertex] = e.mu;
            target[e.vertex] = static_cast<double>(e.cls);
        }
    }
};

struct EnergyBreakdown {
    double smoothing = 0.0;
    double potential = 0.0;
    double fidelity = 0.0;
    double total = 0.0;
};

// Sum_j w^_ij rho(candidate, u_j)^2 over the neighbors of vertex i.
inline double local_smoothing_cost(std::span<const double> u, const SimilarityGraph& graph,
                                   std::size_t i, double candidate, int num_classes) {
    auto cols = graph.neighbors(i);
    auto w = graph.row_norm_weights(i);
    double sum = 0.0;
    for (std::size_t e = 0; e < cols.size(); ++e) {
        const double r = rho(candidate, u[cols[e]], num_classes);
        sum += w[e] * r * r;
    }
    return sum;
}

inline EnergyBreakdown energy(const StateVector& state, const SimilarityGraph& graph,
                              const FidelityField& fidelity, double eps) {
    const std::size_t n = state.size();
    if (graph.size() != n || fidelity.mu.size() != n)
        throw ContractError("energy: state, graph and fidelity sizes differ");
    std::vector<double> smooth(n), pot(n), fid(n);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double ui = state.values[i];
        smooth[i] = local_smoothing_cost(state.values, graph, i, ui, state.num_classes);
        const double f = frac(ui);
        pot[i] = f * f * (f - 1.0) * (f - 1.0);
        const double d = ui - fidelity.target[i];
        fid[i] = 0.5 * fidelity.mu[i] * d * d;
    }
    EnergyBreakdown out;
    for (std::size_t i = 0; i < n; ++i) {
        out.smoothing += smooth[i];
        out.potential += pot[i];
        out.fidelity += fid[i];
    }
    out.smoothing *= 0.5 * eps;
    out.potential /= 2.0 * eps;
    out.total = out.smoothing + out.potential + out.fidelity;
    return out;
}

inline EnergyBreakdown energy(const StateVector& state, const SimilarityGraph& graph,
                              const FidelitySet& fidelity, double eps) {
    return energy(state, graph, FidelityField(fidelity, state.size()), eps);
}

// R^(u_i) = sum_j w^_ij [r^(u_i) -/+ r^(u_j)] r^'(u_i): "+" across classes,
// signed difference within a class. Equals half the derivative of the
// double-sum smoothing term divided by eps.
inline double smoothing_gradient_term(std::span<const double> u, const SimilarityGraph& graph,
                                      std::size_t i, int num_classes) {
    const double ui = u[i];
    const double slope = r_hat_deriv(ui);
    if (slope == 0.0) return 0.0;
    const double ri = r_hat(ui);
    const int yi = label_of(ui, num_classes);
    auto cols = graph.neighbors(i);
    auto w = graph.row_norm_weights(i);
    double sum = 0.0;
    for (std::size_t e = 0; e < cols.size(); ++e) {
        const double uj = u[cols[e]];
        const double rj = r_hat(uj);
        sum += w[e] * (label_of(uj, num_classes) != yi ? ri + rj : ri - rj);
    }
    return sum * slope;
}

inline double smoothing_gradient_term(const StateVector& state, const SimilarityGraph& graph, std::size_t i) {
    return smoothing_gradient_term(state.values, graph, i, state.num_classes);
}

// R^ as written sums each edge once from i's side; the derivative of the
// double-sum smoothing energy is 2 R^. Scale 2 gives true gradient descent on
// energy(), scale 1 the single-sided form.
inline constexpr double kExactSmoothingScale = 2.0;

// scale * eps R^(u_i) + Phi_M'(u_i) / eps + mu_i (u_i - u^_i) for every vertex.
inline std::vector<double> gradient(const StateVector& state, const SimilarityGraph& graph,
                                    const FidelityField& fidelity, double eps,
                                    double smoothing_scale = kExactSmoothingScale) {
    const std::size_t n = state.size();
    if (graph.size() != n || fidelity.mu.size() != n)
        throw ContractError("gradient: state, graph and fidelity sizes differ");
    std::vector<double> g(n);
    const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double ui = state.values[i];
        g[i] = smoothing_scale * eps * smoothing_gradient_term(state.values, graph, i, state.num_classes) +
               periodic_well_deriv(ui) / eps + fidelity.mu[i] * (ui - fidelity.target[i]);
    }
    return g;
}

} // namespace mgl
