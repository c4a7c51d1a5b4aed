#pragma once

// Unsupervised reference methods: k-means on raw features and spectral
// clustering on the smallest eigenvectors of L_s.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <vector>

#include "mgl/dataset.hpp"
#include "mgl/eigensolver.hpp"
#include "mgl/error.hpp"
#include "mgl/graph.hpp"
#include "mgl/parallel.hpp"
#include "mgl/rng.hpp"

namespace mgl {

struct ClusterResult {
    std::vector<int> assignments;
    double inertia = 0.0;
};

struct KMeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    std::uint64_t seed = 0;
};

namespace detail {
inline double sq_dist_to(const PointMatrix& points, Eigen::Index i, const Eigen::MatrixXd& centers, Eigen::Index c) {
    return (points.row(i) - centers.row(c)).squaredNorm();
}

// Index of the closest center; ties go to the lowest index.
inline Eigen::Index nearest_center(const PointMatrix& points, Eigen::Index i, const Eigen::MatrixXd& centers,
                                   double* dist = nullptr) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        const double d = sq_dist_to(points, i, centers, c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (dist) *dist = best_d;
    return best;
}

inline Eigen::MatrixXd kmeans_pp_seed(const PointMatrix& points, int K, std::mt19937_64& rng) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd centers(K, points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = points.row(first(rng));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist_to(points, i, centers, 0);
    for (int c = 1; c < K; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        Eigen::Index pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng), acc = 0.0;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (acc >= target && d2[static_cast<std::size_t>(i)] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);
        }
        centers.row(c) = points.row(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist_to(points, i, centers, c));
    }
    return centers;
}
} // namespace detail

// One k-means++ seeded Lloyd run. `inertia_history`, when given, receives
// the inertia after every assignment step.
inline ClusterResult kmeans_single(const PointMatrix& points, int K, std::mt19937_64& rng, std::size_t max_iter = 300,
                                   std::vector<double>* inertia_history = nullptr) {
    const Eigen::Index n = points.rows();
    if (K < 1 || K > n) throw ConfigError("kmeans requires 1 <= K <= n");
    Eigen::MatrixXd centers = detail::kmeans_pp_seed(points, K, rng);
    std::vector<int> assign(static_cast<std::size_t>(n), -1);
    std::vector<double> dist(static_cast<std::size_t>(n));

    for (std::size_t it = 0; it < max_iter; ++it) {
        bool changed = false;
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = static_cast<int>(detail::nearest_center(points, i, centers, &dist[static_cast<std::size_t>(i)]));
            if (c != assign[static_cast<std::size_t>(i)]) changed = true;
            assign[static_cast<std::size_t>(i)] = c;
            inertia += dist[static_cast<std::size_t>(i)];
        }
        if (inertia_history) inertia_history->push_back(inertia);
        if (!changed) break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
        std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < K; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: reseed at the point farthest from its center.
            auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
            centers.row(c) = points.row(far);
            dist[static_cast<std::size_t>(far)] = 0.0;
        }
    }

    // Final inertia against the centroids of the final assignment.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    ClusterResult out{assign, 0.0};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto c = assign[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd mean = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        out.inertia += (points.row(i) - mean).squaredNorm();
    }
    return out;
}

// Best-inertia result over seeded restarts (ties: lowest restart index).
inline ClusterResult kmeans(const PointMatrix& points, int K, const KMeansOptions& options = {}) {
    if (options.restarts == 0) throw ConfigError("kmeans needs at least one restart");
    // checked here too: an exception must not escape the parallel region
    if (K < 1 || K > points.rows()) throw ConfigError("kmeans requires 1 <= K <= n");
    std::vector<ClusterResult> results(options.restarts);
    const auto restarts = static_cast<std::int64_t>(options.restarts);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t r = 0; r < restarts; ++r) {
        auto rng = make_rng(options.seed, Stream::KMeans, static_cast<std::uint64_t>(r));
        results[static_cast<std::size_t>(r)] = kmeans_single(points, K, rng, options.max_iter);
    }
    std::size_t best = 0;
    for (std::size_t r = 1; r < results.size(); ++r)
        if (results[r].inertia < results[best].inertia) best = r;
    return results[best];
}

inline std::size_t connected_components(const SimilarityGraph& g) {
    std::vector<char> seen(g.size(), 0);
    std::size_t components = 0;
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (seen[s]) continue;
        ++components;
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            auto v = q.front();
            q.pop();
            for (auto u : g.neighbors(v))
                if (!seen[u]) {
                    seen[u] = 1;
                    q.push(u);
                }
        }
    }
    return components;
}

struct SpectralOptions {
    bool normalize_rows = false;
    KMeansOptions kmeans;
    EigenOptions eigen;
};

// k-means on the rows of the n_eigenvectors smallest eigenvectors of L_s.
inline ClusterResult spectral_clustering(const SimilarityGraph& graph, int K, std::size_t n_eigenvectors,
                                         const SpectralOptions& options = {}) {
    if (n_eigenvectors < 1 || n_eigenvectors > graph.size())
        throw ConfigError("spectral clustering: invalid eigenvector count");
    if (connected_components(graph) > 1) warn("spectral clustering on a disconnected graph");
    auto pairs = smallest_eigenpairs(sparse_normalized_laplacian(graph), n_eigenvectors, options.eigen);
    PointMatrix embedding = pairs.vectors;
    if (options.normalize_rows)
        for (Eigen::Index i = 0; i < embedding.rows(); ++i) {
            const double norm = embedding.row(i).norm();
            if (norm > 0.0) embedding.row(i) /= norm;
        }
    return kmeans(embedding, K, options.kmeans);
}

} // namespace mgl
