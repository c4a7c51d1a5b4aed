#pragma once

// kNN similarity graph with Zelnik-Manor/Perona local scaling, plus the
// degree and Laplacian quantities derived from it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mgl/dataset.hpp"
#include "mgl/error.hpp"
#include "mgl/parallel.hpp"

namespace mgl {

struct GraphConfig {
    std::size_t neighbors = 10;   // N
    std::size_t scale_index = 10; // M, 1-based rank of the neighbor used for tau
    double tau_floor = 1e-8;
    double degree_floor = 1e-12;

    void validate(std::size_t n) const {
        if (scale_index < 1 || scale_index > neighbors)
            throw ConfigError("graph config requires 1 <= M <= N");
        if (neighbors >= n)
            throw ConfigError("graph config requires N < n (N = " + std::to_string(neighbors) +
                              ", n = " + std::to_string(n) + ")");
        if (!(tau_floor > 0.0)) throw ConfigError("tau_floor must be positive");
        if (!(degree_floor > 0.0)) throw ConfigError("degree_floor must be positive");
    }
};

struct Neighbor {
    std::size_t index;
    double sq_dist;
};

// Row-major n x k table of nearest neighbors, each row ascending by distance.
struct KnnResult {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<Neighbor> entries;

    std::span<const Neighbor> row(std::size_t i) const {
        return {entries.data() + i * k, k};
    }
};

struct WeightEntry {
    std::size_t row;
    std::size_t col;
    double weight;
};

// Symmetric sparse graph in CSR layout. Columns within a row are ascending.
struct SimilarityGraph {
    std::vector<std::size_t> row_offsets{0};
    std::vector<std::size_t> columns;
    std::vector<double> weights;
    std::vector<double> degrees;
    std::vector<double> norm_weights; // w_ij / sqrt(d_i d_j), aligned with `weights`

    std::size_t size() const { return row_offsets.size() - 1; }
    std::size_t num_entries() const { return columns.size(); }

    std::span<const std::size_t> neighbors(std::size_t i) const {
        return {columns.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
    std::span<const double> row_weights(std::size_t i) const {
        return {weights.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }
    std::span<const double> row_norm_weights(std::size_t i) const {
        return {norm_weights.data() + row_offsets[i], row_offsets[i + 1] - row_offsets[i]};
    }

    // Weight of edge (i, j), 0 when absent.
    double weight(std::size_t i, std::size_t j) const {
        auto cols = neighbors(i);
        auto it = std::lower_bound(cols.begin(), cols.end(), j);
        if (it == cols.end() || *it != j) return 0.0;
        return weights[row_offsets[i] + static_cast<std::size_t>(it - cols.begin())];
    }

    // Structural and bit-exact numerical symmetry.
    bool is_symmetric() const {
        for (std::size_t i = 0; i < size(); ++i) {
            auto cols = neighbors(i);
            auto w = row_weights(i);
            for (std::size_t e = 0; e < cols.size(); ++e) {
                std::size_t j = cols[e];
                if (j == i) return false;
                auto back = neighbors(j);
                auto it = std::lower_bound(back.begin(), back.end(), i);
                if (it == back.end() || *it != i) return false;
                double wj = weights[row_offsets[j] + static_cast<std::size_t>(it - back.begin())];
                if (std::memcmp(&wj, &w[e], sizeof(double)) != 0) return false;
            }
        }
        return true;
    }
};

namespace detail {
inline double squared_distance(const PointMatrix& points, std::size_t i, std::size_t j) {
    return (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j)))
        .squaredNorm();
}

inline bool closer(const Neighbor& a, const Neighbor& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}
} // namespace detail

// Exact brute-force kNN, self excluded, ties broken by ascending index.
inline KnnResult knn_search(const PointMatrix& points, std::size_t k) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k == 0 || k >= n)
        throw ConfigError("knn_search requires 1 <= N < n (N = " + std::to_string(k) +
                          ", n = " + std::to_string(n) + ")");
    KnnResult result{n, k, std::vector<Neighbor>(n * k)};
    const auto rows = static_cast<std::int64_t>(n);

#pragma omp parallel num_threads(thread_count())
    {
        std::vector<Neighbor> candidates;
        candidates.reserve(n - 1);
#pragma omp for schedule(static)
        for (std::int64_t ii = 0; ii < rows; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            candidates.clear();
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) candidates.push_back({j, detail::squared_distance(points, i, j)});
            std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                              candidates.end(), detail::closer);
            std::copy_n(candidates.begin(), k, result.entries.begin() + static_cast<std::ptrdiff_t>(i * k));
        }
    }
    return result;
}

// tau_i = distance to the M-th closest point (self excluded), floored.
inline std::vector<double> local_scales(const KnnResult& knn, std::size_t scale_index,
                                        double tau_floor = 1e-8) {
    if (scale_index < 1 || scale_index > knn.k)
        throw ConfigError("local scaling index M must satisfy 1 <= M <= N");
    std::vector<double> tau(knn.n);
    for (std::size_t i = 0; i < knn.n; ++i)
        tau[i] = std::max(std::sqrt(knn.row(i)[scale_index - 1].sq_dist), tau_floor);
    return tau;
}

// w_ij = exp(-|x_i - x_j|^2 / (tau_i tau_j)) for every directed kNN pair.
inline std::vector<WeightEntry> similarity_weights(const KnnResult& knn, std::span<const double> tau) {
    if (tau.size() != knn.n) throw ContractError("tau length does not match kNN table");
    std::vector<WeightEntry> out;
    out.reserve(knn.n * knn.k);
    for (std::size_t i = 0; i < knn.n; ++i) {
        if (!(tau[i] > 0.0)) throw ContractError("tau must be positive at vertex " + std::to_string(i));
        for (const auto& nb : knn.row(i)) {
            if (!std::isfinite(nb.sq_dist))
                throw DataError("non-finite distance between " + std::to_string(i) + " and " +
                                std::to_string(nb.index));
            out.push_back({i, nb.index, std::exp(-nb.sq_dist / (tau[i] * tau[nb.index]))});
        }
    }
    return out;
}

// Union symmetrization: {i, j} is an edge when either endpoint lists the
// other. One weight per unordered pair is stored in both rows, so the result
// is bit-exactly symmetric. Degrees are left empty.
inline SimilarityGraph symmetrize(std::size_t n, std::span<const WeightEntry> directed) {
    struct Pair {
        std::size_t a, b;
        double w;
    };
    std::vector<Pair> pairs;
    pairs.reserve(directed.size());
    for (const auto& e : directed) {
        if (e.row >= n || e.col >= n) throw ContractError("weight entry index out of range");
        if (e.row == e.col) continue;
        pairs.push_back({std::min(e.row, e.col), std::max(e.row, e.col), e.weight});
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
        return x.a < y.a || (x.a == y.a && x.b < y.b);
    });
    pairs.erase(std::unique(pairs.begin(), pairs.end(),
                            [](const Pair& x, const Pair& y) { return x.a == y.a && x.b == y.b; }),
                pairs.end());

    SimilarityGraph g;
    g.row_offsets.assign(n + 1, 0);
    for (const auto& p : pairs) {
        ++g.row_offsets[p.a + 1];
        ++g.row_offsets[p.b + 1];
    }
    for (std::size_t i = 0; i < n; ++i) g.row_offsets[i + 1] += g.row_offsets[i];
    g.columns.resize(g.row_offsets[n]);
    g.weights.resize(g.row_offsets[n]);
    std::vector<std::size_t> cursor(g.row_offsets.begin(), g.row_offsets.end() - 1);
    // Pairs are sorted by (a, b): row a receives b ascending; row b receives a
    // ascending as well, but interleaved with its own (b, c>b) pairs, hence the sort below.
    for (const auto& p : pairs) {
        g.columns[cursor[p.a]] = p.b;
        g.weights[cursor[p.a]++] = p.w;
        g.columns[cursor[p.b]] = p.a;
        g.weights[cursor[p.b]++] = p.w;
    }
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t i = 0; i < n; ++i) {
        const auto lo = g.row_offsets[i], hi = g.row_offsets[i + 1];
        row.clear();
        for (auto e = lo; e < hi; ++e) row.emplace_back(g.columns[e], g.weights[e]);
        std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (auto e = lo; e < hi; ++e) {
            g.columns[e] = row[e - lo].first;
            g.weights[e] = row[e - lo].second;
        }
    }
    return g;
}

// Fills degrees d_i = max(sum_j w_ij, floor) and w_ij / sqrt(d_i d_j).
inline void compute_degrees(SimilarityGraph& g, double degree_floor = 1e-12) {
    const std::size_t n = g.size();
    g.degrees.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double w : g.row_weights(i)) sum += w;
        if (sum <= 0.0) warn("isolated vertex " + std::to_string(i) + ": degree floor applied");
        g.degrees[i] = std::max(sum, degree_floor);
    }
    g.norm_weights.resize(g.weights.size());
    for (std::size_t i = 0; i < n; ++i)
        for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
            g.norm_weights[e] = g.weights[e] / std::sqrt(g.degrees[i] * g.degrees[g.columns[e]]);
}

inline constexpr std::size_t kDenseLaplacianCap = 5000;

// L = D - W.
inline Eigen::MatrixXd dense_laplacian(const SimilarityGraph& g, std::size_t cap = kDenseLaplacianCap) {
    const std::size_t n = g.size();
    if (n > cap) throw ConfigError("dense Laplacian requested for n = " + std::to_string(n) +
                                   " above cap " + std::to_string(cap));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        L(ii, ii) = g.degrees[i];
        for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
            L(ii, static_cast<Eigen::Index>(g.columns[e])) -= g.weights[e];
    }
    return L;
}

// L_s = I - D^{-1/2} W D^{-1/2}.
inline Eigen::MatrixXd dense_normalized_laplacian(const SimilarityGraph& g,
                                                  std::size_t cap = kDenseLaplacianCap) {
    const std::size_t n = g.size();
    if (n > cap) throw ConfigError("dense Laplacian requested for n = " + std::to_string(n) +
                                   " above cap " + std::to_string(cap));
    Eigen::MatrixXd Ls = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
            Ls(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(g.columns[e])) -= g.norm_weights[e];
    return Ls;
}

inline Eigen::SparseMatrix<double> sparse_normalized_laplacian(const SimilarityGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(g.num_entries() + g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        triplets.emplace_back(ii, ii, 1.0);
        for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
            triplets.emplace_back(ii, static_cast<Eigen::Index>(g.columns[e]), -g.norm_weights[e]);
    }
    Eigen::SparseMatrix<double> Ls(n, n);
    Ls.setFromTriplets(triplets.begin(), triplets.end());
    return Ls;
}

inline SimilarityGraph build_graph(const PointMatrix& points, const GraphConfig& config) {
    config.validate(static_cast<std::size_t>(points.rows()));
    auto knn = knn_search(points, config.neighbors);
    auto tau = local_scales(knn, config.scale_index, config.tau_floor);
    auto directed = similarity_weights(knn, tau);
    auto graph = symmetrize(knn.n, directed);
    compute_degrees(graph, config.degree_floor);
    return graph;
}

// Binary cache: "GLGR", u32 version, u64 n, u64 row offsets[n+1],
// u64 columns[nnz], f64 weights[nnz], f64 degrees[n]; all little-endian.
inline constexpr std::uint32_t kGraphCacheVersion = 1;

namespace detail {
template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    std::array<unsigned char, sizeof(T)> bytes{};
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof(T));
    for (std::size_t b = 0; b < sizeof(T); ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
    std::array<unsigned char, sizeof(T)> bytes{};
    auto offset = static_cast<long long>(in.tellg());
    if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw DataError("graph cache truncated while reading " + what + " at offset " +
                        std::to_string(offset));
    std::uint64_t bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) bits |= std::uint64_t{bytes[b]} << (8 * b);
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
}
} // namespace detail

inline void save_graph(const SimilarityGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out.write("GLGR", 4);
    detail::write_le<std::uint32_t>(out, kGraphCacheVersion);
    detail::write_le<std::uint64_t>(out, g.size());
    for (auto v : g.row_offsets) detail::write_le<std::uint64_t>(out, v);
    for (auto v : g.columns) detail::write_le<std::uint64_t>(out, v);
    for (auto v : g.weights) detail::write_le<double>(out, v);
    for (auto v : g.degrees) detail::write_le<double>(out, v);
    if (!out) throw DataError("write failed for " + path.string());
}

inline SimilarityGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "GLGR", 4) != 0)
        throw DataError("bad graph cache magic in " + path.string() + " at offset 0");
    auto version = detail::read_le<std::uint32_t>(in, "version");
    if (version != kGraphCacheVersion)
        throw DataError("unsupported graph cache version " + std::to_string(version));
    auto n = detail::read_le<std::uint64_t>(in, "vertex count");
    SimilarityGraph g;
    g.row_offsets.resize(n + 1);
    for (auto& v : g.row_offsets) v = detail::read_le<std::uint64_t>(in, "row offsets");
    if (g.row_offsets.front() != 0 || !std::is_sorted(g.row_offsets.begin(), g.row_offsets.end()))
        throw DataError("graph cache row offsets are not monotone");
    const auto nnz = g.row_offsets.back();
    g.columns.resize(nnz);
    for (auto& v : g.columns) {
        v = detail::read_le<std::uint64_t>(in, "columns");
        if (v >= n) throw DataError("graph cache column index out of range");
    }
    g.weights.resize(nnz);
    for (auto& v : g.weights) v = detail::read_le<double>(in, "weights");
    g.degrees.resize(n);
    for (auto& v : g.degrees) v = detail::read_le<double>(in, "degrees");
    g.norm_weights.resize(nnz);
    for (std::size_t i = 0; i < n; ++i)
        for (auto e = g.row_offsets[i]; e < g.row_offsets[i + 1]; ++e)
            g.norm_weights[e] = g.weights[e] / std::sqrt(g.degrees[i] * g.degrees[g.columns[e]]);
    return g;
}

} // namespace mgl
