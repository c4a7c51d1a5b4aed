#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mgl/error.hpp"

namespace mgl {

using CostMatrix = std::vector<std::vector<std::int64_t>>;

struct Assignment {
    std::int64_t cost = 0;
    std::vector<int> row_to_col;
};

// Square min-cost assignment (Hungarian method with potentials, O(n^3)).
inline Assignment hungarian(const CostMatrix& cost) {
    const int n = static_cast<int>(cost.size());
    for (const auto& row : cost)
        if (static_cast<int>(row.size()) != n) throw ContractError("hungarian: cost matrix must be square");
    constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;
    // 1-based arrays; column 0 is the virtual start.
    std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<std::int64_t> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            std::int64_t delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const std::int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    Assignment out;
    out.row_to_col.assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) out.row_to_col[static_cast<std::size_t>(match[j] - 1)] = j - 1;
    for (int i = 0; i < n; ++i) out.cost += cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(out.row_to_col[static_cast<std::size_t>(i)])];
    return out;
}

// K x K table: entry [c][k] counts points with predicted cluster c and class k.
inline std::vector<std::vector<std::int64_t>> contingency(std::span<const int> pred, std::span<const int> truth, int K) {
    if (pred.size() != truth.size()) throw ContractError("contingency: length mismatch");
    std::vector<std::vector<std::int64_t>> table(static_cast<std::size_t>(K), std::vector<std::int64_t>(static_cast<std::size_t>(K), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= K || truth[i] < 0 || truth[i] >= K)
            throw ContractError("contingency: label outside [0, K)");
        ++table[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
    }
    return table;
}

// Cluster-to-class permutation maximizing agreement. Among optimal
// permutations the lexicographically smallest is returned.
inline std::vector<int> align_labels(std::span<const int> pred, std::span<const int> truth, int K) {
    const auto table = contingency(pred, truth, K);
    const auto k = static_cast<std::size_t>(K);
    CostMatrix cost(k, std::vector<std::int64_t>(k));
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < k; ++j) cost[c][j] = -table[c][j];
    const std::int64_t best = hungarian(cost).cost;

    // Fix rows in order, taking the smallest column that keeps the optimum.
    std::vector<int> perm(k, -1);
    std::vector<char> col_used(k, 0);
    std::int64_t prefix = 0;
    for (std::size_t row = 0; row < k; ++row) {
        for (std::size_t col = 0; col < k; ++col) {
            if (col_used[col]) continue;
            std::vector<std::size_t> rest_rows, rest_cols;
            for (std::size_t r = row + 1; r < k; ++r) rest_rows.push_back(r);
            for (std::size_t c = 0; c < k; ++c)
                if (!col_used[c] && c != col) rest_cols.push_back(c);
            std::int64_t rest = 0;
            if (!rest_rows.empty()) {
                CostMatrix sub(rest_rows.size(), std::vector<std::int64_t>(rest_cols.size()));
                for (std::size_t a = 0; a < rest_rows.size(); ++a)
                    for (std::size_t b = 0; b < rest_cols.size(); ++b) sub[a][b] = cost[rest_rows[a]][rest_cols[b]];
                rest = hungarian(sub).cost;
            }
            if (prefix + cost[row][col] + rest == best) {
                perm[row] = static_cast<int>(col);
                col_used[col] = 1;
                prefix += cost[row][col];
                break;
            }
        }
    }
    return perm;
}

inline std::vector<int> apply_permutation(std::span<const int> labels, std::span<const int> perm) {
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = perm[static_cast<std::size_t>(labels[i])];
    return out;
}

} // namespace mgl
