#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mgl/error.hpp"
#include "mgl/rng.hpp"

namespace mgl {

struct EigenPairs {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXd vectors; // unit columns, aligned with values
};

struct EigenOptions {
    std::size_t dense_cap = 500; // dense decomposition up to this size; Lanczos above
    bool force_lanczos = false;
    double tol = 1e-8;            // residual |A v - lambda v| per unit vector
    std::uint64_t seed = 0x5eed;  // Lanczos start vectors
};

namespace detail {
inline double max_asymmetry(const Eigen::SparseMatrix<double>& A) {
    Eigen::SparseMatrix<double> At = A.transpose();
    Eigen::SparseMatrix<double> diff = A - At;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

inline double max_residual(const Eigen::SparseMatrix<double>& A, const EigenPairs& p) {
    double worst = 0.0;
    for (Eigen::Index c = 0; c < p.values.size(); ++c) {
        Eigen::VectorXd r = A * p.vectors.col(c) - p.values(c) * p.vectors.col(c);
        worst = std::max(worst, r.norm() / p.vectors.col(c).norm());
    }
    return worst;
}

inline EigenPairs dense_smallest(const Eigen::SparseMatrix<double>& A, std::size_t k) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(A);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
    if (solver.info() != Eigen::Success) throw NumericalError("dense eigendecomposition failed");
    const auto kk = static_cast<Eigen::Index>(k);
    return {solver.eigenvalues().head(kk), solver.eigenvectors().leftCols(kk)};
}
} // namespace detail

// Lanczos with full reorthogonalization. Breakdowns restart from a fresh
// random direction orthogonal to the basis, so repeated eigenvalues (e.g.
// disconnected graphs) are resolved. Grows the Krylov space until the k
// smallest Ritz pairs meet the residual tolerance.
inline EigenPairs lanczos_smallest(const Eigen::SparseMatrix<double>& A, std::size_t k, double tol = 1e-8,
                                   std::uint64_t seed = 0x5eed) {
    const auto n = static_cast<std::size_t>(A.rows());
    if (k == 0 || k > n) throw ContractError("lanczos: need 1 <= k <= n");
    auto rng = make_rng(seed, Stream::Lanczos);
    std::normal_distribution<double> gauss;

    Eigen::MatrixXd V(static_cast<Eigen::Index>(n), 0);
    std::vector<double> alpha, beta; // beta[j] couples columns j and j+1

    auto fresh_direction = [&](Eigen::Index cols) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(n));
            for (auto& x : v) x = gauss(rng);
            for (int pass = 0; pass < 2; ++pass) v -= V.leftCols(cols) * (V.leftCols(cols).transpose() * v);
            const double nv = v.norm();
            if (nv > 1e-8) return Eigen::VectorXd(v / nv);
        }
        throw NumericalError("lanczos: could not extend the Krylov basis");
    };

    const double scale = std::max(1.0, Eigen::MatrixXd(A.cwiseAbs() * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))).maxCoeff());
    Eigen::VectorXd q = fresh_direction(0);
    std::size_t next_check = std::min(n, std::max<std::size_t>(2 * k + 20, 40));

    for (std::size_t m = 0; m < n; ++m) {
        V.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(m + 1));
        V.col(static_cast<Eigen::Index>(m)) = q;
        Eigen::VectorXd w = A * q;
        alpha.push_back(q.dot(w));
        const auto cols = static_cast<Eigen::Index>(m + 1);
        for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(cols) * (V.leftCols(cols).transpose() * w);
        double b = w.norm();

        const bool last = m + 1 == n;
        if (!last) {
            if (b < 1e-10 * scale) {
                q = fresh_direction(cols);
                b = 0.0;
            } else {
                q = w / b;
            }
            beta.push_back(b);
        }

        if (m + 1 < next_check && !last) continue;
        next_check = std::min(n, next_check + std::max<std::size_t>(20, next_check / 2));

        const Eigen::Index dim = cols;
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            T(j, j) = alpha[static_cast<std::size_t>(j)];
            if (j + 1 < dim) T(j, j + 1) = T(j + 1, j) = beta[static_cast<std::size_t>(j)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ts(T);
        if (ts.info() != Eigen::Success) throw NumericalError("lanczos: tridiagonal solve failed");
        const double coupling = last ? 0.0 : b;
        bool converged = true;
        for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c)
            if (std::abs(coupling * ts.eigenvectors()(dim - 1, c)) > 0.1 * tol) converged = false;
        if (!converged && !last) continue;

        const auto kk = static_cast<Eigen::Index>(k);
        EigenPairs out{ts.eigenvalues().head(kk), V * ts.eigenvectors().leftCols(kk)};
        for (Eigen::Index c = 0; c < kk; ++c) out.vectors.col(c).normalize();
        if (detail::max_residual(A, out) <= tol) return out;
        if (last) break;
    }
    throw NumericalError("lanczos: residual tolerance not reached with a full Krylov basis");
}

// k smallest eigenpairs of a symmetric matrix.
inline EigenPairs smallest_eigenpairs(const Eigen::SparseMatrix<double>& A, std::size_t k,
                                      const EigenOptions& options = {}) {
    if (A.rows() != A.cols()) throw ContractError("smallest_eigenpairs: matrix is not square");
    const auto n = static_cast<std::size_t>(A.rows());
    if (k == 0 || k > n) throw ContractError("smallest_eigenpairs: need 1 <= k <= n");
    if (detail::max_asymmetry(A) > 1e-10) throw ContractError("smallest_eigenpairs: matrix is not symmetric");
    if (!options.force_lanczos && n <= options.dense_cap) {
        auto pairs = detail::dense_smallest(A, k);
        if (detail::max_residual(A, pairs) > options.tol)
            throw NumericalError("dense eigensolver residual above tolerance");
        return pairs;
    }
    return lanczos_smallest(A, k, options.tol, options.seed);
}

} // namespace mgl
