#pragma once
#include <pdcd/core.hpp>
#include <pdcd/rng.hpp>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>

namespace pdcd {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

struct PowerIterationOptions
{
    double tol = 1e-10;
    int max_iters = 10000;
    std::uint64_t seed = 0x5eed;
};

/*
 * Largest eigenvalue of a symmetric positive semidefinite operator of size n
 * given through apply(v, out). Stops when the eigen-residual
 * ||A v - lambda v|| falls below tol * lambda.
 */
template <class ApplyFn>
double power_iteration(Index n, ApplyFn&& apply, const PowerIterationOptions& opts = {})
{
    if (n == 0) return 0.0;
    Rng rng(opts.seed);
    Vector v = rng.normal_vector(n);
    v.normalize();
    Vector w(n);
    double lambda = 0.0;
    for (int it = 0; it < opts.max_iters; ++it) {
        apply(v, w);
        lambda = v.dot(w);
        const double wn = w.norm();
        if (wn == 0.0) return 0.0;
        const double resid = (w - lambda * v).norm();
        v = w / wn;
        if (resid <= opts.tol * std::abs(lambda)) break;
    }
    // Rayleigh quotient at the final iterate
    apply(v, w);
    return std::max(lambda, v.dot(w));
}

/* exact solve up to dimension 3, power iteration beyond */
inline double largest_eigenvalue_psd(const Matrix& G, const PowerIterationOptions& opts = {})
{
    const Index d = G.rows();
    if (d == 0) return 0.0;
    if (d == 1) return std::max(0.0, G(0, 0));
    if (d <= 3) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
        return std::max(0.0, es.eigenvalues().maxCoeff());
    }
    return power_iteration(d, [&](const Vector& v, Vector& out) { out.noalias() = G * v; }, opts);
}

/* ||A_{:, c0:c0+d}||_2^2 */
inline double column_block_spectral_sq(const SparseMatrix& A, Index c0, Index d)
{
    if (d == 1) return A.col(c0).squaredNorm();
    Matrix G(d, d);
    for (Index a = 0; a < d; ++a) {
        for (Index b = a; b < d; ++b) {
            G(a, b) = G(b, a) = A.col(c0 + a).dot(A.col(c0 + b));
        }
    }
    return largest_eigenvalue_psd(G);
}

/* ||A||_2^2 */
inline double spectral_norm_sq(const SparseMatrix& A, const PowerIterationOptions& opts = {})
{
    Vector tmp(A.rows());
    return power_iteration(A.cols(), [&](const Vector& v, Vector& out) {
        tmp.noalias() = A * v;
        out.noalias() = A.transpose() * tmp;
    }, opts);
}

} // namespace pdcd
