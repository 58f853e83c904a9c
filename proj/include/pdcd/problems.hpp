#pragma once
#include <pdcd/problem.hpp>
#include <pdcd/rng.hpp>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace pdcd {

// -----------------------------------------------------------------------
// 3-D discrete gradient
// -----------------------------------------------------------------------

using VolumeDims = std::array<Index, 3>;

/* voxel (ix, iy, iz) -> (ix * dy + iy) * dz + iz */
inline Index voxel_index(const VolumeDims& d, Index ix, Index iy, Index iz) { return (ix * d[1] + iy) * d[2] + iz; }

struct Gradient3D
{
    BlockLinearOperator M;
    /* rows per voxel that has any, in row order (the l2,1 groups) */
    std::vector<Index> group_dims;
};

/*
 * Forward differences x(v + e_d) - x(v) along each axis. Rows whose
 * neighbour falls outside the volume are omitted, so each row has exactly two
 * blocks (m_j = 2) and a voxel owns between 0 and 3 rows. Rows are ordered by
 * voxel, then by axis.
 */
inline Gradient3D gradient_3d(const VolumeDims& d)
{
    for (Index a : d) detail::require(a >= 1, "gradient_3d: every volume dimension must be >= 1");
    const Index n = d[0] * d[1] * d[2];
    std::vector<BlockLinearOperator::Entry> entries;
    std::vector<Index> groups;
    const Matrix minus = Matrix::Constant(1, 1, -1.0), plus = Matrix::Constant(1, 1, 1.0);
    Index row = 0;
    for (Index ix = 0; ix < d[0]; ++ix) {
        for (Index iy = 0; iy < d[1]; ++iy) {
            for (Index iz = 0; iz < d[2]; ++iz) {
                const Index v = voxel_index(d, ix, iy, iz);
                const std::array<bool, 3> has{ix + 1 < d[0], iy + 1 < d[1], iz + 1 < d[2]};
                const std::array<Index, 3> nb{
                    has[0] ? voxel_index(d, ix + 1, iy, iz) : -1,
                    has[1] ? voxel_index(d, ix, iy + 1, iz) : -1,
                    has[2] ? voxel_index(d, ix, iy, iz + 1) : -1,
                };
                Index count = 0;
                for (int a = 0; a < 3; ++a) {
                    if (!has[a]) continue;
                    entries.push_back({row, v, minus});
                    entries.push_back({row, nb[a], plus});
                    ++row;
                    ++count;
                }
                if (count > 0) groups.push_back(count);
            }
        }
    }
    return {BlockLinearOperator(BlockLayout::scalar(n), BlockLayout::scalar(row), std::move(entries)),
        std::move(groups)};
}

// -----------------------------------------------------------------------
// Builders
// -----------------------------------------------------------------------

/* 1/2 ||Ax - b||^2 + alpha ||x||_1, scalar blocks, h = 0 */
inline ProblemSpec build_lasso(const SparseMatrix& A, const Vector& b, double alpha)
{
    detail::require(alpha >= 0.0, "build_lasso: alpha must be >= 0");
    auto layout = BlockLayout::scalar(A.cols());
    return make_problem(least_squares_f(A, b, layout), l1_norm(alpha), zero_function(),
        BlockLinearOperator::empty(layout), "lasso");
}

inline ProblemSpec build_lasso(const Matrix& A, const Vector& b, double alpha)
{
    return build_lasso(SparseMatrix(A.sparseView(0.0, 0.0)), b, alpha);
}

/*
 * 1/2 ||Ax - b||^2 + alpha (r ||x||_1 + (1 - r) ||Mx||_{2,1}), M the 3-D
 * gradient of the volume, one scalar block per voxel. For r = 1 this is the
 * Lasso.
 */
inline ProblemSpec build_tv_l1(const SparseMatrix& A, const Vector& b, double alpha, double r, const VolumeDims& dims)
{
    detail::require(alpha >= 0.0, "build_tv_l1: alpha must be >= 0");
    detail::require(r >= 0.0 && r <= 1.0, "build_tv_l1: r must lie in [0, 1]");
    for (Index a : dims) detail::require(a >= 1, "build_tv_l1: every volume dimension must be >= 1");
    detail::require_shape(A.cols() == dims[0] * dims[1] * dims[2], "build_tv_l1: A must have one column per voxel");
    if (r == 1.0) {
        ProblemSpec p = build_lasso(A, b, alpha);
        p.description = "tv_l1 (r = 1, lasso)";
        return p;
    }
    Gradient3D grad = gradient_3d(dims);
    auto f = least_squares_f(A, b, grad.M.primal_layout());
    ProxPtr h = grad.M.n_dual_blocks() > 0 ? group_l21_norm(alpha * (1.0 - r), grad.group_dims) : zero_function();
    return make_problem(std::move(f), l1_norm(alpha * r), std::move(h), std::move(grad.M), "tv_l1");
}

inline ProblemSpec build_tv_l1(const Matrix& A, const Vector& b, double alpha, double r, const VolumeDims& dims)
{
    return build_tv_l1(SparseMatrix(A.sparseView(0.0, 0.0)), b, alpha, r, dims);
}

/*
 * Dual SVM as a minimization: 1/(2 lambda) ||A D(b) x||^2 - e^T x
 * + sum_i I_[0,C_i](x_i) + I_{b-perp}(x), with M = I. A is features x samples.
 */
inline ProblemSpec build_svm_dual(const SparseMatrix& A, const Vector& labels, const Vector& C, double lambda)
{
    detail::require_shape(C.size() == labels.size(), "build_svm_dual: one C_i per sample is required");
    for (Index i = 0; i < C.size(); ++i) detail::require(C[i] > 0.0, "build_svm_dual: C_i must be positive");
    auto f = svm_dual_f(A, labels, lambda);
    auto layout = f->layout();
    ProblemSpec p = make_problem(std::move(f), box_indicator(Vector::Zero(C.size()), C), hyperplane_indicator(labels),
        BlockLinearOperator::identity(layout), "svm_dual");
    p.svm = SvmData{A, labels, C, lambda};
    return p;
}

inline ProblemSpec build_svm_dual(const Matrix& A, const Vector& labels, const Vector& C, double lambda)
{
    return build_svm_dual(SparseMatrix(A.sparseView(0.0, 0.0)), labels, C, lambda);
}

/* C_i = C_max * n_minority / n_class(i): the smaller class gets C_max */
inline Vector svm_class_weights(const Vector& labels, double c_max)
{
    detail::require(c_max > 0.0, "svm_class_weights: C_max must be positive");
    Index npos = 0, nneg = 0;
    for (Index i = 0; i < labels.size(); ++i) (labels[i] > 0 ? npos : nneg) += 1;
    const double nmin = static_cast<double>(std::min(npos, nneg) > 0 ? std::min(npos, nneg) : std::max(npos, nneg));
    Vector C(labels.size());
    for (Index i = 0; i < labels.size(); ++i) {
        C[i] = c_max * nmin / static_cast<double>(labels[i] > 0 ? npos : nneg);
    }
    return C;
}

/* f(x) = 1/2 (x1 + x2 + x3 - 1)^2, g = h = 0 */
inline ProblemSpec build_toy_counterexample()
{
    Matrix A = Matrix::Ones(1, 3);
    Vector b = Vector::Ones(1);
    auto layout = BlockLayout::scalar(3);
    return make_problem(least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), b, layout), zero_function(),
        zero_function(), BlockLinearOperator::empty(layout), "toy_counterexample");
}

// -----------------------------------------------------------------------
// Synthetic data
// -----------------------------------------------------------------------

struct RegressionData
{
    Matrix A;
    Vector b;
    Vector x_true;
};

/* k distinct indices of {0..n-1}, in increasing order (partial Fisher-Yates) */
inline std::vector<Index> sample_without_replacement(Rng& rng, Index n, Index k)
{
    std::vector<Index> idx(n);
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index t = 0; t < k; ++t) std::swap(idx[t], idx[t + rng.uniform_index(n - t)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

/*
 * A with i.i.d. N(0, 1/m) entries, x_true with round(sparsity * n) standard
 * normal entries at random positions, b = A x_true + noise * N(0, I).
 */
inline RegressionData synth_regression(std::uint64_t seed, Index m, Index n, double sparsity, double noise)
{
    detail::require(m >= 1 && n >= 1, "synth_regression: m and n must be >= 1");
    detail::require(sparsity >= 0.0 && sparsity <= 1.0, "synth_regression: sparsity must lie in [0, 1]");
    detail::require(noise >= 0.0, "synth_regression: noise must be >= 0");
    Rng rng(seed);
    RegressionData d;
    d.A = Matrix(m, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index c = 0; c < n; ++c) {
        for (Index r = 0; r < m; ++r) d.A(r, c) = s * rng.normal();
    }
    d.x_true = Vector::Zero(n);
    const Index k = static_cast<Index>(std::llround(sparsity * static_cast<double>(n)));
    for (Index i : sample_without_replacement(rng, n, k)) d.x_true[i] = rng.normal();
    d.b = d.A * d.x_true;
    for (Index r = 0; r < m; ++r) d.b[r] += noise * rng.normal();
    return d;
}

/*
 * Piecewise-constant volume (a +1 box and a -1 box on a zero background)
 * observed through m random projections with N(0, 1/m) entries.
 */
inline RegressionData synth_tv_volume(std::uint64_t seed, const VolumeDims& dims, Index m, double noise)
{
    for (Index a : dims) detail::require(a >= 1, "synth_tv_volume: every volume dimension must be >= 1");
    detail::require(m >= 1, "synth_tv_volume: m must be >= 1");
    Rng rng(seed);
    const Index n = dims[0] * dims[1] * dims[2];
    RegressionData d;
    d.x_true = Vector::Zero(n);
    auto box = [&](double value) {
        std::array<Index, 3> lo{}, hi{};
        for (int a = 0; a < 3; ++a) {
            lo[a] = rng.uniform_index(dims[a]);
            hi[a] = lo[a] + 1 + rng.uniform_index(std::max<Index>(1, dims[a] - lo[a]));
            hi[a] = std::min(hi[a], dims[a]);
        }
        for (Index ix = lo[0]; ix < hi[0]; ++ix)
            for (Index iy = lo[1]; iy < hi[1]; ++iy)
                for (Index iz = lo[2]; iz < hi[2]; ++iz) d.x_true[voxel_index(dims, ix, iy, iz)] = value;
    };
    box(1.0);
    box(-1.0);
    d.A = Matrix(m, n);
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    for (Index c = 0; c < n; ++c) {
        for (Index r = 0; r < m; ++r) d.A(r, c) = s * rng.normal();
    }
    d.b = d.A * d.x_true;
    for (Index r = 0; r < m; ++r) d.b[r] += noise * rng.normal();
    return d;
}

struct ClassificationData
{
    SparseMatrix A; // features x samples
    Vector labels;  // +-1
};

/*
 * Two Gaussian classes with alternating labels (balanced when the sample
 * count is even). Sample i is N(b_i * separation * u, I) with u a fixed unit
 * direction drawn from the seed.
 */
inline ClassificationData synth_svm(std::uint64_t seed, Index samples, Index features, double separation = 2.5)
{
    detail::require(samples >= 2 && features >= 1, "synth_svm: need >= 2 samples and >= 1 feature");
    Rng rng(seed);
    Vector u = rng.normal_vector(features);
    u /= u.norm();
    Matrix A(features, samples);
    Vector labels(samples);
    for (Index i = 0; i < samples; ++i) {
        labels[i] = (i % 2 == 0) ? 1.0 : -1.0;
        for (Index f = 0; f < features; ++f) A(f, i) = rng.normal() + labels[i] * separation * u[f];
    }
    return {SparseMatrix(A.sparseView(0.0, 0.0)), std::move(labels)};
}

} // namespace pdcd
