#include "fixtures.hpp"
#include "oracles.hpp"
#include <gtest/gtest.h>

using namespace pdcd;

namespace {

BlockVector scalars(std::initializer_list<double> v)
{
    return BlockVector(BlockLayout::scalar(static_cast<Index>(v.size())),
        Vector(Eigen::Map<const Vector>(v.begin(), static_cast<Index>(v.size()))));
}

/* f(x + U_i u) - f(x) - <grad f(x), U_i u> - beta_i/2 ||u||^2 over random samples */
double worst_descent_violation(const SmoothFunction& f, Rng& rng, int samples)
{
    const auto& L = *f.layout();
    double worst = -infinity;
    for (int s = 0; s < samples; ++s) {
        const BlockVector x(f.layout(), rng.normal_vector(L.size()));
        const Index i = rng.uniform_index(L.n_blocks());
        const Vector u = rng.normal_vector(L.dim(i));
        BlockVector xu = x;
        xu.block(i) += u;
        const double lhs = f.value(xu) - f.value(x) - f.gradient(x).block(i).dot(u);
        worst = std::max(worst, lhs - 0.5 * f.beta()[i] * u.squaredNorm());
    }
    return worst;
}

} // namespace

TEST(LeastSquares, IdentityDesign)
{
    auto f = least_squares_f(Matrix(Matrix::Identity(2, 2)), Vector::Zero(2));
    const auto x = scalars({3, 4});
    EXPECT_DOUBLE_EQ(f->value(x), 12.5);
    EXPECT_EQ(f->gradient(x).data(), (Vector(2) << 3, 4).finished());
    EXPECT_EQ(f->beta().values(), (Vector(2) << 1, 1).finished());
}

TEST(LeastSquares, ToyLipschitzConstants)
{
    auto f = least_squares_f(Matrix(Matrix::Ones(1, 3)), Vector::Ones(1));
    EXPECT_EQ(f->beta().values(), Vector::Ones(3));
    EXPECT_NEAR(f->global_lipschitz(), 3.0, 1e-9);
}

TEST(LeastSquares, PartialGradientMatchesFiniteDifferences)
{
    Rng rng(1);
    const Matrix A = fixtures::random_matrix(rng, 7, 6);
    const Vector b = rng.normal_vector(7);
    auto L = BlockLayout::make({2, 1, 3});
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), b, L);
    const BlockVector x(L, rng.normal_vector(6));
    const Vector fd = oracle::fd_gradient([&](const Vector& v) { return f->value(BlockVector(L, v)); }, x.data());
    for (Index i = 0; i < 3; ++i) {
        const Vector pg = f->partial_gradient(x, i);
        const Vector ref = fd.segment(L->offset(i), L->dim(i));
        EXPECT_LE((pg - ref).norm(), 1e-6 * (1 + ref.norm()));
        EXPECT_LE((pg - f->gradient(x).block(i)).norm(), 1e-12 * (1 + ref.norm()));
    }
}

TEST(LeastSquares, BlockBetaIsSpectralNormOfColumnBlock)
{
    Rng rng(4);
    const Matrix A = fixtures::random_matrix(rng, 9, 6);
    auto L = BlockLayout::make({1, 2, 3});
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), Vector::Zero(9), L);
    for (Index i = 0; i < 3; ++i) {
        const Matrix Ai = A.middleCols(L->offset(i), L->dim(i));
        EXPECT_NEAR(f->beta()[i], oracle::lambda_max_sym(Ai.transpose() * Ai), 1e-8 * f->beta()[i]);
    }
    EXPECT_NEAR(f->global_lipschitz(), oracle::lambda_max_sym(A.transpose() * A), 1e-8 * f->global_lipschitz());
    EXPECT_LE(worst_descent_violation(*f, rng, 1000), 1e-10);
}

TEST(LeastSquares, CachedGradientTracksUpdates)
{
    Rng rng(8);
    const Matrix A = fixtures::random_matrix(rng, 5, 4);
    auto L = BlockLayout::make({1, 3});
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), rng.normal_vector(5), L);
    BlockVector x(L, rng.normal_vector(4));
    Vector cache;
    f->init_cache(x, cache);
    for (int t = 0; t < 20; ++t) {
        const Index i = rng.uniform_index(2);
        const Vector d = rng.normal_vector(L->dim(i));
        x.block(i) += d;
        f->update_cache(cache, i, d);
        Vector g(L->dim(i));
        f->partial_gradient_cached(x, cache, i, g);
        EXPECT_LE((g - f->gradient(x).block(i)).norm(), 1e-12);
    }
}

TEST(SvmDual, SingleSampleExample)
{
    auto f = svm_dual_f(Matrix(Matrix::Ones(1, 1)), Vector::Ones(1), 1.0);
    const auto x = scalars({2});
    EXPECT_DOUBLE_EQ(f->value(x), 0.0);
    EXPECT_DOUBLE_EQ(f->gradient(x).data()[0], 1.0);
}

TEST(SvmDual, ZeroPointAndDescentInequality)
{
    Rng rng(9);
    const Matrix A = fixtures::random_matrix(rng, 4, 6);
    const Vector b = (Vector(6) << 1, -1, 1, 1, -1, -1).finished();
    auto f = svm_dual_f(A, b, 0.7);
    const BlockVector zero(f->layout());
    EXPECT_DOUBLE_EQ(f->value(zero), 0.0);
    EXPECT_EQ(f->gradient(zero).data(), Vector::Constant(6, -1.0));
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(f->beta()[i], A.col(i).squaredNorm() / 0.7, 1e-12);
    EXPECT_LE(worst_descent_violation(*f, rng, 1000), 1e-10);
}

TEST(SvmDual, RejectsBadInput)
{
    const Matrix A = Matrix::Ones(2, 2);
    EXPECT_THROW(svm_dual_f(A, (Vector(2) << 1, 0).finished(), 1.0), Error);
    EXPECT_THROW(svm_dual_f(A, (Vector(2) << 1, -1).finished(), 0.0), Error);
    EXPECT_THROW(svm_dual_f(A, Vector::Ones(3), 1.0), ShapeError);
}

TEST(L1Norm, SoftThreshold)
{
    auto g = l1_norm(1.0);
    EXPECT_DOUBLE_EQ(g->prox(WeightVector{1.0}, scalars({1.5})).data()[0], 0.5);
    auto g2 = l1_norm(0.5);
    EXPECT_DOUBLE_EQ(g2->prox(WeightVector{1.0}, scalars({-0.3})).data()[0], 0.0);
    auto g0 = l1_norm(0.0);
    const auto u = scalars({-2, 0.1, 3});
    EXPECT_EQ(g0->prox(WeightVector{1, 2, 3}, u).data(), u.data());
    EXPECT_TRUE(g0->is_zero());
    EXPECT_THROW(l1_norm(-1.0), Error);
}

TEST(GroupL21, Examples)
{
    auto h = group_l21_norm(5.0, {2});
    const BlockVector u(BlockLayout::make({2}), (Vector(2) << 3, 4).finished());
    EXPECT_EQ(h->prox(WeightVector{1.0}, u).data(), Vector::Zero(2));
    auto h2 = group_l21_norm(2.5, {2});
    const Vector p = h2->prox(WeightVector{1.0}, u).data();
    EXPECT_NEAR(p[0], 1.5, 1e-15);
    EXPECT_NEAR(p[1], 2.0, 1e-15);
    auto h0 = group_l21_norm(0.0, {2});
    EXPECT_EQ(h0->prox(WeightVector{1.0}, u).data(), u.data());
}

TEST(GroupL21, NonUniformWeightsWithinGroupAreOptimal)
{
    // one group spanning three scalar blocks with different weights
    auto h = group_l21_norm(0.7, {3});
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        const BlockVector u(BlockLayout::scalar(3), 2.0 * rng.normal_vector(3));
        const WeightVector gamma{0.3, 1.0, 2.5};
        const BlockVector p = h->prox(gamma, u);
        EXPECT_LE(oracle::prox_optimality_violation(*h, gamma, u, p, rng, 100, 0.1), 1e-10);
        EXPECT_LE(oracle::prox_optimality_violation(*h, gamma, u, p, rng, 100, 1e-4), 1e-10);
    }
}

TEST(BoxIndicator, Clamp)
{
    auto g = box_indicator(Vector::Zero(1), Vector::Ones(1));
    EXPECT_DOUBLE_EQ(g->prox(WeightVector{1.0}, scalars({1.7})).data()[0], 1.0);
    EXPECT_DOUBLE_EQ(g->prox(WeightVector{1.0}, scalars({0.4})).data()[0], 0.4);
    EXPECT_DOUBLE_EQ(g->prox(WeightVector{1.0}, scalars({-3})).data()[0], 0.0);
    EXPECT_EQ(g->value(scalars({2})), infinity);
    EXPECT_THROW(box_indicator(Vector::Ones(1), Vector::Zero(1)), Error);
}

TEST(HyperplaneIndicator, Projection)
{
    const Vector b = (Vector(2) << 1, 1).finished();
    auto h = hyperplane_indicator(b);
    const Vector p = h->prox(WeightVector{1, 1}, scalars({2, 0})).data();
    EXPECT_NEAR(p[0], 1.0, 1e-15);
    EXPECT_NEAR(p[1], -1.0, 1e-15);
    const auto perp = scalars({3, -3});
    EXPECT_EQ(h->prox(WeightVector{1, 1}, perp).data(), perp.data());
    EXPECT_THROW(hyperplane_indicator(Vector::Zero(2)), Error);

    Rng rng(13);
    const Vector bb = rng.normal_vector(5);
    auto h5 = hyperplane_indicator(bb);
    for (int t = 0; t < 20; ++t) {
        const BlockVector u(BlockLayout::scalar(5), rng.normal_vector(5));
        const WeightVector gamma(rng.normal_vector(5).cwiseAbs().array() + 0.1);
        const BlockVector q = h5->prox(gamma, u);
        EXPECT_LE(std::abs(bb.dot(q.data())), 1e-12 * (1 + u.norm()));
        // KKT: D(gamma^-1)(u - q) parallel to b
        const Vector r = (u.data() - q.data()).cwiseQuotient(gamma.expand(*u.layout()));
        EXPECT_LE((r - bb * (bb.dot(r) / bb.squaredNorm())).norm(), 1e-12 * (1 + r.norm()));
    }
}

TEST(ZeroFunction, Basics)
{
    auto z = zero_function();
    const auto u = scalars({1, -2});
    EXPECT_EQ(z->prox(WeightVector{1, 1}, u).data(), u.data());
    EXPECT_EQ(z->value(u), 0.0);
    EXPECT_EQ(conjugate_prox(*z, WeightVector{1, 3}, u).data(), Vector::Zero(2));
}

TEST(ProxOptimality, RandomCompetitors)
{
    Rng rng(21);
    auto L = BlockLayout::make({1, 2, 1, 2});
    const std::vector<ProxPtr> fns{l1_norm(0.4), group_l21_norm(0.8, {1, 2, 1, 2}), group_l21_norm(0.5, {3, 3}),
        box_indicator(Vector::Constant(6, -0.5), Vector::Constant(6, 0.7)), hyperplane_indicator(rng.normal_vector(6)),
        zero_function()};
    for (const auto& F : fns) {
        for (int t = 0; t < 10; ++t) {
            const BlockVector u(L, 1.5 * rng.normal_vector(6));
            const WeightVector gamma(rng.normal_vector(4).cwiseAbs().array() + 0.2);
            const BlockVector p = F->prox(gamma, u);
            EXPECT_LE(oracle::prox_optimality_violation(*F, gamma, u, p, rng, 100, 0.3), 1e-10);
        }
    }
}

TEST(ProxSeparability, CoordinateDependsOnOwnInputOnly)
{
    Rng rng(22);
    auto L = BlockLayout::scalar(4);
    for (const ProxPtr& F : {l1_norm(0.3), box_indicator(Vector::Zero(4), Vector::Ones(4))}) {
        ASSERT_TRUE(F->separable());
        const WeightVector gamma{0.5, 1, 2, 3};
        BlockVector u(L, rng.normal_vector(4));
        const BlockVector p = F->prox(gamma, u);
        u.data().tail(3) = rng.normal_vector(3);
        EXPECT_EQ(F->prox(gamma, u).data()[0], p.data()[0]);
    }
}

TEST(ConjugateProx, MoreauIdentityClosedForms)
{
    Rng rng(31);
    // h = alpha l2,1 with uniform sigma: projection onto radius-alpha balls
    auto h = group_l21_norm(0.6, {2, 3});
    auto L = BlockLayout::make({2, 3});
    for (int t = 0; t < 20; ++t) {
        const BlockVector u(L, 2.0 * rng.normal_vector(5));
        const BlockVector q = conjugate_prox(*h, WeightVector{0.8, 0.8}, u);
        for (Index j = 0; j < 2; ++j) {
            const Vector uj = u.block(j);
            const Vector expect = uj.norm() <= 0.6 ? uj : Vector(uj * (0.6 / uj.norm()));
            EXPECT_LE((q.block(j) - expect).norm(), 1e-12);
            EXPECT_LE(q.block(j).norm(), 0.6 + 1e-12);
        }
    }
    // h = indicator of b-perp: h* = indicator of span(b); sigma^-1-weighted projection onto span(b)
    const Vector b = (Vector(2) << 1, -2).finished();
    auto hb = hyperplane_indicator(b);
    auto L2 = BlockLayout::scalar(2);
    for (int t = 0; t < 20; ++t) {
        const BlockVector u(L2, rng.normal_vector(2));
        const WeightVector sigma(rng.normal_vector(2).cwiseAbs().array() + 0.1);
        const Vector si = sigma.values().cwiseInverse();
        const double tstar = b.dot(si.cwiseProduct(u.data())) / b.dot(si.cwiseProduct(b));
        EXPECT_LE((conjugate_prox(*hb, sigma, u).data() - tstar * b).norm(), 1e-12);
    }
    // h = alpha l1: h* = indicator of the alpha-box, prox = clamp
    auto h1 = l1_norm(0.4);
    const BlockVector u(L2, (Vector(2) << 1.0, -0.1).finished());
    const Vector q = conjugate_prox(*h1, WeightVector{2, 0.5}, u).data();
    EXPECT_NEAR(q[0], 0.4, 1e-15);
    EXPECT_NEAR(q[1], -0.1, 1e-15);
}

TEST(ConjugateProx, BlockRestrictedEvaluationMatchesFull)
{
    Rng rng(41);
    auto L = BlockLayout::scalar(6);
    auto h = group_l21_norm(0.5, {2, 1, 3});
    const WeightVector sigma(rng.normal_vector(6).cwiseAbs().array() + 0.2);
    ConjugateProx cp(h, sigma, L);
    const BlockVector u(L, rng.normal_vector(6));
    const BlockVector full = cp(u);
    const std::vector<Index> blocks{3};
    std::vector<Index> support;
    cp.support(blocks, support);
    EXPECT_EQ(support, (std::vector<Index>{3, 4, 5}));
    BlockVector out(L);
    cp.eval_blocks(u, blocks, support, out);
    EXPECT_NEAR(out.data()[3], full.data()[3], 1e-15);
}

TEST(ConjugateValues, ClosedForms)
{
    auto L = BlockLayout::scalar(2);
    const BlockVector v(L, (Vector(2) << 0.3, -0.2).finished());
    EXPECT_EQ(*l1_norm(0.5)->conjugate_value(v), 0.0);
    EXPECT_EQ(*l1_norm(0.25)->conjugate_value(v), infinity);
    EXPECT_EQ(*zero_function()->conjugate_value(v), infinity);
    auto box = box_indicator((Vector(2) << -1, 0).finished(), (Vector(2) << 2, 1).finished());
    EXPECT_NEAR(*box->conjugate_value(v), 0.3 * 2 + (-0.2) * 0, 1e-15);
}
