#pragma once
// Small random problems shared by the unit tests and the acceptance runner.
#include <pdcd/pdcd.hpp>

namespace fixtures {

using namespace pdcd;

inline Matrix random_matrix(Rng& rng, Index r, Index c)
{
    Matrix M(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) M(i, j) = rng.normal();
    return M;
}

inline BlockLinearOperator random_operator(Rng& rng, const LayoutPtr& primal, const LayoutPtr& dual,
    const std::vector<std::vector<Index>>& rows)
{
    std::vector<BlockLinearOperator::Entry> entries;
    for (Index j = 0; j < static_cast<Index>(rows.size()); ++j) {
        for (Index i : rows[j]) entries.push_back({j, i, random_matrix(rng, dual->dim(j), primal->dim(i))});
    }
    return BlockLinearOperator(primal, dual, std::move(entries));
}

/*
 * 5 primal blocks of dims (1,2,1,3,2), 4 dual blocks of dims (1,2,1,2) with
 * multiplicities (2,1,3,2). f least squares, g = l1, h = group l2,1 with one
 * group per dual block, or with the last two dual blocks sharing a group
 * when coupled_groups is set.
 */
inline ProblemSpec mixed_problem(std::uint64_t seed, bool coupled_groups = false)
{
    Rng rng(seed);
    auto primal = BlockLayout::make({1, 2, 1, 3, 2});
    auto dual = BlockLayout::make({1, 2, 1, 2});
    BlockLinearOperator M = random_operator(rng, primal, dual, {{0, 2}, {1}, {0, 3, 4}, {2, 4}});
    const Matrix A = random_matrix(rng, 12, primal->size());
    const Vector b = rng.normal_vector(12);
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), b, primal);
    ProxPtr h = coupled_groups ? group_l21_norm(0.3, {1, 2, 3}) : group_l21_norm(0.3, {1, 2, 1, 2});
    return make_problem(std::move(f), l1_norm(0.1), std::move(h), std::move(M), "mixed");
}

/*
 * Scalar primal blocks, scalar dual rows, each row coupling one primal block
 * (all m_j = 1). f least squares with a full-column-rank design, g = l1,
 * h = l1.
 */
inline ProblemSpec mj1_problem(std::uint64_t seed, Index n = 3)
{
    Rng rng(seed);
    auto primal = BlockLayout::scalar(n);
    std::vector<std::vector<Index>> rows;
    for (Index i = 0; i < n; ++i) rows.push_back({i});
    rows.push_back({0});
    if (n > 1) rows.push_back({n - 1});
    auto dual = BlockLayout::scalar(static_cast<Index>(rows.size()));
    BlockLinearOperator M = random_operator(rng, primal, dual, rows);
    const Matrix A = random_matrix(rng, n + 2, n);
    const Vector b = rng.normal_vector(n + 2);
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), b, primal);
    return make_problem(std::move(f), l1_norm(0.05), l1_norm(0.2), std::move(M), "mj1");
}

/* full primal-dual iteration run to a tight saddle residual */
inline std::pair<BlockVector, BlockVector> reference_saddle(const ProblemSpec& p, double tol = 1e-12,
    std::uint64_t max_iter = 2000000)
{
    const StepSizes st = default_stepsizes(p, Variant::full_vu_condat);
    SolverState s = make_state(p, 0);
    CoordinateEngine eng(p, st, Variant::full_vu_condat);
    for (std::uint64_t k = 0; k < max_iter; ++k) {
        eng.step(s);
        if (k % 100 == 0 && saddle_residual(p, s.x, s.z) <= tol) break;
    }
    return {s.x, s.z};
}

} // namespace fixtures
