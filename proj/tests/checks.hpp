#pragma once
// Property checks shared by the unit tests and the acceptance runner. Each
// returns a worst-case error or slack so callers choose the threshold.
#include "fixtures.hpp"
#include "oracles.hpp"
#include <algorithm>
#include <cmath>

namespace checks {

using namespace pdcd;

inline double max_abs(const Vector& a, const Vector& b) { return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff(); }

/* |enumerated E||x1 - x*||^2 - ((tau - 1/3)^2 + 2/9)| on the toy from x0 = 0 */
struct ToyExpectation
{
    double enumerated;
    double closed_form;
};

inline ToyExpectation toy_expectation(double tau)
{
    const ProblemSpec toy = build_toy_counterexample();
    StepSizes st = make_stepsizes(*toy.M, toy.beta(), 0.5);
    st.tau = WeightVector::constant(3, tau);
    CoordinateEngine eng(toy, st, Variant::cd_primal_dual);
    const SolverState s = make_state(toy, 0);
    const Vector xs = Vector::Constant(3, 1.0 / 3.0);
    const double e = enumerate_conditional_expectation(eng, s,
        [&](const SolverState& nx) { return (nx.x.data() - xs).squaredNorm(); });
    return {e, (tau - 1.0 / 3.0) * (tau - 1.0 / 3.0) + 2.0 / 9.0};
}

inline SolverState random_state(const ProblemSpec& p, Rng& rng, std::uint64_t seed)
{
    const BlockVector x(p.primal_layout(), rng.normal_vector(p.primal_layout()->size()));
    const auto& dl = p.M->duplicated_layout();
    const DuplicatedDual y(BlockVector(dl, rng.normal_vector(dl->size())));
    return make_state(p, seed, x, y);
}

/* worst absolute error over the four conditional-expectation identities at random states */
inline double expectation_identity_error(std::uint64_t seed, int states)
{
    const ProblemSpec p = fixtures::mj1_problem(seed, 3);
    const StepSizes st = make_stepsizes(*p.M, p.beta());
    CoordinateEngine eng(p, st, Variant::cd_pd_mj1);
    const auto& M = *p.M;
    const double n = static_cast<double>(p.n());
    Rng rng(seed + 1000);
    double worst = 0.0;
    for (int t = 0; t < states; ++t) {
        const SolverState s = random_state(p, rng, seed + t);
        const PrimalDual bar = primal_dual_map(p, st, s.x, s.z);
        const BlockVector X(p.primal_layout(), rng.normal_vector(p.primal_layout()->size()));
        const BlockVector Y(p.dual_layout(), rng.normal_vector(p.dual_layout()->size()));
        Vector g(p.n());
        for (Index i = 0; i < p.n(); ++i) g[i] = 0.1 + rng.uniform();
        const WeightVector gamma(g);
        const WeightVector sinv = st.sigma.inverse();
        auto dx = [&](const BlockVector& a) { return detail::diff(a, X); };
        auto dy = [&](const BlockVector& a) { return detail::diff(a, Y); };

        const Vector ex = enumerate_conditional_expectation(eng, s, [](const SolverState& nx) { return nx.x.data(); });
        worst = std::max(worst, max_abs(ex, bar.x.data() / n + (1 - 1 / n) * s.x.data()));

        auto check = [&](auto q, double expect) {
            const double got = enumerate_conditional_expectation(eng, s, q);
            worst = std::max(worst, std::abs(got - expect) / (1.0 + std::abs(expect)));
        };
        check([&](const SolverState& nx) { return weighted_norm_sq(dx(nx.x), gamma); },
            weighted_norm_sq(dx(bar.x), gamma) / n + (1 - 1 / n) * weighted_norm_sq(dx(s.x), gamma));
        check([&](const SolverState& nx) { return weighted_norm_sq(dy(nx.z), sinv); },
            weighted_norm_sq(dy(bar.y), sinv) / n + (1 - 1 / n) * weighted_norm_sq(dy(s.z), sinv));
        check([&](const SolverState& nx) { return dy(nx.z).dot(M.apply(dx(nx.x))); },
            dy(bar.y).dot(M.apply(dx(bar.x))) / n + (1 - 1 / n) * dy(s.z).dot(M.apply(dx(s.x))));
    }
    return worst;
}

/* smallest one-step inequality slack of the full map T over random states */
inline double one_step_min_slack(std::uint64_t seed, int states)
{
    const ProblemSpec p = fixtures::mj1_problem(seed, 3);
    const StepSizes st = make_stepsizes(*p.M, p.beta());
    const auto [xs, ys] = fixtures::reference_saddle(p);
    Rng rng(seed + 2000);
    double worst = infinity;
    for (int t = 0; t < states; ++t) {
        const double scale = 0.1 + 3.0 * rng.uniform();
        const BlockVector x(p.primal_layout(), xs.data() + scale * rng.normal_vector(p.primal_layout()->size()));
        const BlockVector y(p.dual_layout(), ys.data() + scale * rng.normal_vector(p.dual_layout()->size()));
        worst = std::min(worst, one_step_slack(p, st, x, y, xs, ys));
    }
    return worst;
}

struct ContractionResult
{
    double min_slack;
    double reference_residual;
};

/* smallest contraction slack along a seeded trajectory of the single-copy iteration */
inline ContractionResult contraction_min_slack(std::uint64_t seed, int iters)
{
    const ProblemSpec p = fixtures::mj1_problem(seed, 3);
    const StepSizes st = make_stepsizes(*p.M, p.beta());
    const auto [xs, ys] = fixtures::reference_saddle(p);
    CoordinateEngine eng(p, st, Variant::cd_pd_mj1);
    SolverState s = make_state(p, seed);
    double worst = infinity;
    for (int k = 0; k < iters; ++k) {
        worst = std::min(worst, contraction_slack(eng, s, xs, ys));
        eng.step(s);
    }
    return {worst, saddle_residual(p, xs, ys)};
}

/* worst per-iteration deviation of (x, K*y, Sy) between two variants driven by the same seed */
inline double lockstep(const ProblemSpec& p, const StepSizes& st, Variant a, Variant b, int iters, std::uint64_t seed)
{
    CoordinateEngine ea(p, st, a), eb(p, st, b);
    SolverState sa = make_state(p, seed), sb = make_state(p, seed);
    double worst = 0.0;
    for (int k = 0; k < iters; ++k) {
        const Index ia = ea.step(sa);
        const Index ib = eb.step(sb);
        if (ia != ib) return infinity;
        worst = std::max({worst, max_abs(sa.x.data(), sb.x.data()),
            max_abs(K_adjoint(*p.M, sa.y).data(), K_adjoint(*p.M, sb.y).data()),
            max_abs(dual_reduce_S(*p.M, sa.y).data(), dual_reduce_S(*p.M, sb.y).data())});
    }
    return worst;
}

/* one primal block: the coordinate iteration against the full iteration, per step */
inline double single_block_deviation(Variant v, int iters, std::uint64_t seed)
{
    Rng rng(seed);
    auto P = BlockLayout::make({3});
    auto D = BlockLayout::make({2, 1});
    BlockLinearOperator M = fixtures::random_operator(rng, P, D, {{0}, {0}});
    const Matrix A = fixtures::random_matrix(rng, 4, 3);
    auto f = least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), rng.normal_vector(4), P);
    const ProblemSpec p = make_problem(f, l1_norm(0.1), group_l21_norm(0.4, {2, 1}), std::move(M));
    const StepSizes st = make_stepsizes(*p.M, p.beta());
    CoordinateEngine cd(p, st, v), vc(p, st, Variant::full_vu_condat);
    SolverState a = make_state(p, seed), b = make_state(p, seed);
    double worst = 0.0;
    for (int k = 0; k < iters; ++k) {
        cd.step(a);
        vc.step(b);
        worst = std::max({worst, max_abs(a.x.data(), b.x.data()), max_abs(a.z.data(), b.z.data())});
    }
    return worst;
}

/* Vt on random directions under default steps: smallest value relative to the squared direction norm */
inline double vtilde_min_ratio(std::uint64_t seed, int directions)
{
    Rng rng(seed);
    double worst = infinity;
    for (int t = 0; t < directions; ++t) {
        const ProblemSpec p = fixtures::mixed_problem(seed + static_cast<std::uint64_t>(t % 20), t % 2 == 0);
        const StepSizes st = make_stepsizes(*p.M, p.beta());
        const auto& dl = p.M->duplicated_layout();
        const BlockVector dx(p.primal_layout(), rng.normal_vector(p.primal_layout()->size()));
        const DuplicatedDual dy(BlockVector(dl, rng.normal_vector(dl->size())));
        const double v = V_tilde_duplicated(*p.M, st.tau, st.sigma, p.beta(), dx, dy);
        worst = std::min(worst, v / (dx.squared_norm() + dy.values().squared_norm()));
    }
    return worst;
}

} // namespace checks
