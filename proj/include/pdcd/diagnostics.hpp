#pragma once
#include <pdcd/solver.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace pdcd {

inline double primal_objective(const ProblemSpec& problem, const BlockVector& x) { return problem.objective(x); }

/* L(x, y) = f(x) + g(x) + <y, Mx> - h*(y) */
inline double lagrangian(const ProblemSpec& problem, const BlockVector& x, const BlockVector& y)
{
    const auto hc = problem.h->conjugate_value(y);
    if (!hc) throw Error("lagrangian: no closed-form conjugate is available for h");
    const double gv = problem.g->value(x);
    if (!std::isfinite(gv)) return infinity;
    if (!std::isfinite(*hc)) return -infinity;
    return problem.f->value(x) + gv + y.dot(problem.M->apply(x)) - *hc;
}

/* 1/2 ||dx||^2_a + <dy, M dx> + 1/2 ||dy||^2_{sigma^-1}, with a = tau^-1 - shift */
namespace detail {
inline double lyapunov_form(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const Vector* shift, const BlockVector& dx, const BlockVector& dy)
{
    require_shape(tau.size() == dx.n_blocks() && sigma.size() == dy.n_blocks(), "Lyapunov: weight count mismatch");
    double sx = 0.0;
    for (Index i = 0; i < dx.n_blocks(); ++i) {
        const double a = 1.0 / tau[i] - (shift ? (*shift)[i] : 0.0);
        require(a > 0.0, "Lyapunov: tau^-1 - beta must be positive");
        sx += a * dx.block(i).squaredNorm();
    }
    double sy = 0.0;
    for (Index j = 0; j < dy.n_blocks(); ++j) sy += dy.block(j).squaredNorm() / sigma[j];
    return 0.5 * sx + dy.dot(M.apply(dx)) + 0.5 * sy;
}

inline BlockVector diff(const BlockVector& a, const BlockVector& b)
{
    require_shape(a.size() == b.size(), "difference of vectors of different sizes");
    return BlockVector(a.layout(), a.data() - b.data());
}
} // namespace detail

/* V(dx, dy) = 1/2 ||dx||^2_{tau^-1} + <dy, M dx> + 1/2 ||dy||^2_{sigma^-1} */
inline double V_lyapunov(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const BlockVector& dx, const BlockVector& dy)
{
    return detail::lyapunov_form(M, tau, sigma, nullptr, dx, dy);
}

/* V(z, zeta) for z = (x, y), zeta = (xi, eta) */
inline double V_lyapunov(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const BlockVector& x, const BlockVector& y, const BlockVector& xi, const BlockVector& eta)
{
    return V_lyapunov(M, tau, sigma, detail::diff(x, xi), detail::diff(y, eta));
}

/* Vt(dx, dy) = 1/2 ||dx||^2_{tau^-1 - beta} + <dy, M dx> + 1/2 ||dy||^2_{sigma^-1} */
inline double V_tilde(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const WeightVector& beta, const BlockVector& dx, const BlockVector& dy)
{
    return detail::lyapunov_form(M, tau, sigma, &beta.values(), dx, dy);
}

inline double V_tilde(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const WeightVector& beta, const BlockVector& x, const BlockVector& y, const BlockVector& xi, const BlockVector& eta)
{
    return V_tilde(M, tau, sigma, beta, detail::diff(x, xi), detail::diff(y, eta));
}

/*
 * Vt on the duplicated space: operator K, dual weights m_j sigma_j on every
 * copy of row j.
 */
inline double V_tilde_duplicated(const BlockLinearOperator& M, const WeightVector& tau, const WeightVector& sigma,
    const WeightVector& beta, const BlockVector& dx, const DuplicatedDual& dy)
{
    const Duplication d = build_duplication(M);
    Vector st(M.n_entries());
    for (Index e = 0; e < M.n_entries(); ++e) {
        const Index j = M.entry(e).row;
        st[e] = d.m[j] * sigma[j];
    }
    return V_tilde(d.K, tau, WeightVector(std::move(st)), beta, dx, dy.values());
}

/* f(x) - f(x*) - <grad f(x*), x - x*> */
inline double S_bregman(const SmoothFunction& f, const BlockVector& x, const BlockVector& xstar)
{
    return f.value(x) - f.value(xstar) - f.gradient(xstar).dot(detail::diff(x, xstar));
}

/*
 * ||x - prox_{tau,g}(x - D(tau)(grad f(x) + M* y))|| + ||y - prox_{sigma,h*}(y + D(sigma) M x)||,
 * zero exactly on the saddle set. Unit weights unless steps are given.
 */
inline double saddle_residual(const ProblemSpec& problem, const BlockVector& x, const BlockVector& y,
    const std::optional<StepSizes>& steps = std::nullopt)
{
    const auto& M = *problem.M;
    const WeightVector tau = steps ? steps->tau : WeightVector::constant(problem.n(), 1.0);
    const WeightVector sigma = steps ? steps->sigma : WeightVector::constant(problem.p(), 1.0);

    BlockVector u = M.adjoint_apply(y);
    u.data() += problem.f->gradient(x).data();
    for (Index i = 0; i < u.n_blocks(); ++i) u.block(i) = x.block(i) - tau[i] * u.block(i);
    const double rx = (x.data() - problem.g->prox(tau, u).data()).norm();

    if (problem.p() == 0) return rx;
    BlockVector v = M.apply(x);
    for (Index j = 0; j < v.n_blocks(); ++j) v.block(j) = y.block(j) + sigma[j] * v.block(j);
    const double ry = (y.data() - conjugate_prox(*problem.h, sigma, v).data()).norm();
    return rx + ry;
}

// -----------------------------------------------------------------------
// SVM duality gap
// -----------------------------------------------------------------------

/*
 * Euclidean projection onto {0 <= x <= C, <b, x> = 0}, b in {-1,+1}^n:
 * x(theta) = clamp(v - theta b, 0, C) with <b, x(theta)> = 0. The root of
 * this nonincreasing piecewise-linear function is bracketed by bisection and
 * then solved exactly on the free set.
 */
inline Vector project_svm_feasible(const Vector& v, const Vector& b, const Vector& C)
{
    const Index n = v.size();
    auto point = [&](double theta) {
        Vector p(n);
        for (Index i = 0; i < n; ++i) p[i] = std::clamp(v[i] - theta * b[i], 0.0, C[i]);
        return p;
    };
    auto phi = [&](double theta) { return b.dot(point(theta)); };

    double span = 1.0;
    for (Index i = 0; i < n; ++i) span = std::max(span, std::abs(v[i]) + C[i]);
    double lo = -span, hi = span; // phi(lo) >= 0 >= phi(hi)
    for (int it = 0; it < 200 && hi - lo > 1e-15 * span; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = phi(mid);
        if (f == 0.0) {
            lo = hi = mid;
            break;
        }
        (f > 0.0 ? lo : hi) = mid;
    }
    double theta = 0.5 * (lo + hi);

    // exact solve with the active set at theta fixed
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double t = v[i] - theta * b[i];
        if (t > 0.0 && t < C[i]) {
            num += b[i] * v[i];
            den += b[i] * b[i];
        } else {
            num += b[i] * std::clamp(t, 0.0, C[i]);
        }
    }
    if (den > 0.0) {
        const double exact = num / den;
        Vector p = point(exact);
        if (std::abs(b.dot(p)) <= std::abs(phi(theta))) theta = exact;
    }
    return point(theta);
}

/* argmin_{w0} sum_i C_i max(0, 1 - b_i (s_i + w0)) by a sweep over the breakpoints */
inline double svm_optimal_intercept(const Vector& s, const Vector& b, const Vector& C)
{
    const Index n = s.size();
    std::vector<std::pair<double, Index>> bp(n);
    double slope = 0.0; // right derivative at -infinity
    for (Index i = 0; i < n; ++i) {
        bp[i] = {b[i] - s[i], i};
        if (b[i] > 0) slope -= C[i];
    }
    std::sort(bp.begin(), bp.end());
    for (const auto& [t, i] : bp) {
        slope += C[i]; // positive terms stop decreasing, negative terms start increasing
        if (slope >= 0.0) return t;
    }
    return n > 0 ? bp.back().first : 0.0;
}

struct SvmGap
{
    double gap;
    double primal;
    double dual;
    Vector w;
    double w0;
    Vector x_feasible;
};

/*
 * Primal  P(w, w0) = sum_i C_i max(0, 1 - b_i (a_i^T w + w0)) + lambda/2 ||w||^2
 * Dual    D(x)     = -1/(2 lambda) ||A D(b) x||^2 + e^T x    on the feasible set.
 * x is projected onto the feasible set, w = A D(b) x / lambda, and w0
 * minimizes P(w, .) exactly.
 */
inline SvmGap svm_duality_gap_details(const ProblemSpec& problem, const BlockVector& x)
{
    if (!problem.svm) throw InvalidArgument("svm_duality_gap: not a dual SVM problem");
    const SvmData& d = *problem.svm;
    detail::require_shape(x.size() == d.labels.size(), "svm_duality_gap: x has the wrong length");

    SvmGap out;
    out.x_feasible = project_svm_feasible(x.data(), d.labels, d.C);
    const Vector bx = d.labels.cwiseProduct(out.x_feasible);
    out.w = (d.A * bx) / d.lambda;
    const Vector s = d.A.transpose() * out.w;
    out.w0 = svm_optimal_intercept(s, d.labels, d.C);

    double hinge = 0.0;
    for (Index i = 0; i < s.size(); ++i) hinge += d.C[i] * std::max(0.0, 1.0 - d.labels[i] * (s[i] + out.w0));
    const double wn = out.w.squaredNorm();
    out.primal = hinge + 0.5 * d.lambda * wn;
    out.dual = -0.5 * d.lambda * wn + out.x_feasible.sum();
    out.gap = out.primal - out.dual;
    return out;
}

inline double svm_duality_gap(const ProblemSpec& problem, const BlockVector& x)
{
    return svm_duality_gap_details(problem, x).gap;
}

// -----------------------------------------------------------------------
// Conditional expectations and Lyapunov checks
// -----------------------------------------------------------------------

struct EnumerationOptions
{
    Index max_blocks = 64;
};

/*
 * E_k[q(state_{k+1})] for a randomized variant, computed exactly by running
 * the update for every coordinate from a copy of the state.
 */
template <class Quantity>
auto enumerate_conditional_expectation(CoordinateEngine& engine, const SolverState& state, Quantity&& q,
    const EnumerationOptions& opts = {})
{
    const Index n = engine.problem().n();
    detail::require(n <= opts.max_blocks, "enumerate_conditional_expectation: too many blocks to enumerate");
    detail::require(is_randomized(engine.variant()), "enumerate_conditional_expectation: variant is deterministic");
    using R = std::decay_t<decltype(q(state))>;
    std::optional<R> acc;
    for (Index i = 0; i < n; ++i) {
        SolverState next = state;
        engine.step_at(next, i);
        R v = q(next);
        if (acc) *acc += v;
        else acc.emplace(std::move(v));
    }
    R out = std::move(*acc);
    out /= static_cast<double>(n);
    return out;
}

/*
 * Slack of  <grad f(x*) - grad f(x), x* - xbar> + V(zbar, z) <= V(z, z*) - V(zbar, z*)
 * with zbar = T(z); nonnegative up to rounding.
 */
inline double one_step_slack(const ProblemSpec& problem, const StepSizes& steps, const BlockVector& x,
    const BlockVector& y, const BlockVector& xs, const BlockVector& ys)
{
    const auto& M = *problem.M;
    const PrimalDual t = primal_dual_map(problem, steps, x, y);
    const BlockVector gdiff(x.layout(), problem.f->gradient(xs).data() - problem.f->gradient(x).data());
    const double lhs = gdiff.dot(detail::diff(xs, t.x)) + V_lyapunov(M, steps.tau, steps.sigma, t.x, t.y, x, y);
    const double rhs = V_lyapunov(M, steps.tau, steps.sigma, x, y, xs, ys)
        - V_lyapunov(M, steps.tau, steps.sigma, t.x, t.y, xs, ys);
    return rhs - lhs;
}

/*
 * Slack of the one-step contraction for the single-copy iteration (all m_j = 1):
 *   E_k[S_{k+1} + V(z_{k+1}, z*)] <= (1 - 1/n) S_k + V(z_k, z*) - (1/n) Vt(zbar_{k+1}, z_k).
 */
inline double contraction_slack(CoordinateEngine& engine, const SolverState& s, const BlockVector& xs,
    const BlockVector& ys)
{
    const ProblemSpec& problem = engine.problem();
    const StepSizes& steps = engine.steps();
    const auto& M = *problem.M;
    const auto& f = *problem.f;
    const double n = static_cast<double>(problem.n());

    const double lhs = enumerate_conditional_expectation(engine, s, [&](const SolverState& nx) {
        return S_bregman(f, nx.x, xs) + V_lyapunov(M, steps.tau, steps.sigma, nx.x, nx.z, xs, ys);
    });
    const PrimalDual t = primal_dual_map(problem, steps, s.x, s.z);
    const double rhs = (1.0 - 1.0 / n) * S_bregman(f, s.x, xs) + V_lyapunov(M, steps.tau, steps.sigma, s.x, s.z, xs, ys)
        - V_tilde(M, steps.tau, steps.sigma, f.beta(), t.x, t.y, s.x, s.z) / n;
    return rhs - lhs;
}

// -----------------------------------------------------------------------
// Trace
// -----------------------------------------------------------------------

struct Checkpoint
{
    std::uint64_t iteration = 0;
    std::uint64_t epoch = 0;
    std::optional<double> wall_time;
    double objective = 0.0;
    double residual = 0.0;
    std::optional<double> duality_gap;
    std::optional<double> distance_to_reference;
    std::optional<double> lyapunov;
};

class Trace
{
public:
    void add(Checkpoint c)
    {
        detail::require(records_.empty() || c.iteration > records_.back().iteration,
            "Trace: iteration numbers must be strictly increasing");
        records_.push_back(std::move(c));
    }

    const std::vector<Checkpoint>& checkpoints() const { return records_; }
    bool empty() const { return records_.empty(); }
    std::size_t size() const { return records_.size(); }
    const Checkpoint& back() const { return records_.back(); }

private:
    std::vector<Checkpoint> records_;
};

} // namespace pdcd
