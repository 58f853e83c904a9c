#pragma once
#include <pdcd/problem.hpp>
#include <pdcd/rng.hpp>
#include <pdcd/stepsize.hpp>
#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pdcd {

enum class Variant
{
    cd_primal_dual,      // coordinate primal-dual with duplicated duals (general m_j)
    cd_pd_mj1,           // coordinate primal-dual, single dual copy (all m_j = 1)
    cd_forward_backward, // coordinate proximal gradient (h = 0)
    full_vu_condat,      // deterministic full primal-dual iteration
    unrolled_oracle,     // explicit duplicated-space iteration, no w/z bookkeeping
};

inline std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::cd_primal_dual: return "cd_primal_dual";
    case Variant::cd_pd_mj1: return "cd_pd_mj1";
    case Variant::cd_forward_backward: return "cd_forward_backward";
    case Variant::full_vu_condat: return "full_vu_condat";
    case Variant::unrolled_oracle: return "unrolled_oracle";
    }
    return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s)
{
    for (auto v : {Variant::cd_primal_dual, Variant::cd_pd_mj1, Variant::cd_forward_backward, Variant::full_vu_condat,
             Variant::unrolled_oracle}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

inline bool is_randomized(Variant v) { return v != Variant::full_vu_condat; }

/*
 * Iterate bundle. For the coordinate variants y holds one dual copy per
 * operator entry, w = K* y and z = S y. The full iteration keeps its dual
 * iterate in z and mirrors it into y (all copies equal) and w = M* z.
 * f_cache is the smooth function's auxiliary state at x.
 */
struct SolverState
{
    BlockVector x;
    DuplicatedDual y;
    BlockVector w;
    BlockVector z;
    std::uint64_t k = 0;
    Rng rng;
    Vector f_cache;
};

/* recompute w, z and the gradient cache from x and y */
inline void resync(SolverState& s, const ProblemSpec& problem)
{
    s.w = K_adjoint(*problem.M, s.y);
    s.z = dual_reduce_S(*problem.M, s.y);
    problem.f->init_cache(s.x, s.f_cache);
}

inline SolverState make_state(const ProblemSpec& problem, std::uint64_t seed,
    const std::optional<BlockVector>& x0 = std::nullopt, const std::optional<DuplicatedDual>& y0 = std::nullopt)
{
    SolverState s;
    s.x = x0 ? *x0 : BlockVector(problem.primal_layout());
    detail::require_shape(same_layout(s.x.layout(), problem.primal_layout()), "make_state: x0 has the wrong layout");
    s.y = y0 ? *y0 : DuplicatedDual(*problem.M);
    require_pattern(*problem.M, s.y);
    s.rng = Rng(seed);
    resync(s, problem);
    return s;
}

struct PrimalDual
{
    BlockVector x;
    BlockVector y;
};

/*
 * One full primal-dual step T(x, y) = (xbar, ybar):
 *   ybar = prox_{sigma,h*}(y + D(sigma) M x)
 *   xbar = prox_{tau,g}(x - D(tau)(grad f(x) + M*(2 ybar - y)))
 */
inline PrimalDual primal_dual_map(const ProblemSpec& problem, const StepSizes& steps, const BlockVector& x,
    const BlockVector& y)
{
    const auto& M = *problem.M;
    BlockVector u = M.apply(x);
    for (Index j = 0; j < u.n_blocks(); ++j) u.block(j) = y.block(j) + steps.sigma[j] * u.block(j);
    BlockVector ybar = conjugate_prox(*problem.h, steps.sigma, u);

    BlockVector v(y.layout(), 2.0 * ybar.data() - y.data());
    BlockVector xin = M.adjoint_apply(v);
    xin.data() += problem.f->gradient(x).data();
    for (Index i = 0; i < xin.n_blocks(); ++i) xin.block(i) = x.block(i) - steps.tau[i] * xin.block(i);
    return {problem.g->prox(steps.tau, xin), std::move(ybar)};
}

namespace detail {

/* per-coordinate index lists, or a flag meaning "every index" */
class SupportTable
{
public:
    void set_all(Index count)
    {
        all_ = true;
        begin_.clear();
        idx_.resize(count);
        for (Index k = 0; k < count; ++k) idx_[k] = k;
    }

    void push(const std::vector<Index>& list)
    {
        if (begin_.empty()) begin_.push_back(0);
        idx_.insert(idx_.end(), list.begin(), list.end());
        begin_.push_back(static_cast<Index>(idx_.size()));
    }

    bool all() const { return all_; }

    std::span<const Index> get(Index i) const
    {
        if (all_) return idx_;
        return {idx_.data() + begin_[i], static_cast<std::size_t>(begin_[i + 1] - begin_[i])};
    }

private:
    bool all_ = false;
    std::vector<Index> begin_;
    std::vector<Index> idx_;
};

} // namespace detail

/*
 * Runs single iterations of one variant on a fixed problem and step sizes,
 * reusing scratch space between calls. For the randomized variants step()
 * draws the coordinate uniformly from the state's generator; step_at()
 * performs the update for a given coordinate, which is what conditional
 * expectations are enumerated with.
 *
 * Only the coordinates a single update needs are evaluated: the primal
 * blocks P read by block i of prox_{tau,g}, the dual rows Q coupled to P,
 * and the dual blocks R read by prox_{sigma,h*} on Q.
 */
class CoordinateEngine
{
public:
    CoordinateEngine(ProblemSpec problem, StepSizes steps, Variant variant)
        : problem_(std::move(problem)), steps_(std::move(steps)), variant_(variant),
          conj_(problem_.h, steps_.sigma, problem_.dual_layout()), dual_in_(problem_.dual_layout()),
          ybar_(problem_.dual_layout()), xin_(problem_.primal_layout()), xbar_(problem_.primal_layout())
    {
        problem_.validate();
        const auto& M = *problem_.M;
        detail::require_shape(steps_.tau.size() == M.n_primal_blocks(), "steps: tau needs one entry per primal block");
        detail::require_shape(steps_.sigma.size() == M.n_dual_blocks(), "steps: sigma needs one entry per dual block");
        steps_.tau.require_positive("tau");
        steps_.sigma.require_positive("sigma");
        if (variant_ == Variant::cd_pd_mj1) {
            detail::require(M.all_multiplicities_one(), "cd_pd_mj1 requires every m_j = 1");
        }
        if (variant_ == Variant::cd_forward_backward) {
            detail::require(problem_.h->is_zero(), "cd_forward_backward requires h = 0");
        }
        m_ = M.multiplicities();
        Index maxdim = 0;
        for (Index i = 0; i < M.n_primal_blocks(); ++i) maxdim = std::max(maxdim, M.primal_layout()->dim(i));
        grad_.resize(maxdim);
        build_supports();
    }

    const ProblemSpec& problem() const { return problem_; }
    const StepSizes& steps() const { return steps_; }
    Variant variant() const { return variant_; }

    /* one iteration; returns the updated coordinate, or -1 for the full iteration */
    Index step(SolverState& s)
    {
        if (variant_ == Variant::full_vu_condat) {
            step_full(s);
            return -1;
        }
        const Index i = s.rng.uniform_index(problem_.n());
        step_at(s, i);
        return i;
    }

    void step_at(SolverState& s, Index i)
    {
        switch (variant_) {
        case Variant::cd_primal_dual: step_primal_dual(s, i); break;
        case Variant::cd_pd_mj1: step_mj1(s, i); break;
        case Variant::cd_forward_backward: step_forward_backward(s, i); break;
        case Variant::unrolled_oracle: step_unrolled(s, i); break;
        case Variant::full_vu_condat: step_full(s); break;
        }
    }

private:
    void build_supports()
    {
        const auto& M = *problem_.M;
        const auto& playout = *problem_.primal_layout();
        const Index n = M.n_primal_blocks();
        const Index p = M.n_dual_blocks();
        std::vector<Index> list, rows, dep;

        for (Index i = 0; i < n && !primal_support_.all(); ++i) {
            problem_.g->dependency(playout, i, list);
            if (static_cast<Index>(list.size()) == n && n > 1) primal_support_.set_all(n);
            else primal_support_.push(list);
        }
        for (Index i = 0; i < n && !dual_support_.all(); ++i) {
            rows.clear();
            for (Index l : primal_support_.get(i)) {
                for (Index e : M.col_entries(l)) rows.push_back(M.entry(e).row);
            }
            std::sort(rows.begin(), rows.end());
            rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
            dual_needed_.push(rows);
            conj_.support(rows, dep);
            if (p > 0 && static_cast<Index>(dep.size()) == p && n > 1) dual_support_.set_all(p);
            else dual_support_.push(dep);
        }
        if (dual_support_.all()) {
            // rebuild the needed-rows table that was cut short
            dual_needed_ = detail::SupportTable();
            for (Index i = 0; i < n; ++i) {
                rows.clear();
                for (Index l : primal_support_.get(i)) {
                    for (Index e : M.col_entries(l)) rows.push_back(M.entry(e).row);
                }
                std::sort(rows.begin(), rows.end());
                rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
                dual_needed_.push(rows);
            }
        }
    }

    std::span<const Index> single(Index i)
    {
        single_[0] = i;
        return {single_.data(), 1};
    }

    /* ybar on Q from dual input (dual_base + D(sigma) M x) on R */
    void dual_candidates(const SolverState& s, const BlockVector& dual_base, Index i)
    {
        const auto& M = *problem_.M;
        const auto R = dual_support_.get(i);
        for (Index j : R) {
            auto dj = dual_in_.block(j);
            M.apply_row(j, s.x, dj);
            dj = dual_base.block(j) + steps_.sigma[j] * dj;
        }
        conj_.eval_blocks(dual_in_, dual_needed_.get(i), R, ybar_);
    }

    void step_primal_dual(SolverState& s, Index i)
    {
        const auto& M = *problem_.M;
        const auto& f = *problem_.f;
        dual_candidates(s, s.z, i);

        for (Index l : primal_support_.get(i)) {
            auto g = grad_.head(M.primal_layout()->dim(l));
            f.partial_gradient_cached(s.x, s.f_cache, l, g);
            for (Index e : M.col_entries(l)) {
                g.noalias() += 2.0 * (M.entry(e).block.transpose() * ybar_.block(M.entry(e).row));
            }
            xin_.block(l) = s.x.block(l) - steps_.tau[l] * (g - s.w.block(l));
        }
        problem_.g->prox_blocks(steps_.tau, xin_, single(i), xbar_);

        commit_primal(s, i);
        for (Index e : M.col_entries(i)) {
            const auto& en = M.entry(e);
            const Index j = en.row;
            delta_ = ybar_.block(j) - s.y.copy(e);
            s.y.copy(e) = ybar_.block(j);
            s.w.block(i).noalias() += en.block.transpose() * delta_;
            s.z.block(j) += delta_ / m_[j];
        }
        ++s.k;
    }

    void step_mj1(SolverState& s, Index i)
    {
        const auto& M = *problem_.M;
        const auto& f = *problem_.f;
        // with m_j = 1 the copy of row j is entry j
        const BlockVector& y = s.y.values();
        dual_candidates(s, y, i);

        for (Index l : primal_support_.get(i)) {
            auto g = grad_.head(M.primal_layout()->dim(l));
            f.partial_gradient_cached(s.x, s.f_cache, l, g);
            for (Index e : M.col_entries(l)) {
                const Index j = M.entry(e).row;
                g.noalias() += M.entry(e).block.transpose() * (2.0 * ybar_.block(j) - y.block(j));
            }
            xin_.block(l) = s.x.block(l) - steps_.tau[l] * g;
        }
        problem_.g->prox_blocks(steps_.tau, xin_, single(i), xbar_);

        commit_primal(s, i);
        auto wi = s.w.block(i);
        wi.setZero();
        for (Index e : M.col_entries(i)) {
            const Index j = M.entry(e).row;
            s.y.copy(e) = ybar_.block(j);
            s.z.block(j) = ybar_.block(j);
            wi.noalias() += M.entry(e).block.transpose() * ybar_.block(j);
        }
        ++s.k;
    }

    void step_forward_backward(SolverState& s, Index i)
    {
        const auto& f = *problem_.f;
        const auto& layout = *problem_.primal_layout();
        for (Index l : primal_support_.get(i)) {
            auto g = grad_.head(layout.dim(l));
            f.partial_gradient_cached(s.x, s.f_cache, l, g);
            xin_.block(l) = s.x.block(l) - steps_.tau[l] * g;
        }
        problem_.g->prox_blocks(steps_.tau, xin_, single(i), xbar_);
        commit_primal(s, i);
        ++s.k;
    }

    /*
     * Iteration on the duplicated space with explicit K, S and sigma~ = m sigma:
     *   ybar = prox_{sigma~, hbar*}(y + D(sigma~) K x) = 1 (x) prox_{sigma,h*}(S(...)),
     *   xbar = prox_{tau,g}(x - D(tau)(grad f(x) + K*(2 ybar - y))).
     * Everything is recomputed from scratch; w and z are rebuilt exactly.
     */
    void step_unrolled(SolverState& s, Index i)
    {
        const auto& M = *problem_.M;
        DuplicatedDual u = K_apply(M, s.x);
        for (Index e = 0; e < M.n_entries(); ++e) {
            const Index j = M.entry(e).row;
            u.copy(e) = s.y.copy(e) + (m_[j] * steps_.sigma[j]) * u.copy(e);
        }
        const BlockVector q = conjugate_prox(*problem_.h, steps_.sigma, dual_reduce_S(M, u));
        const DuplicatedDual ybar = dual_expand(M, q);

        DuplicatedDual v(M);
        v.values().data() = 2.0 * ybar.values().data() - s.y.values().data();
        BlockVector xin = K_adjoint(M, v);
        xin.data() += problem_.f->gradient(s.x).data();
        for (Index l = 0; l < xin.n_blocks(); ++l) xin.block(l) = s.x.block(l) - steps_.tau[l] * xin.block(l);
        const BlockVector xbar = problem_.g->prox(steps_.tau, xin);

        s.x.block(i) = xbar.block(i);
        for (Index e : M.col_entries(i)) s.y.copy(e) = ybar.copy(e);
        s.w = K_adjoint(M, s.y);
        s.z = dual_reduce_S(M, s.y);
        problem_.f->init_cache(s.x, s.f_cache);
        ++s.k;
    }

    void step_full(SolverState& s)
    {
        PrimalDual t = primal_dual_map(problem_, steps_, s.x, s.z);
        s.x = std::move(t.x);
        s.z = std::move(t.y);
        s.y = dual_expand(*problem_.M, s.z);
        s.w = problem_.M->adjoint_apply(s.z);
        problem_.f->init_cache(s.x, s.f_cache);
        ++s.k;
    }

    void commit_primal(SolverState& s, Index i)
    {
        delta_ = xbar_.block(i) - s.x.block(i);
        s.x.block(i) = xbar_.block(i);
        problem_.f->update_cache(s.f_cache, i, delta_);
    }

    ProblemSpec problem_;
    StepSizes steps_;
    Variant variant_;
    WeightVector m_;
    ConjugateProx conj_;
    detail::SupportTable primal_support_, dual_needed_, dual_support_;
    BlockVector dual_in_, ybar_, xin_, xbar_;
    Vector grad_, delta_;
    std::array<Index, 1> single_{};
};

/* single-iteration conveniences; each builds a fresh engine */
inline Index iterate(SolverState& s, const ProblemSpec& problem, const StepSizes& steps, Variant variant)
{
    CoordinateEngine engine(problem, steps, variant);
    return engine.step(s);
}

inline Index iterate_cd_primal_dual(SolverState& s, const ProblemSpec& problem, const StepSizes& steps)
{
    return iterate(s, problem, steps, Variant::cd_primal_dual);
}

inline Index iterate_cd_pd_mj1(SolverState& s, const ProblemSpec& problem, const StepSizes& steps)
{
    return iterate(s, problem, steps, Variant::cd_pd_mj1);
}

inline Index iterate_cd_forward_backward(SolverState& s, const ProblemSpec& problem, const StepSizes& steps)
{
    return iterate(s, problem, steps, Variant::cd_forward_backward);
}

inline Index iterate_unrolled_oracle(SolverState& s, const ProblemSpec& problem, const StepSizes& steps)
{
    return iterate(s, problem, steps, Variant::unrolled_oracle);
}

inline void iterate_full_vu_condat(SolverState& s, const ProblemSpec& problem, const StepSizes& steps)
{
    iterate(s, problem, steps, Variant::full_vu_condat);
}

/*
 * Default steps for a variant: coordinate-wise beta for the randomized
 * variants, the global Lipschitz constant of grad f in every block for the
 * full iteration.
 */
inline StepSizes default_stepsizes(const ProblemSpec& problem, Variant variant, const StepSizeOptions& opts = {})
{
    if (variant == Variant::full_vu_condat) {
        const WeightVector L = WeightVector::constant(problem.n(), problem.f->global_lipschitz());
        return make_stepsizes(*problem.M, L, opts);
    }
    return make_stepsizes(*problem.M, problem.f->beta(), opts);
}

} // namespace pdcd
