#pragma once
#include <pdcd/diagnostics.hpp>
#include <chrono>
#include <cstdint>
#include <optional>

namespace pdcd {

struct Reference
{
    BlockVector x;
    std::optional<BlockVector> y;
};

struct SolverConfig
{
    StepSizes steps;
    std::uint64_t max_iterations = 1000;
    /* 0 means one epoch */
    std::uint64_t checkpoint_every = 0;
    std::uint64_t seed = 0;
    double stop_tolerance = 0.0;
    Variant variant = Variant::cd_primal_dual;
    /* recompute w, z and the gradient cache every this many iterations (0 disables) */
    std::uint64_t resync_every = 10000;
    std::optional<BlockVector> x0;
    std::optional<DuplicatedDual> y0;
    std::optional<Reference> reference;
    bool record_wall_time = false;
    /* record the SVM duality gap at checkpoints when the problem carries SVM data */
    bool record_duality_gap = true;
};

enum class RunStatus
{
    converged,
    max_iterations,
    diverged,
};

inline std::string_view to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iterations: return "max_iterations";
    case RunStatus::diverged: return "diverged";
    }
    return "?";
}

struct RunResult
{
    BlockVector x;
    DuplicatedDual y;
    BlockVector z;
    Trace trace;
    RunStatus status = RunStatus::max_iterations;
    std::uint64_t iterations = 0;
};

/* iterations per epoch: n for coordinate variants, 1 for the full iteration */
inline std::uint64_t epoch_length(const ProblemSpec& problem, Variant v)
{
    return is_randomized(v) ? static_cast<std::uint64_t>(problem.n()) : 1;
}

inline bool all_finite(const SolverState& s)
{
    return s.x.data().allFinite() && s.y.values().data().allFinite() && s.z.data().allFinite();
}

namespace detail {

inline Checkpoint make_checkpoint(const ProblemSpec& problem, const SolverConfig& cfg, const SolverState& s,
    std::uint64_t epoch_len, std::optional<double> wall)
{
    Checkpoint c;
    c.iteration = s.k;
    c.epoch = s.k / epoch_len;
    c.wall_time = wall;
    c.objective = problem.objective(s.x);
    c.residual = saddle_residual(problem, s.x, s.z);
    if (problem.svm && cfg.record_duality_gap) c.duality_gap = svm_duality_gap(problem, s.x);
    if (cfg.reference) {
        const Reference& r = *cfg.reference;
        c.distance_to_reference = (s.x.data() - r.x.data()).norm();
        if (r.y) {
            c.lyapunov = S_bregman(*problem.f, s.x, r.x)
                + V_lyapunov(*problem.M, cfg.steps.tau, cfg.steps.sigma, s.x, s.z, r.x, *r.y);
        }
    }
    return c;
}

} // namespace detail

/*
 * Iterates until max_iterations or until the saddle residual at a checkpoint
 * is <= stop_tolerance. Deterministic for a given (problem, config). A
 * non-finite iterate ends the run with status diverged and the state of the
 * last finite checkpoint.
 */
inline RunResult run(const ProblemSpec& problem, const SolverConfig& cfg)
{
    detail::require(cfg.max_iterations >= 1, "run: max_iterations must be >= 1");
    detail::require(cfg.stop_tolerance >= 0.0, "run: stop_tolerance must be >= 0");

    CoordinateEngine engine(problem, cfg.steps, cfg.variant);
    SolverState s = make_state(problem, cfg.seed, cfg.x0, cfg.y0);
    const std::uint64_t epoch_len = epoch_length(problem, cfg.variant);
    const std::uint64_t every = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : epoch_len;

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto wall = [&]() -> std::optional<double> {
        if (!cfg.record_wall_time) return std::nullopt;
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    RunResult out;
    SolverState last_good = s;
    auto finish = [&](const SolverState& st, RunStatus status) {
        out.x = st.x;
        out.y = st.y;
        out.z = st.z;
        out.status = status;
        out.iterations = st.k;
        return out;
    };

    while (s.k < cfg.max_iterations) {
        engine.step(s);
        if (cfg.resync_every > 0 && s.k % cfg.resync_every == 0) resync(s, problem);
        if (s.k % every == 0 || s.k == cfg.max_iterations) {
            if (!all_finite(s)) return finish(last_good, RunStatus::diverged);
            const Checkpoint c = detail::make_checkpoint(problem, cfg, s, epoch_len, wall());
            if (!std::isfinite(c.residual)) return finish(last_good, RunStatus::diverged);
            out.trace.add(c);
            last_good = s;
            if (c.residual <= cfg.stop_tolerance) return finish(s, RunStatus::converged);
        }
    }
    return finish(s, RunStatus::max_iterations);
}

} // namespace pdcd
