#pragma once
#include <pdcd/block_spaces.hpp>
#include <pdcd/linalg.hpp>
#include <algorithm>
#include <optional>
#include <vector>

namespace pdcd {

/*
 * Primal steps tau (one per primal block) and dual steps sigma (one per dual
 * block). Convergence of the coordinate primal-dual iteration requires
 *
 *   tau_i (beta_i + rho(sum_{j in J(i)} m_j sigma_j M_{j,i}^T M_{j,i})) < 1.
 */
struct StepSizes
{
    WeightVector tau;
    WeightVector sigma;
    double safety = 0.95;
};

/* rho(sum_{j in J(i)} m_j sigma_j M_{j,i}^T M_{j,i}) */
inline double coordinate_spectral_term(const BlockLinearOperator& M, const WeightVector& sigma, const WeightVector& m,
    Index i)
{
    detail::require_shape(sigma.size() == M.n_dual_blocks() && m.size() == M.n_dual_blocks(),
        "coordinate_spectral_term: sigma and m need one entry per dual block");
    const Index d = M.primal_layout()->dim(i);
    Matrix G = Matrix::Zero(d, d);
    for (Index e : M.col_entries(i)) {
        const auto& en = M.entry(e);
        G.noalias() += (m[en.row] * sigma[en.row]) * (en.block.transpose() * en.block);
    }
    return largest_eigenvalue_psd(G);
}

inline double coordinate_spectral_term(const BlockLinearOperator& M, const WeightVector& sigma, Index i)
{
    return coordinate_spectral_term(M, sigma, M.multiplicities(), i);
}

/* tau_i^max = 1 / (beta_i + rho_i); +infinity when the denominator vanishes */
inline Vector max_tau(const BlockLinearOperator& M, const WeightVector& sigma, const WeightVector& beta)
{
    detail::require_shape(beta.size() == M.n_primal_blocks(), "max_tau: beta needs one entry per primal block");
    sigma.require_positive("max_tau");
    const WeightVector m = M.multiplicities();
    Vector out(M.n_primal_blocks());
    for (Index i = 0; i < M.n_primal_blocks(); ++i) {
        const double denom = beta[i] + coordinate_spectral_term(M, sigma, m, i);
        out[i] = denom > 0.0 ? 1.0 / denom : infinity;
    }
    return out;
}

/*
 * sigma_j = mean_{i in I(j)} (beta_i + eps) / (m_j sum_{i in I(j)} ||M_{j,i}||_2^2),
 * eps = 1e-12. This puts m_j sigma_j ||M_{j,i}||^2 on the scale of beta_i, so
 * the coupling term in the tau bound is comparable to the smooth term.
 * Rows whose blocks are all zero get sigma_j = 1.
 */
inline WeightVector default_sigma(const BlockLinearOperator& M, const WeightVector& beta)
{
    constexpr double eps = 1e-12;
    detail::require_shape(beta.size() == M.n_primal_blocks(), "default_sigma: beta needs one entry per primal block");
    Vector sigma(M.n_dual_blocks());
    for (Index j = 0; j < M.n_dual_blocks(); ++j) {
        double bsum = 0.0, nsum = 0.0;
        for (Index e = M.row_begin(j); e < M.row_end(j); ++e) {
            const auto& en = M.entry(e);
            bsum += beta[en.col] + eps;
            nsum += largest_eigenvalue_psd(en.block.transpose() * en.block);
        }
        const double mj = static_cast<double>(M.multiplicity(j));
        sigma[j] = nsum > 0.0 ? (bsum / mj) / (mj * nsum) : 1.0;
    }
    return WeightVector(std::move(sigma));
}

struct StepSizeOptions
{
    std::optional<WeightVector> sigma;
    double safety = 0.95;
    /* permits safety == 1 (the boundary of the convergence condition) */
    bool experimental = false;
};

/*
 * tau_i = safety * tau_i^max. Unbounded tau_i^max (beta_i = 0 and no
 * coupling) is replaced by 1e6 times the median finite bound, or by 1 when
 * no bound is finite.
 */
inline StepSizes make_stepsizes(const BlockLinearOperator& M, const WeightVector& beta, const StepSizeOptions& opts = {})
{
    const double safety = opts.safety;
    detail::require(safety > 0.0, "make_stepsizes: safety must be positive");
    detail::require(safety < 1.0 || (safety == 1.0 && opts.experimental),
        "make_stepsizes: safety must be < 1 (safety = 1 requires the experimental flag)");
    WeightVector sigma = opts.sigma ? *opts.sigma : default_sigma(M, beta);
    detail::require_shape(sigma.size() == M.n_dual_blocks(), "make_stepsizes: sigma needs one entry per dual block");
    sigma.require_positive("make_stepsizes");

    Vector bound = max_tau(M, sigma, beta);
    std::vector<double> finite;
    for (Index i = 0; i < bound.size(); ++i) {
        if (std::isfinite(bound[i])) finite.push_back(bound[i]);
    }
    double cap = 1.0;
    if (!finite.empty()) {
        auto mid = finite.begin() + finite.size() / 2;
        std::nth_element(finite.begin(), mid, finite.end());
        cap = 1e6 * *mid;
    }
    for (Index i = 0; i < bound.size(); ++i) {
        if (!std::isfinite(bound[i])) bound[i] = cap;
    }
    return {WeightVector(safety * bound), std::move(sigma), safety};
}

inline StepSizes make_stepsizes(const BlockLinearOperator& M, const WeightVector& beta, double safety)
{
    StepSizeOptions opts;
    opts.safety = safety;
    return make_stepsizes(M, beta, opts);
}

/* tau_i (beta_i + rho_i) per primal block */
inline Vector step_ratios(const BlockLinearOperator& M, const WeightVector& beta, const StepSizes& steps)
{
    const WeightVector m = M.multiplicities();
    Vector r(M.n_primal_blocks());
    for (Index i = 0; i < M.n_primal_blocks(); ++i) {
        r[i] = steps.tau[i] * (beta[i] + coordinate_spectral_term(M, steps.sigma, m, i));
    }
    return r;
}

inline bool satisfies_step_condition(const BlockLinearOperator& M, const WeightVector& beta, const StepSizes& steps,
    double bound = 1.0)
{
    const Vector r = step_ratios(M, beta, steps);
    return r.size() == 0 || r.maxCoeff() < bound;
}

} // namespace pdcd
