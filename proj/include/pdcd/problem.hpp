#pragma once
#include <pdcd/block_spaces.hpp>
#include <pdcd/linalg.hpp>
#include <pdcd/prox.hpp>
#include <pdcd/smooth.hpp>
#include <memory>
#include <optional>
#include <string>

namespace pdcd {

/* data kept alongside a dual SVM instance, needed to recover primal variables */
struct SvmData
{
    SparseMatrix A; // features x samples
    Vector labels;  // +-1
    Vector C;       // per-sample box bounds
    double lambda = 1.0;
};

/*
 * min_x f(x) + g(x) + h(Mx)
 */
struct ProblemSpec
{
    SmoothPtr f;
    ProxPtr g;
    ProxPtr h;
    std::shared_ptr<const BlockLinearOperator> M;
    std::string description;
    std::optional<SvmData> svm;

    const LayoutPtr& primal_layout() const { return M->primal_layout(); }
    const LayoutPtr& dual_layout() const { return M->dual_layout(); }
    Index n() const { return M->n_primal_blocks(); }
    Index p() const { return M->n_dual_blocks(); }
    bool g_separable() const { return g->separable(); }
    const WeightVector& beta() const { return f->beta(); }

    void validate() const
    {
        detail::require(f && g && h && M, "ProblemSpec: f, g, h and M must all be set");
        detail::require_shape(same_layout(f->layout(), M->primal_layout()),
            "ProblemSpec: f and M disagree on the primal block structure");
        detail::require(n() >= 1, "ProblemSpec: at least one primal block is required");
    }

    /* f(x) + g(x) + h(Mx), possibly +infinity */
    double objective(const BlockVector& x) const
    {
        const double gv = g->value(x);
        if (!std::isfinite(gv)) return infinity;
        const double hv = h->is_zero() ? 0.0 : h->value(M->apply(x));
        if (!std::isfinite(hv)) return infinity;
        return f->value(x) + gv + hv;
    }
};

inline ProblemSpec make_problem(SmoothPtr f, ProxPtr g, ProxPtr h, BlockLinearOperator M, std::string description = {})
{
    ProblemSpec p{std::move(f), std::move(g), std::move(h),
        std::make_shared<const BlockLinearOperator>(std::move(M)), std::move(description), std::nullopt};
    p.validate();
    return p;
}

} // namespace pdcd
