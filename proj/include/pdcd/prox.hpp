#pragma once
#include <pdcd/block_spaces.hpp>
#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pdcd {

/*
 * Closed proper convex F with a computable proximity operator
 *
 *   prox_{gamma,F}(u) = argmin_w F(w) + 1/2 ||w - u||^2_{gamma^{-1}},
 *
 * gamma holding one positive weight per block of u's layout.
 *
 * prox_blocks() evaluates only the requested blocks of the prox and reads u
 * only on the blocks reported by dependency(). This is what makes a single
 * coordinate update cheap when F is separable or group-separable.
 */
class ProxFunction
{
public:
    virtual ~ProxFunction() = default;

    /* may return +infinity */
    virtual double value(const BlockVector& u) const = 0;

    /* F*(v) when a closed form is known */
    virtual std::optional<double> conjugate_value(const BlockVector& /*v*/) const { return std::nullopt; }

    /* block i of the prox depends on block i of the input only, for any layout */
    virtual bool separable() const = 0;

    virtual bool is_zero() const { return false; }

    /* blocks of the input that block i of the prox reads (always contains i) */
    virtual void dependency(const BlockLayout& layout, Index i, std::vector<Index>& out) const
    {
        out.clear();
        if (separable()) {
            out.push_back(i);
            return;
        }
        for (Index b = 0; b < layout.n_blocks(); ++b) out.push_back(b);
    }

    virtual void prox_blocks(const WeightVector& gamma, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const = 0;

    BlockVector prox(const WeightVector& gamma, const BlockVector& u) const
    {
        detail::require_shape(gamma.size() == u.n_blocks(), "prox: weight count does not match block count");
        gamma.require_positive("prox");
        BlockVector out(u.layout());
        std::vector<Index> all(u.n_blocks());
        for (Index b = 0; b < u.n_blocks(); ++b) all[b] = b;
        prox_blocks(gamma, u, all, out);
        return out;
    }
};

using ProxPtr = std::shared_ptr<const ProxFunction>;

// =======================================================================
// Instances
// =======================================================================

/* F = 0 */
class ZeroFunction : public ProxFunction
{
public:
    double value(const BlockVector&) const override { return 0.0; }

    std::optional<double> conjugate_value(const BlockVector& v) const override
    {
        return v.data().lpNorm<Eigen::Infinity>() == 0.0 ? 0.0 : infinity;
    }

    bool separable() const override { return true; }
    bool is_zero() const override { return true; }

    void prox_blocks(const WeightVector&, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const override
    {
        for (Index b : blocks) out.block(b) = u.block(b);
    }
};

/* F(u) = alpha ||u||_1, soft-thresholding at gamma_i alpha */
class L1Norm : public ProxFunction
{
public:
    explicit L1Norm(double alpha) : alpha_(alpha) { detail::require(alpha >= 0.0, "l1_norm: alpha must be >= 0"); }

    double alpha() const { return alpha_; }

    double value(const BlockVector& u) const override { return alpha_ * u.data().lpNorm<1>(); }

    std::optional<double> conjugate_value(const BlockVector& v) const override
    {
        const double vmax = v.size() ? v.data().lpNorm<Eigen::Infinity>() : 0.0;
        return vmax <= alpha_ * (1.0 + 1e-12) + 1e-300 ? 0.0 : infinity;
    }

    bool separable() const override { return true; }
    bool is_zero() const override { return alpha_ == 0.0; }

    void prox_blocks(const WeightVector& gamma, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const override
    {
        for (Index b : blocks) {
            const double t = gamma[b] * alpha_;
            auto ub = u.block(b);
            auto ob = out.block(b);
            for (Index k = 0; k < ub.size(); ++k) {
                const double a = std::abs(ub[k]) - t;
                ob[k] = a > 0.0 ? std::copysign(a, ub[k]) : 0.0;
            }
        }
    }

private:
    double alpha_;
};

/*
 * F(u) = alpha sum_g ||u_g||_2 over consecutive coordinate groups.
 *
 * With equal weights inside a group the prox is the closed-form block
 * shrinkage max(0, 1 - alpha gamma / ||u_g||) u_g, a group exactly at the
 * threshold mapping to 0. With unequal weights inside a group the shrinkage
 * factor is found by a monotone Newton solve on the group norm.
 */
class GroupL21Norm : public ProxFunction
{
public:
    GroupL21Norm(double alpha, std::vector<Index> group_dims) : alpha_(alpha), group_start_{0}
    {
        detail::require(alpha >= 0.0, "group_l21_norm: alpha must be >= 0");
        for (Index d : group_dims) {
            detail::require(d >= 1, "group_l21_norm: group dimensions must be >= 1");
            group_start_.push_back(group_start_.back() + d);
        }
    }

    double alpha() const { return alpha_; }
    Index n_groups() const { return static_cast<Index>(group_start_.size()) - 1; }
    Index total_dim() const { return group_start_.back(); }
    Index group_begin(Index g) const { return group_start_[g]; }
    Index group_end(Index g) const { return group_start_[g + 1]; }

    double value(const BlockVector& u) const override
    {
        check(u.size());
        double s = 0.0;
        for (Index g = 0; g < n_groups(); ++g) s += u.data().segment(group_begin(g), group_end(g) - group_begin(g)).norm();
        return alpha_ * s;
    }

    std::optional<double> conjugate_value(const BlockVector& v) const override
    {
        check(v.size());
        for (Index g = 0; g < n_groups(); ++g) {
            const double nrm = v.data().segment(group_begin(g), group_end(g) - group_begin(g)).norm();
            if (nrm > alpha_ * (1.0 + 1e-12) + 1e-300) return infinity;
        }
        return 0.0;
    }

    bool separable() const override { return false; }
    bool is_zero() const override { return alpha_ == 0.0; }

    void dependency(const BlockLayout& layout, Index i, std::vector<Index>& out) const override
    {
        check(layout.size());
        out.clear();
        const Index c0 = layout.offset(i);
        const Index c1 = c0 + layout.dim(i);
        const Index s = group_begin(group_of(c0));
        const Index e = group_end(group_of(c1 - 1));
        for (Index b = layout.block_of(s); b <= layout.block_of(e - 1); ++b) out.push_back(b);
    }

    void prox_blocks(const WeightVector& gamma, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const override
    {
        check(u.size());
        const auto& layout = *u.layout();
        Vector wg, ug, res;
        for (Index b : blocks) {
            const Index c0 = layout.offset(b);
            const Index c1 = c0 + layout.dim(b);
            for (Index g = group_of(c0); g < n_groups() && group_begin(g) < c1; ++g) {
                const Index s = group_begin(g);
                const Index d = group_end(g) - s;
                ug = u.data().segment(s, d);
                wg.resize(d);
                for (Index k = 0; k < d; ++k) wg[k] = gamma[layout.block_of(s + k)];
                res.resize(d);
                group_prox(ug, wg, res);
                const Index lo = std::max(s, c0);
                const Index hi = std::min(s + d, c1);
                out.data().segment(lo, hi - lo) = res.segment(lo - s, hi - lo);
            }
        }
    }

private:
    void check(Index size) const
    {
        detail::require_shape(size == total_dim(), "group_l21_norm: group dimensions do not cover the operand");
    }

    Index group_of(Index c) const
    {
        auto it = std::upper_bound(group_start_.begin(), group_start_.end(), c);
        return static_cast<Index>(it - group_start_.begin()) - 1;
    }

    void group_prox(const Vector& u, const Vector& w, Vector& out) const
    {
        if (alpha_ == 0.0) {
            out = u;
            return;
        }
        const bool uniform = (w.array() == w[0]).all();
        if (uniform) {
            const double nrm = u.norm();
            const double t = alpha_ * w[0];
            out = nrm > t ? ((1.0 - t / nrm) * u).eval() : Vector::Zero(u.size());
            return;
        }
        // zero iff ||D(w)^{-1} u|| <= alpha
        if (u.cwiseQuotient(w).norm() <= alpha_) {
            out.setZero();
            return;
        }
        // out_k = u_k t / (t + alpha w_k) with t = ||out||, i.e. phi(t) = 1 where
        // phi(t) = sum_k u_k^2 / (t + alpha w_k)^2 is convex decreasing; Newton from
        // t = 0 increases monotonically to the root.
        const Vector aw = alpha_ * w;
        double t = 0.0;
        for (int it = 0; it < 200; ++it) {
            const Vector den = (aw.array() + t).matrix();
            const double phi = (u.array().square() / den.array().square()).sum();
            const double dphi = -2.0 * (u.array().square() / den.array().cube()).sum();
            const double step = (phi - 1.0) / dphi;
            const double next = t - step;
            if (!(next > t) || std::abs(next - t) <= 1e-16 * next) {
                t = std::max(t, next);
                break;
            }
            t = next;
        }
        out = (u.array() * t / (aw.array() + t)).matrix();
    }

    double alpha_;
    std::vector<Index> group_start_;
};

/* indicator of {lo <= u <= hi}; prox is a clamp independent of gamma */
class BoxIndicator : public ProxFunction
{
public:
    BoxIndicator(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi))
    {
        detail::require_shape(lo_.size() == hi_.size(), "box_indicator: bounds have different lengths");
        for (Index k = 0; k < lo_.size(); ++k) {
            detail::require(lo_[k] <= hi_[k], "box_indicator: lo > hi at coordinate " + std::to_string(k));
        }
    }

    const Vector& lo() const { return lo_; }
    const Vector& hi() const { return hi_; }

    double value(const BlockVector& u) const override
    {
        check(u.size());
        for (Index k = 0; k < u.size(); ++k) {
            if (u.data()[k] < lo_[k] || u.data()[k] > hi_[k]) return infinity;
        }
        return 0.0;
    }

    /* support function sum_k max(lo_k v_k, hi_k v_k) */
    std::optional<double> conjugate_value(const BlockVector& v) const override
    {
        check(v.size());
        double s = 0.0;
        for (Index k = 0; k < v.size(); ++k) {
            const double vk = v.data()[k];
            if (vk > 0.0) s += hi_[k] * vk;
            else if (vk < 0.0) s += lo_[k] * vk;
        }
        return s;
    }

    bool separable() const override { return true; }

    void prox_blocks(const WeightVector&, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const override
    {
        check(u.size());
        const auto& layout = *u.layout();
        for (Index b : blocks) {
            const Index c0 = layout.offset(b);
            for (Index k = c0; k < c0 + layout.dim(b); ++k) out.data()[k] = std::clamp(u.data()[k], lo_[k], hi_[k]);
        }
    }

private:
    void check(Index size) const { detail::require_shape(size == lo_.size(), "box_indicator: bound length mismatch"); }

    Vector lo_, hi_;
};

/*
 * Indicator of the hyperplane {u : <b, u> = 0}. The prox is the projection
 * in the gamma^{-1} metric,
 *
 *   u - D(gamma) b <b, u> / <b, D(gamma) b>,
 *
 * the orthogonal projection when gamma is uniform.
 */
class HyperplaneIndicator : public ProxFunction
{
public:
    explicit HyperplaneIndicator(Vector b, double feasibility_tol = 1e-9) : b_(std::move(b)), tol_(feasibility_tol)
    {
        detail::require(b_.size() > 0 && b_.squaredNorm() > 0.0, "hyperplane_indicator: b must be nonzero");
    }

    const Vector& normal() const { return b_; }

    /* |<b,u>| <= tol ||b|| max(1, ||u||) counts as feasible */
    double value(const BlockVector& u) const override
    {
        check(u.size());
        return std::abs(b_.dot(u.data())) <= tol_ * b_.norm() * std::max(1.0, u.norm()) ? 0.0 : infinity;
    }

    /* conjugate is the indicator of span(b) */
    std::optional<double> conjugate_value(const BlockVector& v) const override
    {
        check(v.size());
        const Vector r = v.data() - b_ * (b_.dot(v.data()) / b_.squaredNorm());
        return r.norm() <= tol_ * std::max(1.0, v.norm()) ? 0.0 : infinity;
    }

    bool separable() const override { return false; }

    void prox_blocks(const WeightVector& gamma, const BlockVector& u, std::span<const Index> blocks,
        BlockVector& out) const override
    {
        check(u.size());
        const auto& layout = *u.layout();
        double bu = 0.0, bgb = 0.0;
        for (Index blk = 0; blk < layout.n_blocks(); ++blk) {
            const Index c0 = layout.offset(blk);
            for (Index k = c0; k < c0 + layout.dim(blk); ++k) {
                bu += b_[k] * u.data()[k];
                bgb += gamma[blk] * b_[k] * b_[k];
            }
        }
        const double ratio = bu / bgb;
        for (Index blk : blocks) {
            const Index c0 = layout.offset(blk);
            for (Index k = c0; k < c0 + layout.dim(blk); ++k) out.data()[k] = u.data()[k] - gamma[blk] * b_[k] * ratio;
        }
    }

private:
    void check(Index size) const { detail::require_shape(size == b_.size(), "hyperplane_indicator: length mismatch"); }

    Vector b_;
    double tol_;
};

inline ProxPtr zero_function() { return std::make_shared<const ZeroFunction>(); }
inline ProxPtr l1_norm(double alpha) { return std::make_shared<const L1Norm>(alpha); }
inline ProxPtr group_l21_norm(double alpha, std::vector<Index> group_dims)
{
    return std::make_shared<const GroupL21Norm>(alpha, std::move(group_dims));
}
inline ProxPtr box_indicator(Vector lo, Vector hi) { return std::make_shared<const BoxIndicator>(std::move(lo), std::move(hi)); }
inline ProxPtr hyperplane_indicator(Vector b) { return std::make_shared<const HyperplaneIndicator>(std::move(b)); }

// =======================================================================
// Conjugate prox (Moreau decomposition)
// =======================================================================

/* prox_{sigma,h*}(u) = u - D(sigma) prox_{sigma^{-1},h}(D(sigma^{-1}) u) */
inline BlockVector conjugate_prox(const ProxFunction& h, const WeightVector& sigma, const BlockVector& u)
{
    const WeightVector sigma_inv = sigma.inverse();
    BlockVector scaled(u.layout());
    for (Index j = 0; j < u.n_blocks(); ++j) scaled.block(j) = sigma_inv[j] * u.block(j);
    BlockVector p = h.prox(sigma_inv, scaled);
    BlockVector out(u.layout());
    for (Index j = 0; j < u.n_blocks(); ++j) out.block(j) = u.block(j) - sigma[j] * p.block(j);
    return out;
}

/*
 * prox_{sigma,h*} bound to a weight vector and a dual layout, with scratch
 * space for block-restricted evaluation. Not safe for concurrent use of one
 * instance (the scratch is shared).
 */
class ConjugateProx
{
public:
    ConjugateProx(ProxPtr h, WeightVector sigma, LayoutPtr layout)
        : h_(std::move(h)), sigma_(std::move(sigma)), layout_(std::move(layout)), scaled_(layout_), inner_(layout_)
    {
        detail::require_shape(sigma_.size() == layout_->n_blocks(), "ConjugateProx: sigma does not match dual blocks");
        sigma_inv_ = sigma_.inverse();
    }

    const ProxFunction& function() const { return *h_; }
    const WeightVector& sigma() const { return sigma_; }

    /* union over `blocks` of h's dependency sets */
    void support(std::span<const Index> blocks, std::vector<Index>& out) const
    {
        out.clear();
        std::vector<Index> dep;
        for (Index j : blocks) {
            h_->dependency(*layout_, j, dep);
            out.insert(out.end(), dep.begin(), dep.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }

    /* out on `blocks`; u is read on `support` only, which must cover h's dependency of `blocks` */
    void eval_blocks(const BlockVector& u, std::span<const Index> blocks, std::span<const Index> support, BlockVector& out)
    {
        for (Index j : support) scaled_.block(j) = sigma_inv_[j] * u.block(j);
        h_->prox_blocks(sigma_inv_, scaled_, blocks, inner_);
        for (Index j : blocks) out.block(j) = u.block(j) - sigma_[j] * inner_.block(j);
    }

    BlockVector operator()(const BlockVector& u) const { return conjugate_prox(*h_, sigma_, u); }

private:
    ProxPtr h_;
    WeightVector sigma_;
    WeightVector sigma_inv_;
    LayoutPtr layout_;
    BlockVector scaled_;
    BlockVector inner_;
};

} // namespace pdcd
