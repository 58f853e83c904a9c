#pragma once
#include <pdcd/block_spaces.hpp>
#include <pdcd/linalg.hpp>
#include <memory>

namespace pdcd {

/*
 * Differentiable convex f on the primal space, with coordinate-wise
 * Lipschitz constants beta_i such that
 *
 *   f(x + U_i u) <= f(x) + <grad f(x), U_i u> + beta_i/2 ||u||^2.
 *
 * The cache hooks let iteration engines maintain an auxiliary quantity
 * (e.g. a residual) so that a partial gradient costs O(nnz of block i).
 * The default cache is empty and falls back on partial_gradient().
 */
class SmoothFunction
{
public:
    virtual ~SmoothFunction() = default;

    virtual const LayoutPtr& layout() const = 0;
    virtual double value(const BlockVector& x) const = 0;
    virtual BlockVector gradient(const BlockVector& x) const = 0;

    virtual Vector partial_gradient(const BlockVector& x, Index i) const { return gradient(x).block(i); }

    virtual const WeightVector& beta() const = 0;

    /* Lipschitz constant of grad f on the whole space */
    virtual double global_lipschitz() const = 0;

    virtual void init_cache(const BlockVector& /*x*/, Vector& cache) const { cache.resize(0); }

    virtual void partial_gradient_cached(const BlockVector& x, const Vector& /*cache*/, Index i,
        Eigen::Ref<Vector> out) const
    {
        out = partial_gradient(x, i);
    }

    /* x^(i) has moved by delta */
    virtual void update_cache(Vector& /*cache*/, Index /*i*/, const Eigen::Ref<const Vector>& /*delta*/) const {}
};

using SmoothPtr = std::shared_ptr<const SmoothFunction>;

/*
 * f(x) = (scale/2) ||B x - c||^2 + <q, x>
 *
 * Covers least squares (B = A, scale = 1, q = 0) and the dual SVM loss
 * (B = A D(b), scale = 1/lambda, c = 0, q = -e). The cache is the residual
 * r = Bx - c.
 */
class QuadraticLoss : public SmoothFunction
{
public:
    QuadraticLoss(LayoutPtr layout, SparseMatrix B, Vector c, double scale, Vector q)
        : layout_(std::move(layout)), B_(std::move(B)), c_(std::move(c)), scale_(scale), q_(std::move(q))
    {
        B_.makeCompressed();
        detail::require_shape(B_.cols() == layout_->size(), "QuadraticLoss: matrix columns do not match primal size");
        detail::require_shape(c_.size() == B_.rows(), "QuadraticLoss: right-hand side length does not match matrix rows");
        detail::require_shape(q_.size() == B_.cols(), "QuadraticLoss: linear term length does not match matrix columns");
        detail::require(scale_ > 0.0, "QuadraticLoss: scale must be positive");

        Vector beta(layout_->n_blocks());
        for (Index i = 0; i < layout_->n_blocks(); ++i) {
            beta[i] = scale_ * column_block_spectral_sq(B_, layout_->offset(i), layout_->dim(i));
        }
        beta_ = WeightVector(std::move(beta));
        lipschitz_ = scale_ * spectral_norm_sq(B_);
    }

    const LayoutPtr& layout() const override { return layout_; }
    const WeightVector& beta() const override { return beta_; }
    double global_lipschitz() const override { return lipschitz_; }

    const SparseMatrix& matrix() const { return B_; }
    const Vector& rhs() const { return c_; }
    double scale() const { return scale_; }
    const Vector& linear_term() const { return q_; }

    double value(const BlockVector& x) const override
    {
        check(x);
        return 0.5 * scale_ * (B_ * x.data() - c_).squaredNorm() + q_.dot(x.data());
    }

    BlockVector gradient(const BlockVector& x) const override
    {
        check(x);
        Vector r = B_ * x.data() - c_;
        return BlockVector(layout_, scale_ * (B_.transpose() * r) + q_);
    }

    Vector partial_gradient(const BlockVector& x, Index i) const override
    {
        check(x);
        Vector r = B_ * x.data() - c_;
        Vector out(layout_->dim(i));
        block_gradient(r, i, out);
        return out;
    }

    void init_cache(const BlockVector& x, Vector& cache) const override
    {
        check(x);
        cache.noalias() = B_ * x.data();
        cache -= c_;
    }

    void partial_gradient_cached(const BlockVector& /*x*/, const Vector& cache, Index i,
        Eigen::Ref<Vector> out) const override
    {
        block_gradient(cache, i, out);
    }

    void update_cache(Vector& cache, Index i, const Eigen::Ref<const Vector>& delta) const override
    {
        const Index c0 = layout_->offset(i);
        for (Index a = 0; a < layout_->dim(i); ++a) {
            const double d = delta[a];
            if (d == 0.0) continue;
            for (SparseMatrix::InnerIterator it(B_, c0 + a); it; ++it) cache[it.index()] += it.value() * d;
        }
    }

private:
    void check(const BlockVector& x) const
    {
        detail::require_shape(same_layout(x.layout(), layout_), "smooth function: x does not live in the primal space");
    }

    void block_gradient(const Vector& r, Index i, Eigen::Ref<Vector> out) const
    {
        const Index c0 = layout_->offset(i);
        for (Index a = 0; a < layout_->dim(i); ++a) {
            double s = 0.0;
            for (SparseMatrix::InnerIterator it(B_, c0 + a); it; ++it) s += it.value() * r[it.index()];
            out[a] = scale_ * s + q_[c0 + a];
        }
    }

    LayoutPtr layout_;
    SparseMatrix B_;
    Vector c_;
    double scale_;
    Vector q_;
    WeightVector beta_;
    double lipschitz_ = 0.0;
};

/* f(x) = 1/2 ||Ax - b||^2; beta_i is the squared spectral norm of the column block of A */
inline SmoothPtr least_squares_f(const SparseMatrix& A, const Vector& b, LayoutPtr layout)
{
    detail::require_shape(A.rows() == b.size(), "least_squares_f: A and b have incompatible shapes");
    return std::make_shared<const QuadraticLoss>(std::move(layout), A, b, 1.0, Vector::Zero(A.cols()));
}

inline SmoothPtr least_squares_f(const SparseMatrix& A, const Vector& b)
{
    return least_squares_f(A, b, BlockLayout::scalar(A.cols()));
}

inline SmoothPtr least_squares_f(const Matrix& A, const Vector& b)
{
    return least_squares_f(SparseMatrix(A.sparseView(0.0, 0.0)), b);
}

/*
 * Dual SVM loss f(x) = 1/(2 lambda) ||A D(b) x||^2 - sum_i x_i, with A of
 * shape features x samples and b in {-1,+1}^samples. One scalar block per
 * sample; beta_i = ||a_i||^2 / lambda.
 */
inline SmoothPtr svm_dual_f(const SparseMatrix& A, const Vector& labels, double lambda)
{
    detail::require_shape(A.cols() == labels.size(), "svm_dual_f: one label per column of A is required");
    detail::require(lambda > 0.0, "svm_dual_f: lambda must be positive");
    for (Index i = 0; i < labels.size(); ++i) {
        detail::require(labels[i] == 1.0 || labels[i] == -1.0, "svm_dual_f: labels must be +1 or -1");
    }
    SparseMatrix B = A * labels.asDiagonal();
    const Index n = A.cols();
    return std::make_shared<const QuadraticLoss>(BlockLayout::scalar(n), std::move(B), Vector::Zero(A.rows()),
        1.0 / lambda, Vector::Constant(n, -1.0));
}

inline SmoothPtr svm_dual_f(const Matrix& A, const Vector& labels, double lambda)
{
    return svm_dual_f(SparseMatrix(A.sparseView(0.0, 0.0)), labels, lambda);
}

} // namespace pdcd
