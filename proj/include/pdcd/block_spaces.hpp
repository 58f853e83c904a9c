#pragma once
#include <pdcd/core.hpp>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pdcd {

// =======================================================================
// Layouts and block vectors
// =======================================================================

/*
 * Partition of a flat coordinate range into consecutive blocks.
 * Block i occupies [offset(i), offset(i) + dim(i)).
 */
class BlockLayout
{
public:
    BlockLayout() : offsets_{0} {}

    explicit BlockLayout(std::vector<Index> dims) : dims_(std::move(dims))
    {
        offsets_.resize(dims_.size() + 1);
        offsets_[0] = 0;
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            detail::require(dims_[i] >= 1, "block dimensions must be >= 1");
            offsets_[i + 1] = offsets_[i] + dims_[i];
        }
    }

    static std::shared_ptr<const BlockLayout> scalar(Index n)
    {
        return std::make_shared<const BlockLayout>(std::vector<Index>(n, 1));
    }

    static std::shared_ptr<const BlockLayout> make(std::vector<Index> dims)
    {
        return std::make_shared<const BlockLayout>(std::move(dims));
    }

    Index n_blocks() const { return static_cast<Index>(dims_.size()); }
    Index size() const { return offsets_.back(); }
    Index dim(Index i) const { return dims_[i]; }
    Index offset(Index i) const { return offsets_[i]; }
    const std::vector<Index>& dims() const { return dims_; }

    bool all_scalar() const
    {
        return std::all_of(dims_.begin(), dims_.end(), [](Index d) { return d == 1; });
    }

    /* block containing flat coordinate c */
    Index block_of(Index c) const
    {
        auto it = std::upper_bound(offsets_.begin(), offsets_.end(), c);
        return static_cast<Index>(it - offsets_.begin()) - 1;
    }

    friend bool operator==(const BlockLayout& a, const BlockLayout& b) { return a.dims_ == b.dims_; }

private:
    std::vector<Index> dims_;
    std::vector<Index> offsets_;
};

using LayoutPtr = std::shared_ptr<const BlockLayout>;

inline bool same_layout(const LayoutPtr& a, const LayoutPtr& b)
{
    return a == b || (a && b && *a == *b);
}

/* Primal side X_1 x ... x X_n and dual side Y_1 x ... x Y_p. */
struct BlockStructure
{
    LayoutPtr primal;
    LayoutPtr dual;

    Index n_primal_blocks() const { return primal->n_blocks(); }
    Index n_dual_blocks() const { return dual->n_blocks(); }
};

/*
 * Element of a product space, stored flat with segment views per block.
 */
class BlockVector
{
public:
    BlockVector() : layout_(std::make_shared<const BlockLayout>()) {}

    explicit BlockVector(LayoutPtr layout) : layout_(std::move(layout)), data_(Vector::Zero(layout_->size())) {}

    BlockVector(LayoutPtr layout, Vector data) : layout_(std::move(layout)), data_(std::move(data))
    {
        detail::require_shape(data_.size() == layout_->size(), "BlockVector: data length does not match layout");
    }

    static BlockVector zeros(LayoutPtr layout) { return BlockVector(std::move(layout)); }

    const LayoutPtr& layout() const { return layout_; }
    Index n_blocks() const { return layout_->n_blocks(); }
    Index size() const { return data_.size(); }

    auto block(Index i) { return data_.segment(layout_->offset(i), layout_->dim(i)); }
    auto block(Index i) const { return data_.segment(layout_->offset(i), layout_->dim(i)); }

    Vector& data() { return data_; }
    const Vector& data() const { return data_; }

    void set_zero() { data_.setZero(); }

    double dot(const BlockVector& other) const
    {
        detail::require_shape(same_layout(layout_, other.layout_), "dot: layout mismatch");
        return data_.dot(other.data_);
    }

    double squared_norm() const { return data_.squaredNorm(); }
    double norm() const { return data_.norm(); }

private:
    LayoutPtr layout_;
    Vector data_;
};

// =======================================================================
// Weights
// =======================================================================

/*
 * One nonnegative real per block (step sizes, multiplicities, Lipschitz
 * constants). Step sizes additionally require strict positivity, checked
 * through require_positive().
 */
class WeightVector
{
public:
    WeightVector() = default;

    explicit WeightVector(Vector w) : w_(std::move(w))
    {
        for (Index i = 0; i < w_.size(); ++i) {
            detail::require(std::isfinite(w_[i]) && w_[i] >= 0.0, "weights must be finite and nonnegative");
        }
    }

    WeightVector(std::initializer_list<double> w) : WeightVector(Vector(Eigen::Map<const Vector>(w.begin(), w.size()))) {}

    static WeightVector constant(Index n, double value) { return WeightVector(Vector::Constant(n, value)); }

    Index size() const { return w_.size(); }
    double operator[](Index i) const { return w_[i]; }
    const Vector& values() const { return w_; }

    bool positive() const { return w_.size() == 0 || w_.minCoeff() > 0.0; }

    const WeightVector& require_positive(const char* what) const
    {
        detail::require(positive(), std::string(what) + ": weights must be strictly positive");
        return *this;
    }

    WeightVector inverse() const
    {
        require_positive("inverse");
        return WeightVector(w_.cwiseInverse());
    }

    WeightVector scaled(double s) const { return WeightVector(w_ * s); }

    /* per-coordinate expansion over a layout */
    Vector expand(const BlockLayout& layout) const
    {
        detail::require_shape(w_.size() == layout.n_blocks(), "weights: block count mismatch");
        Vector out(layout.size());
        for (Index i = 0; i < layout.n_blocks(); ++i) {
            out.segment(layout.offset(i), layout.dim(i)).setConstant(w_[i]);
        }
        return out;
    }

private:
    Vector w_;
};

/* sum_i gamma_i ||u^(i)||^2 */
inline double weighted_norm_sq(const BlockVector& u, const WeightVector& gamma)
{
    detail::require_shape(gamma.size() == u.n_blocks(), "weighted_norm_sq: weight count does not match block count");
    double s = 0.0;
    for (Index i = 0; i < u.n_blocks(); ++i) s += gamma[i] * u.block(i).squaredNorm();
    return s;
}

// =======================================================================
// Block sparse operator
// =======================================================================

/*
 * Linear operator M : X -> Y given by a sparse pattern of dense blocks
 * M_{j,i} of shape dim(Y_j) x dim(X_i).
 *
 * The pattern is structural: a block that is present counts towards I(j),
 * J(i) and m_j even if its entries happen to be zero. Entries are kept in
 * (row, col) lexicographic order, which is also the order of the copies of
 * a DuplicatedDual. Every dual row must hold at least one block.
 */
class BlockLinearOperator
{
public:
    struct Entry
    {
        Index row;
        Index col;
        Matrix block;
    };

    BlockLinearOperator() = default;

    BlockLinearOperator(LayoutPtr primal, LayoutPtr dual, std::vector<Entry> entries)
        : structure_{std::move(primal), std::move(dual)}, entries_(std::move(entries))
    {
        const Index n = structure_.primal->n_blocks();
        const Index p = structure_.dual->n_blocks();
        std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        row_begin_.assign(p + 1, 0);
        for (std::size_t e = 0; e < entries_.size(); ++e) {
            const auto& en = entries_[e];
            detail::require_shape(en.row >= 0 && en.row < p && en.col >= 0 && en.col < n,
                "BlockLinearOperator: block index out of range");
            detail::require_shape(en.block.rows() == structure_.dual->dim(en.row)
                    && en.block.cols() == structure_.primal->dim(en.col),
                "BlockLinearOperator: block (" + std::to_string(en.row) + "," + std::to_string(en.col)
                    + ") has wrong shape");
            if (e > 0) {
                const auto& prev = entries_[e - 1];
                detail::require(!(prev.row == en.row && prev.col == en.col),
                    "BlockLinearOperator: duplicate block (" + std::to_string(en.row) + "," + std::to_string(en.col) + ")");
            }
            ++row_begin_[en.row + 1];
        }
        for (Index j = 0; j < p; ++j) {
            detail::require(row_begin_[j + 1] > 0, "BlockLinearOperator: dual row " + std::to_string(j) + " has no block");
            row_begin_[j + 1] += row_begin_[j];
        }

        col_begin_.assign(n + 1, 0);
        for (const auto& en : entries_) ++col_begin_[en.col + 1];
        for (Index i = 0; i < n; ++i) col_begin_[i + 1] += col_begin_[i];
        col_entries_.resize(entries_.size());
        std::vector<Index> fill(col_begin_.begin(), col_begin_.end() - 1);
        for (std::size_t e = 0; e < entries_.size(); ++e) {
            col_entries_[fill[entries_[e].col]++] = static_cast<Index>(e);
        }

        std::vector<Index> dup_dims(entries_.size());
        for (std::size_t e = 0; e < entries_.size(); ++e) dup_dims[e] = structure_.dual->dim(entries_[e].row);
        duplicated_ = BlockLayout::make(std::move(dup_dims));
    }

    static BlockLinearOperator identity(const LayoutPtr& layout)
    {
        std::vector<Entry> entries;
        entries.reserve(layout->n_blocks());
        for (Index i = 0; i < layout->n_blocks(); ++i) {
            entries.push_back({i, i, Matrix::Identity(layout->dim(i), layout->dim(i))});
        }
        return BlockLinearOperator(layout, layout, std::move(entries));
    }

    /* operator into the trivial space (p = 0) */
    static BlockLinearOperator empty(const LayoutPtr& primal)
    {
        return BlockLinearOperator(primal, std::make_shared<const BlockLayout>(), {});
    }

    const BlockStructure& structure() const { return structure_; }
    const LayoutPtr& primal_layout() const { return structure_.primal; }
    const LayoutPtr& dual_layout() const { return structure_.dual; }
    /* layout of the duplicated dual space: one block per entry */
    const LayoutPtr& duplicated_layout() const { return duplicated_; }

    Index n_primal_blocks() const { return structure_.primal->n_blocks(); }
    Index n_dual_blocks() const { return structure_.dual->n_blocks(); }
    Index n_entries() const { return static_cast<Index>(entries_.size()); }

    const Entry& entry(Index e) const { return entries_[e]; }
    const std::vector<Entry>& entries() const { return entries_; }

    /* entries of row j, i.e. I(j): indices [row_begin(j), row_end(j)) */
    Index row_begin(Index j) const { return row_begin_[j]; }
    Index row_end(Index j) const { return row_begin_[j + 1]; }
    Index multiplicity(Index j) const { return row_begin_[j + 1] - row_begin_[j]; }

    /* entries of column i, i.e. J(i), in increasing row order */
    std::span<const Index> col_entries(Index i) const
    {
        return {col_entries_.data() + col_begin_[i], static_cast<std::size_t>(col_begin_[i + 1] - col_begin_[i])};
    }

    WeightVector multiplicities() const
    {
        Vector m(n_dual_blocks());
        for (Index j = 0; j < n_dual_blocks(); ++j) m[j] = static_cast<double>(multiplicity(j));
        return WeightVector(std::move(m));
    }

    bool all_multiplicities_one() const
    {
        for (Index j = 0; j < n_dual_blocks(); ++j) {
            if (multiplicity(j) != 1) return false;
        }
        return true;
    }

    /* index of entry (j,i) or -1 */
    Index find(Index j, Index i) const
    {
        for (Index e = row_begin(j); e < row_end(j); ++e) {
            if (entries_[e].col == i) return e;
        }
        return -1;
    }

    /* out = (Mx)^(j) */
    template <class Out>
    void apply_row(Index j, const BlockVector& x, Out&& out) const
    {
        out.setZero();
        for (Index e = row_begin(j); e < row_end(j); ++e) {
            out.noalias() += entries_[e].block * x.block(entries_[e].col);
        }
    }

    /* out = (M* y)^(i) */
    template <class Out>
    void adjoint_apply_col(Index i, const BlockVector& y, Out&& out) const
    {
        out.setZero();
        for (Index e : col_entries(i)) {
            out.noalias() += entries_[e].block.transpose() * y.block(entries_[e].row);
        }
    }

    BlockVector apply(const BlockVector& x) const
    {
        detail::require_shape(same_layout(x.layout(), structure_.primal), "apply: x does not live in the primal space");
        BlockVector out(structure_.dual);
        for (const auto& en : entries_) out.block(en.row).noalias() += en.block * x.block(en.col);
        return out;
    }

    BlockVector adjoint_apply(const BlockVector& y) const
    {
        detail::require_shape(same_layout(y.layout(), structure_.dual), "adjoint_apply: y does not live in the dual space");
        BlockVector out(structure_.primal);
        for (const auto& en : entries_) out.block(en.col).noalias() += en.block.transpose() * y.block(en.row);
        return out;
    }

    double frobenius_norm() const
    {
        double s = 0.0;
        for (const auto& en : entries_) s += en.block.squaredNorm();
        return std::sqrt(s);
    }

private:
    BlockStructure structure_{std::make_shared<const BlockLayout>(), std::make_shared<const BlockLayout>()};
    std::vector<Entry> entries_;
    std::vector<Index> row_begin_{0};
    std::vector<Index> col_begin_{0};
    std::vector<Index> col_entries_;
    LayoutPtr duplicated_ = std::make_shared<const BlockLayout>();
};

inline BlockVector apply(const BlockLinearOperator& M, const BlockVector& x) { return M.apply(x); }
inline BlockVector adjoint_apply(const BlockLinearOperator& M, const BlockVector& y) { return M.adjoint_apply(y); }

// =======================================================================
// Duplicated dual space
// =======================================================================

/*
 * Element of the duplicated dual space: one copy of y^(j) per entry (j,i)
 * of the operator, stored in the operator's entry order.
 */
class DuplicatedDual
{
public:
    DuplicatedDual() = default;
    explicit DuplicatedDual(const BlockLinearOperator& M) : copies_(M.duplicated_layout()) {}
    explicit DuplicatedDual(BlockVector copies) : copies_(std::move(copies)) {}

    auto copy(Index e) { return copies_.block(e); }
    auto copy(Index e) const { return copies_.block(e); }

    /* y^(j)(i) by pattern lookup */
    auto copy(const BlockLinearOperator& M, Index j, Index i) const
    {
        const Index e = M.find(j, i);
        detail::require(e >= 0, "DuplicatedDual: (j,i) is not in the operator pattern");
        return copies_.block(e);
    }

    Index n_copies() const { return copies_.n_blocks(); }
    BlockVector& values() { return copies_; }
    const BlockVector& values() const { return copies_; }

    bool matches(const BlockLinearOperator& M) const { return same_layout(copies_.layout(), M.duplicated_layout()); }

private:
    BlockVector copies_;
};

inline void require_pattern(const BlockLinearOperator& M, const DuplicatedDual& y)
{
    detail::require_shape(y.matches(M), "DuplicatedDual does not match the operator pattern");
}

/* z^(j) = (1/m_j) sum_{i in I(j)} y^(j)(i) */
inline BlockVector dual_reduce_S(const BlockLinearOperator& M, const DuplicatedDual& ybold)
{
    require_pattern(M, ybold);
    BlockVector z(M.dual_layout());
    for (Index j = 0; j < M.n_dual_blocks(); ++j) {
        auto zj = z.block(j);
        for (Index e = M.row_begin(j); e < M.row_end(j); ++e) zj += ybold.copy(e);
        zj /= static_cast<double>(M.multiplicity(j));
    }
    return z;
}

/* every copy y^(j)(i) set to y^(j) */
inline DuplicatedDual dual_expand(const BlockLinearOperator& M, const BlockVector& y)
{
    detail::require_shape(same_layout(y.layout(), M.dual_layout()), "dual_expand: y does not live in the dual space");
    DuplicatedDual out(M);
    for (Index e = 0; e < M.n_entries(); ++e) out.copy(e) = y.block(M.entry(e).row);
    return out;
}

/* (Kx)^(j)(i) = M_{j,i} x^(i) */
inline DuplicatedDual K_apply(const BlockLinearOperator& M, const BlockVector& x)
{
    detail::require_shape(same_layout(x.layout(), M.primal_layout()), "K_apply: x does not live in the primal space");
    DuplicatedDual out(M);
    for (Index e = 0; e < M.n_entries(); ++e) out.copy(e).noalias() = M.entry(e).block * x.block(M.entry(e).col);
    return out;
}

/* (K* y)^(i) = sum_{j in J(i)} M_{j,i}^T y^(j)(i) */
inline BlockVector K_adjoint(const BlockLinearOperator& M, const DuplicatedDual& ybold)
{
    require_pattern(M, ybold);
    BlockVector out(M.primal_layout());
    for (Index e = 0; e < M.n_entries(); ++e) {
        out.block(M.entry(e).col).noalias() += M.entry(e).block.transpose() * ybold.copy(e);
    }
    return out;
}

/*
 * Factorization M = D(m) S K. K is returned as an explicit operator on the
 * duplicated dual layout, every row of which holds exactly one block.
 */
struct Duplication
{
    BlockLinearOperator K;
    WeightVector m;
};

inline Duplication build_duplication(const BlockLinearOperator& M)
{
    std::vector<BlockLinearOperator::Entry> k_entries;
    k_entries.reserve(M.n_entries());
    for (Index e = 0; e < M.n_entries(); ++e) k_entries.push_back({e, M.entry(e).col, M.entry(e).block});
    return {BlockLinearOperator(M.primal_layout(), M.duplicated_layout(), std::move(k_entries)), M.multiplicities()};
}

} // namespace pdcd
