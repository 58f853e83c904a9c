#pragma once
// Independent reference computations used by the tests. Nothing here calls
// into the solver engines; operators are densified and problems are solved
// with textbook methods.
#include <pdcd/pdcd.hpp>
#include <Eigen/Eigenvalues>
#include <functional>

namespace oracle {

using pdcd::Index;
using pdcd::Matrix;
using pdcd::Vector;

/* dense matrix of a block operator */
inline Matrix dense(const pdcd::BlockLinearOperator& M)
{
    const auto& P = *M.primal_layout();
    const auto& D = *M.dual_layout();
    Matrix out = Matrix::Zero(D.size(), P.size());
    for (const auto& e : M.entries()) {
        out.block(D.offset(e.row), P.offset(e.col), D.dim(e.row), P.dim(e.col)) = e.block;
    }
    return out;
}

/* central finite-difference gradient */
inline Vector fd_gradient(const std::function<double(const Vector&)>& fn, const Vector& x, double h = 1e-6)
{
    Vector g(x.size());
    for (Index k = 0; k < x.size(); ++k) {
        Vector a = x, b = x;
        a[k] += h;
        b[k] -= h;
        g[k] = (fn(a) - fn(b)) / (2 * h);
    }
    return g;
}

inline double lambda_max_sym(const Matrix& S)
{
    if (S.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline double lambda_min_sym(const Matrix& S)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double soft(double u, double t) { return u > t ? u - t : (u < -t ? u + t : 0.0); }

/* proximal gradient (ISTA) for 1/2||Ax-b||^2 + alpha||x||_1, step 1/||A||^2 */
inline Vector ista(const Matrix& A, const Vector& b, double alpha, int iters)
{
    const double L = lambda_max_sym(A.transpose() * A);
    Vector x = Vector::Zero(A.cols());
    for (int it = 0; it < iters; ++it) {
        const Vector u = x - (A.transpose() * (A * x - b)) / L;
        for (Index k = 0; k < x.size(); ++k) x[k] = soft(u[k], alpha / L);
    }
    return x;
}

inline double lasso_objective(const Matrix& A, const Vector& b, double alpha, const Vector& x)
{
    return 0.5 * (A * x - b).squaredNorm() + alpha * x.lpNorm<1>();
}

/*
 * The toy quadratic f = 1/2 (sum x - 1)^2 after one coordinate step from x0
 * with step tau: x1 = x0 - tau (sum x0 - 1) e_i. Exact expectation of
 * ||x1 - x*||^2 over uniform i.
 */
inline double toy_one_step_expectation(const Vector& x0, double tau, const Vector& xstar)
{
    const double r = x0.sum() - 1.0;
    double acc = 0.0;
    for (Index i = 0; i < 3; ++i) {
        Vector x1 = x0;
        x1[i] -= tau * r;
        acc += (x1 - xstar).squaredNorm();
    }
    return acc / 3.0;
}

/*
 * One full deterministic primal-dual step on dense data:
 *   ybar = prox_{sigma,h*}(y + D(sigma) M x),
 *   xbar = prox_{tau,g}(x - D(tau)(grad f(x) + M^T (2 ybar - y))),
 * with the two prox maps supplied as coordinate-vector functions.
 */
struct DenseStep
{
    Matrix M;
    Vector tau, sigma; // expanded to coordinates
    std::function<Vector(const Vector&)> grad_f;
    std::function<Vector(const Vector&)> prox_g;      // uses tau
    std::function<Vector(const Vector&)> prox_hconj;  // uses sigma

    std::pair<Vector, Vector> operator()(const Vector& x, const Vector& y) const
    {
        const Vector yb = prox_hconj(y + sigma.cwiseProduct(M * x));
        const Vector xb = prox_g(x - tau.cwiseProduct(grad_f(x) + M.transpose() * (2 * yb - y)));
        return {xb, yb};
    }
};

/* ||w - u||^2_{gamma^-1}/2 + F(w) minimized over random competitors: returns the worst violation */
inline double prox_optimality_violation(const pdcd::ProxFunction& F, const pdcd::WeightVector& gamma,
    const pdcd::BlockVector& u, const pdcd::BlockVector& p, pdcd::Rng& rng, int trials, double spread)
{
    auto obj = [&](const pdcd::BlockVector& w) {
        const double fv = F.value(w);
        if (!std::isfinite(fv)) return pdcd::infinity;
        double q = 0.0;
        for (Index i = 0; i < w.n_blocks(); ++i) q += (w.block(i) - u.block(i)).squaredNorm() / gamma[i];
        return fv + 0.5 * q;
    };
    const double at_p = obj(p);
    double worst = -pdcd::infinity;
    for (int t = 0; t < trials; ++t) {
        pdcd::BlockVector w(p.layout(), p.data() + spread * rng.normal_vector(p.size()));
        const double ow = obj(w);
        if (std::isfinite(ow)) worst = std::max(worst, at_p - ow);
    }
    return worst;
}

} // namespace oracle
