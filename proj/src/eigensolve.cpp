#include "bse/eigensolve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "bse/errors.hpp"
#include "bse/random.hpp"

namespace bse {

namespace {

using Clock = std::chrono::steady_clock;
using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool is_symmetric(const MatrixRef& m) {
    if (m.rows() != m.cols()) return false;
    const double norm = m.norm();
    return (m - m.transpose()).norm() <= 1e-12 * std::max(norm, 1e-300);
}

class FunctionOperator : public LinearOperator {
public:
    FunctionOperator(Index n, std::function<Vector(const VectorRef&)> f) : n_(n), f_(std::move(f)) {}
    Index rows() const override { return n_; }
    Index cols() const override { return n_; }
    Vector apply(const VectorRef& x) const override {
        check_cols(x.size());
        return f_(x);
    }

private:
    Index n_;
    std::function<Vector(const VectorRef&)> f_;
};

/// Classical Gram-Schmidt, applied twice, against the first k columns of v.
double orthogonalize(const Matrix& v, Index k, Vector& x) {
    for (int pass = 0; pass < 2; ++pass) {
        if (k == 0) break;
        const Vector c = v.leftCols(k).transpose() * x;
        x.noalias() -= v.leftCols(k) * c;
    }
    return x.norm();
}

struct RitzPair {
    Complex theta;
    CVector y;
};

} // namespace

void canonicalize_columns(Matrix& v) {
    for (Index j = 0; j < v.cols(); ++j) {
        const double norm = v.col(j).norm();
        if (norm == 0.0) continue;
        v.col(j) /= norm;
        const double scale = v.col(j).cwiseAbs().maxCoeff();
        for (Index i = 0; i < v.rows(); ++i) {
            if (std::abs(v(i, j)) > 1e-12 * scale) {
                if (v(i, j) < 0.0) v.col(j) = -v.col(j);
                break;
            }
        }
    }
}

EigenResult dense_eig_oracle(const MatrixRef& m, const Matrix* metric) {
    const auto t0 = Clock::now();
    if (m.rows() != m.cols()) throw DimensionError("dense oracle: matrix must be square");
    if (m.rows() > kDenseOracleGuard)
        throw GuardError("dense oracle: dimension " + std::to_string(m.rows()) + " exceeds the desk-scale guard of " +
                         std::to_string(kDenseOracleGuard));
    if (metric && (metric->rows() != m.rows() || metric->cols() != m.cols()))
        throw DimensionError("dense oracle: metric must match the matrix size");
    const Index n = m.rows();

    EigenResult res;
    res.method = "dense";
    res.converged = true;
    CVector values;
    CMatrix vectors;
    const bool symmetric = is_symmetric(m) && (!metric || is_symmetric(*metric));

    if (symmetric && !metric) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
        values = es.eigenvalues().cast<Complex>();
        vectors = es.eigenvectors().cast<Complex>();
    } else if (symmetric) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()),
                                                           0.5 * (*metric + metric->transpose()));
        values = es.eigenvalues().cast<Complex>();
        vectors = es.eigenvectors().cast<Complex>();
    } else if (!metric) {
        Eigen::EigenSolver<Matrix> es(m);
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    } else {
        Eigen::LLT<Matrix> llt(0.5 * (*metric + metric->transpose()));
        if (llt.info() != Eigen::Success) throw Error("dense oracle: metric is not positive definite");
        const Matrix l = llt.matrixL();
        Matrix c = l.triangularView<Eigen::Lower>().solve(Matrix(m));
        c = l.triangularView<Eigen::Lower>().solve(Matrix(c.transpose())).transpose();
        Eigen::EigenSolver<Matrix> es(c);
        values = es.eigenvalues();
        vectors = l.transpose().cast<Complex>().triangularView<Eigen::Upper>().solve(es.eigenvectors());
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (values[a].real() != values[b].real()) return values[a].real() < values[b].real();
        return values[a].imag() < values[b].imag();
    });

    res.values.resize(n);
    res.vectors.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        const Index s = order[static_cast<std::size_t>(j)];
        res.values[j] = values[s].real();
        res.vectors.col(j) = vectors.col(s).real();
        if (res.vectors.col(j).norm() < 1e-8 * vectors.col(s).norm()) res.vectors.col(j) = vectors.col(s).imag();
        if (std::abs(values[s].imag()) > 1e-8 * std::max(1.0, std::abs(values[s].real()))) res.spurious = true;
    }
    canonicalize_columns(res.vectors);

    const Matrix mv = m * res.vectors;
    const Matrix sv = metric ? Matrix(*metric * res.vectors) : res.vectors;
    res.residuals.resize(n);
    for (Index j = 0; j < n; ++j) {
        const double scale = std::max(std::abs(res.values[j]), 1e-300);
        res.residuals[j] = (mv.col(j) - res.values[j] * sv.col(j)).norm() / scale;
    }
    res.wall_time = seconds_since(t0);
    return res;
}

Vector positive_branch(const VectorRef& values, Index m0) {
    std::vector<double> pos;
    for (Index i = 0; i < values.size(); ++i)
        if (values[i] > 0.0) pos.push_back(values[i]);
    std::sort(pos.begin(), pos.end());
    const Index take = std::min<Index>(m0, static_cast<Index>(pos.size()));
    Vector out(take);
    for (Index i = 0; i < take; ++i) out[i] = pos[static_cast<std::size_t>(i)];
    return out;
}

EigenResult krylov_eigs(const LinearOperator& op, const LinearOperator& forward, bool symmetric, bool inverse_mode,
                        const KrylovOptions& opts) {
    const auto t0 = Clock::now();
    const Index n = op.rows();
    if (op.cols() != n || forward.rows() != n || forward.cols() != n)
        throw DimensionError("krylov: operators must be square and of equal size");
    const Index m0 = opts.m0;
    if (m0 < 1 || m0 > n) throw ConfigError("krylov: m0 must lie in [1, N]");
    if (!(opts.tol > 0.0)) throw ConfigError("krylov: tolerance must be positive");
    Index kmax = opts.subspace > 0 ? opts.subspace : std::max<Index>(2 * m0 + 10, 40);
    kmax = std::min(std::max(kmax, m0 + 1), n);

    EigenResult res;
    res.tol = opts.tol;
    Rng rng(opts.seed);
    Matrix v(n, kmax);
    Matrix w(n, kmax);
    Index k = 0;

    auto append = [&](Vector x) {
        const double before = x.norm();
        if (before == 0.0 || k >= kmax) return false;
        const double after = orthogonalize(v, k, x);
        if (after <= 1e-10 * before) return false;
        v.col(k) = x / after;
        w.col(k) = op.apply(VectorRef(v.col(k)));
        ++res.iterations;
        ++k;
        return true;
    };
    auto append_random = [&]() {
        for (int attempt = 0; attempt < 8; ++attempt)
            if (append(rng.normal_vector(n))) return;
        throw Error("krylov: failed to extend the subspace");
    };

    if (opts.initial) {
        if (opts.initial->rows() != n) throw DimensionError("krylov: initial block has the wrong length");
        for (Index j = 0; j < opts.initial->cols() && k < kmax; ++j) append(opts.initial->col(j));
    }
    if (k == 0) append_random();

    std::vector<RitzPair> wanted;
    std::vector<double> rel(static_cast<std::size_t>(m0), 0.0);

    for (;;) {
        while (k < kmax) {
            if (!append(w.col(k - 1))) append_random();
        }

        const Matrix h = v.leftCols(k).transpose() * w.leftCols(k);
        CVector theta;
        CMatrix y;
        if (symmetric) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.transpose()));
            theta = es.eigenvalues().cast<Complex>();
            y = es.eigenvectors().cast<Complex>();
        } else {
            Eigen::EigenSolver<Matrix> es(h);
            theta = es.eigenvalues();
            y = es.eigenvectors();
        }
        std::vector<Index> order(static_cast<std::size_t>(k));
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            const double ra = theta[a].real(), rb = theta[b].real();
            if (ra != rb) return inverse_mode ? ra > rb : ra < rb;
            return theta[a].imag() > theta[b].imag();
        });

        wanted.clear();
        double worst = 0.0;
        for (Index j = 0; j < m0; ++j) {
            const Index s = order[static_cast<std::size_t>(j)];
            RitzPair pair{theta[s], y.col(s)};
            const Vector xr = v.leftCols(k) * pair.y.real();
            const Vector xi = v.leftCols(k) * pair.y.imag();
            const Complex lambda = inverse_mode ? 1.0 / pair.theta : pair.theta;
            const Vector fr = forward.apply(xr);
            const Vector fi = pair.theta.imag() != 0.0 ? forward.apply(xi) : Vector::Zero(n);
            // (F - lambda)(xr + i xi)
            const Vector rr = fr - lambda.real() * xr + lambda.imag() * xi;
            const Vector ri = fi - lambda.real() * xi - lambda.imag() * xr;
            const double xnorm = std::sqrt(xr.squaredNorm() + xi.squaredNorm());
            const double r = std::sqrt(rr.squaredNorm() + ri.squaredNorm()) / (std::abs(lambda) * xnorm);
            rel[static_cast<std::size_t>(j)] = r;
            worst = std::max(worst, r);
            wanted.push_back(std::move(pair));
        }
        res.residual_history.push_back(worst);

        const bool done = worst <= opts.tol || k == n;
        if (done || res.restarts >= opts.max_restarts) {
            res.converged = worst <= opts.tol || k == n;
            std::vector<Index> idx(static_cast<std::size_t>(m0));
            std::iota(idx.begin(), idx.end(), Index{0});
            Vector lambda(m0);
            Matrix vecs(n, m0);
            for (Index j = 0; j < m0; ++j) {
                const RitzPair& p = wanted[static_cast<std::size_t>(j)];
                const Complex l = inverse_mode ? 1.0 / p.theta : p.theta;
                lambda[j] = l.real();
                vecs.col(j) = v.leftCols(k) * p.y.real();
                if (vecs.col(j).norm() < 1e-8) vecs.col(j) = v.leftCols(k) * p.y.imag();
                if (std::abs(l.imag()) > opts.tol * std::abs(l.real())) res.spurious = true;
            }
            std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return lambda[a] < lambda[b]; });
            res.values.resize(m0);
            res.vectors.resize(n, m0);
            res.residuals.resize(m0);
            for (Index j = 0; j < m0; ++j) {
                const Index s = idx[static_cast<std::size_t>(j)];
                res.values[j] = lambda[s];
                res.vectors.col(j) = vecs.col(s);
                res.residuals[j] = rel[static_cast<std::size_t>(s)];
            }
            canonicalize_columns(res.vectors);
            break;
        }

        // Residuals of the unconverged wanted pairs of the iteration operator,
        // taken in the current basis before it is compressed.
        Matrix resid(n, 2 * m0);
        Index n_resid = 0;
        for (Index j = 0; j < m0; ++j) {
            if (rel[static_cast<std::size_t>(j)] <= opts.tol) continue;
            const RitzPair& p = wanted[static_cast<std::size_t>(j)];
            const Vector yr = p.y.real();
            const Vector yi = p.y.imag();
            const Vector vr = v.leftCols(k) * yr, vi = v.leftCols(k) * yi;
            const Vector wr = w.leftCols(k) * yr, wi = w.leftCols(k) * yi;
            resid.col(n_resid++) = wr - p.theta.real() * vr + p.theta.imag() * vi;
            if (p.theta.imag() != 0.0) resid.col(n_resid++) = wi - p.theta.real() * vi - p.theta.imag() * vr;
        }

        // Thick restart on the leading Ritz vectors, complex pairs kept whole.
        auto is_conj_of_prev = [&](Index j) {
            if (j == 0) return false;
            const Complex a = theta[order[static_cast<std::size_t>(j)]];
            const Complex b = theta[order[static_cast<std::size_t>(j - 1)]];
            return a.imag() != 0.0 && std::abs(a - std::conj(b)) <= 1e-12 * std::abs(a);
        };
        Index keep = std::min(k - 1, std::max(m0, k / 2));
        if (keep < k && is_conj_of_prev(keep)) {
            if (keep + 1 <= k - 1) ++keep;
            else --keep;
        }
        Matrix basis(k, keep);
        Index cols = 0;
        for (Index j = 0; j < keep; ++j) {
            if (is_conj_of_prev(j)) continue;
            const Index s = order[static_cast<std::size_t>(j)];
            basis.col(cols++) = y.col(s).real();
            if (theta[s].imag() != 0.0) basis.col(cols++) = y.col(s).imag();
        }
        const Matrix q = Eigen::HouseholderQR<Matrix>(basis.leftCols(cols)).householderQ() *
                         Matrix::Identity(k, cols);
        const Matrix v_new = v.leftCols(k) * q;
        const Matrix w_new = w.leftCols(k) * q;
        v.leftCols(cols) = v_new;
        w.leftCols(cols) = w_new;
        k = cols;
        ++res.restarts;

        Index added = 0;
        for (Index j = 0; j < n_resid && k < kmax; ++j)
            if (append(resid.col(j))) ++added;
        if (added == 0) append_random();
    }

    res.method = inverse_mode ? "shift-invert" : "forward";
    res.wall_time = seconds_since(t0);
    return res;
}

EigenResult shift_invert_tda(const TdaInverse& inv, const KrylovOptions& opts) {
    const FunctionOperator forward(inv.rows(), [&inv](const VectorRef& x) { return inv.forward(x); });
    EigenResult res = krylov_eigs(inv, forward, true, true, opts);
    res.method = "lanczos-shift-invert";
    return res;
}

EigenResult shift_invert_bse(const BseInverse& inv, const BlockJSymmetric& f0, const KrylovOptions& opts,
                             const std::optional<Matrix>& initial_guess) {
    if (f0.rows() != inv.rows()) throw DimensionError("shift_invert_bse: F0 and its inverse differ in size");
    KrylovOptions o = opts;
    if (initial_guess) {
        const Index n = f0.half();
        if (initial_guess->rows() != n) throw DimensionError("shift_invert_bse: initial guess must have N_ov rows");
        Matrix start = Matrix::Zero(2 * n, initial_guess->cols());
        start.topRows(n) = *initial_guess;
        o.initial = std::move(start);
    }
    EigenResult res = krylov_eigs(inv, f0, false, true, o);
    res.method = "arnoldi-shift-invert";
    return res;
}

EigenResult forward_tda(const LinearOperator& a, const KrylovOptions& opts) {
    EigenResult res = krylov_eigs(a, a, true, false, opts);
    res.method = "lanczos-forward";
    return res;
}

} // namespace bse
