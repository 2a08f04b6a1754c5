#include "bse/sherman.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

#include "bse/errors.hpp"

namespace bse {

namespace {

constexpr double kSingularThreshold = 1e-13;

Matrix inverse_or_throw(const Matrix& m, const char* name) {
    if (m.rows() == 0) return Matrix(0, 0);
    Eigen::PartialPivLU<Matrix> lu(m);
    const double rcond = lu.rcond();
    if (!(rcond >= kSingularThreshold)) throw SingularSystemError(name, rcond);
    return lu.inverse();
}

Matrix hcat(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

} // namespace

Matrix EnergyInverse::solve_block(const MatrixRef& x) const {
    Matrix out(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) out.col(j) = solve(VectorRef(x.col(j)));
    return out;
}

DiagonalEnergyInverse::DiagonalEnergyInverse(Vector diag) : diag_(std::move(diag)) {
    for (Index k = 0; k < diag_.size(); ++k)
        if (diag_[k] == 0.0) throw SingularSystemError("energy diagonal", 0.0);
    inv_ = diag_.cwiseInverse();
}

Vector DiagonalEnergyInverse::solve(const VectorRef& x) const {
    if (x.size() != size()) throw DimensionError("energy inverse: input length mismatch");
    return inv_.cwiseProduct(x);
}

Vector DiagonalEnergyInverse::multiply(const VectorRef& x) const {
    if (x.size() != size()) throw DimensionError("energy inverse: input length mismatch");
    return diag_.cwiseProduct(x);
}

BlockDiagEnergyInverse::BlockDiagEnergyInverse(Index n, std::vector<Index> active, Matrix block, Vector tail)
    : n_(n), active_(std::move(active)), block_(std::move(block)), tail_(std::move(tail)) {
    const Index nw = n_w();
    if (block_.rows() != nw || block_.cols() != nw || tail_.size() != n_ - nw)
        throw DimensionError("block energy inverse: block / tail sizes disagree with the active set");
    std::vector<char> in_block(static_cast<std::size_t>(n_), 0);
    for (Index k : active_) {
        if (k < 0 || k >= n_ || in_block[static_cast<std::size_t>(k)])
            throw DimensionError("block energy inverse: active indices must be distinct and in range");
        in_block[static_cast<std::size_t>(k)] = 1;
    }
    tail_idx_.reserve(static_cast<std::size_t>(n_ - nw));
    for (Index k = 0; k < n_; ++k)
        if (!in_block[static_cast<std::size_t>(k)]) tail_idx_.push_back(k);

    if (nw > 0) {
        Eigen::PartialPivLU<Matrix> lu(block_);
        rcond_ = lu.rcond();
        if (!(rcond_ >= kSingularThreshold)) throw SingularSystemError("active energy block", rcond_);
        block_inv_ = lu.inverse();
    }
    for (Index t = 0; t < tail_.size(); ++t)
        if (tail_[t] == 0.0) throw SingularSystemError("energy tail diagonal", 0.0);
    tail_inv_ = tail_.cwiseInverse();
}

Vector BlockDiagEnergyInverse::solve(const VectorRef& x) const {
    if (x.size() != n_) throw DimensionError("energy inverse: input length mismatch");
    Vector y(n_);
    const Index nw = n_w();
    if (nw > 0) {
        Vector xa(nw);
        for (Index i = 0; i < nw; ++i) xa[i] = x[active_[static_cast<std::size_t>(i)]];
        const Vector ya = block_inv_ * xa;
        for (Index i = 0; i < nw; ++i) y[active_[static_cast<std::size_t>(i)]] = ya[i];
    }
    for (Index t = 0; t < tail_inv_.size(); ++t) {
        const Index k = tail_idx_[static_cast<std::size_t>(t)];
        y[k] = tail_inv_[t] * x[k];
    }
    return y;
}

Vector BlockDiagEnergyInverse::multiply(const VectorRef& x) const {
    if (x.size() != n_) throw DimensionError("energy inverse: input length mismatch");
    Vector y(n_);
    const Index nw = n_w();
    if (nw > 0) {
        Vector xa(nw);
        for (Index i = 0; i < nw; ++i) xa[i] = x[active_[static_cast<std::size_t>(i)]];
        const Vector ya = block_ * xa;
        for (Index i = 0; i < nw; ++i) y[active_[static_cast<std::size_t>(i)]] = ya[i];
    }
    for (Index t = 0; t < tail_.size(); ++t) {
        const Index k = tail_idx_[static_cast<std::size_t>(t)];
        y[k] = tail_[t] * x[k];
    }
    return y;
}

Index BlockDiagEnergyInverse::storage() const { return block_inv_.size() + tail_inv_.size(); }

TdaInverse::TdaInverse(std::shared_ptr<const EnergyInverse> d_inv, Matrix p, Matrix q)
    : d_inv_(std::move(d_inv)), n_(d_inv_->size()), p_(std::move(p)), q_(std::move(q)) {
    if (p_.rows() != n_ || q_.rows() != n_ || p_.cols() != q_.cols())
        throw DimensionError("TDA inverse: P and Q must be N x r with matching r");
    p_eps_ = d_inv_->solve_block(p_);
    q_eps_ = d_inv_->solve_block(q_);
    const Index r = p_.cols();
    k_ = inverse_or_throw(Matrix::Identity(r, r) + q_.transpose() * p_eps_, "K = (I + Q^T P_eps)");
    p_eps_k_ = p_eps_ * k_;
}

Vector TdaInverse::apply(const VectorRef& u) const {
    check_cols(u.size());
    Vector z = d_inv_->solve(u);
    if (k_.rows() > 0) z.noalias() -= p_eps_k_ * (q_eps_.transpose() * u);
    return z;
}

Vector TdaInverse::apply_transpose(const VectorRef& u) const {
    check_rows(u.size());
    Vector z = d_inv_->solve(u);
    if (k_.rows() > 0) z.noalias() -= q_eps_ * (k_.transpose() * (p_eps_.transpose() * u));
    return z;
}

Vector TdaInverse::forward(const VectorRef& x) const {
    check_cols(x.size());
    Vector y = d_inv_->multiply(x);
    if (p_.cols() > 0) y.noalias() += p_ * (q_.transpose() * x);
    return y;
}

BseInverse::BseInverse(TdaInverse tda, Matrix phi, Matrix psi)
    : tda_(std::move(tda)), phi_(std::move(phi)), psi_(std::move(psi)) {
    const Index n = tda_.rows();
    if (phi_.rows() != n || psi_.rows() != n || phi_.cols() != psi_.cols())
        throw DimensionError("BSE inverse: Phi and Psi must be N x r with matching r");
    const EnergyInverse& d_inv = tda_.energy_inverse();
    const Matrix phi_eps = d_inv.solve_block(phi_);
    const Matrix psi_eps = d_inv.solve_block(psi_);
    const Matrix phi_eps_p = phi_eps.transpose() * tda_.p();
    const Matrix phi_eps_q = tda_.q().transpose() * phi_eps;
    const Matrix inner = phi_eps_p * tda_.k() * phi_eps_q - phi_.transpose() * phi_eps;

    q_s_eps_ = hcat(tda_.q_eps(), psi_eps * inner);
    p_s_eps_ = hcat(tda_.p_eps(), psi_eps);
    const Matrix p_s = hcat(tda_.p(), psi_);
    const Index rs = q_s_eps_.cols();
    k_s_ = inverse_or_throw(Matrix::Identity(rs, rs) + p_s.transpose() * q_s_eps_, "K_S = (I + [P Psi]^T Q_Seps)");
    q_s_eps_k_ = q_s_eps_ * k_s_;
    phi_ab_ = phi_eps - tda_.p_eps_k() * (tda_.q_eps().transpose() * phi_);
}

Vector BseInverse::apply_schur_inverse(const VectorRef& x) const {
    Vector y = -tda_.energy_inverse().solve(x);
    if (k_s_.rows() > 0) y.noalias() += q_s_eps_k_ * (p_s_eps_.transpose() * x);
    return y;
}

Vector BseInverse::apply(const VectorRef& rhs) const {
    check_cols(rhs.size());
    const Index n = tda_.rows();
    const Vector z_tilde = tda_.apply(rhs.head(n));
    Vector y_tilde = rhs.tail(n);
    if (phi_.cols() > 0) y_tilde.noalias() += psi_ * (phi_.transpose() * z_tilde);
    const Vector y = apply_schur_inverse(y_tilde);
    Vector out(2 * n);
    out.head(n) = z_tilde;
    if (phi_.cols() > 0) out.head(n).noalias() -= phi_ab_ * (psi_.transpose() * y);
    out.tail(n) = y;
    return out;
}

TdaInverse precompute_tda(const DiagPlusLowRank& a0) {
    return TdaInverse(std::make_shared<DiagonalEnergyInverse>(a0.diag()), a0.low_rank().left(),
                      a0.low_rank().right());
}

BseInverse precompute_bse(const DiagPlusLowRank& a0, const LowRankMatrix& b0) {
    return BseInverse(precompute_tda(a0), b0.left(), b0.right());
}

Vector apply_tda(const TdaInverse& inv, const VectorRef& u) { return inv.apply(u); }

Vector apply_bse(const BseInverse& inv, const VectorRef& rhs) { return inv.apply(rhs); }

std::shared_ptr<const BlockDiagEnergyInverse> block_energy_inverse(const EnergyDiagonal& eps_diag,
                                                                   const std::vector<Index>& active,
                                                                   const MatrixRef& w_b, const VectorRef& w2) {
    const Index n = eps_diag.size();
    const Index nw = static_cast<Index>(active.size());
    if (w_b.rows() != nw || w_b.cols() != nw || w2.size() != n - nw)
        throw DimensionError("reduced block: W_b / w2 sizes disagree with the active set");
    Matrix block = -w_b;
    for (Index i = 0; i < nw; ++i) block(i, i) += eps_diag.entry(active[static_cast<std::size_t>(i)]);

    std::vector<char> in_block(static_cast<std::size_t>(n), 0);
    for (Index k : active) {
        if (k < 0 || k >= n) throw DimensionError("reduced block: active index out of range");
        in_block[static_cast<std::size_t>(k)] = 1;
    }
    Vector tail(n - nw);
    Index t = 0;
    for (Index k = 0; k < n; ++k) {
        if (in_block[static_cast<std::size_t>(k)]) continue;
        if (t >= tail.size()) throw DimensionError("reduced block: duplicate active indices");
        tail[t] = eps_diag.entry(k) - w2[t];
        ++t;
    }
    return std::make_shared<BlockDiagEnergyInverse>(n, active, std::move(block), std::move(tail));
}

TdaInverse precompute_reduced_block(const EnergyDiagonal& eps_diag, const std::vector<Index>& active,
                                    const MatrixRef& w_b, const VectorRef& w2, const MatrixRef& l_v) {
    return TdaInverse(block_energy_inverse(eps_diag, active, w_b, w2), l_v, l_v);
}

BseInverse precompute_reduced_block_bse(const EnergyDiagonal& eps_diag, const std::vector<Index>& active,
                                        const MatrixRef& w_b, const VectorRef& w2, const MatrixRef& l_v,
                                        const LowRankMatrix& b0) {
    return BseInverse(precompute_reduced_block(eps_diag, active, w_b, w2, l_v), b0.left(), b0.right());
}

} // namespace bse
