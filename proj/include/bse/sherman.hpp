#pragma once

#include <memory>
#include <vector>

#include "bse/lowrank.hpp"
#include "bse/operator.hpp"
#include "bse/problem.hpp"

namespace bse {

/// Symmetric, easily invertible energy matrix D (diagonal or block diagonal).
class EnergyInverse {
public:
    virtual ~EnergyInverse() = default;

    virtual Index size() const = 0;
    /// D^{-1} x.
    virtual Vector solve(const VectorRef& x) const = 0;
    /// D x.
    virtual Vector multiply(const VectorRef& x) const = 0;

    Matrix solve_block(const MatrixRef& x) const;
    /// Number of stored doubles.
    virtual Index storage() const = 0;
};

/// Inverse of a diagonal with nonzero entries.
class DiagonalEnergyInverse : public EnergyInverse {
public:
    explicit DiagonalEnergyInverse(Vector diag);

    Index size() const override { return diag_.size(); }
    Vector solve(const VectorRef& x) const override;
    Vector multiply(const VectorRef& x) const override;
    Index storage() const override { return diag_.size(); }

    const Vector& diag() const { return diag_; }
    const Vector& reciprocal() const { return inv_; }

private:
    Vector diag_;
    Vector inv_;
};

/// blockdiag((de_1 - W_b)^{-1}, (de_2 - w_2)^{-1}) over a split of the
/// composite indices into an active set and a diagonal tail.
class BlockDiagEnergyInverse : public EnergyInverse {
public:
    /// `active` lists the composite indices of the dense block; `block` is
    /// de_1 - W_b in that order and `tail` holds de_k - w_kk for every other
    /// index in ascending composite order.
    BlockDiagEnergyInverse(Index n, std::vector<Index> active, Matrix block, Vector tail);

    Index size() const override { return n_; }
    Vector solve(const VectorRef& x) const override;
    Vector multiply(const VectorRef& x) const override;
    Index storage() const override;

    Index n_w() const { return static_cast<Index>(active_.size()); }
    const std::vector<Index>& active() const { return active_; }
    const std::vector<Index>& tail_indices() const { return tail_idx_; }
    const Matrix& dense_block_inv() const { return block_inv_; }
    const Vector& tail_inv() const { return tail_inv_; }
    double block_rcond() const { return rcond_; }

private:
    Index n_;
    std::vector<Index> active_;
    std::vector<Index> tail_idx_;
    Matrix block_;
    Matrix block_inv_;
    Vector tail_;
    Vector tail_inv_;
    double rcond_ = 1.0;
};

/// Precomputed Sherman-Morrison data for (D + P Q^T)^{-1}.
class TdaInverse : public LinearOperator {
public:
    TdaInverse(std::shared_ptr<const EnergyInverse> d_inv, Matrix p, Matrix q);

    Index rows() const override { return n_; }
    Index cols() const override { return n_; }
    Vector apply(const VectorRef& u) const override;
    Vector apply_transpose(const VectorRef& u) const override;

    /// Forward action (D + P Q^T) x, reconstructed from the stored factors.
    Vector forward(const VectorRef& x) const;

    const EnergyInverse& energy_inverse() const { return *d_inv_; }
    std::shared_ptr<const EnergyInverse> energy_inverse_ptr() const { return d_inv_; }
    const Matrix& p() const { return p_; }
    const Matrix& q() const { return q_; }
    const Matrix& p_eps() const { return p_eps_; }
    const Matrix& q_eps() const { return q_eps_; }
    const Matrix& k() const { return k_; }
    const Matrix& p_eps_k() const { return p_eps_k_; }
    Index inner_size() const { return k_.rows(); }

private:
    std::shared_ptr<const EnergyInverse> d_inv_;
    Index n_;
    Matrix p_, q_;
    Matrix p_eps_, q_eps_;
    Matrix k_;
    Matrix p_eps_k_;
};

/// Block-LU / Schur data for F0^{-1} with A0 = D + P Q^T and B0 = Phi Psi^T.
class BseInverse : public LinearOperator {
public:
    BseInverse(TdaInverse tda, Matrix phi, Matrix psi);

    Index rows() const override { return 2 * tda_.rows(); }
    Index cols() const override { return 2 * tda_.rows(); }
    /// Solves F0 [z; y] = [u; v].
    Vector apply(const VectorRef& rhs) const override;

    const TdaInverse& tda() const { return tda_; }
    const Matrix& phi() const { return phi_; }
    const Matrix& psi() const { return psi_; }
    const Matrix& q_s_eps() const { return q_s_eps_; }
    const Matrix& p_s_eps() const { return p_s_eps_; }
    const Matrix& k_s() const { return k_s_; }
    const Matrix& q_s_eps_k() const { return q_s_eps_k_; }
    const Matrix& phi_ab() const { return phi_ab_; }

    /// y = S^{-1} x with S = -A0^T + B0^T A0^{-1} B0.
    Vector apply_schur_inverse(const VectorRef& x) const;

private:
    TdaInverse tda_;
    Matrix phi_, psi_;
    Matrix q_s_eps_, p_s_eps_;
    Matrix k_s_;
    Matrix q_s_eps_k_;
    Matrix phi_ab_;
};

TdaInverse precompute_tda(const DiagPlusLowRank& a0);
BseInverse precompute_bse(const DiagPlusLowRank& a0, const LowRankMatrix& b0);

Vector apply_tda(const TdaInverse& inv, const VectorRef& u);
Vector apply_bse(const BseInverse& inv, const VectorRef& rhs);

/// Energy inverse with the active block de_1 - W_b treated densely and
/// de_2 - w_2 on the diagonal tail. `w_b` is ordered like `active`; `w2`
/// holds the tail diagonal in ascending composite order of the remaining
/// indices.
std::shared_ptr<const BlockDiagEnergyInverse> block_energy_inverse(const EnergyDiagonal& eps_diag,
                                                                   const std::vector<Index>& active,
                                                                   const MatrixRef& w_b, const VectorRef& w2);

/// Sherman-Morrison data for D_W + L_V L_V^T with D_W the block-diagonal energy.
TdaInverse precompute_reduced_block(const EnergyDiagonal& eps_diag, const std::vector<Index>& active,
                                    const MatrixRef& w_b, const VectorRef& w2, const MatrixRef& l_v);

/// Same, paired with the unchanged coupling block B0 = Phi Psi^T.
BseInverse precompute_reduced_block_bse(const EnergyDiagonal& eps_diag, const std::vector<Index>& active,
                                        const MatrixRef& w_b, const VectorRef& w2, const MatrixRef& l_v,
                                        const LowRankMatrix& b0);

} // namespace bse
