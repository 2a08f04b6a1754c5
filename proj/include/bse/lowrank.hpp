#pragma once

#include <memory>
#include <optional>
#include <string>

#include "bse/operator.hpp"
#include "bse/problem.hpp"

namespace bse {

/// left * right^T with left m x r and right n x r.
class LowRankMatrix : public LinearOperator {
public:
    LowRankMatrix() = default;
    LowRankMatrix(Matrix left, Matrix right);
    /// Rank-0 placeholder of the given shape.
    static LowRankMatrix zero(Index rows, Index cols);

    Index rows() const override { return left_.rows(); }
    Index cols() const override { return right_.rows(); }
    Index rank() const { return left_.cols(); }

    const Matrix& left() const { return left_; }
    const Matrix& right() const { return right_; }

    Vector apply(const VectorRef& x) const override;
    Vector apply_transpose(const VectorRef& x) const override;

    Matrix dense() const { return left_ * right_.transpose(); }

private:
    Matrix left_;
    Matrix right_;
};

/// diag + left * right^T; square.
class DiagPlusLowRank : public LinearOperator {
public:
    DiagPlusLowRank() = default;
    DiagPlusLowRank(Vector diag, LowRankMatrix lr);

    Index rows() const override { return diag_.size(); }
    Index cols() const override { return diag_.size(); }

    const Vector& diag() const { return diag_; }
    const LowRankMatrix& low_rank() const { return lr_; }

    Vector apply(const VectorRef& x) const override;
    Vector apply_transpose(const VectorRef& x) const override;

    Matrix dense() const;

private:
    Vector diag_;
    LowRankMatrix lr_;
};

/// Explicitly stored matrix; used for the exact interaction blocks.
class DenseOperator : public LinearOperator {
public:
    explicit DenseOperator(Matrix m) : m_(std::move(m)) {}

    Index rows() const override { return m_.rows(); }
    Index cols() const override { return m_.cols(); }
    const Matrix& matrix() const { return m_; }

    Vector apply(const VectorRef& x) const override;
    Vector apply_transpose(const VectorRef& x) const override;

private:
    Matrix m_;
};

enum class JFlavor { F0Structured, F1Exact, FNWReduced };

std::string to_string(JFlavor f);

/// Real J-symmetric block operator [A B; -B^T -A^T] of dimension 2N.
class BlockJSymmetric : public LinearOperator {
public:
    BlockJSymmetric(std::shared_ptr<const LinearOperator> a, std::shared_ptr<const LinearOperator> b,
                    JFlavor flavor);

    Index rows() const override { return 2 * n_; }
    Index cols() const override { return 2 * n_; }
    Index half() const { return n_; }
    JFlavor flavor() const { return flavor_; }

    const LinearOperator& a_block() const { return *a_; }
    const LinearOperator& b_block() const { return *b_; }
    std::shared_ptr<const LinearOperator> a_block_ptr() const { return a_; }
    std::shared_ptr<const LinearOperator> b_block_ptr() const { return b_; }

    Vector apply(const VectorRef& x) const override;
    Vector apply_transpose(const VectorRef& x) const override;

private:
    std::shared_ptr<const LinearOperator> a_;
    std::shared_ptr<const LinearOperator> b_;
    JFlavor flavor_;
    Index n_;
};

/// Smallest-rank left * right^T with ||m - left right^T||_F <= eps ||m||_F,
/// unless max_rank binds first. Singular values are folded into left.
LowRankMatrix truncated_svd(const MatrixRef& m, double eps, std::optional<Index> max_rank = std::nullopt);

/// Structured auxiliary operators of one instance.
struct AuxiliaryOperators {
    std::shared_ptr<const DiagPlusLowRank> a0; ///< diag(de) + P Q^T, P = [L_V Wl], Q = [L_V -Wr]
    std::shared_ptr<const LowRankMatrix> b0;   ///< Phi Psi^T, Phi = [L_V Y], Psi = [L_V -Z]
    std::shared_ptr<const BlockJSymmetric> f0; ///< built from a0, b0
    std::shared_ptr<const BlockJSymmetric> f1; ///< exact A = de + V - W_bar, B = V - W_til
    LowRankMatrix w_bar_r;                      ///< truncated w_bar
    LowRankMatrix w_til_r;                      ///< truncated w_til
};

/// Truncates w_bar and w_til at eps with max_rank = R_V and assembles the
/// auxiliary blocks A0, B0, F0 together with the exact F1.
AuxiliaryOperators assemble_aux(const ProblemInstance& inst, double eps);

/// Dense exact TDA block A = de + V - W_bar.
Matrix exact_a_dense(const ProblemInstance& inst);
/// Dense exact coupling block B = V - W_til.
Matrix exact_b_dense(const ProblemInstance& inst);

/// [A B; -B^T -A^T] from explicit blocks.
Matrix j_symmetric_dense(const MatrixRef& a, const MatrixRef& b);

} // namespace bse
