#pragma once

#include <Eigen/Dense>

namespace bse {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<const Vector>;
using MatrixRef = Eigen::Ref<const Matrix>;

/// Abstract linear map R^cols -> R^rows.
///
/// Implementations are immutable after construction, so concurrent calls to
/// apply() from several threads are safe.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual Index rows() const = 0;
    virtual Index cols() const = 0;

    virtual Vector apply(const VectorRef& x) const = 0;
    /// Throws Error unless the implementation provides the transposed action.
    virtual Vector apply_transpose(const VectorRef& x) const;

    /// Column-by-column product with a block of vectors.
    Matrix apply_block(const MatrixRef& x) const;

    /// Materialize as a dense matrix. Only meant for desk-scale verification.
    Matrix to_dense() const;

protected:
    void check_cols(Index n) const;
    void check_rows(Index n) const;
};

} // namespace bse
