#include "bse/operator.hpp"

#include <string>

#include "bse/errors.hpp"

namespace bse {

Matrix LinearOperator::apply_block(const MatrixRef& x) const {
    check_cols(x.rows());
    Matrix y(rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) y.col(j) = apply(VectorRef(x.col(j)));
    return y;
}

Matrix LinearOperator::to_dense() const {
    Matrix out(rows(), cols());
    Vector e = Vector::Zero(cols());
    for (Index j = 0; j < cols(); ++j) {
        e[j] = 1.0;
        out.col(j) = apply(VectorRef(e));
        e[j] = 0.0;
    }
    return out;
}

Vector LinearOperator::apply_transpose(const VectorRef&) const {
    throw Error("operator does not provide a transposed action");
}

void LinearOperator::check_cols(Index n) const {
    if (n != cols())
        throw DimensionError("operator expects input of length " + std::to_string(cols()) + ", got " +
                             std::to_string(n));
}

void LinearOperator::check_rows(Index n) const {
    if (n != rows())
        throw DimensionError("operator transpose expects input of length " + std::to_string(rows()) +
                             ", got " + std::to_string(n));
}

} // namespace bse
