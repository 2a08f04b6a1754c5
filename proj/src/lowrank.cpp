#include "bse/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "bse/errors.hpp"

namespace bse {

LowRankMatrix::LowRankMatrix(Matrix left, Matrix right) : left_(std::move(left)), right_(std::move(right)) {
    if (left_.cols() != right_.cols())
        throw DimensionError("LowRankMatrix: left and right factors have different column counts");
}

LowRankMatrix LowRankMatrix::zero(Index rows, Index cols) {
    return LowRankMatrix(Matrix(rows, 0), Matrix(cols, 0));
}

Vector LowRankMatrix::apply(const VectorRef& x) const {
    check_cols(x.size());
    if (rank() == 0) return Vector::Zero(rows());
    return left_ * (right_.transpose() * x);
}

Vector LowRankMatrix::apply_transpose(const VectorRef& x) const {
    check_rows(x.size());
    if (rank() == 0) return Vector::Zero(cols());
    return right_ * (left_.transpose() * x);
}

DiagPlusLowRank::DiagPlusLowRank(Vector diag, LowRankMatrix lr) : diag_(std::move(diag)), lr_(std::move(lr)) {
    if (lr_.rows() != diag_.size() || lr_.cols() != diag_.size())
        throw DimensionError("DiagPlusLowRank: low-rank part must be square of the diagonal's size");
}

Vector DiagPlusLowRank::apply(const VectorRef& x) const {
    check_cols(x.size());
    Vector y = diag_.cwiseProduct(x);
    if (lr_.rank() > 0) y.noalias() += lr_.left() * (lr_.right().transpose() * x);
    return y;
}

Vector DiagPlusLowRank::apply_transpose(const VectorRef& x) const {
    check_rows(x.size());
    Vector y = diag_.cwiseProduct(x);
    if (lr_.rank() > 0) y.noalias() += lr_.right() * (lr_.left().transpose() * x);
    return y;
}

Matrix DiagPlusLowRank::dense() const {
    Matrix m = lr_.dense();
    m.diagonal() += diag_;
    return m;
}

Vector DenseOperator::apply(const VectorRef& x) const {
    check_cols(x.size());
    return m_ * x;
}

Vector DenseOperator::apply_transpose(const VectorRef& x) const {
    check_rows(x.size());
    return m_.transpose() * x;
}

std::string to_string(JFlavor f) {
    switch (f) {
    case JFlavor::F0Structured: return "F0_structured";
    case JFlavor::F1Exact: return "F1_exact";
    case JFlavor::FNWReduced: return "F_NW_reduced";
    }
    return "unknown";
}

BlockJSymmetric::BlockJSymmetric(std::shared_ptr<const LinearOperator> a, std::shared_ptr<const LinearOperator> b,
                                 JFlavor flavor)
    : a_(std::move(a)), b_(std::move(b)), flavor_(flavor), n_(a_->rows()) {
    if (a_->rows() != a_->cols() || b_->rows() != n_ || b_->cols() != n_)
        throw DimensionError("BlockJSymmetric: A and B blocks must be square of equal size");
}

Vector BlockJSymmetric::apply(const VectorRef& w) const {
    check_cols(w.size());
    const auto x = w.head(n_);
    const auto y = w.tail(n_);
    Vector out(2 * n_);
    out.head(n_) = a_->apply(x) + b_->apply(y);
    out.tail(n_) = -(b_->apply_transpose(x) + a_->apply_transpose(y));
    return out;
}

Vector BlockJSymmetric::apply_transpose(const VectorRef& w) const {
    check_rows(w.size());
    const auto x = w.head(n_);
    const auto y = w.tail(n_);
    Vector out(2 * n_);
    out.head(n_) = a_->apply_transpose(x) - b_->apply(y);
    out.tail(n_) = b_->apply_transpose(x) - a_->apply(y);
    return out;
}

LowRankMatrix truncated_svd(const MatrixRef& m, double eps, std::optional<Index> max_rank) {
    if (eps < 0.0) throw ConfigError("truncated_svd: eps must be non-negative");
    const Index rows = m.rows();
    const Index cols = m.cols();
    if (rows == 0 || cols == 0 || m.norm() == 0.0) return LowRankMatrix::zero(rows, cols);

    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const Index full = s.size();
    const double budget = eps * s.norm();

    // Smallest rank whose discarded tail stays within the budget.
    Index rank = full;
    double tail2 = 0.0;
    while (rank > 0) {
        const double next = tail2 + s[rank - 1] * s[rank - 1];
        if (std::sqrt(next) > budget) break;
        tail2 = next;
        --rank;
    }
    // Singular values at roundoff level never count towards the rank.
    const double floor = static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * s[0];
    while (rank > 0 && s[rank - 1] <= floor) --rank;
    if (max_rank) rank = std::min(rank, std::max<Index>(*max_rank, 0));

    Matrix left = svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal();
    Matrix right = svd.matrixV().leftCols(rank);
    return LowRankMatrix(std::move(left), std::move(right));
}

Matrix exact_a_dense(const ProblemInstance& inst) {
    Matrix a = inst.l_v * inst.l_v.transpose() - inst.w_bar;
    a.diagonal() += energy_diagonal(inst).values();
    return a;
}

Matrix exact_b_dense(const ProblemInstance& inst) { return inst.l_v * inst.l_v.transpose() - inst.w_til; }

Matrix j_symmetric_dense(const MatrixRef& a, const MatrixRef& b) {
    const Index n = a.rows();
    Matrix f(2 * n, 2 * n);
    f.topLeftCorner(n, n) = a;
    f.topRightCorner(n, n) = b;
    f.bottomLeftCorner(n, n) = -b.transpose();
    f.bottomRightCorner(n, n) = -a.transpose();
    return f;
}

AuxiliaryOperators assemble_aux(const ProblemInstance& inst, double eps) {
    if (!(eps > 0.0)) throw ConfigError("assemble_aux: threshold must be positive");
    const Index n = inst.n_ov();
    const Index r_v = inst.r_v();

    AuxiliaryOperators aux;
    aux.w_bar_r = truncated_svd(inst.w_bar, eps, r_v);
    aux.w_til_r = truncated_svd(inst.w_til, eps, r_v);

    const Index rw = aux.w_bar_r.rank();
    Matrix p(n, r_v + rw), q(n, r_v + rw);
    p << inst.l_v, aux.w_bar_r.left();
    q << inst.l_v, -aux.w_bar_r.right();
    aux.a0 = std::make_shared<DiagPlusLowRank>(energy_diagonal(inst).values(), LowRankMatrix(p, q));

    const Index rt = aux.w_til_r.rank();
    Matrix phi(n, r_v + rt), psi(n, r_v + rt);
    phi << inst.l_v, aux.w_til_r.left();
    psi << inst.l_v, -aux.w_til_r.right();
    aux.b0 = std::make_shared<LowRankMatrix>(phi, psi);

    aux.f0 = std::make_shared<BlockJSymmetric>(aux.a0, aux.b0, JFlavor::F0Structured);
    aux.f1 = std::make_shared<BlockJSymmetric>(std::make_shared<DenseOperator>(exact_a_dense(inst)),
                                               std::make_shared<DenseOperator>(exact_b_dense(inst)),
                                               JFlavor::F1Exact);
    return aux;
}

} // namespace bse
