#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bse/operator.hpp"

namespace bse {

/// Ordered prime factors of a dimension.
struct QttShape {
    std::vector<Index> factors;

    Index d() const { return static_cast<Index>(factors.size()); }
    /// Product of the factors (1 for an empty shape).
    Index size() const;

    friend bool operator==(const QttShape&, const QttShape&) = default;
};

/// Nondecreasing prime factors; 1 gives an empty shape. Throws ConfigError for n < 1.
QttShape prime_factorize(Index n);

/// `a` followed by `b`.
QttShape concat(const QttShape& a, const QttShape& b);

/// Mixed-radix digits of `linear`, first digit fastest (zero based).
std::vector<Index> multi_index(Index linear, const QttShape& shape);
Index linear_index(const std::vector<Index>& digits, const QttShape& shape);

/// Dense tensor with the first index running fastest in memory.
struct FullTensor {
    QttShape shape;
    Vector data;

    double operator()(const std::vector<Index>& digits) const { return data[linear_index(digits, shape)]; }
};

FullTensor fold(const VectorRef& v, const QttShape& shape);
Vector unfold(const FullTensor& t);

/// Three-way core r0 x n x r1, element (a, i, b) stored at a + r0 * (i + n * b).
struct TTCore {
    Index r0 = 1;
    Index n = 1;
    Index r1 = 1;
    Vector data;

    TTCore() = default;
    TTCore(Index r0_, Index n_, Index r1_) : r0(r0_), n(n_), r1(r1_), data(Vector::Zero(r0_ * n_ * r1_)) {}

    double& operator()(Index a, Index i, Index b) { return data[a + r0 * (i + n * b)]; }
    double operator()(Index a, Index i, Index b) const { return data[a + r0 * (i + n * b)]; }

    /// (r0 n) x r1 view.
    Eigen::Map<Matrix> left() { return {data.data(), r0 * n, r1}; }
    Eigen::Map<const Matrix> left() const { return {data.data(), r0 * n, r1}; }
    /// r0 x (n r1) view.
    Eigen::Map<Matrix> right() { return {data.data(), r0, n * r1}; }
    Eigen::Map<const Matrix> right() const { return {data.data(), r0, n * r1}; }
};

/// Tensor train with boundary ranks 1.
class TTTensor {
public:
    TTTensor() = default;
    TTTensor(QttShape shape, std::vector<TTCore> cores);

    const QttShape& shape() const { return shape_; }
    Index d() const { return shape_.d(); }
    Index size() const { return shape_.size(); }
    const std::vector<TTCore>& cores() const { return cores_; }
    std::vector<TTCore>& cores() { return cores_; }
    const TTCore& core(Index l) const { return cores_[static_cast<std::size_t>(l)]; }
    TTCore& core(Index l) { return cores_[static_cast<std::size_t>(l)]; }

    /// Interior bond ranks r_1 .. r_{d-1}.
    std::vector<Index> ranks() const;
    Index max_rank() const;
    /// Stored doubles.
    Index storage() const;
    /// Effective rank from storage; 1 for fewer than two cores.
    double effective_rank() const;

    /// Contract all cores into a vector of length size().
    Vector full() const;
    double norm() const;

    /// QR sweeps: cores before `pos` left-orthogonal, cores after it right-orthogonal.
    void orthogonalize(Index pos);
    bool is_left_orthogonal(Index l, double tol = 1e-12) const;
    bool is_right_orthogonal(Index l, double tol = 1e-12) const;

    /// Rank-1 tensor with every entry equal to `value`.
    static TTTensor constant(const QttShape& shape, double value);

private:
    QttShape shape_;
    std::vector<TTCore> cores_;
};

/// Operator cores r0 x q x q x r1, element (a, i, j, b) at a + r0 * (i + q * (j + q * b)).
/// Stored as TTCore with n = q * q.
class TTMatrix {
public:
    TTMatrix() = default;
    TTMatrix(QttShape shape, std::vector<TTCore> cores);

    const QttShape& shape() const { return shape_; }
    Index d() const { return shape_.d(); }
    Index size() const { return shape_.size(); }
    const TTCore& core(Index l) const { return cores_[static_cast<std::size_t>(l)]; }
    const std::vector<TTCore>& cores() const { return cores_; }

    std::vector<Index> ranks() const;
    Index max_rank() const;
    Index storage() const;

    /// Dense matrix; desk-scale only.
    Matrix full() const;

    static TTMatrix identity(const QttShape& shape);
    /// diag(x) with the ranks of x.
    static TTMatrix diagonal(const TTTensor& x);

private:
    QttShape shape_;
    std::vector<TTCore> cores_;
};

/// Largest dense input accepted by the TT-SVD routines.
inline constexpr Index kTTDenseGuard = Index{1} << 20;

/// Sequential truncated SVD with local threshold eps / sqrt(d - 1), so that
/// ||v - full(result)|| <= eps ||v||. Throws GuardError above kTTDenseGuard entries.
TTTensor tt_svd(const VectorRef& v, const QttShape& shape, double eps, std::optional<Index> max_rank = std::nullopt);

/// Matrix TT of a dense N x N matrix with N = shape.size().
TTMatrix tt_matrix(const MatrixRef& m, const QttShape& shape, double eps,
                   std::optional<Index> max_rank = std::nullopt);

/// Positive root of r_1 + sum r_{k-1} r_k + r_{d-1} = 2 r + (d - 2) r^2.
double effective_rank(const std::vector<Index>& ranks, Index d);
/// Same balance with the storage weighted by the mode sizes.
double effective_rank(const std::vector<Index>& ranks, const QttShape& shape);

/// Exact product; ranks are products of the operand ranks.
TTTensor tt_matvec(const TTMatrix& a, const TTTensor& x);
double tt_dot(const TTTensor& x, const TTTensor& y);
/// Orthogonalize then truncate so that ||x - result|| <= eps ||x||.
TTTensor tt_round(const TTTensor& x, double eps, std::optional<Index> max_rank = std::nullopt);

enum class Direction { Left, Right };

/// Tensor train whose core at `position` carries an extra index m = 0 .. m0-1.
/// The block core is stored as a TTCore with n = q * m0 and element
/// (a, i, m, b) at a + r0 * (i + q * (m + m0 * b)).
class BlockTT {
public:
    BlockTT() = default;
    BlockTT(QttShape shape, std::vector<TTCore> cores, Index position, Index m0);

    const QttShape& shape() const { return shape_; }
    Index d() const { return shape_.d(); }
    Index size() const { return shape_.size(); }
    Index m0() const { return m0_; }
    Index position() const { return position_; }
    const std::vector<TTCore>& cores() const { return cores_; }
    const TTCore& core(Index l) const { return cores_[static_cast<std::size_t>(l)]; }
    TTCore& core(Index l) { return cores_[static_cast<std::size_t>(l)]; }

    std::vector<Index> ranks() const;
    Index max_rank() const;
    /// Stored doubles, block index included.
    Index storage() const;
    /// Effective rank of the bond ranks; the block index is not counted.
    double effective_rank() const;

    TTTensor extract(Index m) const;
    /// N x m0 matrix of all members; desk-scale only.
    Matrix full() const;
    /// Pairwise tt_dot of the members.
    Matrix gram() const;

    /// Cores left of the block left-orthogonal, cores right of it right-orthogonal.
    void orthogonalize();
    bool frame_orthonormal(double tol = 1e-10) const;

    /// Random normal cores with bond ranks min(rank, admissible), block at `position`,
    /// orthogonalized, members orthonormal when the block core has at least m0 rows.
    static BlockTT random(const QttShape& shape, Index m0, Index rank, Index position, std::uint64_t seed);
    /// Columns of `m` (N x m0) with the block in the last core.
    static BlockTT from_columns(const MatrixRef& m, const QttShape& shape, double eps,
                                std::optional<Index> max_rank = std::nullopt);

private:
    QttShape shape_;
    std::vector<TTCore> cores_;
    Index position_ = 0;
    Index m0_ = 1;
};

struct BlockMoveOptions {
    double eps = 0.0;                  ///< relative Frobenius threshold of the SVD
    std::optional<Index> max_rank;     ///< hard cap on the new bond rank
    Index min_rank = 1;                ///< lower bound on the new bond rank
};

/// Transfers the block index one core to the left or right through an SVD of
/// the block core. Requires an orthogonalized input.
BlockTT block_move(const BlockTT& u, Direction direction, const BlockMoveOptions& opts = {});

/// Block core (a, i, m, b) reshaped to a (r0 q r1) x m0 matrix with rows a + r0 (i + q b).
Matrix block_core_columns(const BlockTT& u);
/// Inverse of block_core_columns.
void set_block_core_columns(BlockTT& u, const MatrixRef& columns);

/// BSETT1 container: magic, manifest length, JSON manifest, little-endian cores.
std::string serialize(const TTTensor& x);
std::string serialize(const TTMatrix& a);
std::string serialize(const BlockTT& u);
TTTensor deserialize_tensor(std::string_view bytes);
TTMatrix deserialize_matrix(std::string_view bytes);
BlockTT deserialize_block(std::string_view bytes);
void save(const BlockTT& u, const std::filesystem::path& path);
BlockTT load_block(const std::filesystem::path& path);

} // namespace bse
