#include "bse/tt.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "binio.hpp"
#include "bse/errors.hpp"
#include "bse/random.hpp"

namespace bse {

namespace {

constexpr std::string_view kMagic = "BSETTEN1";

Index prod(const std::vector<Index>& f, std::size_t begin, std::size_t end) {
    Index p = 1;
    for (std::size_t k = begin; k < end; ++k) p *= f[k];
    return p;
}

/// Smallest rank whose discarded tail has 2-norm <= delta, clamped to [floor, cap].
Index keep_rank(const Vector& s, double delta, std::optional<Index> cap, Index floor) {
    const Index n = s.size();
    Index r = n;
    double tail = 0.0;
    while (r > 0) {
        const double next = tail + s[r - 1] * s[r - 1];
        if (std::sqrt(next) > delta) break;
        tail = next;
        --r;
    }
    r = std::max(r, std::max<Index>(floor, 1));
    if (cap) r = std::min(r, std::max<Index>(*cap, 1));
    return std::min(r, n);
}

struct Svd {
    Matrix u;
    Vector s;
    Matrix v;
};

Svd thin_svd(const MatrixRef& x) {
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// QR of core l; R pushed into core l + 1.
void push_right(std::vector<TTCore>& cores, std::size_t l) {
    TTCore& c = cores[l];
    const Index rows = c.r0 * c.n;
    const Index k = std::min(rows, c.r1);
    Eigen::HouseholderQR<Matrix> qr(c.left());
    const Matrix q = qr.householderQ() * Matrix::Identity(rows, k);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    TTCore& nx = cores[l + 1];
    TTCore next(k, nx.n, nx.r1);
    next.right() = r * nx.right();
    TTCore cur(c.r0, c.n, k);
    cur.left() = q;
    c = std::move(cur);
    nx = std::move(next);
}

/// LQ of core l; L pushed into core l - 1.
void push_left(std::vector<TTCore>& cores, std::size_t l) {
    TTCore& c = cores[l];
    const Index cols = c.n * c.r1;
    const Index k = std::min(c.r0, cols);
    Eigen::HouseholderQR<Matrix> qr(c.right().transpose());
    const Matrix q = qr.householderQ() * Matrix::Identity(cols, k);
    const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    TTCore& pv = cores[l - 1];
    TTCore prev(pv.r0, pv.n, k);
    prev.left() = pv.left() * r.transpose();
    TTCore cur(k, c.n, c.r1);
    cur.right() = q.transpose();
    c = std::move(cur);
    pv = std::move(prev);
}

void orthogonalize_cores(std::vector<TTCore>& cores, Index pos) {
    for (Index l = 0; l < pos; ++l) push_right(cores, static_cast<std::size_t>(l));
    for (Index l = static_cast<Index>(cores.size()) - 1; l > pos; --l) push_left(cores, static_cast<std::size_t>(l));
}

double orth_defect(const Matrix& g) { return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(); }

/// Contraction of a chain whose middle sizes are read from the cores.
Vector contract(const std::vector<TTCore>& cores) {
    Matrix cur = Matrix::Ones(1, 1);
    for (const TTCore& c : cores) {
        const Matrix next = cur * c.right();
        cur = Eigen::Map<const Matrix>(next.data(), cur.rows() * c.n, c.r1);
    }
    return Eigen::Map<const Vector>(cur.data(), cur.size());
}

void check_chain(const std::vector<TTCore>& cores, const std::vector<Index>& mids, const char* what) {
    if (cores.size() != mids.size())
        throw DimensionError(std::string(what) + ": number of cores differs from the number of modes");
    for (std::size_t l = 0; l < cores.size(); ++l) {
        const TTCore& c = cores[l];
        if (c.n != mids[l]) throw DimensionError(std::string(what) + ": core mode size disagrees with the shape");
        if (c.data.size() != c.r0 * c.n * c.r1) throw DimensionError(std::string(what) + ": core payload size");
        if (l == 0 && c.r0 != 1) throw DimensionError(std::string(what) + ": left boundary rank must be 1");
        if (l + 1 == cores.size() && c.r1 != 1)
            throw DimensionError(std::string(what) + ": right boundary rank must be 1");
        if (l > 0 && cores[l - 1].r1 != c.r0) throw DimensionError(std::string(what) + ": adjacent ranks differ");
    }
}

std::vector<Index> bond_ranks(const std::vector<TTCore>& cores) {
    std::vector<Index> r;
    for (std::size_t l = 0; l + 1 < cores.size(); ++l) r.push_back(cores[l].r1);
    return r;
}

Index core_storage(const std::vector<TTCore>& cores) {
    Index s = 0;
    for (const TTCore& c : cores) s += c.data.size();
    return s;
}

QttShape squared(const QttShape& shape) {
    QttShape sq;
    for (Index q : shape.factors) sq.factors.push_back(q * q);
    return sq;
}

} // namespace

Index QttShape::size() const { return prod(factors, 0, factors.size()); }

QttShape prime_factorize(Index n) {
    if (n < 1) throw ConfigError("prime_factorize: n must be >= 1");
    QttShape s;
    for (Index p = 2; p * p <= n; ++p)
        while (n % p == 0) {
            s.factors.push_back(p);
            n /= p;
        }
    if (n > 1) s.factors.push_back(n);
    return s;
}

QttShape concat(const QttShape& a, const QttShape& b) {
    QttShape s = a;
    s.factors.insert(s.factors.end(), b.factors.begin(), b.factors.end());
    return s;
}

std::vector<Index> multi_index(Index linear, const QttShape& shape) {
    if (linear < 0 || linear >= shape.size()) throw DimensionError("multi_index: index out of range");
    std::vector<Index> digits(shape.factors.size());
    for (std::size_t k = 0; k < digits.size(); ++k) {
        digits[k] = linear % shape.factors[k];
        linear /= shape.factors[k];
    }
    return digits;
}

Index linear_index(const std::vector<Index>& digits, const QttShape& shape) {
    if (digits.size() != shape.factors.size()) throw DimensionError("linear_index: digit count differs from shape");
    Index linear = 0;
    Index stride = 1;
    for (std::size_t k = 0; k < digits.size(); ++k) {
        if (digits[k] < 0 || digits[k] >= shape.factors[k]) throw DimensionError("linear_index: digit out of range");
        linear += digits[k] * stride;
        stride *= shape.factors[k];
    }
    return linear;
}

FullTensor fold(const VectorRef& v, const QttShape& shape) {
    if (v.size() != shape.size()) throw DimensionError("fold: vector length differs from the shape product");
    return {shape, v};
}

Vector unfold(const FullTensor& t) {
    if (t.data.size() != t.shape.size()) throw DimensionError("unfold: payload length differs from the shape product");
    return t.data;
}

// TTTensor

TTTensor::TTTensor(QttShape shape, std::vector<TTCore> cores) : shape_(std::move(shape)), cores_(std::move(cores)) {
    if (shape_.d() < 1) throw DimensionError("TTTensor: shape must have at least one mode");
    check_chain(cores_, shape_.factors, "TTTensor");
}

std::vector<Index> TTTensor::ranks() const { return bond_ranks(cores_); }

Index TTTensor::max_rank() const {
    const auto r = ranks();
    return r.empty() ? 1 : *std::max_element(r.begin(), r.end());
}

Index TTTensor::storage() const { return core_storage(cores_); }

double TTTensor::effective_rank() const { return d() < 2 ? 1.0 : bse::effective_rank(ranks(), shape_); }

Vector TTTensor::full() const { return contract(cores_); }

double TTTensor::norm() const { return std::sqrt(std::max(0.0, tt_dot(*this, *this))); }

void TTTensor::orthogonalize(Index pos) {
    if (pos < 0 || pos >= d()) throw ConfigError("orthogonalize: position out of range");
    orthogonalize_cores(cores_, pos);
}

bool TTTensor::is_left_orthogonal(Index l, double tol) const {
    const auto u = core(l).left();
    return orth_defect(u.transpose() * u) <= tol;
}

bool TTTensor::is_right_orthogonal(Index l, double tol) const {
    const auto u = core(l).right();
    return orth_defect(u * u.transpose()) <= tol;
}

TTTensor TTTensor::constant(const QttShape& shape, double value) {
    std::vector<TTCore> cores;
    for (std::size_t l = 0; l < shape.factors.size(); ++l) {
        TTCore c(1, shape.factors[l], 1);
        c.data.setConstant(l == 0 ? value : 1.0);
        cores.push_back(std::move(c));
    }
    return TTTensor(shape, std::move(cores));
}

// TTMatrix

TTMatrix::TTMatrix(QttShape shape, std::vector<TTCore> cores) : shape_(std::move(shape)), cores_(std::move(cores)) {
    if (shape_.d() < 1) throw DimensionError("TTMatrix: shape must have at least one mode");
    check_chain(cores_, squared(shape_).factors, "TTMatrix");
}

std::vector<Index> TTMatrix::ranks() const { return bond_ranks(cores_); }

Index TTMatrix::max_rank() const {
    const auto r = ranks();
    return r.empty() ? 1 : *std::max_element(r.begin(), r.end());
}

Index TTMatrix::storage() const { return core_storage(cores_); }

Matrix TTMatrix::full() const {
    const Index n = size();
    const Vector flat = contract(cores_);
    const QttShape sq = squared(shape_);
    Matrix m(n, n);
    for (Index t = 0; t < flat.size(); ++t) {
        const auto digits = multi_index(t, sq);
        Index row = 0, col = 0, stride = 1;
        for (std::size_t l = 0; l < digits.size(); ++l) {
            const Index q = shape_.factors[l];
            row += (digits[l] % q) * stride;
            col += (digits[l] / q) * stride;
            stride *= q;
        }
        m(row, col) = flat[t];
    }
    return m;
}

TTMatrix TTMatrix::identity(const QttShape& shape) {
    std::vector<TTCore> cores;
    for (Index q : shape.factors) {
        TTCore c(1, q * q, 1);
        for (Index i = 0; i < q; ++i) c(0, i + q * i, 0) = 1.0;
        cores.push_back(std::move(c));
    }
    return TTMatrix(shape, std::move(cores));
}

TTMatrix TTMatrix::diagonal(const TTTensor& x) {
    std::vector<TTCore> cores;
    for (const TTCore& xc : x.cores()) {
        const Index q = xc.n;
        TTCore c(xc.r0, q * q, xc.r1);
        for (Index b = 0; b < xc.r1; ++b)
            for (Index i = 0; i < q; ++i)
                for (Index a = 0; a < xc.r0; ++a) c(a, i + q * i, b) = xc(a, i, b);
        cores.push_back(std::move(c));
    }
    return TTMatrix(x.shape(), std::move(cores));
}

// Decompositions

TTTensor tt_svd(const VectorRef& v, const QttShape& shape, double eps, std::optional<Index> max_rank) {
    if (shape.d() < 1) throw ConfigError("tt_svd: shape must have at least one mode");
    if (v.size() != shape.size()) throw DimensionError("tt_svd: vector length differs from the shape product");
    if (v.size() > kTTDenseGuard)
        throw GuardError("tt_svd: " + std::to_string(v.size()) + " entries exceed the dense guard of 2^20");
    if (!(eps >= 0.0)) throw ConfigError("tt_svd: eps must be >= 0");
    const Index d = shape.d();
    const double delta = eps / std::sqrt(static_cast<double>(std::max<Index>(d - 1, 1))) * v.norm();

    std::vector<TTCore> cores;
    Matrix c = v.transpose();
    Index r = 1;
    for (Index l = 0; l + 1 < d; ++l) {
        const Index q = shape.factors[static_cast<std::size_t>(l)];
        const Index cols = c.size() / (r * q);
        const Svd svd = thin_svd(Eigen::Map<const Matrix>(c.data(), r * q, cols));
        const Index rk = keep_rank(svd.s, delta, max_rank, 1);
        TTCore core(r, q, rk);
        core.left() = svd.u.leftCols(rk);
        cores.push_back(std::move(core));
        c = svd.s.head(rk).asDiagonal() * svd.v.leftCols(rk).transpose();
        r = rk;
    }
    TTCore last(r, shape.factors.back(), 1);
    last.data = Eigen::Map<const Vector>(c.data(), c.size());
    cores.push_back(std::move(last));
    return TTTensor(shape, std::move(cores));
}

TTMatrix tt_matrix(const MatrixRef& m, const QttShape& shape, double eps, std::optional<Index> max_rank) {
    const Index n = shape.size();
    if (m.rows() != n || m.cols() != n) throw DimensionError("tt_matrix: matrix size differs from the shape product");
    if (n * n > kTTDenseGuard) throw GuardError("tt_matrix: matrix exceeds the dense guard of 2^20 entries");
    const QttShape sq = squared(shape);
    Vector flat(n * n);
    for (Index col = 0; col < n; ++col)
        for (Index row = 0; row < n; ++row) {
            Index t = 0, stride = 1, rr = row, cc = col;
            for (Index q : shape.factors) {
                t += ((rr % q) + q * (cc % q)) * stride;
                rr /= q;
                cc /= q;
                stride *= q * q;
            }
            flat[t] = m(row, col);
        }
    const TTTensor x = tt_svd(flat, sq, eps, max_rank);
    return TTMatrix(shape, x.cores());
}

double effective_rank(const std::vector<Index>& ranks, Index d) {
    if (d < 2) throw ConfigError("effective_rank: d must be >= 2");
    if (static_cast<Index>(ranks.size()) != d - 1) throw DimensionError("effective_rank: expected d - 1 ranks");
    double s = static_cast<double>(ranks.front() + ranks.back());
    for (std::size_t k = 0; k + 1 < ranks.size(); ++k) s += static_cast<double>(ranks[k] * ranks[k + 1]);
    if (d == 2) return s / 2.0;
    const double m = static_cast<double>(d - 2);
    return (-1.0 + std::sqrt(1.0 + m * s)) / m;
}

double effective_rank(const std::vector<Index>& ranks, const QttShape& shape) {
    const Index d = shape.d();
    if (d < 2) throw ConfigError("effective_rank: d must be >= 2");
    if (static_cast<Index>(ranks.size()) != d - 1) throw DimensionError("effective_rank: expected d - 1 ranks");
    const auto& q = shape.factors;
    double storage = 0.0;
    for (Index l = 0; l < d; ++l) {
        const double r0 = l == 0 ? 1.0 : static_cast<double>(ranks[static_cast<std::size_t>(l - 1)]);
        const double r1 = l == d - 1 ? 1.0 : static_cast<double>(ranks[static_cast<std::size_t>(l)]);
        storage += static_cast<double>(q[static_cast<std::size_t>(l)]) * r0 * r1;
    }
    const double b = static_cast<double>(q.front() + q.back());
    double a = 0.0;
    for (Index l = 1; l + 1 < d; ++l) a += static_cast<double>(q[static_cast<std::size_t>(l)]);
    if (a == 0.0) return storage / b;
    return (-b + std::sqrt(b * b + 4.0 * a * storage)) / (2.0 * a);
}

TTTensor tt_matvec(const TTMatrix& a, const TTTensor& x) {
    if (a.shape() != x.shape()) throw DimensionError("tt_matvec: operator and vector shapes differ");
    std::vector<TTCore> cores;
    for (Index l = 0; l < x.d(); ++l) {
        const TTCore& ac = a.core(l);
        const TTCore& xc = x.core(l);
        const Index q = xc.n;
        TTCore y(ac.r0 * xc.r0, q, ac.r1 * xc.r1);
        for (Index e = 0; e < xc.r1; ++e)
            for (Index b = 0; b < ac.r1; ++b)
                for (Index j = 0; j < q; ++j)
                    for (Index c = 0; c < xc.r0; ++c) {
                        const double xv = xc(c, j, e);
                        if (xv == 0.0) continue;
                        for (Index i = 0; i < q; ++i)
                            for (Index aa = 0; aa < ac.r0; ++aa)
                                y(aa + ac.r0 * c, i, b + ac.r1 * e) += ac(aa, i + q * j, b) * xv;
                    }
        cores.push_back(std::move(y));
    }
    return TTTensor(x.shape(), std::move(cores));
}

double tt_dot(const TTTensor& x, const TTTensor& y) {
    if (x.shape() != y.shape()) throw DimensionError("tt_dot: shapes differ");
    Matrix env = Matrix::Ones(1, 1);
    for (Index l = 0; l < x.d(); ++l) {
        const TTCore& xc = x.core(l);
        const TTCore& yc = y.core(l);
        const Matrix z = env * yc.right();
        env = xc.left().transpose() * Eigen::Map<const Matrix>(z.data(), xc.r0 * xc.n, yc.r1);
    }
    return env(0, 0);
}

TTTensor tt_round(const TTTensor& x, double eps, std::optional<Index> max_rank) {
    if (!(eps >= 0.0)) throw ConfigError("tt_round: eps must be >= 0");
    TTTensor y = x;
    const Index d = y.d();
    if (d < 2) return y;
    y.orthogonalize(0);
    const double delta = eps / std::sqrt(static_cast<double>(d - 1)) * y.core(0).data.norm();
    for (Index l = 0; l + 1 < d; ++l) {
        TTCore& c = y.core(l);
        const Svd svd = thin_svd(c.left());
        const Index rk = keep_rank(svd.s, delta, max_rank, 1);
        TTCore nc(c.r0, c.n, rk);
        nc.left() = svd.u.leftCols(rk);
        const Matrix sv = svd.s.head(rk).asDiagonal() * svd.v.leftCols(rk).transpose();
        TTCore& nx = y.core(l + 1);
        TTCore next(rk, nx.n, nx.r1);
        next.right() = sv * nx.right();
        c = std::move(nc);
        nx = std::move(next);
    }
    return y;
}

// BlockTT

BlockTT::BlockTT(QttShape shape, std::vector<TTCore> cores, Index position, Index m0)
    : shape_(std::move(shape)), cores_(std::move(cores)), position_(position), m0_(m0) {
    if (shape_.d() < 1) throw DimensionError("BlockTT: shape must have at least one mode");
    if (m0_ < 1) throw ConfigError("BlockTT: m0 must be >= 1");
    if (position_ < 0 || position_ >= shape_.d()) throw ConfigError("BlockTT: block position out of range");
    std::vector<Index> mids = shape_.factors;
    mids[static_cast<std::size_t>(position_)] *= m0_;
    check_chain(cores_, mids, "BlockTT");
}

std::vector<Index> BlockTT::ranks() const { return bond_ranks(cores_); }

Index BlockTT::max_rank() const {
    const auto r = ranks();
    return r.empty() ? 1 : *std::max_element(r.begin(), r.end());
}

Index BlockTT::storage() const { return core_storage(cores_); }

double BlockTT::effective_rank() const { return d() < 2 ? 1.0 : bse::effective_rank(ranks(), shape_); }

TTTensor BlockTT::extract(Index m) const {
    if (m < 0 || m >= m0_) throw DimensionError("BlockTT::extract: member out of range");
    std::vector<TTCore> cores = cores_;
    const TTCore& b = core(position_);
    const Index q = shape_.factors[static_cast<std::size_t>(position_)];
    TTCore c(b.r0, q, b.r1);
    for (Index r1 = 0; r1 < b.r1; ++r1)
        for (Index i = 0; i < q; ++i)
            for (Index a = 0; a < b.r0; ++a) c(a, i, r1) = b.data[a + b.r0 * (i + q * (m + m0_ * r1))];
    cores[static_cast<std::size_t>(position_)] = std::move(c);
    return TTTensor(shape_, std::move(cores));
}

Matrix BlockTT::full() const {
    Matrix out(size(), m0_);
    for (Index m = 0; m < m0_; ++m) out.col(m) = extract(m).full();
    return out;
}

Matrix BlockTT::gram() const {
    std::vector<TTTensor> members;
    for (Index m = 0; m < m0_; ++m) members.push_back(extract(m));
    Matrix g(m0_, m0_);
    for (Index i = 0; i < m0_; ++i)
        for (Index j = 0; j <= i; ++j) g(i, j) = g(j, i) = tt_dot(members[i], members[j]);
    return g;
}

void BlockTT::orthogonalize() { orthogonalize_cores(cores_, position_); }

bool BlockTT::frame_orthonormal(double tol) const {
    for (Index l = 0; l < d(); ++l) {
        if (l == position_) continue;
        const TTCore& c = core(l);
        const double defect = l < position_ ? orth_defect(c.left().transpose() * c.left())
                                            : orth_defect(c.right() * c.right().transpose());
        if (defect > tol) return false;
    }
    return true;
}

BlockTT BlockTT::random(const QttShape& shape, Index m0, Index rank, Index position, std::uint64_t seed) {
    const Index d = shape.d();
    if (d < 1) throw ConfigError("BlockTT::random: shape must have at least one mode");
    if (m0 < 1 || rank < 1) throw ConfigError("BlockTT::random: m0 and rank must be >= 1");
    if (position < 0 || position >= d) throw ConfigError("BlockTT::random: block position out of range");
    const auto& q = shape.factors;
    std::vector<Index> r(static_cast<std::size_t>(d + 1), 1);
    for (Index l = 1; l < d; ++l) {
        const Index left = prod(q, 0, static_cast<std::size_t>(l)) * (position < l ? m0 : 1);
        const Index right = prod(q, static_cast<std::size_t>(l), q.size()) * (position >= l ? m0 : 1);
        r[static_cast<std::size_t>(l)] = std::min({rank, left, right});
    }
    Rng rng(seed);
    std::vector<TTCore> cores;
    for (Index l = 0; l < d; ++l) {
        const Index n = q[static_cast<std::size_t>(l)] * (l == position ? m0 : 1);
        TTCore c(r[static_cast<std::size_t>(l)], n, r[static_cast<std::size_t>(l + 1)]);
        for (Index k = 0; k < c.data.size(); ++k) c.data[k] = rng.normal();
        cores.push_back(std::move(c));
    }
    BlockTT u(shape, std::move(cores), position, m0);
    u.orthogonalize();
    Matrix cols = block_core_columns(u);
    if (cols.rows() >= m0) {
        Eigen::HouseholderQR<Matrix> qr(cols);
        cols = qr.householderQ() * Matrix::Identity(cols.rows(), m0);
    } else {
        cols /= cols.norm();
    }
    set_block_core_columns(u, cols);
    return u;
}

BlockTT BlockTT::from_columns(const MatrixRef& m, const QttShape& shape, double eps, std::optional<Index> max_rank) {
    if (m.rows() != shape.size()) throw DimensionError("BlockTT::from_columns: row count differs from the shape");
    const Index m0 = m.cols();
    if (m0 < 1) throw ConfigError("BlockTT::from_columns: need at least one column");
    QttShape ext = shape;
    ext.factors.push_back(m0);
    const Matrix dense = m;
    const TTTensor x = tt_svd(Eigen::Map<const Vector>(dense.data(), dense.size()), ext, eps, max_rank);
    std::vector<TTCore> cores(x.cores().begin(), x.cores().end() - 1);
    const TTCore& c = x.core(shape.d() - 1);
    const TTCore& e = x.core(shape.d());
    TTCore block(c.r0, c.n * m0, 1);
    Eigen::Map<Matrix>(block.data.data(), c.r0 * c.n, m0) = c.left() * e.right();
    cores.back() = std::move(block);
    return BlockTT(shape, std::move(cores), shape.d() - 1, m0);
}

BlockTT block_move(const BlockTT& u, Direction direction, const BlockMoveOptions& opts) {
    const Index pos = u.position();
    const Index m0 = u.m0();
    if (!(opts.eps >= 0.0)) throw ConfigError("block_move: eps must be >= 0");
    if (direction == Direction::Right && pos + 1 >= u.d()) throw ConfigError("block_move: no core right of the block");
    if (direction == Direction::Left && pos == 0) throw ConfigError("block_move: no core left of the block");
    std::vector<TTCore> cores = u.cores();
    const TTCore& b = u.core(pos);
    const Index q = u.shape().factors[static_cast<std::size_t>(pos)];

    if (direction == Direction::Right) {
        const Svd svd = thin_svd(Eigen::Map<const Matrix>(b.data.data(), b.r0 * q, m0 * b.r1));
        const Index rk = keep_rank(svd.s, opts.eps * svd.s.norm(), opts.max_rank, opts.min_rank);
        TTCore left(b.r0, q, rk);
        left.left() = svd.u.leftCols(rk);
        const Matrix sv = svd.s.head(rk).asDiagonal() * svd.v.leftCols(rk).transpose();
        const TTCore& nx = u.core(pos + 1);
        const Index qn = nx.n;
        const Matrix t = Eigen::Map<const Matrix>(sv.data(), rk * m0, b.r1) * nx.right();
        TTCore block(rk, qn * m0, nx.r1);
        for (Index e = 0; e < nx.r1; ++e)
            for (Index m = 0; m < m0; ++m)
                for (Index i = 0; i < qn; ++i)
                    for (Index c = 0; c < rk; ++c)
                        block.data[c + rk * (i + qn * (m + m0 * e))] = t(c + rk * m, i + qn * e);
        cores[static_cast<std::size_t>(pos)] = std::move(left);
        cores[static_cast<std::size_t>(pos + 1)] = std::move(block);
        return BlockTT(u.shape(), std::move(cores), pos + 1, m0);
    }

    Matrix x(b.r0 * m0, q * b.r1);
    for (Index e = 0; e < b.r1; ++e)
        for (Index m = 0; m < m0; ++m)
            for (Index i = 0; i < q; ++i)
                for (Index a = 0; a < b.r0; ++a) x(a + b.r0 * m, i + q * e) = b.data[a + b.r0 * (i + q * (m + m0 * e))];
    const Svd svd = thin_svd(x);
    const Index rk = keep_rank(svd.s, opts.eps * svd.s.norm(), opts.max_rank, opts.min_rank);
    TTCore right(rk, q, b.r1);
    right.right() = svd.v.leftCols(rk).transpose();
    const Matrix us = svd.u.leftCols(rk) * svd.s.head(rk).asDiagonal();
    const TTCore& pv = u.core(pos - 1);
    TTCore block(pv.r0, pv.n * m0, rk);
    Eigen::Map<Matrix>(block.data.data(), pv.r0 * pv.n, m0 * rk) =
        pv.left() * Eigen::Map<const Matrix>(us.data(), b.r0, m0 * rk);
    cores[static_cast<std::size_t>(pos)] = std::move(right);
    cores[static_cast<std::size_t>(pos - 1)] = std::move(block);
    return BlockTT(u.shape(), std::move(cores), pos - 1, m0);
}

Matrix block_core_columns(const BlockTT& u) {
    const TTCore& b = u.core(u.position());
    const Index q = u.shape().factors[static_cast<std::size_t>(u.position())];
    const Index m0 = u.m0();
    Matrix out(b.r0 * q * b.r1, m0);
    for (Index e = 0; e < b.r1; ++e)
        for (Index m = 0; m < m0; ++m)
            for (Index i = 0; i < q; ++i)
                for (Index a = 0; a < b.r0; ++a)
                    out(a + b.r0 * (i + q * e), m) = b.data[a + b.r0 * (i + q * (m + m0 * e))];
    return out;
}

void set_block_core_columns(BlockTT& u, const MatrixRef& columns) {
    TTCore& b = u.core(u.position());
    const Index q = u.shape().factors[static_cast<std::size_t>(u.position())];
    const Index m0 = u.m0();
    if (columns.rows() != b.r0 * q * b.r1 || columns.cols() != m0)
        throw DimensionError("set_block_core_columns: block size mismatch");
    for (Index e = 0; e < b.r1; ++e)
        for (Index m = 0; m < m0; ++m)
            for (Index i = 0; i < q; ++i)
                for (Index a = 0; a < b.r0; ++a)
                    b.data[a + b.r0 * (i + q * (m + m0 * e))] = columns(a + b.r0 * (i + q * e), m);
}

// Serialization

namespace {

std::string encode(const char* kind, const QttShape& shape, const std::vector<TTCore>& cores, Index position,
                   Index m0) {
    nlohmann::json manifest;
    manifest["format"] = "BSETT1";
    manifest["kind"] = kind;
    manifest["dims"] = shape.factors;
    manifest["ranks"] = bond_ranks(cores);
    manifest["block_position"] = position;
    manifest["m0"] = m0;
    manifest["cores"] = nlohmann::json::array();
    for (const TTCore& c : cores) manifest["cores"].push_back({c.r0, c.n, c.r1});
    const std::string text = manifest.dump();
    std::string out(kMagic);
    binio::put_u64(out, text.size());
    out += text;
    for (const TTCore& c : cores) binio::put_array(out, c.data.data(), c.data.size());
    return out;
}

struct Decoded {
    std::string kind;
    QttShape shape;
    std::vector<TTCore> cores;
    Index position = 0;
    Index m0 = 1;
};

Decoded decode(std::string_view bytes, const char* expected_kind) {
    using Kind = FormatError::Kind;
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
        throw FormatError(Kind::UnknownMagic, "BSETT1: unknown magic (expected 'BSETTEN1')");
    if (bytes.size() < kMagic.size() + 8) throw FormatError(Kind::MalformedHeader, "BSETT1: missing manifest length");
    const std::uint64_t len = binio::get_u64(bytes, kMagic.size());
    const std::size_t header_end = kMagic.size() + 8;
    if (len > bytes.size() - header_end)
        throw FormatError(Kind::MalformedHeader, "BSETT1: manifest length exceeds file size");
    Decoded out;
    std::uint64_t payload = 0;
    try {
        const auto manifest = nlohmann::json::parse(bytes.substr(header_end, len));
        out.kind = manifest.at("kind").get<std::string>();
        out.shape.factors = manifest.at("dims").get<std::vector<Index>>();
        out.position = manifest.at("block_position").get<Index>();
        out.m0 = manifest.at("m0").get<Index>();
        for (const auto& c : manifest.at("cores")) {
            const auto dims = c.get<std::vector<Index>>();
            if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
                throw FormatError(Kind::MalformedHeader, "BSETT1: core entries must be three positive sizes");
            out.cores.emplace_back(dims[0], dims[1], dims[2]);
            payload += static_cast<std::uint64_t>(dims[0] * dims[1] * dims[2]) * 8u;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::MalformedHeader, std::string("BSETT1: malformed manifest: ") + e.what());
    }
    if (out.kind != expected_kind)
        throw FormatError(Kind::MalformedHeader, "BSETT1: container holds a " + out.kind + ", expected " +
                                                     expected_kind);
    std::size_t offset = header_end + len;
    const std::uint64_t available = bytes.size() - offset;
    if (available < payload) throw FormatError(Kind::TruncatedPayload, "BSETT1: core payload truncated");
    if (available > payload) throw FormatError(Kind::MalformedHeader, "BSETT1: trailing bytes after payload");
    for (TTCore& c : out.cores) binio::get_array(bytes, offset, c.data.data(), c.data.size());
    return out;
}

template <class T, class F>
T wrap_dimension_errors(F&& make) {
    try {
        return make();
    } catch (const DimensionError& e) {
        throw FormatError(FormatError::Kind::DimensionMismatch, std::string("BSETT1: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(FormatError::Kind::DimensionMismatch, std::string("BSETT1: ") + e.what());
    }
}

} // namespace

std::string serialize(const TTTensor& x) { return encode("tensor", x.shape(), x.cores(), 0, 1); }
std::string serialize(const TTMatrix& a) { return encode("matrix", a.shape(), a.cores(), 0, 1); }
std::string serialize(const BlockTT& u) { return encode("block", u.shape(), u.cores(), u.position(), u.m0()); }

TTTensor deserialize_tensor(std::string_view bytes) {
    Decoded d = decode(bytes, "tensor");
    return wrap_dimension_errors<TTTensor>([&] { return TTTensor(std::move(d.shape), std::move(d.cores)); });
}

TTMatrix deserialize_matrix(std::string_view bytes) {
    Decoded d = decode(bytes, "matrix");
    return wrap_dimension_errors<TTMatrix>([&] { return TTMatrix(std::move(d.shape), std::move(d.cores)); });
}

BlockTT deserialize_block(std::string_view bytes) {
    Decoded d = decode(bytes, "block");
    return wrap_dimension_errors<BlockTT>(
        [&] { return BlockTT(std::move(d.shape), std::move(d.cores), d.position, d.m0); });
}

void save(const BlockTT& u, const std::filesystem::path& path) { binio::write_file(path, serialize(u)); }

BlockTT load_block(const std::filesystem::path& path) { return deserialize_block(binio::read_file(path)); }

} // namespace bse
