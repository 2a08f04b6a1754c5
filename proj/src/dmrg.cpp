#include "bse/dmrg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "bse/errors.hpp"

namespace bse {

namespace {

/// Environment of a TT matrix between two copies of the state, element
/// (a, alpha, a') at a + r * (alpha + R * a'), r the state rank and R the operator rank.
struct OpEnv {
    Index r = 1;
    Index rank = 1;
    Vector data = Vector::Ones(1);

    double operator()(Index a, Index alpha, Index ap) const { return data[a + r * (alpha + rank * ap)]; }
};

OpEnv left_update(const OpEnv& env, const TTCore& u, const TTCore& h) {
    const Index r0 = u.r0, q = u.n, r1 = u.r1, h0 = h.r0, h1 = h.r1;
    const Matrix t1 = Eigen::Map<const Matrix>(env.data.data(), r0 * h0, r0) * u.right();
    Matrix t2 = Matrix::Zero(r0 * q, h1 * r1);
    for (Index bp = 0; bp < r1; ++bp)
        for (Index beta = 0; beta < h1; ++beta)
            for (Index j = 0; j < q; ++j)
                for (Index alpha = 0; alpha < h0; ++alpha)
                    for (Index i = 0; i < q; ++i) {
                        const double hv = h(alpha, i + q * j, beta);
                        if (hv == 0.0) continue;
                        t2.col(beta + h1 * bp).segment(r0 * i, r0) += hv * t1.col(j + q * bp).segment(r0 * alpha, r0);
                    }
    OpEnv out;
    out.r = r1;
    out.rank = h1;
    const Matrix res = u.left().transpose() * t2;
    out.data = Eigen::Map<const Vector>(res.data(), res.size());
    return out;
}

OpEnv right_update(const OpEnv& env, const TTCore& u, const TTCore& h) {
    const Index r0 = u.r0, q = u.n, r1 = u.r1, h0 = h.r0, h1 = h.r1;
    const Matrix t1 = Eigen::Map<const Matrix>(env.data.data(), r1 * h1, r1) * u.left().transpose();
    Matrix t2 = Matrix::Zero(q * r1, h0 * r0);
    for (Index ap = 0; ap < r0; ++ap)
        for (Index alpha = 0; alpha < h0; ++alpha)
            for (Index beta = 0; beta < h1; ++beta)
                for (Index j = 0; j < q; ++j)
                    for (Index i = 0; i < q; ++i) {
                        const double hv = h(alpha, i + q * j, beta);
                        if (hv == 0.0) continue;
                        const auto src = t1.col(ap + r0 * j).segment(r1 * beta, r1);
                        auto dst = t2.col(alpha + h0 * ap);
                        for (Index b = 0; b < r1; ++b) dst[i + q * b] += hv * src[b];
                    }
    OpEnv out;
    out.r = r0;
    out.rank = h0;
    const Matrix res = u.right() * t2;
    out.data = Eigen::Map<const Vector>(res.data(), res.size());
    return out;
}

/// Local block sum_beta R_beta (x) G_beta with G_beta = sum_alpha L_alpha H(alpha, ., ., beta).
void add_local(Matrix& m, const OpEnv& left, const TTCore& h, const OpEnv& right, double scale) {
    const Index r0 = left.r, r1 = right.r, q = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(h.n))));
    const Index h0 = h.r0, h1 = h.r1, blk = r0 * q;
    Matrix g(blk, blk);
    for (Index beta = 0; beta < h1; ++beta) {
        g.setZero();
        for (Index j = 0; j < q; ++j)
            for (Index i = 0; i < q; ++i)
                for (Index alpha = 0; alpha < h0; ++alpha) {
                    const double hv = h(alpha, i + q * j, beta);
                    if (hv == 0.0) continue;
                    for (Index ap = 0; ap < r0; ++ap)
                        g.col(ap + r0 * j).segment(r0 * i, r0) +=
                            hv * Eigen::Map<const Vector>(left.data.data() + r0 * (alpha + h0 * ap), r0);
                }
        for (Index bp = 0; bp < r1; ++bp)
            for (Index b = 0; b < r1; ++b) {
                const double rv = right(b, beta, bp);
                if (rv != 0.0) m.block(blk * b, blk * bp, blk, blk) += (scale * rv) * g;
            }
    }
}

/// L_V chain: cores of lv_btt with the last core read as an open right rank R_V.
std::vector<TTCore> lv_chain(const BlockTT& lv) {
    std::vector<TTCore> cores = lv.cores();
    TTCore& last = cores.back();
    const Index q = lv.shape().factors.back();
    TTCore open(last.r0, q, lv.m0());
    open.data = last.data;
    last = std::move(open);
    return cores;
}

/// Left L_V environment: r_u x r_y matrix.
Matrix lv_left_update(const Matrix& env, const TTCore& u, const TTCore& y) {
    const Matrix z = env * y.right();
    return u.left().transpose() * Eigen::Map<const Matrix>(z.data(), u.r0 * u.n, y.r1);
}

/// Right L_V environment: one r_u x r_y matrix per column k of L_V.
std::vector<Matrix> lv_right_update(const std::vector<Matrix>& env, const TTCore& u, const TTCore& y) {
    const Index q = u.n;
    std::vector<Matrix> out;
    out.reserve(env.size());
    Matrix yi(y.r0, y.r1);
    Matrix f(q * u.r1, y.r0);
    for (const Matrix& e : env) {
        for (Index i = 0; i < q; ++i) {
            for (Index c = 0; c < y.r1; ++c)
                for (Index cp = 0; cp < y.r0; ++cp) yi(cp, c) = y(cp, i, c);
            const Matrix ey = e * yi.transpose();
            for (Index b = 0; b < u.r1; ++b) f.row(i + q * b) = ey.row(b);
        }
        out.push_back(u.right() * f);
    }
    return out;
}

/// Environments of every bond for the three operator components.
struct Environments {
    std::vector<OpEnv> dl, dr, wl, wr;
    std::vector<Matrix> ll;
    std::vector<std::vector<Matrix>> lr;
};

struct Context {
    const DmrgOperator& op;
    std::vector<TTCore> lv;
    Index d;

    explicit Context(const DmrgOperator& o) : op(o), lv(lv_chain(o.lv_btt)), d(o.shape.d()) {}

    Environments boundary() const {
        Environments e;
        const auto sz = static_cast<std::size_t>(d + 1);
        e.dl.resize(sz);
        e.dr.resize(sz);
        e.wl.resize(sz);
        e.wr.resize(sz);
        e.ll.assign(sz, Matrix::Ones(1, 1));
        e.lr.resize(sz);
        const Index rv = op.lv_btt.m0();
        e.lr[static_cast<std::size_t>(d)].assign(static_cast<std::size_t>(rv), Matrix::Zero(1, rv));
        for (Index k = 0; k < rv; ++k) e.lr[static_cast<std::size_t>(d)][static_cast<std::size_t>(k)](0, k) = 1.0;
        return e;
    }

    void update_left(Environments& e, const BlockTT& u, Index l) const {
        const auto s = static_cast<std::size_t>(l);
        e.dl[s + 1] = left_update(e.dl[s], u.core(l), op.deps_tt.core(l));
        e.wl[s + 1] = left_update(e.wl[s], u.core(l), op.w_tt.core(l));
        e.ll[s + 1] = lv_left_update(e.ll[s], u.core(l), lv[s]);
    }

    void update_right(Environments& e, const BlockTT& u, Index l) const {
        const auto s = static_cast<std::size_t>(l);
        e.dr[s] = right_update(e.dr[s + 1], u.core(l), op.deps_tt.core(l));
        e.wr[s] = right_update(e.wr[s + 1], u.core(l), op.w_tt.core(l));
        e.lr[s] = lv_right_update(e.lr[s + 1], u.core(l), lv[s]);
    }

    Environments build(const BlockTT& u) const {
        Environments e = boundary();
        for (Index l = 0; l < u.position(); ++l) update_left(e, u, l);
        for (Index l = d - 1; l > u.position(); --l) update_right(e, u, l);
        return e;
    }

    Matrix local(const Environments& e, const BlockTT& u) const {
        const Index l = u.position();
        const auto s = static_cast<std::size_t>(l);
        const TTCore& b = u.core(l);
        const Index q = op.shape.factors[s];
        const Index r0 = b.r0, r1 = b.r1, n = r0 * q * r1;
        Matrix m = Matrix::Zero(n, n);
        add_local(m, e.dl[s], op.deps_tt.core(l), e.dr[s + 1], 1.0);
        add_local(m, e.wl[s], op.w_tt.core(l), e.wr[s + 1], -1.0);

        const Matrix z = e.ll[s] * lv[s].right();
        const auto zm = Eigen::Map<const Matrix>(z.data(), r0 * q, lv[s].r1);
        const auto& right = e.lr[s + 1];
        Matrix proj(n, static_cast<Index>(right.size()));
        for (std::size_t k = 0; k < right.size(); ++k) {
            const Matrix col = zm * right[k].transpose();
            proj.col(static_cast<Index>(k)) = Eigen::Map<const Vector>(col.data(), n);
        }
        m.noalias() += proj * proj.transpose();
        return 0.5 * (m + m.transpose());
    }
};

Index local_size(const BlockTT& u) {
    const TTCore& b = u.core(u.position());
    return b.r0 * u.shape().factors[static_cast<std::size_t>(u.position())] * b.r1;
}

} // namespace

Vector DmrgOperator::apply(const VectorRef& x) const {
    if (x.size() != n_ov()) throw DimensionError("DmrgOperator: vector length differs from N_ov");
    Vector y = deps_full.cwiseProduct(x);
    y.noalias() += lv_full * (lv_full.transpose() * x);
    y.noalias() -= w_full * x;
    return y;
}

Matrix DmrgOperator::dense() const {
    Matrix m = lv_full * lv_full.transpose() - w_full;
    m.diagonal() += deps_full;
    return m;
}

QttShape dmrg_shape(Index n_o, Index n_v) {
    const QttShape s = concat(prime_factorize(n_v), prime_factorize(n_o));
    for (Index q : s.factors)
        if (q > kMaxQttFactor)
            throw ConfigError("qtt-dmrg: N_ov has the prime factor " + std::to_string(q) +
                              " (above " + std::to_string(kMaxQttFactor) +
                              "); pad n_o or n_v to a size with small prime factors");
    if (s.d() < 1) throw ConfigError("qtt-dmrg: N_ov must be at least 2");
    return s;
}

DmrgOperator build_operator(const ProblemInstance& inst, double eps) {
    if (!(eps > 0.0)) throw ConfigError("qtt-dmrg: eps must be positive");
    DmrgOperator op;
    op.shape = dmrg_shape(inst.n_o, inst.n_v);
    const Index n = op.shape.size();
    if (n * n > kTTDenseGuard)
        throw GuardError("qtt-dmrg: N_ov = " + std::to_string(n) + " exceeds the desk-scale limit of 1024");
    op.eps = eps;
    const Vector de = energy_diagonal(inst).values();
    const TTTensor de_tt = tt_svd(de, op.shape, kDepsTolerance);
    op.deps_tt = TTMatrix::diagonal(de_tt);
    op.lv_btt = BlockTT::from_columns(inst.l_v, op.shape, eps);
    op.w_tt = tt_matrix(inst.w_bar, op.shape, eps);
    op.deps_full = de_tt.full();
    op.lv_full = op.lv_btt.full();
    op.w_full = op.w_tt.full();
    return op;
}

Matrix assemble_local(const DmrgOperator& op, const BlockTT& u) {
    if (u.shape() != op.shape) throw DimensionError("assemble_local: state and operator shapes differ");
    if (!u.frame_orthonormal(1e-10)) throw ConfigError("assemble_local: the frame is not orthonormal");
    const Context ctx(op);
    return ctx.local(ctx.build(u), u);
}

nlohmann::json DmrgResult::telemetry() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : sweeps)
        j.push_back({{"sweep", s.sweep},
                     {"ritz", s.ritz},
                     {"max_local_size", s.max_local_size},
                     {"max_rank", s.max_rank},
                     {"effective_rank", s.effective_rank},
                     {"memory_ratio", s.memory_ratio},
                     {"wall_time", s.wall_time}});
    return j;
}

DmrgResult dmrg_eig(const DmrgOperator& op, const DmrgOptions& opts) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const Index d = op.shape.d();
    const Index n = op.n_ov();
    if (opts.m0 < 1 || opts.m0 > n) throw ConfigError("qtt-dmrg: m0 must lie in [1, N_ov]");
    if (opts.sweeps < 1) throw ConfigError("qtt-dmrg: at least one half-sweep is required");
    if (!(opts.eps >= 0.0)) throw ConfigError("qtt-dmrg: eps must be >= 0");

    const Context ctx(op);
    const Index init_rank = opts.initial_rank > 0 ? opts.initial_rank : opts.m0;
    BlockTT u = BlockTT::random(op.shape, opts.m0, std::min(init_rank, opts.rank_cap), 0, opts.seed);
    Environments env = ctx.build(u);

    DmrgResult out;
    Vector ritz;
    bool fresh = false; // the block core already holds the solution of its local problem
    double previous_sum = std::numeric_limits<double>::infinity();

    for (Index sweep = 0; sweep < opts.sweeps; ++sweep) {
        const auto ts = clock::now();
        const Direction dir = sweep % 2 == 0 ? Direction::Right : Direction::Left;
        SweepTelemetry tel;
        tel.sweep = sweep + 1;
        while (true) {
            if (!fresh) {
                const Index size = local_size(u);
                if (size > opts.local_guard)
                    throw GuardError("qtt-dmrg: local problem of size " + std::to_string(size) +
                                     " exceeds the guard of " + std::to_string(opts.local_guard) +
                                     "; lower the rank cap");
                if (size < opts.m0)
                    throw ConfigError("qtt-dmrg: local problem of size " + std::to_string(size) +
                                      " cannot hold m0 = " + std::to_string(opts.m0) + " vectors");
                tel.max_local_size = std::max(tel.max_local_size, size);
                const Matrix m = ctx.local(env, u);
                Eigen::SelfAdjointEigenSolver<Matrix> es(m);
                ritz = es.eigenvalues().head(opts.m0);
                set_block_core_columns(u, es.eigenvectors().leftCols(opts.m0));
                out.ritz_sums.push_back(ritz.sum());
                fresh = true;
            }
            const Index pos = u.position();
            const bool at_end = dir == Direction::Right ? pos + 1 == d : pos == 0;
            if (at_end) break;

            BlockMoveOptions mv;
            mv.eps = opts.eps / std::sqrt(static_cast<double>(opts.m0));
            mv.max_rank = opts.rank_cap;
            if (dir == Direction::Right) {
                const TTCore& next = u.core(pos + 1);
                mv.min_rank = (opts.m0 + next.n * next.r1 - 1) / (next.n * next.r1);
                u = block_move(u, dir, mv);
                ctx.update_left(env, u, pos);
            } else {
                const TTCore& prev = u.core(pos - 1);
                mv.min_rank = (opts.m0 + prev.r0 * prev.n - 1) / (prev.r0 * prev.n);
                u = block_move(u, dir, mv);
                ctx.update_right(env, u, pos);
            }
            fresh = false;
        }
        tel.ritz.assign(ritz.data(), ritz.data() + ritz.size());
        tel.max_rank = u.max_rank();
        tel.effective_rank = u.effective_rank();
        tel.memory_ratio = static_cast<double>(u.storage()) / static_cast<double>(n * opts.m0);
        tel.wall_time = std::chrono::duration<double>(clock::now() - ts).count();
        out.sweeps.push_back(tel);
        const double sum = ritz.sum();
        if (sweep > 0 && !(sum < previous_sum)) out.stagnated = true;
        previous_sum = sum;
    }

    EigenResult& r = out.result;
    r.method = "qtt-dmrg";
    r.values = ritz;
    r.iterations = opts.sweeps;
    r.restarts = 0;
    r.tol = std::max(10.0 * opts.eps * opts.eps, 1e-10);
    r.vectors = u.full();
    canonicalize_columns(r.vectors);
    r.residuals.resize(opts.m0);
    for (Index k = 0; k < opts.m0; ++k) {
        const Vector v = r.vectors.col(k);
        r.residuals[k] = (op.apply(v) - ritz[k] * v).norm() / (std::abs(ritz[k]) * v.norm());
    }
    r.converged = r.residuals.maxCoeff() <= r.tol;
    r.residual_history.push_back(r.residuals.maxCoeff());
    out.u = std::move(u);
    r.wall_time = std::chrono::duration<double>(clock::now() - t0).count();
    return out;
}

} // namespace bse
