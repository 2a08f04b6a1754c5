#include "doctest.h"

#include "bse/dmrg.hpp"
#include "bse/errors.hpp"
#include "bse/lowrank.hpp"
#include "oracles.hpp"

using namespace bse;

namespace {

ProblemInstance instance(Index n_o, Index n_v, Index r_v, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_o = n_o;
    cfg.n_v = n_v;
    cfg.r_v = r_v;
    cfg.seed = seed;
    return synthesize(cfg);
}

ProblemInstance diagonal_only(ProblemInstance inst) {
    inst.l_v.setZero();
    inst.w_bar.setZero();
    inst.w_til.setZero();
    return inst;
}

/// Explicit frame matrix: the block core replaced by every unit local vector.
Matrix dense_frame(const BlockTT& u) {
    const Index pos = u.position();
    const TTCore& b = u.core(pos);
    const Index q = u.shape().factors[static_cast<std::size_t>(pos)];
    const Index n_loc = b.r0 * q * b.r1;
    std::vector<TTCore> cores = u.cores();
    cores[static_cast<std::size_t>(pos)] = TTCore(b.r0, q * n_loc, b.r1);
    BlockTT unit(u.shape(), std::move(cores), pos, n_loc);
    set_block_core_columns(unit, Matrix::Identity(n_loc, n_loc));
    return unit.full();
}

Vector relative_errors(const Vector& values, const Vector& exact) {
    return ((values - exact).array().abs() / exact.array().abs()).matrix();
}

} // namespace

TEST_CASE("QTT grid lists virtual factors first and rejects large primes") {
    CHECK(dmrg_shape(4, 16) == QttShape{{2, 2, 2, 2, 2, 2}});
    CHECK(dmrg_shape(3, 4) == QttShape{{2, 2, 3}});
    CHECK(dmrg_shape(1, 7) == QttShape{{7}});
    CHECK_THROWS_AS(dmrg_shape(4, 11), ConfigError);
    try {
        dmrg_shape(13, 4);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("pad") != std::string::npos);
    }
}

TEST_CASE("transition energies compress to TT ranks below ten") {
    for (const auto& [n_o, n_v] : std::vector<std::pair<Index, Index>>{{4, 16}, {8, 32}, {16, 16}, {2, 256}, {16, 64}}) {
        const DmrgOperator op = build_operator(diagonal_only(instance(n_o, n_v, 1, 3)), 0.1);
        for (Index r : op.deps_tt.ranks()) CHECK(r <= 10);
        const Vector de = energy_diagonal(instance(n_o, n_v, 1, 3)).values();
        CHECK((op.deps_full - de).norm() <= kDepsTolerance * de.norm());
    }
}

TEST_CASE("unfolded operator matches the dense TDA matrix within the compression budget") {
    const double eps = 0.1;
    const ProblemInstance inst = instance(4, 16, 6, 5);
    const DmrgOperator op = build_operator(inst, eps);
    const Matrix a = exact_a_dense(inst);
    const double lv2 = inst.l_v.squaredNorm();
    const double budget = kDepsTolerance * energy_diagonal(inst).values().norm() + (2.0 * eps + eps * eps) * lv2 +
                          eps * inst.w_bar.norm();
    CHECK((op.dense() - a).norm() <= budget);
    const Vector x = oracle::random_matrix(64, 1, 6).col(0);
    CHECK((op.apply(x) - op.dense() * x).norm() < 1e-12 * x.norm());
    CHECK(op.storage() == op.deps_tt.storage() + op.lv_btt.storage() + op.w_tt.storage());
    CHECK(op.lv_btt.position() == op.shape.d() - 1);
}

TEST_CASE("local matrix equals the explicit frame projection") {
    const ProblemInstance inst = instance(4, 16, 4, 7);
    const DmrgOperator op = build_operator(inst, 0.05);
    const Matrix a = op.dense();
    for (Index pos = 0; pos < op.shape.d(); ++pos) {
        const BlockTT u = BlockTT::random(op.shape, 3, 5, pos, 100 + static_cast<std::uint64_t>(pos));
        const Matrix f = dense_frame(u);
        CHECK((f.transpose() * f - Matrix::Identity(f.cols(), f.cols())).cwiseAbs().maxCoeff() < 1e-12);
        const Matrix local = assemble_local(op, u);
        CHECK(local.rows() == f.cols());
        CHECK((local - f.transpose() * a * f).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((local - local.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("a single-core grid projects onto the full TDA matrix") {
    const ProblemInstance inst = instance(1, 7, 2, 8);
    const DmrgOperator op = build_operator(inst, 1e-3);
    const BlockTT u = BlockTT::random(op.shape, 2, 1, 0, 9);
    CHECK((assemble_local(op, u) - op.dense()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("diagonal operator is solved exactly") {
    ProblemInstance inst = diagonal_only(instance(4, 16, 1, 1));
    inst.eps_occ = Vector{{-48.0, -32.0, -16.0, 0.0}};
    for (Index a = 0; a < 16; ++a) inst.eps_virt[a] = 1.0 + static_cast<double>(a);
    const DmrgOperator op = build_operator(inst, 0.1);
    for (const std::uint64_t seed : {1u, 2u, 3u, 0x5eedu}) {
        DmrgOptions opts;
        opts.m0 = 4;
        opts.seed = seed;
        opts.eps = 0.0;
        opts.sweeps = 1;
        const DmrgResult r = dmrg_eig(op, opts);
        for (Index k = 0; k < 4; ++k) CHECK(std::abs(r.result.values[k] - static_cast<double>(k + 1)) < 1e-12);
        opts.eps = 0.1;
        opts.sweeps = 2;
        const DmrgResult t = dmrg_eig(op, opts);
        for (Index k = 0; k < 4; ++k) CHECK(std::abs(t.result.values[k] - static_cast<double>(k + 1)) < 1e-12);
    }
}

TEST_CASE("two half-sweeps reach the squared-threshold accuracy at N_ov = 256") {
    const double eps = 0.1;
    const ProblemInstance inst = instance(8, 32, 8, 1);
    const Matrix a = exact_a_dense(inst);
    const std::vector<double> all = oracle::symmetric_eigenvalues(a);
    const Vector exact = Eigen::Map<const Vector>(all.data(), 10);
    const DmrgOperator op = build_operator(inst, eps);

    DmrgOptions opts;
    opts.m0 = 10;
    opts.eps = eps;
    opts.sweeps = 1;
    const DmrgResult one = dmrg_eig(op, opts);
    opts.sweeps = 2;
    const DmrgResult two = dmrg_eig(op, opts);

    const double err1 = relative_errors(one.result.values, exact).maxCoeff();
    const double err2 = relative_errors(two.result.values, exact).maxCoeff();
    CHECK(err2 <= eps * eps);
    CHECK(err1 >= err2);
    CHECK(two.sweeps.size() == 2);
    CHECK(two.result.iterations == 2);
    CHECK(two.u.frame_orthonormal(1e-10));
    CHECK(two.u.position() == 0);

    // Residuals against the uncompressed operator.
    for (Index k = 0; k < 10; ++k) {
        const Vector v = two.u.extract(k).full();
        CHECK((a * v - two.result.values[k] * v).norm() / v.norm() <= 10.0 * eps * eps);
    }

    // Ritz sums move up only by truncation, bounded by eps ||A|| per move.
    const double norm_a = std::max(std::abs(all.front()), std::abs(all.back()));
    for (std::size_t k = 1; k < two.ritz_sums.size(); ++k) CHECK(two.ritz_sums[k] <= two.ritz_sums[k - 1] + eps * norm_a);

    const auto tel = two.telemetry();
    REQUIRE(tel.size() == 2);
    for (const auto& s : tel) {
        CHECK(s.at("ritz").size() == 10);
        CHECK(s.at("memory_ratio").get<double>() > 0.0);
        CHECK(s.at("max_local_size").get<Index>() >= 10);
        CHECK(s.contains("effective_rank"));
        CHECK(s.contains("wall_time"));
    }
}

TEST_CASE("dmrg reports guard and size violations") {
    const DmrgOperator op = build_operator(instance(4, 16, 4, 2), 0.1);
    DmrgOptions opts;
    opts.local_guard = 8;
    CHECK_THROWS_AS(dmrg_eig(op, opts), GuardError);
    DmrgOptions tiny;
    tiny.m0 = 10;
    tiny.initial_rank = 1;
    CHECK_THROWS_AS(dmrg_eig(op, tiny), ConfigError);
    DmrgOptions none;
    none.sweeps = 0;
    CHECK_THROWS_AS(dmrg_eig(op, none), ConfigError);
    CHECK_THROWS_AS(build_operator(instance(4, 11, 2, 1), 0.1), ConfigError);
}
