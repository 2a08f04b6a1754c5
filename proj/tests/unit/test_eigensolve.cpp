#include "doctest.h"

#include "bse/eigensolve.hpp"
#include "bse/errors.hpp"
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

KrylovOptions options(Index m0) {
    KrylovOptions o;
    o.m0 = m0;
    return o;
}

double max_rel_err(const Vector& a, const Vector& b) {
    REQUIRE(a.size() == b.size());
    return ((a - b).array().abs() / b.array().abs()).maxCoeff();
}

} // namespace

TEST_CASE("dense oracle on a diagonal matrix") {
    const Matrix d = Vector{{3.0, 1.0, 5.0, 2.0, 4.0}}.asDiagonal();
    const EigenResult r = dense_eig_oracle(d);
    for (Index i = 0; i < 5; ++i) CHECK(r.values[i] == doctest::Approx(i + 1.0));
    CHECK(r.vectors(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("dense oracle: blockdiag(A, -A) spectrum is symmetric about zero") {
    const Matrix a0 = oracle::random_matrix(15, 15, 3);
    const Matrix a = a0 + a0.transpose() + 40.0 * Matrix::Identity(15, 15);
    Matrix f = Matrix::Zero(30, 30);
    f.topLeftCorner(15, 15) = a;
    f.bottomRightCorner(15, 15) = -a;
    const Vector ev = dense_eig_oracle(f).values;
    for (Index i = 0; i < 30; ++i) CHECK(ev[i] == doctest::Approx(-ev[29 - i]).epsilon(1e-12));
}

TEST_CASE("dense oracle agrees with Sturm bisection on a random symmetric 30x30") {
    const Matrix m0 = oracle::random_matrix(30, 30, 77);
    const Matrix m = 0.5 * (m0 + m0.transpose());
    const Vector ev = dense_eig_oracle(m).values;
    const std::vector<double> ref = oracle::symmetric_eigenvalues(m);
    for (Index i = 0; i < 30; ++i) CHECK(std::abs(ev[i] - ref[static_cast<std::size_t>(i)]) <= 1e-8);
}

TEST_CASE("dense oracle with a metric solves the generalized problem") {
    const Matrix x = oracle::random_matrix(8, 8, 5);
    const Matrix s = x * x.transpose() + 8.0 * Matrix::Identity(8, 8);
    const Matrix y = oracle::random_matrix(8, 8, 6);
    const Matrix m = y + y.transpose();
    const EigenResult sym = dense_eig_oracle(m, &s);
    for (Index j = 0; j < 8; ++j) CHECK(sym.residuals[j] <= 1e-10);
    const Matrix nonsym = m + 0.01 * oracle::random_matrix(8, 8, 7);
    const EigenResult gen = dense_eig_oracle(nonsym, &s);
    CHECK(gen.values.size() == 8);
}

TEST_CASE("dense oracle refuses matrices above the size guard") {
    CHECK_THROWS_AS(dense_eig_oracle(Matrix::Zero(kDenseOracleGuard + 1, kDenseOracleGuard + 1)), GuardError);
}

TEST_CASE("shift-invert Lanczos on a diagonal operator") {
    Vector d(10);
    for (Index i = 0; i < 10; ++i) d[i] = static_cast<double>(10 - i);
    const TdaInverse inv = precompute_tda(DiagPlusLowRank(d, LowRankMatrix::zero(10, 10)));
    const EigenResult r = shift_invert_tda(inv, options(3));
    CHECK(r.converged);
    CHECK(r.values[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.values[1] == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(r.values[2] == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("shift-invert TDA: nesting, oracle agreement, residuals and Ritz bounds") {
    const ProblemInstance inst = instance(4, 50, 6, 5);
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const TdaInverse inv = precompute_tda(*aux.a0);
    const EigenResult r3 = shift_invert_tda(inv, options(3));
    const EigenResult r5 = shift_invert_tda(inv, options(5));
    REQUIRE(r3.converged);
    REQUIRE(r5.converged);
    for (Index i = 0; i < 3; ++i) CHECK(std::abs(r3.values[i] - r5.values[i]) <= 1e-8 * r5.values[i]);

    const Vector ref = dense_eig_oracle(aux.a0->dense()).values;
    CHECK(max_rel_err(r5.values, ref.head(5)) <= 1e-8);
    for (Index i = 0; i < 5; ++i) {
        CHECK(r5.residuals[i] <= 1e-8);
        CHECK(r5.values[i] >= ref[0] - 1e-12);
        CHECK(r5.values[i] <= ref[ref.size() - 1] + 1e-12);
    }
    // Unit norm, first nonzero entry positive.
    for (Index j = 0; j < 5; ++j) {
        CHECK(r5.vectors.col(j).norm() == doctest::Approx(1.0));
        Index first = 0;
        while (std::abs(r5.vectors(first, j)) < 1e-12) ++first;
        CHECK(r5.vectors(first, j) > 0.0);
    }
}

TEST_CASE("restart residuals decrease monotonically on the symmetric path") {
    for (std::uint64_t seed : {8u, 9u, 10u}) {
        const ProblemInstance inst = instance(4, 60, 6, seed);
        const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
        const EigenResult r = shift_invert_tda(precompute_tda(*aux.a0), options(10));
        REQUIRE(r.converged);
        REQUIRE(r.residual_history.size() >= 2);
        for (std::size_t i = 1; i < r.residual_history.size(); ++i)
            CHECK(r.residual_history[i] <= r.residual_history[i - 1]);
    }
}

TEST_CASE("shift-invert BSE with B0 = 0 reproduces the TDA values") {
    const ProblemInstance inst = instance(3, 20, 4, 9);
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const auto zero = std::make_shared<LowRankMatrix>(LowRankMatrix::zero(60, 60));
    const BlockJSymmetric f0(aux.a0, zero, JFlavor::F0Structured);
    const BseInverse binv = precompute_bse(*aux.a0, *zero);
    const EigenResult bse = shift_invert_bse(binv, f0, options(4));
    const EigenResult tda = shift_invert_tda(precompute_tda(*aux.a0), options(4));
    REQUIRE(bse.converged);
    CHECK(max_rel_err(bse.values, tda.values) <= 1e-8);
}

TEST_CASE("shift-invert BSE matches the dense positive branch and its mirror") {
    const ProblemInstance inst = instance(4, 25, 6, 10);
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const BseInverse binv = precompute_bse(*aux.a0, *aux.b0);
    const EigenResult r = shift_invert_bse(binv, *aux.f0, options(10));
    REQUIRE(r.converged);
    CHECK_FALSE(r.spurious);
    const Vector full = dense_eig_oracle(aux.f0->to_dense()).values;
    const Vector pos = positive_branch(full, 10);
    CHECK(max_rel_err(r.values, pos) <= 1e-8);
    for (Index i = 0; i < 10; ++i) {
        double nearest = 1e300;
        for (Index j = 0; j < full.size(); ++j) nearest = std::min(nearest, std::abs(full[j] + r.values[i]));
        CHECK(nearest <= 1e-8);
        CHECK(r.residuals[i] <= 1e-8);
    }
}

TEST_CASE("shift-invert BSE with a replicated TDA initial guess") {
    const ProblemInstance inst = instance(4, 25, 6, 11);
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const EigenResult tda = shift_invert_tda(precompute_tda(*aux.a0), options(10));
    const BseInverse binv = precompute_bse(*aux.a0, *aux.b0);
    const EigenResult guided = shift_invert_bse(binv, *aux.f0, options(10), tda.vectors);
    const EigenResult plain = shift_invert_bse(binv, *aux.f0, options(10));
    REQUIRE(guided.converged);
    CHECK(max_rel_err(guided.values, plain.values) <= 1e-8);
}

TEST_CASE("forward Lanczos agrees with shift-invert") {
    const ProblemInstance inst = instance(4, 30, 5, 12);
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const EigenResult inv = shift_invert_tda(precompute_tda(*aux.a0), options(5));
    const EigenResult fwd = forward_tda(*aux.a0, options(5));
    REQUIRE(fwd.converged);
    CHECK(max_rel_err(fwd.values, inv.values) <= 1e-8);
    CHECK(fwd.iterations >= inv.iterations);
}

TEST_CASE("invalid requests are rejected") {
    const TdaInverse inv = precompute_tda(DiagPlusLowRank(Vector::Ones(4), LowRankMatrix::zero(4, 4)));
    CHECK_THROWS_AS(shift_invert_tda(inv, options(0)), ConfigError);
    CHECK_THROWS_AS(shift_invert_tda(inv, options(5)), ConfigError);
}
