#include <algorithm>
#include <random>

#include "doctest.h"

#include "bse/errors.hpp"
#include "bse/redbasis.hpp"
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

// Frozen (lambda_bar, omega, gamma_bar) of the seed-42 regression instance.
constexpr double kFrozen[10][3] = {
    {8.956256725388115e-01, 8.956579219174702e-01, 8.956812597959971e-01},
    {1.204019276429821e+00, 1.204851325007271e+00, 1.205314057072291e+00},
    {1.411025680113050e+00, 1.411150781491795e+00, 1.411222403909830e+00},
    {1.577915936206505e+00, 1.577927804753203e+00, 1.577933364991137e+00},
    {1.671188391761723e+00, 1.671333134725794e+00, 1.671408719101217e+00},
    {1.833389935852695e+00, 1.833455679659373e+00, 1.833482122718590e+00},
    {1.916489841488500e+00, 1.916516403033194e+00, 1.916530570437231e+00},
    {2.096359607256110e+00, 2.096639686897061e+00, 2.096759484979997e+00},
    {2.170251392072327e+00, 2.170378558087413e+00, 2.170432800680774e+00},
    {2.328591223595374e+00, 2.328672409861881e+00, 2.328707611791351e+00},
};

} // namespace

TEST_CASE("choose_nw rounds half up and caps at N_ov") {
    CHECK(choose_nw(1.0, 2, 8) == 6);
    CHECK(choose_nw(1.0, 196, 657) == 507);
    // 1.2 * sqrt(2 * 196 * 657) = 609.0; the cap needs a larger constant or rank.
    CHECK(choose_nw(1.2, 196, 657) == 609);
    CHECK(choose_nw(1.3, 196, 657) == 657);
    CHECK(choose_nw(1.2, 229, 657) == 657);
    CHECK(choose_nw(0.5, 1, 2) == 1);    // 0.5 * sqrt(4) = 1
    CHECK(choose_nw(1.0, 1, 8) == 4);    // sqrt(16)
    CHECK(choose_nw(0.625, 2, 8) == 4);  // 3.75 -> 4
    CHECK(choose_nw(0.5625, 2, 8) == 3); // 3.375 -> 3
    CHECK(choose_nw(0.625, 1, 8) == 3);  // 2.5 -> 3
    CHECK_THROWS_AS(choose_nw(0.0, 2, 8), ConfigError);
}

TEST_CASE("reduced block keeps the active block and the diagonal") {
    const ProblemInstance inst = instance(3, 8, 4, 2);
    const EnergyDiagonal eps = energy_diagonal(inst);
    const Index n = inst.n_ov();

    const ReducedBlockSpec full = build_reduced_block(inst.w_bar, n, eps);
    CHECK(oracle::max_abs(full.dense() - inst.w_bar) == 0.0);

    const ReducedBlockSpec empty = build_reduced_block(inst.w_bar, 0, eps);
    CHECK(oracle::max_abs(empty.dense() - Matrix(inst.w_bar.diagonal().asDiagonal())) == 0.0);

    const ReducedBlockSpec spec = build_reduced_block(inst.w_bar, 7, eps);
    const Vector de = eps.values();
    for (std::size_t p = 1; p < spec.permutation.size(); ++p)
        CHECK(de[spec.permutation[p - 1]] <= de[spec.permutation[p]]);
    const Matrix w = spec.dense();
    for (Index pi = 0; pi < n; ++pi)
        for (Index pj = 0; pj < n; ++pj) {
            const Index i = spec.permutation[static_cast<std::size_t>(pi)];
            const Index j = spec.permutation[static_cast<std::size_t>(pj)];
            const bool kept = (pi < 7 && pj < 7) || i == j;
            CHECK(w(i, j) == (kept ? inst.w_bar(i, j) : 0.0));
        }
}

TEST_CASE("reconstruction rule holds on random spot checks") {
    const ProblemInstance inst = instance(4, 30, 6, 3);
    const ReducedBlockSpec spec = build_reduced_block(inst, 1.0);
    const Matrix w = spec.dense();
    std::vector<Index> position(spec.permutation.size());
    for (std::size_t p = 0; p < spec.permutation.size(); ++p) position[spec.permutation[p]] = static_cast<Index>(p);
    std::mt19937 gen(5);
    std::uniform_int_distribution<Index> pick(0, inst.n_ov() - 1);
    for (int s = 0; s < 1000; ++s) {
        const Index i = pick(gen), j = pick(gen);
        const bool kept = i == j || (position[i] < spec.n_w && position[j] < spec.n_w);
        CHECK(w(i, j) == (kept ? inst.w_bar(i, j) : 0.0));
    }
}

TEST_CASE("A_NW matvec matches dense assembly and respects the storage balance") {
    const ProblemInstance inst = instance(4, 10, 5, 4);
    for (double c_w : {0.5, 1.0, 1.5}) {
        const ReducedBlockSpec spec = build_reduced_block(inst, c_w);
        const auto a = assemble_a_nw(inst, spec);
        Matrix dense = inst.l_v * inst.l_v.transpose() - spec.dense();
        dense.diagonal() += energy_diagonal(inst).values();
        const Matrix x = oracle::random_matrix(40, 3, 6);
        CHECK(oracle::max_abs(a->apply_block(x) - dense * x) <= 1e-12);
        const double bound = static_cast<double>(inst.l_v.size()) * (1.0 + c_w * c_w) + static_cast<double>(inst.n_ov());
        CHECK(static_cast<double>(a->storage()) <= bound);
    }
}

TEST_CASE("empty block with an exactly low-rank w_bar reduces to the A0 path") {
    ProblemInstance inst = instance(3, 6, 3, 5);
    // Diagonal with r_v nonzeros: exactly representable at rank r_v.
    inst.w_bar.setZero();
    inst.w_bar(0, 0) = 0.2;
    inst.w_bar(5, 5) = 0.1;
    inst.w_bar(11, 11) = 0.05;
    const ReducedBlockSpec spec = build_reduced_block(inst.w_bar, 0, energy_diagonal(inst));
    const AuxiliaryOperators aux = assemble_aux(inst, 1e-14);
    const auto a = assemble_a_nw(inst, spec);
    const Matrix x = oracle::random_matrix(18, 2, 8);
    CHECK(oracle::max_abs(a->apply_block(x) - aux.a0->apply_block(x)) <= 1e-12);
    const TdaInverse r = reduced_tda_inverse(inst, spec);
    const TdaInverse p = precompute_tda(*aux.a0);
    CHECK((r.apply(x.col(0)) - p.apply(x.col(0))).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("reduced-block inverses solve A_NW and its BSE pairing") {
    const ProblemInstance inst = instance(4, 15, 5, 6);
    const ReducedBlockSpec spec = build_reduced_block(inst, 1.0);
    const auto a = assemble_a_nw(inst, spec);
    const Matrix a_dense = a->to_dense();
    const TdaInverse inv = reduced_tda_inverse(inst, spec);
    const Vector u = oracle::random_matrix(60, 1, 9).col(0);
    CHECK((a_dense * inv.apply(u) - u).norm() <= 1e-10 * u.norm());
    const AuxiliaryOperators aux = assemble_aux(inst, 0.1);
    const BseInverse binv = reduced_bse_inverse(inst, spec, *aux.b0);
    const Matrix f = j_symmetric_dense(a_dense, aux.b0->dense());
    const Vector w = oracle::random_matrix(120, 1, 10).col(0);
    CHECK((f * binv.apply(w) - w).norm() <= 1e-9 * w.norm());
}

TEST_CASE("Galerkin projection onto exact eigenvectors reproduces the eigenvalues") {
    const ProblemInstance inst = instance(3, 8, 4, 7);
    const Matrix f1 = j_symmetric_dense(exact_a_dense(inst), exact_b_dense(inst));
    const EigenResult full = dense_eig_oracle(f1);
    const Index n = inst.n_ov();
    const Matrix g = full.vectors.rightCols(5);
    const DenseOperator op(f1);
    const ReducedModel model = galerkin_project(op, g);
    const Vector omega = full.values.tail(5);
    for (Index i = 0; i < 5; ++i) CHECK(std::abs(model.gamma[i] - omega[i]) <= 1e-10 * omega[i]);

    const ReducedModel whole = galerkin_project(op, Matrix::Identity(2 * n, 2 * n));
    for (Index i = 0; i < 2 * n; ++i) CHECK(std::abs(whole.gamma[i] - full.values[i]) <= 1e-10);
}

TEST_CASE("Galerkin projection rejects a rank-deficient basis") {
    const DenseOperator op(Matrix::Identity(6, 6));
    Matrix g = oracle::random_matrix(6, 3, 11);
    g.col(2) = g.col(0) + g.col(1);
    CHECK_THROWS_AS(galerkin_project(op, g), Error);
}

TEST_CASE("enlarging a TDA basis never increases the smallest-eigenvalue Galerkin error") {
    const ProblemInstance inst = instance(4, 12, 4, 12);
    const Matrix a = exact_a_dense(inst);
    const double mu = dense_eig_oracle(a).values[0];
    const Matrix g = oracle::random_matrix(48, 12, 13);
    const DenseOperator op(a);
    double previous = 1e300;
    for (Index k = 1; k <= 12; ++k) {
        const double err = galerkin_project(op, g.leftCols(k)).gamma[0] - mu;
        CHECK(err >= -1e-10);
        CHECK(err <= previous + 1e-12);
        previous = err;
    }
}

TEST_CASE("two-sided report: degenerate equality and a shuffled negative control") {
    const Vector v{{1.0, 2.0, 3.0}};
    const BoundsReport eq = two_sided_report(v, v, v);
    CHECK(eq.all_hold());
    for (const auto& e : eq.entries) {
        CHECK(e.lower_margin == 0.0);
        CHECK(e.upper_margin == 0.0);
    }
    const Vector lambda{{0.9, 1.9, 2.9}};
    const Vector gamma_shuffled{{3.1, 1.1, 2.1}};
    const BoundsReport bad = two_sided_report(lambda, gamma_shuffled, v);
    CHECK(bad.violations == 2);
    CHECK_FALSE(bad.all_hold());
    const auto j = to_json(bad);
    CHECK(j["entries"].size() == 3);
    CHECK(j["violations"] == 2);
}

TEST_CASE("frozen regression instance: bracket holds for all ten values") {
    SynthConfig cfg;
    cfg.n_o = 4;
    cfg.n_v = 16;
    cfg.r_v = 8;
    cfg.seed = 42;
    const ProblemInstance inst = synthesize(cfg);
    BoundsConfig bc;
    bc.model = Model::Bse;
    bc.eps = 0.1;
    bc.m0 = 10;
    const BoundsRun run = two_sided_bounds(inst, bc);
    REQUIRE(run.report.entries.size() == 10);
    CHECK(run.report.all_hold());
    CHECK(run.report.galerkin_improves());
    for (Index k = 0; k < 10; ++k) {
        const auto& e = run.report.entries[static_cast<std::size_t>(k)];
        CHECK(e.lambda_bar == doctest::Approx(kFrozen[k][0]).epsilon(1e-8));
        CHECK(e.omega == doctest::Approx(kFrozen[k][1]).epsilon(1e-8));
        CHECK(e.gamma_bar == doctest::Approx(kFrozen[k][2]).epsilon(1e-8));
    }
    // The dense oracle value is independent of the pipeline.
    const std::vector<double> omega = oracle::bse_positive_spectrum(exact_a_dense(inst), exact_b_dense(inst));
    for (Index k = 0; k < 10; ++k) CHECK(std::abs(omega[static_cast<std::size_t>(k)] - kFrozen[k][1]) <= 1e-9);
}

TEST_CASE("TDA bounds: Galerkin values dominate the exact values") {
    const ProblemInstance inst = instance(4, 16, 8, 43);
    BoundsConfig bc;
    bc.model = Model::Tda;
    const BoundsRun run = two_sided_bounds(inst, bc);
    for (const auto& e : run.report.entries) CHECK(e.upper_holds);
}
