#include "doctest.h"

#include <cmath>

#include "bse/errors.hpp"
#include "bse/problem.hpp"
#include "bse/random.hpp"
#include "bse/tt.hpp"
#include "oracles.hpp"

using namespace bse;

namespace {

QttShape shape_of(std::initializer_list<Index> f) { return QttShape{std::vector<Index>(f)}; }

Vector random_vector(Index n, std::uint64_t seed) { return Rng(seed).normal_vector(n); }

bool is_prime(Index p) {
    if (p < 2) return false;
    for (Index k = 2; k * k <= p; ++k)
        if (p % k == 0) return false;
    return true;
}

/// Rank-limited random tensor: TT-SVD of a random vector with a rank cap.
TTTensor random_tt(const QttShape& shape, Index rank, std::uint64_t seed) {
    return tt_svd(random_vector(shape.size(), seed), shape, 0.0, rank);
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / b.norm(); }

} // namespace

TEST_CASE("prime_factorize returns nondecreasing primes") {
    CHECK(prime_factorize(12) == shape_of({2, 2, 3}));
    CHECK(prime_factorize(7) == shape_of({7}));
    CHECK(prime_factorize(657) == shape_of({3, 3, 73}));
    CHECK(prime_factorize(1).factors.empty());
    CHECK_THROWS_AS(prime_factorize(0), ConfigError);
    for (Index n = 1; n <= 2000; ++n) {
        const QttShape s = prime_factorize(n);
        CHECK(s.size() == n);
        for (std::size_t k = 0; k < s.factors.size(); ++k) {
            CHECK(is_prime(s.factors[k]));
            if (k > 0) CHECK(s.factors[k - 1] <= s.factors[k]);
        }
    }
}

TEST_CASE("fold uses mixed radix digits with the first digit fastest") {
    // One-based i = 6 of a length-8 binary fold is j = (2, 1, 2).
    CHECK(multi_index(5, shape_of({2, 2, 2})) == std::vector<Index>{1, 0, 1});
    CHECK(multi_index(11, shape_of({2, 2, 3})) == std::vector<Index>{1, 1, 2});
    CHECK(linear_index({1, 1, 2}, shape_of({2, 2, 3})) == 11);

    const Vector v = random_vector(360, 1);
    const QttShape s = prime_factorize(360);
    const FullTensor t = fold(v, s);
    for (Index i = 0; i < 360; ++i) CHECK(t(multi_index(i, s)) == v[i]);
    const Vector back = unfold(t);
    CHECK(std::memcmp(back.data(), v.data(), sizeof(double) * 360) == 0);
    CHECK_THROWS_AS(fold(v, shape_of({2, 2, 2})), DimensionError);
}

TEST_CASE("tt_svd of a constant vector has unit ranks") {
    const Vector v = Vector::Constant(16, 2.5);
    const TTTensor x = tt_svd(v, prime_factorize(16), 1e-12);
    for (Index r : x.ranks()) CHECK(r == 1);
    CHECK(rel(x.full(), v) < 1e-14);
}

TEST_CASE("tt_svd of a linear ramp has QTT ranks two") {
    const QttShape s = prime_factorize(256);
    Vector v(256);
    for (Index i = 0; i < 256; ++i) v[i] = static_cast<double>(i + 1);
    const TTTensor x = tt_svd(v, s, 1e-12);
    for (Index r : x.ranks()) CHECK(r == 2);

    // Explicit rank-2 construction: i + 1 = 1 + sum_nu j_nu 2^nu carried as (value, 1).
    std::vector<TTCore> cores;
    for (Index l = 0; l < 8; ++l) {
        const double w = std::ldexp(1.0, static_cast<int>(l));
        const Index r0 = l == 0 ? 1 : 2;
        const Index r1 = l == 7 ? 1 : 2;
        TTCore c(r0, 2, r1);
        for (Index j = 0; j < 2; ++j) {
            const double digit = w * static_cast<double>(j) + (l == 0 ? 1.0 : 0.0);
            if (l == 0) {
                c(0, j, 0) = digit;
                c(0, j, 1) = 1.0;
            } else if (l == 7) {
                c(0, j, 0) = 1.0;
                c(1, j, 0) = digit;
            } else {
                c(0, j, 0) = 1.0;
                c(1, j, 0) = digit;
                c(1, j, 1) = 1.0;
            }
        }
        cores.push_back(std::move(c));
    }
    const TTTensor explicit_ramp(s, std::move(cores));
    CHECK((explicit_ramp.full() - v).cwiseAbs().maxCoeff() == 0.0);
    CHECK(rel(x.full(), explicit_ramp.full()) < 1e-13);
}

TEST_CASE("tt_svd meets its relative error bound and the rank ceiling") {
    for (const Index n : {64, 360, 1024}) {
        const QttShape s = prime_factorize(n);
        for (const double eps : {0.3, 0.1, 1e-3}) {
            for (std::uint64_t seed = 0; seed < 10; ++seed) {
                const Vector v = random_vector(n, 100 * seed + static_cast<std::uint64_t>(n));
                const TTTensor x = tt_svd(v, s, eps);
                CHECK((v - x.full()).norm() <= eps * v.norm());
                const auto ranks = x.ranks();
                for (std::size_t l = 0; l < ranks.size(); ++l) {
                    Index left = 1, right = 1;
                    for (std::size_t k = 0; k <= l; ++k) left *= s.factors[k];
                    for (std::size_t k = l + 1; k < s.factors.size(); ++k) right *= s.factors[k];
                    CHECK(ranks[l] <= std::min(left, right));
                    CHECK(x.core(static_cast<Index>(l)).r1 == x.core(static_cast<Index>(l + 1)).r0);
                }
            }
        }
    }
}

TEST_CASE("tt_svd cores are left orthogonal and the guard is enforced") {
    const QttShape s = prime_factorize(512);
    const TTTensor x = tt_svd(random_vector(512, 3), s, 0.05);
    for (Index l = 0; l + 1 < x.d(); ++l) CHECK(x.is_left_orthogonal(l));
    CHECK_THROWS_AS(tt_svd(Vector::Zero((Index{1} << 20) + 2), prime_factorize((Index{1} << 20) + 2), 0.1),
                    GuardError);
}

TEST_CASE("orthogonalize keeps the tensor and sets orthogonality on both sides") {
    const QttShape s = shape_of({2, 3, 2, 5, 2});
    TTTensor x = random_tt(s, 4, 5);
    const Vector before = x.full();
    for (Index pos = 0; pos < x.d(); ++pos) {
        x.orthogonalize(pos);
        CHECK(rel(x.full(), before) < 1e-13);
        for (Index l = 0; l < pos; ++l) CHECK(x.is_left_orthogonal(l));
        for (Index l = pos + 1; l < x.d(); ++l) CHECK(x.is_right_orthogonal(l));
    }
}

TEST_CASE("effective rank solves the storage balance") {
    CHECK(effective_rank({3, 3, 3}, 4) == 3.0);
    CHECK(effective_rank({7}, 2) == 7.0);
    CHECK(effective_rank({2, 4}, 3) == doctest::Approx(-1.0 + std::sqrt(15.0)).epsilon(1e-12));
    CHECK(std::abs(effective_rank({2, 4}, 3) - (-1.0 + std::sqrt(15.0))) < 1e-12);
    for (Index d = 2; d < 9; ++d)
        for (Index r = 1; r < 12; ++r) CHECK(effective_rank(std::vector<Index>(static_cast<std::size_t>(d - 1), r), d) == static_cast<double>(r));
    // Equal modes: the weighted balance reduces to the plain one.
    CHECK(effective_rank({2, 4}, shape_of({2, 2, 2})) == doctest::Approx(effective_rank({2, 4}, 3)));
    CHECK(effective_rank({5, 5}, shape_of({2, 3, 7})) == doctest::Approx(5.0).epsilon(1e-14));
    CHECK_THROWS_AS(effective_rank({1, 2}, 2), DimensionError);
    CHECK_THROWS_AS(effective_rank({}, 1), ConfigError);
}

TEST_CASE("identity TT matrix leaves a tensor unchanged") {
    const QttShape s = shape_of({2, 2, 3, 2});
    const TTTensor x = random_tt(s, 3, 9);
    const TTTensor y = tt_matvec(TTMatrix::identity(s), x);
    CHECK(y.ranks() == x.ranks());
    CHECK((y.full() - x.full()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((TTMatrix::identity(s).full() - Matrix::Identity(24, 24)).norm() == 0.0);
}

TEST_CASE("diagonal TT matrix of the transition energies matches the dense product") {
    SynthConfig cfg;
    cfg.n_o = 4;
    cfg.n_v = 16;
    cfg.r_v = 2;
    cfg.seed = 11;
    const ProblemInstance inst = synthesize(cfg);
    const QttShape s = concat(prime_factorize(inst.n_v), prime_factorize(inst.n_o));
    const Matrix de = oracle::kronecker_energy(inst.eps_occ, inst.eps_virt);
    const TTMatrix d = TTMatrix::diagonal(tt_svd(de.diagonal(), s, 1e-14));
    const TTTensor x = random_tt(s, 3, 12);
    const Vector y = tt_matvec(d, x).full();
    CHECK((y - de * x.full()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matvec ranks multiply and match a dense product") {
    const QttShape s = shape_of({2, 3, 2, 2});
    const Matrix m = oracle::random_matrix(24, 24, 13);
    const TTMatrix a = tt_matrix(m, s, 0.0);
    CHECK((a.full() - m).norm() < 1e-12 * m.norm());
    const TTTensor x = random_tt(s, 2, 14);
    const TTTensor y = tt_matvec(a, x);
    for (std::size_t l = 0; l < y.ranks().size(); ++l) CHECK(y.ranks()[l] == a.ranks()[l] * x.ranks()[l]);
    CHECK(rel(y.full(), m * x.full()) < 1e-12);
    CHECK_THROWS_AS(tt_matvec(a, random_tt(shape_of({2, 2, 3, 2}), 2, 1)), DimensionError);
}

TEST_CASE("tt_dot is consistent with the dense norm") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const QttShape s = shape_of({2, 2, 2, 3, 5});
        const TTTensor x = random_tt(s, 5, seed);
        const TTTensor y = random_tt(s, 3, seed + 50);
        const Vector fx = x.full();
        CHECK(std::abs(tt_dot(x, x) - fx.squaredNorm()) <= 1e-12 * fx.squaredNorm());
        CHECK(std::abs(tt_dot(x, y) - fx.dot(y.full())) <= 1e-12 * fx.norm() * y.full().norm());
    }
}

TEST_CASE("tt_round never increases ranks and respects its error bound") {
    const QttShape s = prime_factorize(512);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const TTTensor x = random_tt(s, 6, seed);
        // Doubling through a rank-2 operator doubles every rank without changing the span.
        std::vector<TTCore> cores;
        for (Index l = 0; l < s.d(); ++l) {
            TTCore c(l == 0 ? 1 : 2, 4, l + 1 == s.d() ? 1 : 2);
            for (Index i = 0; i < 2; ++i) {
                if (l == 0) {
                    c(0, i + 2 * i, 0) = 1.0;
                    c(0, i + 2 * i, 1) = 1.0;
                } else if (l + 1 == s.d()) {
                    c(0, i + 2 * i, 0) = 1.0;
                    c(1, i + 2 * i, 0) = 1.0;
                } else {
                    c(0, i + 2 * i, 0) = 1.0;
                    c(1, i + 2 * i, 1) = 1.0;
                }
            }
            cores.push_back(std::move(c));
        }
        const TTTensor x2 = tt_matvec(TTMatrix(s, std::move(cores)), x);
        CHECK(rel(x2.full(), 2.0 * x.full()) < 1e-13);
        for (const double eps : {0.0, 1e-8, 0.1, 0.4}) {
            const TTTensor r = tt_round(x2, eps);
            for (std::size_t l = 0; l < r.ranks().size(); ++l) CHECK(r.ranks()[l] <= x2.ranks()[l]);
            CHECK((r.full() - x2.full()).norm() <= eps * x2.full().norm() + 1e-13 * x2.full().norm());
            if (eps == 1e-8)
                for (std::size_t l = 0; l < r.ranks().size(); ++l) CHECK(r.ranks()[l] <= x.ranks()[l]);
        }
    }
}

TEST_CASE("block move with a single member is a TT orthogonalization step") {
    const QttShape s = shape_of({2, 2, 3, 2});
    BlockTT u = BlockTT::random(s, 1, 3, 0, 21);
    const TTTensor x0 = u.extract(0);
    for (Index step = 0; step < 3; ++step) {
        u = block_move(u, Direction::Right);
        CHECK(u.frame_orthonormal(1e-12));
        CHECK(rel(u.extract(0).full(), x0.full()) < 1e-12);
    }
    TTTensor t = x0;
    t.orthogonalize(3);
    CHECK(rel(t.full(), u.extract(0).full()) < 1e-12);
}

TEST_CASE("block moves at zero threshold preserve members and their Gram matrix") {
    const QttShape s = prime_factorize(256);
    BlockTT u = BlockTT::random(s, 6, 8, 2, 31);
    const Matrix f0 = u.full();
    const Matrix g0 = u.gram();
    CHECK((g0 - f0.transpose() * f0).cwiseAbs().maxCoeff() < 1e-12);

    const BlockTT there = block_move(u, Direction::Right);
    const BlockTT back = block_move(there, Direction::Left);
    CHECK(back.position() == u.position());
    CHECK((back.full() - f0).cwiseAbs().maxCoeff() < 1e-12);

    for (Index step = 0; step < 5; ++step) {
        u = block_move(u, Direction::Right);
        CHECK(u.frame_orthonormal(1e-10));
        CHECK((u.gram() - g0).cwiseAbs().maxCoeff() < 1e-10);
    }
    for (Index step = 0; step < 7; ++step) {
        u = block_move(u, Direction::Left);
        CHECK(u.frame_orthonormal(1e-10));
        CHECK((u.gram() - g0).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK(u.position() == 0);
    CHECK((u.full() - f0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(block_move(u, Direction::Left), ConfigError);
}

TEST_CASE("block move truncation honours threshold, caps and floors") {
    const QttShape s = prime_factorize(128);
    const BlockTT u = BlockTT::random(s, 4, 12, 3, 41);
    const Matrix f0 = u.full();
    for (const double eps : {0.05, 0.2}) {
        BlockMoveOptions opts;
        opts.eps = eps;
        const BlockTT v = block_move(u, Direction::Right, opts);
        CHECK((v.full() - f0).norm() <= eps * f0.norm() * (1.0 + 1e-12));
    }
    BlockMoveOptions capped;
    capped.max_rank = 2;
    CHECK(block_move(u, Direction::Right, capped).core(3).r1 == 2);
    BlockMoveOptions floored;
    floored.eps = 0.99;
    floored.min_rank = 5;
    CHECK(block_move(u, Direction::Right, floored).core(3).r1 == 5);
}

TEST_CASE("block core columns round trip and members are linearly independent") {
    BlockTT u = BlockTT::random(prime_factorize(64), 5, 6, 2, 51);
    const Matrix cols = block_core_columns(u);
    CHECK(cols.rows() == u.core(2).r0 * 2 * u.core(2).r1);
    Eigen::JacobiSVD<Matrix> svd(cols);
    CHECK(svd.singularValues().minCoeff() > 1e-8);
    const Matrix f0 = u.full();
    set_block_core_columns(u, cols);
    CHECK((u.full() - f0).norm() == 0.0);
    // With an orthonormal frame the member Gram matrix equals the core Gram matrix.
    CHECK((u.gram() - cols.transpose() * cols).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(set_block_core_columns(u, Matrix::Zero(3, 5)), DimensionError);
}

TEST_CASE("from_columns puts the block in the last core") {
    const QttShape s = prime_factorize(96);
    const Matrix m = oracle::random_matrix(96, 4, 61);
    const BlockTT exact = BlockTT::from_columns(m, s, 0.0);
    CHECK(exact.position() == s.d() - 1);
    CHECK((exact.full() - m).norm() < 1e-12 * m.norm());
    const BlockTT rough = BlockTT::from_columns(m, s, 0.2);
    CHECK((rough.full() - m).norm() <= 0.2 * m.norm());
    CHECK(rough.storage() <= exact.storage());
}

TEST_CASE("TT containers round trip and reject corrupt input") {
    const QttShape s = shape_of({2, 3, 2});
    const TTTensor x = random_tt(s, 2, 71);
    const TTTensor x2 = deserialize_tensor(serialize(x));
    CHECK(x2.shape() == s);
    CHECK((x2.full() - x.full()).norm() == 0.0);

    const TTMatrix a = tt_matrix(oracle::random_matrix(12, 12, 72), s, 0.0);
    CHECK((deserialize_matrix(serialize(a)).full() - a.full()).norm() == 0.0);

    const BlockTT u = BlockTT::random(s, 3, 2, 1, 73);
    const std::string bytes = serialize(u);
    const BlockTT u2 = deserialize_block(bytes);
    CHECK(u2.position() == 1);
    CHECK(u2.m0() == 3);
    CHECK((u2.full() - u.full()).norm() == 0.0);

    auto kind_of = [](auto&& f) {
        try {
            f();
        } catch (const FormatError& e) {
            return static_cast<int>(e.kind());
        }
        return -1;
    };
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK(kind_of([&] { deserialize_block(bad); }) == static_cast<int>(FormatError::Kind::UnknownMagic));
    CHECK(kind_of([&] { deserialize_block(bytes.substr(0, bytes.size() - 3)); }) ==
          static_cast<int>(FormatError::Kind::TruncatedPayload));
    CHECK(kind_of([&] { deserialize_tensor(bytes); }) == static_cast<int>(FormatError::Kind::MalformedHeader));
}
