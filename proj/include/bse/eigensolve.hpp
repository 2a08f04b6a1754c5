#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bse/lowrank.hpp"
#include "bse/operator.hpp"
#include "bse/sherman.hpp"

namespace bse {

struct EigenResult {
    std::string method;
    Vector values;            ///< ascending
    Matrix vectors;           ///< one unit-norm column per value, first nonzero entry positive
    Vector residuals;         ///< ||M v - theta v|| / (|theta| ||v||) against the forward operator
    Index iterations = 0;     ///< operator applications
    Index restarts = 0;
    double wall_time = 0.0;   ///< seconds
    double tol = 0.0;
    bool converged = false;
    bool spurious = false;    ///< a wanted Ritz value kept a significant imaginary part
    std::vector<double> residual_history; ///< max wanted residual after every Rayleigh-Ritz step
};

inline constexpr Index kDenseOracleGuard = 4096;

/// Full dense spectrum, ascending by real part. Symmetric input uses a
/// symmetric solver; any other input a general real one. With a metric S
/// (symmetric positive definite) the generalized problem M q = g S q is solved.
/// Throws GuardError above kDenseOracleGuard rows.
EigenResult dense_eig_oracle(const MatrixRef& m, const Matrix* metric = nullptr);

/// The m0 smallest strictly positive entries of a real spectrum, ascending.
Vector positive_branch(const VectorRef& values, Index m0);

struct KrylovOptions {
    Index m0 = 10;
    double tol = 1e-8;
    Index max_restarts = 300;
    Index subspace = 0;                ///< 0 selects max(2 m0 + 10, 40)
    std::optional<Matrix> initial;     ///< optional starting block
    std::uint64_t seed = 0x5eed;
};

/// Smallest eigenvalues of the symmetric A0 = D + P Q^T by Lanczos with full
/// reorthogonalization on A0^{-1}; thick restarts.
EigenResult shift_invert_tda(const TdaInverse& inv, const KrylovOptions& opts);

/// m0 smallest positive eigenvalues of F0 by restarted Arnoldi on F0^{-1}.
/// `initial_guess` (N x k) is replicated as [x; 0] to seed the subspace.
EigenResult shift_invert_bse(const BseInverse& inv, const BlockJSymmetric& f0, const KrylovOptions& opts,
                             const std::optional<Matrix>& initial_guess = std::nullopt);

/// Smallest eigenvalues of a symmetric operator by restarted Lanczos on the
/// operator itself, without any inverse.
EigenResult forward_tda(const LinearOperator& a, const KrylovOptions& opts);

/// Generic restarted Krylov engine. `op` drives the subspace, `forward`
/// measures residuals. With `inverse_mode` the Ritz values theta of `op`
/// are reported as 1/theta; wanted values are those with the largest real
/// part (inverse) or smallest real part (forward).
EigenResult krylov_eigs(const LinearOperator& op, const LinearOperator& forward, bool symmetric, bool inverse_mode,
                        const KrylovOptions& opts);

/// Normalizes each column and flips its sign so the first nonzero entry is positive.
void canonicalize_columns(Matrix& v);

} // namespace bse
