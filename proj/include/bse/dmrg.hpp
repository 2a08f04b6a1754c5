#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "bse/eigensolve.hpp"
#include "bse/problem.hpp"
#include "bse/tt.hpp"

namespace bse {

/// Compressed TDA operator de + L_V L_V^T - w_bar on the QTT grid.
///
/// The composite index runs virtual-fastest, so the grid lists the factors
/// of n_v before those of n_o.
struct DmrgOperator {
    QttShape shape;
    double eps = 0.0;
    TTMatrix deps_tt; ///< diagonal, compressed at 1e-6
    BlockTT lv_btt;   ///< columns of L_V, block index in the last core
    TTMatrix w_tt;    ///< w_bar, compressed at eps

    Vector deps_full; ///< unfolded components, for verification and residuals
    Matrix lv_full;
    Matrix w_full;

    Index n_ov() const { return shape.size(); }
    Index storage() const { return deps_tt.storage() + lv_btt.storage() + w_tt.storage(); }
    /// Unfolded action of the compressed operator.
    Vector apply(const VectorRef& x) const;
    Matrix dense() const;
};

inline constexpr double kDepsTolerance = 1e-6;
inline constexpr Index kMaxQttFactor = 7;

/// Virtual factors then occupied factors. Throws ConfigError when a prime
/// factor exceeds kMaxQttFactor.
QttShape dmrg_shape(Index n_o, Index n_v);

DmrgOperator build_operator(const ProblemInstance& inst, double eps);

struct DmrgOptions {
    Index m0 = 10;
    double eps = 0.1;          ///< per-member truncation: a move drops at most eps ||core|| / sqrt(m0)
    Index sweeps = 2;          ///< half-sweeps
    Index rank_cap = 150;
    Index local_guard = 10000; ///< largest admissible local problem
    Index initial_rank = 0;    ///< 0 selects m0
    std::uint64_t seed = 0x5eed;
};

struct SweepTelemetry {
    Index sweep = 0;
    std::vector<double> ritz;
    Index max_local_size = 0;
    Index max_rank = 0;
    double effective_rank = 0.0;
    double memory_ratio = 0.0; ///< storage of the block TT / (N_ov m0), block index included
    double wall_time = 0.0;
};

struct DmrgResult {
    EigenResult result;
    BlockTT u;
    std::vector<SweepTelemetry> sweeps;
    std::vector<double> ritz_sums; ///< after every local solve
    bool stagnated = false;        ///< some half-sweep failed to lower the Ritz sum

    nlohmann::json telemetry() const;
};

/// Projection U^T A U of the compressed operator onto the frame of `u` at its
/// block position, computed core by core. Symmetrized.
Matrix assemble_local(const DmrgOperator& op, const BlockTT& u);

/// Alternating one-site block DMRG: dense local eigensolves, block index moved
/// by truncated SVD. One iteration is one half-sweep.
DmrgResult dmrg_eig(const DmrgOperator& op, const DmrgOptions& opts);

} // namespace bse
