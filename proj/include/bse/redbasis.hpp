#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "bse/eigensolve.hpp"
#include "bse/lowrank.hpp"
#include "bse/problem.hpp"
#include "bse/sherman.hpp"

namespace bse {

/// round-half-up(c_w * sqrt(2 r_v n_ov)), capped at n_ov.
Index choose_nw(double c_w, Index r_v, Index n_ov);

/// Active dense block of w_bar plus its full diagonal.
struct ReducedBlockSpec {
    double c_w = 0.0;
    Index n_w = 0;
    std::vector<Index> permutation; ///< composite indices by ascending transition energy
    Matrix w_b;                     ///< n_w x n_w, rows/cols in permutation order
    Vector w2;                      ///< diagonal of w_bar on permutation[n_w:], same order

    Index n_ov() const { return static_cast<Index>(permutation.size()); }
    std::vector<Index> active() const;
    /// w2 rearranged to ascending composite order of the tail indices.
    Vector tail_in_composite_order() const;
    /// W_{N_W} in composite ordering (desk-scale verification only).
    Matrix dense() const;
};

ReducedBlockSpec build_reduced_block(const MatrixRef& w_bar, Index n_w, const EnergyDiagonal& ordering);
ReducedBlockSpec build_reduced_block(const ProblemInstance& inst, double c_w);

/// A_{N_W} = de + L_V L_V^T - W_{N_W}, applied without dense N_ov x N_ov data.
class ReducedBlockOperator : public LinearOperator {
public:
    ReducedBlockOperator(const ProblemInstance& inst, const ReducedBlockSpec& spec);

    Index rows() const override { return diag_.size(); }
    Index cols() const override { return diag_.size(); }
    Vector apply(const VectorRef& x) const override;
    Vector apply_transpose(const VectorRef& x) const override { return apply(x); }

    /// Stored doubles: combined diagonal, L_V, strict upper triangle of the block.
    Index storage() const;

private:
    Vector diag_;              ///< de - diag(w_bar)
    Matrix l_v_;
    std::vector<Index> active_;
    Matrix off_block_;         ///< W_b with its diagonal removed
};

std::shared_ptr<const ReducedBlockOperator> assemble_a_nw(const ProblemInstance& inst, const ReducedBlockSpec& spec);

/// Structured inverses of A_{N_W} and of its pairing with B0.
TdaInverse reduced_tda_inverse(const ProblemInstance& inst, const ReducedBlockSpec& spec);
BseInverse reduced_bse_inverse(const ProblemInstance& inst, const ReducedBlockSpec& spec, const LowRankMatrix& b0);

struct ReducedModel {
    Matrix g1;     ///< basis, one column per psi_n
    Matrix m1;     ///< G1^T F G1
    Matrix s1;     ///< G1^T G1
    Vector gamma;  ///< all reduced eigenvalues, ascending
    double s1_condition = 1.0;

    /// Smallest `m0` positive reduced eigenvalues.
    Vector positive(Index m0) const { return positive_branch(gamma, m0); }
};

/// Galerkin projection of `f` onto span(g1); rejects bases whose Gram matrix
/// has condition number above 1e12.
ReducedModel galerkin_project(const LinearOperator& f, const MatrixRef& g1);

struct BracketEntry {
    Index index = 0;
    double lambda_bar = 0.0;
    double omega = 0.0;
    double gamma_bar = 0.0;
    bool lower_holds = false;  ///< lambda_bar <= omega
    bool upper_holds = false;  ///< omega <= gamma_bar
    double lower_margin = 0.0; ///< omega - lambda_bar
    double upper_margin = 0.0; ///< gamma_bar - omega
};

struct BoundsReport {
    std::vector<BracketEntry> entries;
    Index violations = 0;            ///< entries where either side fails
    double max_aux_error = 0.0;      ///< max |lambda_bar - omega|
    double max_galerkin_error = 0.0; ///< max |gamma_bar - omega|

    bool all_hold() const { return violations == 0; }
    bool galerkin_improves() const { return max_galerkin_error < max_aux_error; }
};

/// Per-index lambda_bar <= omega <= gamma_bar diagnostic. Never throws on violations.
BoundsReport two_sided_report(const VectorRef& lambda_bar, const VectorRef& gamma_bar, const VectorRef& omega);

nlohmann::json to_json(const BoundsReport& report);

enum class Model { Tda, Bse };

std::string to_string(Model m);
Model model_from_string(const std::string& s);

struct BoundsConfig {
    Model model = Model::Bse;
    double eps = 0.1;
    double c_w = 1.0;
    Index m0 = 10;
    double tol = 1e-8;
};

struct BoundsRun {
    BoundsReport report;
    ReducedBlockSpec spec;
    EigenResult auxiliary;  ///< solve of the reduced-block auxiliary problem
    ReducedModel galerkin;  ///< projection of the exact operator onto its eigenvectors
    Vector omega;           ///< dense oracle values of the exact operator
    Index rank_w_til = 0;
};

/// Auxiliary reduced-block solve, Galerkin projection of the exact operator,
/// and dense oracle, combined into a bracket report.
BoundsRun two_sided_bounds(const ProblemInstance& inst, const BoundsConfig& cfg);

} // namespace bse
