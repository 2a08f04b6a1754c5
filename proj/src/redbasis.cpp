#include "bse/redbasis.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "bse/errors.hpp"

namespace bse {

Index choose_nw(double c_w, Index r_v, Index n_ov) {
    if (!(c_w > 0.0) || r_v < 1 || n_ov < 1) throw ConfigError("choose_nw: inputs must be positive");
    const double raw = c_w * std::sqrt(2.0 * static_cast<double>(r_v) * static_cast<double>(n_ov));
    const auto rounded = static_cast<Index>(std::floor(raw + 0.5));
    return std::min(rounded, n_ov);
}

std::vector<Index> ReducedBlockSpec::active() const {
    return std::vector<Index>(permutation.begin(), permutation.begin() + n_w);
}

Vector ReducedBlockSpec::tail_in_composite_order() const {
    std::vector<std::pair<Index, double>> tail;
    tail.reserve(permutation.size() - static_cast<std::size_t>(n_w));
    for (Index t = 0; t < w2.size(); ++t) tail.emplace_back(permutation[static_cast<std::size_t>(n_w + t)], w2[t]);
    std::sort(tail.begin(), tail.end());
    Vector out(w2.size());
    for (Index t = 0; t < out.size(); ++t) out[t] = tail[static_cast<std::size_t>(t)].second;
    return out;
}

Matrix ReducedBlockSpec::dense() const {
    const Index n = n_ov();
    Matrix w = Matrix::Zero(n, n);
    for (Index i = 0; i < n_w; ++i)
        for (Index j = 0; j < n_w; ++j)
            w(permutation[static_cast<std::size_t>(i)], permutation[static_cast<std::size_t>(j)]) = w_b(i, j);
    for (Index t = 0; t < w2.size(); ++t) {
        const Index k = permutation[static_cast<std::size_t>(n_w + t)];
        w(k, k) = w2[t];
    }
    return w;
}

ReducedBlockSpec build_reduced_block(const MatrixRef& w_bar, Index n_w, const EnergyDiagonal& ordering) {
    const Index n = ordering.size();
    if (w_bar.rows() != n || w_bar.cols() != n) throw DimensionError("reduced block: w_bar must be N_ov x N_ov");
    if (n_w < 0 || n_w > n) throw ConfigError("reduced block: n_w must lie in [0, N_ov]");
    ReducedBlockSpec spec;
    spec.n_w = n_w;
    spec.permutation = ordering.ascending_order();
    spec.w_b.resize(n_w, n_w);
    for (Index j = 0; j < n_w; ++j)
        for (Index i = 0; i < n_w; ++i)
            spec.w_b(i, j) = w_bar(spec.permutation[static_cast<std::size_t>(i)],
                                   spec.permutation[static_cast<std::size_t>(j)]);
    spec.w2.resize(n - n_w);
    for (Index t = 0; t < n - n_w; ++t) {
        const Index k = spec.permutation[static_cast<std::size_t>(n_w + t)];
        spec.w2[t] = w_bar(k, k);
    }
    return spec;
}

ReducedBlockSpec build_reduced_block(const ProblemInstance& inst, double c_w) {
    ReducedBlockSpec spec =
        build_reduced_block(inst.w_bar, choose_nw(c_w, inst.r_v(), inst.n_ov()), energy_diagonal(inst));
    spec.c_w = c_w;
    return spec;
}

ReducedBlockOperator::ReducedBlockOperator(const ProblemInstance& inst, const ReducedBlockSpec& spec)
    : l_v_(inst.l_v), active_(spec.active()) {
    const Index n = inst.n_ov();
    if (spec.n_ov() != n) throw DimensionError("A_NW: spec does not match the instance size");
    const Vector de = energy_diagonal(inst).values();
    diag_ = de;
    for (Index i = 0; i < spec.n_w; ++i) diag_[active_[static_cast<std::size_t>(i)]] -= spec.w_b(i, i);
    for (Index t = 0; t < spec.w2.size(); ++t) diag_[spec.permutation[static_cast<std::size_t>(spec.n_w + t)]] -= spec.w2[t];
    off_block_ = spec.w_b;
    off_block_.diagonal().setZero();
}

Vector ReducedBlockOperator::apply(const VectorRef& x) const {
    check_cols(x.size());
    Vector y = diag_.cwiseProduct(x);
    if (l_v_.cols() > 0) y.noalias() += l_v_ * (l_v_.transpose() * x);
    const Index nw = static_cast<Index>(active_.size());
    if (nw > 1) {
        Vector xa(nw);
        for (Index i = 0; i < nw; ++i) xa[i] = x[active_[static_cast<std::size_t>(i)]];
        const Vector ya = off_block_.selfadjointView<Eigen::Upper>() * xa;
        for (Index i = 0; i < nw; ++i) y[active_[static_cast<std::size_t>(i)]] -= ya[i];
    }
    return y;
}

Index ReducedBlockOperator::storage() const {
    const Index nw = static_cast<Index>(active_.size());
    return diag_.size() + l_v_.size() + nw * (nw - 1) / 2;
}

std::shared_ptr<const ReducedBlockOperator> assemble_a_nw(const ProblemInstance& inst, const ReducedBlockSpec& spec) {
    return std::make_shared<ReducedBlockOperator>(inst, spec);
}

TdaInverse reduced_tda_inverse(const ProblemInstance& inst, const ReducedBlockSpec& spec) {
    return precompute_reduced_block(energy_diagonal(inst), spec.active(), spec.w_b, spec.tail_in_composite_order(),
                                    inst.l_v);
}

BseInverse reduced_bse_inverse(const ProblemInstance& inst, const ReducedBlockSpec& spec, const LowRankMatrix& b0) {
    return BseInverse(reduced_tda_inverse(inst, spec), b0.left(), b0.right());
}

ReducedModel galerkin_project(const LinearOperator& f, const MatrixRef& g1) {
    if (g1.rows() != f.cols()) throw DimensionError("galerkin_project: basis rows must match the operator");
    if (g1.cols() < 1) throw ConfigError("galerkin_project: basis must have at least one column");
    ReducedModel model;
    model.g1 = g1;
    model.s1 = g1.transpose() * g1;
    model.s1 = 0.5 * (model.s1 + model.s1.transpose());
    const Vector s = Eigen::SelfAdjointEigenSolver<Matrix>(model.s1, Eigen::EigenvaluesOnly).eigenvalues();
    model.s1_condition = s[0] > 0.0 ? s[s.size() - 1] / s[0] : std::numeric_limits<double>::infinity();
    if (!(model.s1_condition <= 1e12))
        throw Error("galerkin_project: basis is numerically rank deficient (Gram condition " +
                    std::to_string(model.s1_condition) + ")");
    model.m1 = g1.transpose() * f.apply_block(g1);
    model.gamma = dense_eig_oracle(model.m1, &model.s1).values;
    return model;
}

BoundsReport two_sided_report(const VectorRef& lambda_bar, const VectorRef& gamma_bar, const VectorRef& omega) {
    if (lambda_bar.size() != omega.size() || gamma_bar.size() != omega.size())
        throw DimensionError("two_sided_report: arrays must have equal length");
    BoundsReport r;
    for (Index k = 0; k < omega.size(); ++k) {
        BracketEntry e;
        e.index = k;
        e.lambda_bar = lambda_bar[k];
        e.omega = omega[k];
        e.gamma_bar = gamma_bar[k];
        e.lower_margin = e.omega - e.lambda_bar;
        e.upper_margin = e.gamma_bar - e.omega;
        e.lower_holds = e.lower_margin >= 0.0;
        e.upper_holds = e.upper_margin >= 0.0;
        if (!(e.lower_holds && e.upper_holds)) ++r.violations;
        r.max_aux_error = std::max(r.max_aux_error, std::abs(e.lower_margin));
        r.max_galerkin_error = std::max(r.max_galerkin_error, std::abs(e.upper_margin));
        r.entries.push_back(e);
    }
    return r;
}

nlohmann::json to_json(const BoundsReport& report) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : report.entries)
        j["entries"].push_back({{"index", e.index},
                                {"lambda_bar", e.lambda_bar},
                                {"omega", e.omega},
                                {"gamma_bar", e.gamma_bar},
                                {"lower_holds", e.lower_holds},
                                {"upper_holds", e.upper_holds},
                                {"lower_margin", e.lower_margin},
                                {"upper_margin", e.upper_margin}});
    j["violations"] = report.violations;
    j["all_hold"] = report.all_hold();
    j["max_aux_error"] = report.max_aux_error;
    j["max_galerkin_error"] = report.max_galerkin_error;
    j["galerkin_improves"] = report.galerkin_improves();
    return j;
}

std::string to_string(Model m) { return m == Model::Tda ? "tda" : "bse"; }

Model model_from_string(const std::string& s) {
    if (s == "tda") return Model::Tda;
    if (s == "bse") return Model::Bse;
    throw ConfigError("unknown model '" + s + "' (expected tda or bse)");
}

BoundsRun two_sided_bounds(const ProblemInstance& inst, const BoundsConfig& cfg) {
    const Index n = inst.n_ov();
    const Index dim = cfg.model == Model::Tda ? n : 2 * n;
    if (dim > kDenseOracleGuard)
        throw GuardError("bounds: operator dimension " + std::to_string(dim) + " exceeds the dense oracle guard");
    if (cfg.m0 < 1 || cfg.m0 > n) throw ConfigError("bounds: m0 must lie in [1, N_ov]");

    BoundsRun run;
    run.spec = build_reduced_block(inst, cfg.c_w);
    const auto a_nw = assemble_a_nw(inst, run.spec);
    KrylovOptions opts;
    opts.m0 = cfg.m0;
    opts.tol = cfg.tol;

    if (cfg.model == Model::Tda) {
        run.auxiliary = shift_invert_tda(reduced_tda_inverse(inst, run.spec), opts);
        const DenseOperator a(exact_a_dense(inst));
        run.galerkin = galerkin_project(a, run.auxiliary.vectors);
        run.omega = dense_eig_oracle(a.matrix()).values.head(cfg.m0);
        const Vector gamma = run.galerkin.gamma;
        run.report = two_sided_report(run.auxiliary.values, gamma.head(cfg.m0), run.omega);
    } else {
        const LowRankMatrix w_til_r = truncated_svd(inst.w_til, cfg.eps, inst.r_v());
        run.rank_w_til = w_til_r.rank();
        Matrix phi(n, inst.r_v() + w_til_r.rank()), psi(n, inst.r_v() + w_til_r.rank());
        phi << inst.l_v, w_til_r.left();
        psi << inst.l_v, -w_til_r.right();
        const LowRankMatrix b0(phi, psi);
        const BlockJSymmetric f_nw(a_nw, std::make_shared<LowRankMatrix>(b0), JFlavor::FNWReduced);
        run.auxiliary = shift_invert_bse(reduced_bse_inverse(inst, run.spec, b0), f_nw, opts);
        const BlockJSymmetric f1(std::make_shared<DenseOperator>(exact_a_dense(inst)),
                                 std::make_shared<DenseOperator>(exact_b_dense(inst)), JFlavor::F1Exact);
        run.galerkin = galerkin_project(f1, run.auxiliary.vectors);
        run.omega = positive_branch(dense_eig_oracle(f1.to_dense()).values, cfg.m0);
        const Vector gamma = run.galerkin.positive(cfg.m0);
        if (gamma.size() != cfg.m0 || run.omega.size() != cfg.m0)
            throw Error("bounds: fewer positive eigenvalues than requested");
        run.report = two_sided_report(run.auxiliary.values, gamma, run.omega);
    }
    return run;
}

} // namespace bse
