#include "bse/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "bse/dmrg.hpp"
#include "bse/eigensolve.hpp"
#include "bse/errors.hpp"
#include "bse/lowrank.hpp"
#include "bse/sherman.hpp"

namespace bse::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json vector_json(const VectorRef& v, double scale = 1.0) {
    json a = json::array();
    for (Index k = 0; k < v.size(); ++k) a.push_back(v[k] * scale);
    return a;
}

json instance_json(const ProblemInstance& inst, const std::string& path) {
    return {{"path", path},
            {"digest", instance_digest(inst)},
            {"n_o", inst.n_o},
            {"n_v", inst.n_v},
            {"n_ov", inst.n_ov()},
            {"r_v", inst.r_v()},
            {"units", to_string(inst.units)}};
}

json empty_stats() {
    return {{"storage", nullptr},     {"rank_w", nullptr},         {"rank_w_til", nullptr},
            {"n_w", nullptr},         {"max_rank", nullptr},       {"effective_rank", nullptr},
            {"memory_ratio", nullptr}, {"operator_storage", nullptr}, {"solution_storage", nullptr},
            {"rank_convention", nullptr}};
}

/// Phi Psi^T with Phi = [L_V Y], Psi = [L_V -Z] from w_til truncated at eps.
LowRankMatrix coupling_block(const ProblemInstance& inst, double eps, Index& rank_w_til) {
    const LowRankMatrix w = truncated_svd(inst.w_til, eps, inst.r_v());
    rank_w_til = w.rank();
    const Index n = inst.n_ov();
    Matrix phi(n, inst.r_v() + w.rank()), psi(n, inst.r_v() + w.rank());
    phi << inst.l_v, w.left();
    psi << inst.l_v, -w.right();
    return LowRankMatrix(std::move(phi), std::move(psi));
}

Matrix exact_f1_dense(const ProblemInstance& inst) {
    return j_symmetric_dense(exact_a_dense(inst), exact_b_dense(inst));
}

/// Reference spectrum of a dense target: the m0 smallest values (TDA) or the
/// m0 smallest positive values (BSE).
Vector reference_values(const Matrix& m, Model model, Index m0) {
    const EigenResult r = dense_eig_oracle(m);
    if (model == Model::Tda) return r.values.head(m0);
    const Vector pos = positive_branch(r.values, m0);
    if (pos.size() != m0) throw Error("oracle: fewer positive eigenvalues than requested");
    return pos;
}

void check_oracle_size(Index dim) {
    if (dim > kDenseOracleGuard)
        throw GuardError("oracle: operator dimension " + std::to_string(dim) + " exceeds the dense oracle guard " +
                         std::to_string(kDenseOracleGuard));
}

json error_json(const Vector& values, const Vector& ref, const std::string& op, double scale) {
    const Vector abs = (values - ref).cwiseAbs();
    const Vector rel = (abs.array() / ref.array().abs()).matrix();
    return {{"operator", op},
            {"max_abs_err", abs.maxCoeff() * scale},
            {"max_rel_err", rel.maxCoeff()},
            {"abs_err", vector_json(abs, scale)},
            {"reference", vector_json(ref, scale)}};
}

json null_errors() {
    return {{"operator", nullptr},
            {"max_abs_err", nullptr},
            {"max_rel_err", nullptr},
            {"abs_err", nullptr},
            {"reference", nullptr}};
}

struct Solved {
    EigenResult result;
    double setup_s = 0.0;
    double solve_s = 0.0;
    json stats = empty_stats();
    json telemetry = nullptr;
    std::string target;                   ///< operator whose spectrum is approximated
    std::function<Matrix()> target_dense; ///< desk-scale materialization of the target
};

Solved run_method(const ProblemInstance& inst, const SolveConfig& cfg) {
    const Index n = inst.n_ov();
    const bool tda = cfg.model == Model::Tda;
    KrylovOptions kopt;
    kopt.m0 = cfg.m0;
    kopt.tol = cfg.tol;
    kopt.max_restarts = cfg.max_restarts;
    kopt.seed = cfg.seed;

    Solved s;
    auto t0 = Clock::now();
    switch (cfg.method) {
    case Method::Dense: {
        check_oracle_size(tda ? n : 2 * n);
        const Matrix m = tda ? exact_a_dense(inst) : exact_f1_dense(inst);
        s.setup_s = seconds_since(t0);
        t0 = Clock::now();
        s.result.method = "dense";
        s.result.values = reference_values(m, cfg.model, cfg.m0);
        s.result.converged = true;
        s.solve_s = seconds_since(t0);
        s.stats["storage"] = tda ? n * n : 2 * n * n;
        s.target = tda ? "A" : "F1";
        s.target_dense = [m] { return m; };
        break;
    }
    case Method::LowrankInv:
    case Method::LowrankFwd: {
        auto aux = std::make_shared<AuxiliaryOperators>(assemble_aux(inst, cfg.eps));
        const Index rank_p = aux->a0->low_rank().rank();
        s.stats["rank_w"] = aux->w_bar_r.rank();
        if (cfg.method == Method::LowrankFwd) {
            s.setup_s = seconds_since(t0);
            t0 = Clock::now();
            s.result = forward_tda(*aux->a0, kopt);
            s.stats["storage"] = n + 2 * n * rank_p;
        } else if (tda) {
            const TdaInverse inv = precompute_tda(*aux->a0);
            s.setup_s = seconds_since(t0);
            t0 = Clock::now();
            s.result = shift_invert_tda(inv, kopt);
            s.stats["storage"] = n + 2 * n * rank_p;
        } else {
            const BseInverse inv = precompute_bse(*aux->a0, *aux->b0);
            s.setup_s = seconds_since(t0);
            t0 = Clock::now();
            s.result = shift_invert_bse(inv, *aux->f0, kopt);
            s.stats["rank_w_til"] = aux->w_til_r.rank();
            s.stats["storage"] = n + 2 * n * rank_p + 2 * n * aux->b0->rank();
        }
        s.solve_s = seconds_since(t0);
        s.target = tda ? "A0" : "F0";
        s.target_dense = [aux, tda] { return tda ? aux->a0->dense() : aux->f0->to_dense(); };
        break;
    }
    case Method::RedblockInv: {
        const ReducedBlockSpec spec = build_reduced_block(inst, cfg.c_w);
        const auto a_nw = assemble_a_nw(inst, spec);
        s.stats["n_w"] = spec.n_w;
        if (tda) {
            const TdaInverse inv = reduced_tda_inverse(inst, spec);
            s.setup_s = seconds_since(t0);
            t0 = Clock::now();
            s.result = shift_invert_tda(inv, kopt);
            s.stats["storage"] = a_nw->storage();
            s.target = "A_NW";
            s.target_dense = [a_nw] { return a_nw->to_dense(); };
        } else {
            Index rank_w_til = 0;
            const LowRankMatrix b0 = coupling_block(inst, cfg.eps, rank_w_til);
            const BseInverse inv = reduced_bse_inverse(inst, spec, b0);
            auto f_nw = std::make_shared<BlockJSymmetric>(a_nw, std::make_shared<LowRankMatrix>(b0), JFlavor::FNWReduced);
            s.setup_s = seconds_since(t0);
            t0 = Clock::now();
            s.result = shift_invert_bse(inv, *f_nw, kopt);
            s.stats["rank_w_til"] = rank_w_til;
            s.stats["storage"] = a_nw->storage() + 2 * n * b0.rank();
            s.target = "F_NW";
            s.target_dense = [f_nw] { return f_nw->to_dense(); };
        }
        s.solve_s = seconds_since(t0);
        break;
    }
    case Method::QttDmrg: {
        const DmrgOperator op = build_operator(inst, cfg.eps);
        s.setup_s = seconds_since(t0);
        t0 = Clock::now();
        DmrgOptions dopt;
        dopt.m0 = cfg.m0;
        dopt.eps = cfg.eps;
        dopt.sweeps = cfg.sweeps;
        dopt.seed = cfg.seed;
        DmrgResult r = dmrg_eig(op, dopt);
        s.solve_s = seconds_since(t0);
        s.result = std::move(r.result);
        s.telemetry = r.telemetry();
        s.stats["storage"] = op.storage() + r.u.storage();
        s.stats["operator_storage"] = op.storage();
        s.stats["solution_storage"] = r.u.storage();
        s.stats["max_rank"] = r.u.max_rank();
        s.stats["effective_rank"] = r.u.effective_rank();
        s.stats["memory_ratio"] = static_cast<double>(r.u.storage()) / static_cast<double>(n * cfg.m0);
        s.stats["rank_convention"] =
            "ranks and effective_rank exclude the block index; solution_storage and memory_ratio include it";
        s.stats["stagnated"] = r.stagnated;
        s.target = "A";
        s.target_dense = [&inst] { return exact_a_dense(inst); };
        break;
    }
    }
    return s;
}

void validate(const ProblemInstance& inst, const SolveConfig& cfg) {
    if (cfg.m0 < 1 || cfg.m0 > inst.n_ov()) throw ConfigError("--m0 must lie in [1, N_ov]");
    if (!(cfg.eps >= 0.0)) throw ConfigError("--eps must be nonnegative");
    if (!(cfg.c_w > 0.0)) throw ConfigError("--c-w must be positive");
    if (!(cfg.tol > 0.0)) throw ConfigError("--tol must be positive");
    if (cfg.sweeps < 1) throw ConfigError("--sweeps must be at least 1");
    if (cfg.model == Model::Bse && (cfg.method == Method::LowrankFwd || cfg.method == Method::QttDmrg))
        throw ConfigError("--method " + to_string(cfg.method) + " supports --model tda only");
}

json number_or_null(bool present, double v) { return present ? json(v) : json(nullptr); }

} // namespace

std::string to_string(Method m) {
    switch (m) {
    case Method::Dense: return "dense";
    case Method::LowrankInv: return "lowrank-inv";
    case Method::RedblockInv: return "redblock-inv";
    case Method::LowrankFwd: return "lowrank-fwd";
    case Method::QttDmrg: return "qtt-dmrg";
    }
    return "dense";
}

const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"dense", "lowrank-inv", "redblock-inv", "lowrank-fwd", "qtt-dmrg"};
    return names;
}

Method method_from_string(const std::string& s) {
    for (Method m : {Method::Dense, Method::LowrankInv, Method::RedblockInv, Method::LowrankFwd, Method::QttDmrg})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown method '" + s + "'");
}

json solve_record(const ProblemInstance& inst, const SolveConfig& cfg, const std::string& instance_path) {
    validate(inst, cfg);
    const Index n = inst.n_ov();
    const bool tda = cfg.model == Model::Tda;
    const bool uses_c_w = cfg.method == Method::RedblockInv;
    const bool uses_eps = cfg.method != Method::Dense && !(cfg.method == Method::RedblockInv && tda);
    const bool krylov = cfg.method == Method::LowrankInv || cfg.method == Method::RedblockInv ||
                        cfg.method == Method::LowrankFwd;

    Solved s = run_method(inst, cfg);
    const EigenResult& r = s.result;

    const bool ev = cfg.in_ev && inst.units == Units::Hartree;
    const double scale = ev ? kHartreeToEv : 1.0;

    json rec;
    rec["method"] = to_string(cfg.method);
    rec["model"] = to_string(cfg.model);
    rec["instance"] = instance_json(inst, instance_path);
    rec["config"] = {{"m0", cfg.m0},
                     {"eps", number_or_null(uses_eps, cfg.eps)},
                     {"c_w", number_or_null(uses_c_w, cfg.c_w)},
                     {"sweeps", cfg.method == Method::QttDmrg ? json(cfg.sweeps) : json(nullptr)},
                     {"seed", cfg.seed}};
    rec["tolerances"] = {{"solver", cfg.method == Method::Dense ? json(nullptr) : json(r.tol)},
                         {"max_restarts", krylov ? json(cfg.max_restarts) : json(nullptr)}};
    rec["energy_unit"] = ev ? "eV" : to_string(inst.units);
    rec["target_operator"] = s.target;
    rec["eigenvalues"] = vector_json(r.values, scale);
    rec["residuals"] = r.residuals.size() == r.values.size() ? vector_json(r.residuals) : json(nullptr);
    rec["converged"] = r.converged;
    rec["iterations"] = cfg.method == Method::Dense ? json(nullptr) : json(r.iterations);
    rec["restarts"] = krylov ? json(r.restarts) : json(nullptr);
    rec["spurious"] = r.spurious;

    json timings = {{"setup_s", s.setup_s}, {"solve_s", s.solve_s}, {"oracle_s", nullptr}};
    rec["errors"] = null_errors();
    rec["approximation"] = null_errors();
    if (cfg.oracle && r.values.size() == cfg.m0) {
        const Index dim = tda ? n : 2 * n;
        check_oracle_size(dim);
        const auto t0 = Clock::now();
        const Vector ref = reference_values(s.target_dense(), cfg.model, cfg.m0);
        rec["errors"] = error_json(r.values, ref, s.target, scale);
        const std::string exact = tda ? "A" : "F1";
        if (s.target == exact) {
            rec["approximation"] = rec["errors"];
        } else {
            const Matrix m = tda ? exact_a_dense(inst) : exact_f1_dense(inst);
            rec["approximation"] = error_json(r.values, reference_values(m, cfg.model, cfg.m0), exact, scale);
        }
        timings["oracle_s"] = seconds_since(t0);
    }
    rec["timings"] = timings;
    rec["stats"] = s.stats;
    rec["telemetry"] = s.telemetry;
    return rec;
}

json bounds_record(const ProblemInstance& inst, const BoundsConfig& cfg, const std::string& instance_path) {
    const auto t0 = Clock::now();
    const BoundsRun run = two_sided_bounds(inst, cfg);
    json rec;
    rec["instance"] = instance_json(inst, instance_path);
    rec["config"] = {{"model", to_string(cfg.model)},
                     {"m0", cfg.m0},
                     {"eps", cfg.eps},
                     {"c_w", cfg.c_w},
                     {"tol", cfg.tol}};
    rec["n_w"] = run.spec.n_w;
    rec["rank_w_til"] = cfg.model == Model::Bse ? json(run.rank_w_til) : json(nullptr);
    rec["auxiliary_converged"] = run.auxiliary.converged;
    rec["report"] = to_json(run.report);
    rec["wall_time_s"] = seconds_since(t0);
    return rec;
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << std::scientific << v;
    return os.str();
}

struct BenchRow {
    std::string instance;
    std::string n_ov;
    std::string method;
    std::string setup_s;
    std::string solve_s;
    std::string max_abs_err;
    std::string status = "ok";
    double solve = 0.0;
};

} // namespace

std::string bench_csv(const json& manifest, const std::filesystem::path& base_dir) {
    if (!manifest.is_object() || !manifest.contains("instances") || !manifest.contains("methods"))
        throw ConfigError("bench manifest needs \"instances\" and \"methods\" arrays");
    SolveConfig base;
    base.model = model_from_string(manifest.value("model", std::string("tda")));
    base.m0 = manifest.value("m0", base.m0);
    base.eps = manifest.value("eps", base.eps);
    base.c_w = manifest.value("c_w", base.c_w);
    base.sweeps = manifest.value("sweeps", base.sweeps);
    base.tol = manifest.value("tol", base.tol);
    base.oracle = manifest.value("oracle", true);
    std::vector<Method> methods;
    for (const auto& m : manifest.at("methods")) methods.push_back(method_from_string(m.get<std::string>()));

    std::ostringstream out;
    out << kBenchHeader << '\n';
    for (const auto& entry : manifest.at("instances")) {
        const std::string name = entry.get<std::string>();
        std::filesystem::path path(name);
        if (path.is_relative()) path = base_dir / path;

        std::optional<ProblemInstance> inst;
        try {
            inst = load(path);
        } catch (const Error&) {
        }

        std::vector<BenchRow> rows;
        for (Method m : methods) {
            BenchRow row;
            row.instance = name;
            row.method = to_string(m);
            if (!inst) {
                row.status = "error";
                rows.push_back(row);
                continue;
            }
            row.n_ov = std::to_string(inst->n_ov());
            SolveConfig cfg = base;
            cfg.method = m;
            try {
                const json rec = solve_record(*inst, cfg, name);
                row.solve = rec["timings"]["solve_s"].get<double>();
                row.setup_s = format_double(rec["timings"]["setup_s"].get<double>());
                row.solve_s = format_double(row.solve);
                if (!rec["errors"]["max_abs_err"].is_null())
                    row.max_abs_err = format_double(rec["errors"]["max_abs_err"].get<double>());
                if (!rec["converged"].get<bool>()) row.status = "not_converged";
            } catch (const GuardError&) {
                row.status = "guard";
            } catch (const Error&) {
                row.status = "error";
            }
            rows.push_back(row);
        }

        std::string inv_le_fwd;
        const BenchRow* inv = nullptr;
        const BenchRow* fwd = nullptr;
        for (const auto& row : rows) {
            if (row.method == "lowrank-inv" && row.status == "ok") inv = &row;
            if (row.method == "lowrank-fwd" && row.status == "ok") fwd = &row;
        }
        if (inv && fwd) inv_le_fwd = inv->solve <= fwd->solve ? "true" : "false";

        for (const auto& row : rows)
            out << row.instance << ',' << row.n_ov << ',' << row.method << ',' << base.m0 << ','
                << format_double(base.eps) << ',' << row.setup_s << ',' << row.solve_s << ',' << row.max_abs_err << ','
                << row.status << ',' << inv_le_fwd << '\n';
    }
    return out.str();
}

namespace {

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw FormatError(FormatError::Kind::Io, "cannot open '" + out_path + "' for writing");
    f << text;
    if (!f) throw FormatError(FormatError::Kind::Io, "write to '" + out_path + "' failed");
}

json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError(FormatError::Kind::Io, "cannot open '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw FormatError(FormatError::Kind::MalformedHeader, "manifest '" + path + "': " + e.what());
    }
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Structured eigensolvers for particle-hole excitation problems", "bsesolve"};
    app.require_subcommand(1);

    SynthConfig gen_cfg;
    std::string gen_out;
    bool gen_hartree = false;
    auto* gen = app.add_subcommand("gen", "Synthesize an instance file");
    gen->add_option("--n-o", gen_cfg.n_o, "occupied orbitals")->required()->check(CLI::PositiveNumber);
    gen->add_option("--n-v", gen_cfg.n_v, "virtual orbitals")->required()->check(CLI::PositiveNumber);
    gen->add_option("--rank", gen_cfg.r_v, "columns of L_V")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_cfg.seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "instance file")->required();
    gen->add_flag("--hartree", gen_hartree, "tag energies as hartree");

    SolveConfig solve_cfg;
    std::string solve_in, solve_out, method_name, model_name = "tda";
    auto* solve = app.add_subcommand("solve", "Run one solver and print a run record");
    solve->add_option("--in", solve_in, "instance file")->required();
    solve->add_option("--method", method_name, "solver")->required()->check(CLI::IsMember(method_names()));
    solve->add_option("--model", model_name, "tda or bse")->check(CLI::IsMember({"tda", "bse"}));
    solve->add_option("--m0", solve_cfg.m0, "wanted eigenvalues")->check(CLI::PositiveNumber);
    solve->add_option("--eps", solve_cfg.eps, "truncation threshold")->check(CLI::NonNegativeNumber);
    solve->add_option("--c-w", solve_cfg.c_w, "reduced block constant")->check(CLI::PositiveNumber);
    solve->add_option("--sweeps", solve_cfg.sweeps, "DMRG half-sweeps")->check(CLI::PositiveNumber);
    solve->add_option("--tol", solve_cfg.tol, "Krylov residual tolerance")->check(CLI::PositiveNumber);
    solve->add_option("--max-restarts", solve_cfg.max_restarts, "Krylov restart limit")->check(CLI::NonNegativeNumber);
    solve->add_option("--seed", solve_cfg.seed, "starting vector seed");
    solve->add_flag("--oracle", solve_cfg.oracle, "compare with the dense oracle");
    solve->add_flag("--in-ev", solve_cfg.in_ev, "report energies in eV for hartree instances");
    solve->add_option("--out", solve_out, "record file (default stdout)");

    std::string bench_manifest, bench_out;
    auto* bench = app.add_subcommand("bench", "Run a manifest of instances and methods, print CSV");
    bench->add_option("--manifest", bench_manifest, "JSON manifest")->required();
    bench->add_option("--out", bench_out, "CSV file (default stdout)");

    BoundsConfig bounds_cfg;
    std::string bounds_in, bounds_out, bounds_model = "bse";
    auto* bounds = app.add_subcommand("bounds", "Two-sided eigenvalue bounds against the dense oracle");
    bounds->add_option("--in", bounds_in, "instance file")->required();
    bounds->add_option("--model", bounds_model, "tda or bse")->check(CLI::IsMember({"tda", "bse"}));
    bounds->add_option("--m0", bounds_cfg.m0, "wanted eigenvalues")->check(CLI::PositiveNumber);
    bounds->add_option("--eps", bounds_cfg.eps, "truncation threshold")->check(CLI::NonNegativeNumber);
    bounds->add_option("--c-w", bounds_cfg.c_w, "reduced block constant")->check(CLI::PositiveNumber);
    bounds->add_option("--tol", bounds_cfg.tol, "Krylov residual tolerance")->check(CLI::PositiveNumber);
    bounds->add_option("--out", bounds_out, "report file (default stdout)");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "bsesolve: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            gen_cfg.units = gen_hartree ? Units::Hartree : Units::Abstract;
            const ProblemInstance inst = synthesize(gen_cfg);
            save(inst, gen_out);
            json summary = instance_json(inst, gen_out);
            summary["seed"] = gen_cfg.seed;
            out << summary.dump(2) << '\n';
            return kExitOk;
        }
        if (solve->parsed()) {
            solve_cfg.method = method_from_string(method_name);
            solve_cfg.model = model_from_string(model_name);
            const ProblemInstance inst = load(solve_in);
            const json rec = solve_record(inst, solve_cfg, solve_in);
            emit(rec.dump(2) + "\n", solve_out, out);
            if (!rec["converged"].get<bool>()) {
                err << "bsesolve: solver did not converge\n";
                return kExitNotConverged;
            }
            return kExitOk;
        }
        if (bench->parsed()) {
            const json manifest = read_json_file(bench_manifest);
            const auto base = std::filesystem::path(bench_manifest).parent_path();
            emit(bench_csv(manifest, base), bench_out, out);
            return kExitOk;
        }
        if (bounds->parsed()) {
            bounds_cfg.model = model_from_string(bounds_model);
            const ProblemInstance inst = load(bounds_in);
            emit(bounds_record(inst, bounds_cfg, bounds_in).dump(2) + "\n", bounds_out, out);
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "bsesolve: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "bsesolve: " << e.what() << '\n';
        return kExitIo;
    } catch (const GuardError& e) {
        err << "bsesolve: " << e.what() << '\n';
        return kExitGuard;
    } catch (const std::exception& e) {
        err << "bsesolve: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}

} // namespace bse::cli
