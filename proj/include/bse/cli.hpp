#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "bse/problem.hpp"
#include "bse/redbasis.hpp"

namespace bse::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitUsage = 2,
    kExitIo = 3,
    kExitNotConverged = 4,
    kExitGuard = 5,
};

enum class Method { Dense, LowrankInv, RedblockInv, LowrankFwd, QttDmrg };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<std::string>& method_names();

struct SolveConfig {
    Method method = Method::Dense;
    Model model = Model::Tda;
    Index m0 = 10;
    double eps = 0.1;
    double c_w = 1.0;
    Index sweeps = 2;
    double tol = 1e-8;
    Index max_restarts = 300;
    std::uint64_t seed = 0x5eed;
    bool oracle = false;
    bool in_ev = false;
};

/// RunRecord of one solve. Throws ConfigError for unsupported combinations
/// and GuardError when a dense step exceeds its size guard. Non-convergence
/// is reported through the "converged" field.
nlohmann::json solve_record(const ProblemInstance& inst, const SolveConfig& cfg, const std::string& instance_path);

/// Bounds report with instance and configuration metadata.
nlohmann::json bounds_record(const ProblemInstance& inst, const BoundsConfig& cfg, const std::string& instance_path);

/// Manifest: {"instances": [...], "methods": [...], optional "model", "m0",
/// "eps", "c_w", "sweeps", "tol", "oracle"}. Relative instance paths are
/// resolved against `base_dir`.
std::string bench_csv(const nlohmann::json& manifest, const std::filesystem::path& base_dir);

inline constexpr const char* kBenchHeader = "instance,n_ov,method,m0,eps,setup_s,solve_s,max_abs_err,status,inv_le_fwd";

/// Full command line, args[0] being the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace bse::cli
