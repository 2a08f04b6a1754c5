#include "bse/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "bse/errors.hpp"
#include "bse/random.hpp"
#include "binio.hpp"

namespace bse {

namespace {

using binio::get_array;
using binio::get_u64;
using binio::put_array;
using binio::put_u64;

constexpr std::string_view kMagic = "BSEPROB1";
constexpr double kSymmetryTolerance = 1e-12;

double relative_asymmetry(const Matrix& m) {
    const double norm = m.norm();
    if (norm == 0.0) return 0.0;
    return (m - m.transpose()).norm() / norm;
}

struct ArraySpec {
    const char* name;
    Index rows;
    Index cols;
};

std::vector<ArraySpec> expected_arrays(Index n_o, Index n_v, Index r_v) {
    const Index n_ov = n_o * n_v;
    return {{"eps_occ", n_o, 1}, {"eps_virt", n_v, 1}, {"l_v", n_ov, r_v}, {"w_bar", n_ov, n_ov},
            {"w_til", n_ov, n_ov}};
}

Index manifest_count(const nlohmann::json& manifest, const char* key) {
    if (!manifest.contains(key) || !manifest[key].is_number_integer())
        throw FormatError(FormatError::Kind::MalformedHeader,
                          std::string("BSEP1 manifest: missing integer key '") + key + "'");
    const auto v = manifest[key].get<std::int64_t>();
    if (v < 0)
        throw FormatError(FormatError::Kind::MalformedHeader,
                          std::string("BSEP1 manifest: negative value for '") + key + "'");
    return static_cast<Index>(v);
}

} // namespace

std::string to_string(Units u) { return u == Units::Hartree ? "hartree" : "abstract"; }

Units units_from_string(const std::string& s) {
    if (s == "hartree") return Units::Hartree;
    if (s == "abstract") return Units::Abstract;
    throw ConfigError("unknown units tag '" + s + "'");
}

void ProblemInstance::validate() const {
    if (n_o < 1 || n_v < 1) throw ConfigError("instance: n_o and n_v must be >= 1");
    const Index n = n_ov();
    if (eps_occ.size() != n_o || eps_virt.size() != n_v)
        throw DimensionError("instance: energy arrays do not match n_o / n_v");
    if (l_v.rows() != n || w_bar.rows() != n || w_bar.cols() != n || w_til.rows() != n ||
        w_til.cols() != n)
        throw DimensionError("instance: matrix dimensions do not match N_ov = n_o * n_v");
    if (!(eps_virt.minCoeff() > eps_occ.maxCoeff()))
        throw ConfigError("instance: min(eps_virt) must exceed max(eps_occ)");
    if (relative_asymmetry(w_bar) > kSymmetryTolerance)
        throw ConfigError("instance: w_bar is not symmetric");
    if (relative_asymmetry(w_til) > kSymmetryTolerance)
        throw ConfigError("instance: w_til is not symmetric");
}

bool operator==(const ProblemInstance& a, const ProblemInstance& b) {
    return serialize(a) == serialize(b);
}

EnergyDiagonal::EnergyDiagonal(Vector eps_occ, Vector eps_virt)
    : eps_occ_(std::move(eps_occ)), eps_virt_(std::move(eps_virt)) {}

Vector EnergyDiagonal::values() const {
    Vector out(size());
    for (Index i = 0; i < n_o(); ++i)
        for (Index a = 0; a < n_v(); ++a) out[composite(i, a)] = eps_virt_[a] - eps_occ_[i];
    return out;
}

std::vector<Index> EnergyDiagonal::ascending_order() const {
    const Vector v = values();
    std::vector<Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return v[x] < v[y]; });
    return order;
}

EnergyDiagonal energy_diagonal(const ProblemInstance& inst) {
    return EnergyDiagonal(inst.eps_occ, inst.eps_virt);
}

ProblemInstance synthesize(const SynthConfig& cfg) {
    if (cfg.n_o < 1) throw ConfigError("synthesize: n_o must be >= 1");
    if (cfg.n_v < 1) throw ConfigError("synthesize: n_v must be >= 1");
    if (cfg.r_v < 1) throw ConfigError("synthesize: r_v must be >= 1");
    if (cfg.r_v > cfg.n_o * cfg.n_v) throw ConfigError("synthesize: r_v must not exceed n_o * n_v");
    if (!(cfg.gap > 0.0)) throw ConfigError("synthesize: gap must be positive");
    const WRankProfile& prof = cfg.w_rank_profile;
    if (!(prof.block_fraction > 0.0 && prof.block_fraction <= 1.0))
        throw ConfigError("synthesize: block_fraction must lie in (0, 1]");
    if (prof.tail_rank < 0 || prof.correlation <= 0.0)
        throw ConfigError("synthesize: invalid w_rank_profile");

    Rng rng(cfg.seed);
    const double gap = cfg.gap;
    ProblemInstance inst;
    inst.n_o = cfg.n_o;
    inst.n_v = cfg.n_v;
    inst.units = cfg.units;

    // Smooth quadratic orbital ladders; HOMO at -gap/2, LUMO at +gap/2.
    const double occ_span = gap * rng.uniform(1.0, 2.0);
    const double occ_curv = rng.uniform(0.0, 0.5);
    const double virt_span = gap * rng.uniform(2.0, 4.0);
    const double virt_curv = rng.uniform(0.0, 0.5);
    inst.eps_occ.resize(cfg.n_o);
    for (Index i = 0; i < cfg.n_o; ++i) {
        const double s = cfg.n_o > 1 ? 1.0 - static_cast<double>(i) / (cfg.n_o - 1) : 0.0;
        inst.eps_occ[i] = -0.5 * gap - occ_span * s * (1.0 + occ_curv * s);
    }
    inst.eps_virt.resize(cfg.n_v);
    for (Index a = 0; a < cfg.n_v; ++a) {
        const double t = cfg.n_v > 1 ? static_cast<double>(a) / (cfg.n_v - 1) : 0.0;
        inst.eps_virt[a] = 0.5 * gap + virt_span * t * (1.0 + virt_curv * t);
    }

    const EnergyDiagonal diag = energy_diagonal(inst);
    const Vector de = diag.values();
    const Index n = de.size();
    const std::vector<Index> order = diag.ascending_order();
    std::vector<Index> position(static_cast<std::size_t>(n));
    for (Index p = 0; p < n; ++p) position[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = p;

    // l_v: orthonormal columns biased towards small transition energies,
    // scaled by geometrically decaying singular values.
    Matrix g = rng.normal_matrix(n, cfg.r_v);
    for (Index k = 0; k < n; ++k) g.row(k) *= gap / de[k];
    Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(n, cfg.r_v);
    Vector sigma(cfg.r_v);
    for (Index c = 0; c < cfg.r_v; ++c) sigma[c] = std::pow(cfg.lv_decay, static_cast<double>(c));
    sigma *= std::sqrt(cfg.v_strength * gap) / sigma.norm();
    inst.l_v = q * sigma.asDiagonal();
    const Matrix v = inst.l_v * inst.l_v.transpose();

    // Dense part dominated by the leading block_fraction of sorted indices.
    const double n_act = std::max(1.0, std::round(prof.block_fraction * static_cast<double>(n)));
    Matrix dense(n, n);
    for (Index k = 0; k < n; ++k) {
        const double pk = static_cast<double>(position[static_cast<std::size_t>(k)]);
        for (Index l = 0; l < n; ++l) {
            const double pl = static_cast<double>(position[static_cast<std::size_t>(l)]);
            dense(k, l) = std::exp(-(pk + pl) / n_act) * std::exp(-std::abs(pk - pl) / prof.correlation);
        }
    }
    const double row_sum = dense.cwiseAbs().rowwise().sum().maxCoeff();
    dense *= prof.dense_strength * gap / row_sum;

    Matrix w = prof.screening * v + dense;
    if (prof.tail_rank > 0) {
        const Index t = std::min(prof.tail_rank, n);
        Matrix u = Eigen::HouseholderQR<Matrix>(rng.normal_matrix(n, t)).householderQ() *
                   Matrix::Identity(n, t);
        w += (prof.tail_strength * gap / static_cast<double>(t)) * (u * u.transpose());
    }
    inst.w_bar = 0.5 * (w + w.transpose());

    Matrix c = rng.normal_matrix(cfg.r_v, cfg.r_v);
    c = 0.5 * (c + c.transpose());
    const double c_norm = Eigen::SelfAdjointEigenSolver<Matrix>(c, Eigen::EigenvaluesOnly)
                              .eigenvalues()
                              .cwiseAbs()
                              .maxCoeff();
    if (c_norm > 0.0) c *= prof.exchange / c_norm;
    const Matrix wt = inst.l_v * c * inst.l_v.transpose();
    inst.w_til = 0.5 * (wt + wt.transpose());

    inst.validate();
    return inst;
}

std::string serialize(const ProblemInstance& inst) {
    nlohmann::json manifest;
    manifest["format"] = "BSEP1";
    manifest["n_o"] = inst.n_o;
    manifest["n_v"] = inst.n_v;
    manifest["n_ov"] = inst.n_ov();
    manifest["r_v"] = inst.r_v();
    manifest["units"] = to_string(inst.units);
    manifest["arrays"] = nlohmann::json::array();
    for (const auto& a : expected_arrays(inst.n_o, inst.n_v, inst.r_v()))
        manifest["arrays"].push_back({{"name", a.name}, {"rows", a.rows}, {"cols", a.cols}});
    const std::string text = manifest.dump();

    std::string out(kMagic);
    put_u64(out, text.size());
    out += text;
    put_array(out, inst.eps_occ.data(), inst.eps_occ.size());
    put_array(out, inst.eps_virt.data(), inst.eps_virt.size());
    put_array(out, inst.l_v.data(), inst.l_v.size());
    put_array(out, inst.w_bar.data(), inst.w_bar.size());
    put_array(out, inst.w_til.data(), inst.w_til.size());
    return out;
}

ProblemInstance deserialize(std::string_view bytes) {
    using Kind = FormatError::Kind;
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
        throw FormatError(Kind::UnknownMagic, "BSEP1: unknown magic (expected 'BSEPROB1')");
    if (bytes.size() < kMagic.size() + 8)
        throw FormatError(Kind::MalformedHeader, "BSEP1: missing manifest length");
    const std::uint64_t len = get_u64(bytes, kMagic.size());
    const std::size_t header_end = kMagic.size() + 8;
    if (len > bytes.size() - header_end)
        throw FormatError(Kind::MalformedHeader, "BSEP1: manifest length exceeds file size");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(header_end, len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::MalformedHeader, std::string("BSEP1: manifest is not valid JSON: ") + e.what());
    }
    if (!manifest.is_object()) throw FormatError(Kind::MalformedHeader, "BSEP1: manifest is not an object");

    ProblemInstance inst;
    inst.n_o = manifest_count(manifest, "n_o");
    inst.n_v = manifest_count(manifest, "n_v");
    const Index r_v = manifest_count(manifest, "r_v");
    if (manifest.contains("n_ov") && manifest_count(manifest, "n_ov") != inst.n_o * inst.n_v)
        throw FormatError(Kind::DimensionMismatch, "BSEP1: n_ov differs from n_o * n_v");
    if (!manifest.contains("units") || !manifest["units"].is_string())
        throw FormatError(Kind::MalformedHeader, "BSEP1 manifest: missing 'units'");
    try {
        inst.units = units_from_string(manifest["units"].get<std::string>());
    } catch (const ConfigError& e) {
        throw FormatError(Kind::MalformedHeader, std::string("BSEP1 manifest: ") + e.what());
    }

    const auto expected = expected_arrays(inst.n_o, inst.n_v, r_v);
    if (!manifest.contains("arrays") || !manifest["arrays"].is_array())
        throw FormatError(Kind::MalformedHeader, "BSEP1 manifest: missing 'arrays' list");
    const auto& arrays = manifest["arrays"];
    if (arrays.size() != expected.size())
        throw FormatError(Kind::MalformedHeader, "BSEP1 manifest: expected five arrays");
    std::uint64_t payload = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& a = arrays[i];
        if (!a.is_object() || a.value("name", "") != expected[i].name)
            throw FormatError(Kind::MalformedHeader,
                              std::string("BSEP1 manifest: array ") + std::to_string(i) + " must be '" +
                                  expected[i].name + "'");
        if (manifest_count(a, "rows") != expected[i].rows || manifest_count(a, "cols") != expected[i].cols)
            throw FormatError(Kind::DimensionMismatch,
                              std::string("BSEP1: dimensions of '") + expected[i].name +
                                  "' disagree with n_o, n_v, r_v");
        payload += static_cast<std::uint64_t>(expected[i].rows) * static_cast<std::uint64_t>(expected[i].cols) * 8u;
    }

    std::size_t offset = header_end + len;
    const std::uint64_t available = bytes.size() - offset;
    if (available < payload)
        throw FormatError(Kind::TruncatedPayload, "BSEP1: binary payload truncated (" + std::to_string(available) +
                                                      " of " + std::to_string(payload) + " bytes)");
    if (available > payload) throw FormatError(Kind::MalformedHeader, "BSEP1: trailing bytes after payload");

    const Index n_ov = inst.n_o * inst.n_v;
    inst.eps_occ.resize(inst.n_o);
    inst.eps_virt.resize(inst.n_v);
    inst.l_v.resize(n_ov, r_v);
    inst.w_bar.resize(n_ov, n_ov);
    inst.w_til.resize(n_ov, n_ov);
    get_array(bytes, offset, inst.eps_occ.data(), inst.eps_occ.size());
    get_array(bytes, offset, inst.eps_virt.data(), inst.eps_virt.size());
    get_array(bytes, offset, inst.l_v.data(), inst.l_v.size());
    get_array(bytes, offset, inst.w_bar.data(), inst.w_bar.size());
    get_array(bytes, offset, inst.w_til.data(), inst.w_til.size());
    return inst;
}

void save(const ProblemInstance& inst, const std::filesystem::path& path) { binio::write_file(path, serialize(inst)); }

ProblemInstance load(const std::filesystem::path& path) {
    ProblemInstance inst = deserialize(binio::read_file(path));
    inst.validate();
    return inst;
}

std::string instance_digest(const ProblemInstance& inst) {
    const std::string bytes = serialize(inst);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

} // namespace bse
