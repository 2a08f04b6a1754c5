#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bse/operator.hpp"

namespace bse {

enum class Units { Abstract, Hartree };

inline constexpr double kHartreeToEv = 27.211386245988;

std::string to_string(Units u);
Units units_from_string(const std::string& s);

/// Orbital energies plus the interaction data of one Bethe-Salpeter problem.
///
/// The composite particle-hole index is occupied-major: k(i, a) = i * n_v + a
/// (zero based), so the virtual index runs fastest.
struct ProblemInstance {
    Index n_o = 0;
    Index n_v = 0;
    Vector eps_occ;  ///< length n_o, ascending
    Vector eps_virt; ///< length n_v, ascending
    Matrix l_v;      ///< N_ov x R_V factor with V = l_v * l_v^T
    Matrix w_bar;    ///< N_ov x N_ov, symmetric
    Matrix w_til;    ///< N_ov x N_ov, symmetric
    Units units = Units::Abstract;

    Index n_b() const { return n_o + n_v; }
    Index n_ov() const { return n_o * n_v; }
    Index r_v() const { return l_v.cols(); }

    /// Throws ConfigError / DimensionError when an invariant is violated.
    void validate() const;

    friend bool operator==(const ProblemInstance& a, const ProblemInstance& b);
};

/// Kronecker-sum diagonal I_o (x) diag(eps_virt) - diag(eps_occ) (x) I_v.
/// Only the two energy arrays are stored.
class EnergyDiagonal {
public:
    EnergyDiagonal() = default;
    EnergyDiagonal(Vector eps_occ, Vector eps_virt);

    Index n_o() const { return eps_occ_.size(); }
    Index n_v() const { return eps_virt_.size(); }
    Index size() const { return n_o() * n_v(); }

    Index composite(Index i, Index a) const { return i * n_v() + a; }
    double entry(Index k) const { return eps_virt_[k % n_v()] - eps_occ_[k / n_v()]; }
    double operator()(Index i, Index a) const { return eps_virt_[a] - eps_occ_[i]; }

    /// All N_ov entries in composite order.
    Vector values() const;

    /// Composite indices sorted by ascending entry; ties keep index order.
    std::vector<Index> ascending_order() const;

    const Vector& eps_occ() const { return eps_occ_; }
    const Vector& eps_virt() const { return eps_virt_; }

private:
    Vector eps_occ_;
    Vector eps_virt_;
};

EnergyDiagonal energy_diagonal(const ProblemInstance& inst);

/// Shape of the synthetic screened interaction.
struct WRankProfile {
    double block_fraction = 0.25; ///< share of sorted indices carrying the dominant dense part
    double dense_strength = 0.25; ///< row-sum norm of the dense part, in units of the gap
    double correlation = 2.0;     ///< decay length (in sorted positions) of the dense kernel
    double screening = 0.5;       ///< multiple of V folded into w_bar
    Index tail_rank = 2;          ///< rank of the exactly low-rank tail
    double tail_strength = 0.04;  ///< trace of the tail, in units of the gap
    double exchange = 0.3;        ///< spectral scale of w_til = l_v C l_v^T relative to V
};

struct SynthConfig {
    Index n_o = 0;
    Index n_v = 0;
    Index r_v = 0;
    WRankProfile w_rank_profile{};
    double gap = 1.0;
    std::uint64_t seed = 0;
    double v_strength = 0.6; ///< ||l_v||_F^2 in units of the gap
    double lv_decay = 0.75;  ///< ratio of consecutive column norms of l_v
    Units units = Units::Abstract;
};

/// Deterministic stand-in for Hartree-Fock output.
ProblemInstance synthesize(const SynthConfig& cfg);

/// BSEP1 container; see README for the byte layout.
std::string serialize(const ProblemInstance& inst);
ProblemInstance deserialize(std::string_view bytes);
void save(const ProblemInstance& inst, const std::filesystem::path& path);
ProblemInstance load(const std::filesystem::path& path);

/// Hex digest (FNV-1a 64) of the serialized container, used in run records.
std::string instance_digest(const ProblemInstance& inst);

} // namespace bse
