#pragma once

#include <array>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmq/units.hpp"

namespace tmq {

enum class Manifold { Ground, Metastable1140 };

// One magnetic sublevel of the four tracked hyperfine manifolds:
// ground F=4, F=3 and the 1140 nm metastable F'=3, F'=2.
struct SublevelRef {
    Manifold manifold = Manifold::Ground;
    int F = 4;
    int mF = 0;

    auto operator<=>(const SublevelRef&) const = default;
};

inline constexpr int kBasisSize = 28;

/// True for the 9+7+7+5 tracked states.
bool is_tracked(const SublevelRef& s);

/// Position in the canonical basis: ground F=4 (mF=-4..4), ground F=3 (-3..3),
/// metastable F'=3 (-3..3), metastable F'=2 (-2..2). Throws ConfigError for
/// untracked sublevels.
int basis_index(const SublevelRef& s);
SublevelRef basis_state(int index);

std::string to_string(const SublevelRef& s);

inline constexpr SublevelRef kGround4_0{Manifold::Ground, 4, 0};
inline constexpr SublevelRef kGround3_0{Manifold::Ground, 3, 0};
inline constexpr SublevelRef kGround4_m4{Manifold::Ground, 4, -4};
inline constexpr SublevelRef kMeta3_0{Manifold::Metastable1140, 3, 0};
inline constexpr SublevelRef kMeta2_0{Manifold::Metastable1140, 2, 0};

// Per-manifold Zeeman ladder: shift(mF) = linear * mF * B + second_order * mF^2 * B^2.
struct ZeemanLadder {
    double linear = 0.0;        // Hz/T
    double second_order = 0.0;  // Hz/T^2
};

struct PhysicsConstants {
    double hyperfine_splitting_ground = 1.497e9;           // Hz
    double gamma_qz = 852.0 * 1e8;                         // Hz/T^2 (852 Hz/G^2)
    double tau_c = 0.112;                                  // s
    double gamma_410 = kTwoPi * 10e6;                      // rad/s
    double gamma_530 = kTwoPi * 350e3;                     // rad/s
    double i_sat_410 = 180.0 * units::kMicroWattPerMm2;    // W/m^2
    double delta_530_hyperfine = 614e6;                    // Hz
    double tau_single_atom = 16.4;                         // s
    double trap_volume = 0.16 * units::kCubicMillimetre;   // m^3
    double tau_clean = 119e-6;                             // s, 530 nm removal of F=4
    double clock_wavelength = 1140e-9;                     // m
    double lattice_wavelength = 1063.5e-9;                 // m
    double lattice_depth = 100.0;                          // recoil energies; not used dynamically
    double recoil_frequency = 1e3;                         // Hz; not used dynamically

    // Linear Zeeman placeholders. Ground F=4 is fixed by the RF sweep window
    // (798.5 .. 786.5 kHz for mF=-4->-3 .. -1->0 at 0.6 G); ground F=3 is set
    // so the nearest spectator of the (4,0)-(3,0) line sits 66 kHz away at 0.6 G.
    ZeemanLadder ground_f4{1.3075e6 * 1e4, -5555.555555555556 * 1e8};
    ZeemanLadder ground_f3{1.4175e6 * 1e4, -5555.555555555556 * 1e8};
    ZeemanLadder meta_f3{0.9e6 * 1e4, 0.0};
    ZeemanLadder meta_f2{1.1e6 * 1e4, 0.0};

    /// Throws ConfigError if any rate, lifetime or frequency is not strictly positive.
    void validate() const;
};

enum class TransitionKind { MwHyperfine, RfIntraManifold, Optical1140, Probe410, Clean530 };

std::string_view to_string(TransitionKind k);
TransitionKind transition_kind_from_string(std::string_view s);

struct TransitionSpec {
    std::string name;
    SublevelRef lower;
    SublevelRef upper;
    TransitionKind kind = TransitionKind::MwHyperfine;
    double relative_strength = 1.0;

    bool operator==(const TransitionSpec&) const = default;
};

/// Deterministic list of every transition used by the built-in protocols.
/// MW strengths are relative magnetic-dipole matrix elements normalised to the
/// (4,0)-(3,0) qubit line; the four coherent-prep ladder steps are named prep1..prep4.
/// Probe410/Clean530 entries are manifold-wide rate processes whose excited level
/// is not tracked, so lower == upper for them.
const std::vector<TransitionSpec>& transition_catalog();

/// nullptr when the name is unknown.
const TransitionSpec* find_transition(std::string_view name);
const TransitionSpec& transition(std::string_view name);  // throws ConfigError

/// Relative M1 matrix element between (F=4, m4) and (F=3, m3); zero if not coupled.
double mw_relative_strength(int m4, int m3);

std::string serialize_catalog(std::span<const TransitionSpec> catalog);
std::vector<TransitionSpec> parse_catalog(std::string_view text);

inline constexpr std::string_view kQubitTransition = "qubit";
inline constexpr std::string_view kClockF4 = "clock43";  // (4,0) -> (3',0)
inline constexpr std::string_view kClockF3 = "clock32";  // (3,0) -> (2',0)

// Field-dependent level structure. Immutable after construction.
class AtomModel {
public:
    AtomModel() = default;
    explicit AtomModel(PhysicsConstants constants);

    const PhysicsConstants& constants() const { return c_; }

    /// f0 + gamma_qz * B^2. Throws ConfigError for negative B.
    double qubit_transition_frequency(MagneticField b) const;

    /// Linear plus second-order intra-manifold Zeeman shift of a sublevel (Hz).
    double sublevel_shift(const SublevelRef& s, MagneticField b) const;

    /// Field-dependent part of the level energy (Hz): the ground-manifold
    /// quadratic qubit term (+/- gamma_qz B^2 / 2) plus the sublevel shift.
    double field_energy(const SublevelRef& s, MagneticField b) const;

    /// Absolute frequency for MW/RF transitions (Hz). Optical transitions return
    /// only their field-dependent part since the carrier never enters the dynamics.
    double transition_frequency(const TransitionSpec& t, MagneticField b) const;

    const ZeemanLadder& ladder(const SublevelRef& s) const;

private:
    PhysicsConstants c_;
};

}  // namespace tmq
