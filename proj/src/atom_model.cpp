#include "tmq/atom_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "tmq/errors.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

namespace {

struct ManifoldBlock {
    Manifold manifold;
    int F;
    int offset;
};

constexpr std::array<ManifoldBlock, 4> kBlocks{{
    {Manifold::Ground, 4, 0},
    {Manifold::Ground, 3, 9},
    {Manifold::Metastable1140, 3, 16},
    {Manifold::Metastable1140, 2, 23},
}};

const ManifoldBlock* block_of(const SublevelRef& s) {
    for (const auto& b : kBlocks) {
        if (b.manifold == s.manifold && b.F == s.F) return &b;
    }
    return nullptr;
}

std::string mw_name(int m4, int m3) {
    return "mw(4," + std::to_string(m4) + ")(3," + std::to_string(m3) + ")";
}

std::string rf_name(int F, int m) {
    return "rf" + std::to_string(F) + "(" + std::to_string(m) + ")(" + std::to_string(m + 1) + ")";
}

// Names for the four sigma steps of the coherent ladder (4,-4) -> (4,0).
std::string ladder_name(int m4, int m3) {
    if (m4 == -4 && m3 == -3) return "prep1";
    if (m4 == -2 && m3 == -3) return "prep2";
    if (m4 == -2 && m3 == -1) return "prep3";
    if (m4 == 0 && m3 == -1) return "prep4";
    if (m4 == 0 && m3 == 0) return std::string(kQubitTransition);
    return {};
}

std::vector<TransitionSpec> build_catalog() {
    std::vector<TransitionSpec> out;
    for (int m4 = -4; m4 <= 4; ++m4) {
        for (int m3 = -3; m3 <= 3; ++m3) {
            const double strength = mw_relative_strength(m4, m3);
            if (strength == 0.0) continue;
            std::string name = ladder_name(m4, m3);
            if (name.empty()) name = mw_name(m4, m3);
            out.push_back({name, {Manifold::Ground, 4, m4}, {Manifold::Ground, 3, m3}, TransitionKind::MwHyperfine,
                           strength});
        }
    }
    for (int F : {4, 3}) {
        for (int m = -F; m < F; ++m) {
            const double strength = 0.5 * std::sqrt(double(F * (F + 1) - m * (m + 1)));
            out.push_back({rf_name(F, m), {Manifold::Ground, F, m}, {Manifold::Ground, F, m + 1},
                           TransitionKind::RfIntraManifold, strength});
        }
    }
    out.push_back({std::string(kClockF4), kGround4_0, kMeta3_0, TransitionKind::Optical1140, 1.0});
    out.push_back({std::string(kClockF3), kGround3_0, kMeta2_0, TransitionKind::Optical1140, 1.0});
    out.push_back({"probe4", kGround4_0, kGround4_0, TransitionKind::Probe410, 1.0});
    out.push_back({"repump3", kGround3_0, kGround3_0, TransitionKind::Probe410, 1.0});
    out.push_back({"clean4", kGround4_0, kGround4_0, TransitionKind::Clean530, 1.0});
    return out;
}

std::string sublevel_token(const SublevelRef& s) {
    return std::string(s.manifold == Manifold::Ground ? "g:" : "m:") + std::to_string(s.F) + ":" +
           std::to_string(s.mF);
}

SublevelRef parse_sublevel_token(std::string_view tok) {
    SublevelRef s;
    if (tok.size() < 5 || tok[1] != ':') throw ConfigError("bad sublevel token '" + std::string(tok) + "'");
    s.manifold = tok[0] == 'g' ? Manifold::Ground : Manifold::Metastable1140;
    if (tok[0] != 'g' && tok[0] != 'm') throw ConfigError("bad manifold in '" + std::string(tok) + "'");
    const auto rest = tok.substr(2);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw ConfigError("bad sublevel token '" + std::string(tok) + "'");
    s.F = static_cast<int>(parse_double(rest.substr(0, colon)));
    s.mF = static_cast<int>(parse_double(rest.substr(colon + 1)));
    if (!is_tracked(s)) throw ConfigError("untracked sublevel '" + std::string(tok) + "'");
    return s;
}

}  // namespace

bool is_tracked(const SublevelRef& s) {
    return block_of(s) != nullptr && std::abs(s.mF) <= s.F;
}

int basis_index(const SublevelRef& s) {
    const auto* b = block_of(s);
    if (b == nullptr || std::abs(s.mF) > s.F) throw ConfigError("untracked sublevel " + to_string(s));
    return b->offset + s.mF + s.F;
}

SublevelRef basis_state(int index) {
    if (index < 0 || index >= kBasisSize) throw ConfigError("basis index out of range");
    for (auto it = kBlocks.rbegin(); it != kBlocks.rend(); ++it) {
        if (index >= it->offset) return {it->manifold, it->F, index - it->offset - it->F};
    }
    return {};
}

std::string to_string(const SublevelRef& s) {
    return std::string(s.manifold == Manifold::Ground ? "g" : "m") + "(" + std::to_string(s.F) + "," +
           std::to_string(s.mF) + ")";
}

void PhysicsConstants::validate() const {
    const std::pair<const char*, double> positive[] = {
        {"hyperfine_splitting_ground", hyperfine_splitting_ground},
        {"gamma_qz", gamma_qz},
        {"tau_c", tau_c},
        {"gamma_410", gamma_410},
        {"gamma_530", gamma_530},
        {"i_sat_410", i_sat_410},
        {"delta_530_hyperfine", delta_530_hyperfine},
        {"tau_single_atom", tau_single_atom},
        {"trap_volume", trap_volume},
        {"tau_clean", tau_clean},
        {"clock_wavelength", clock_wavelength},
        {"lattice_wavelength", lattice_wavelength},
    };
    for (const auto& [name, v] : positive) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("constants.") + name + " must be > 0");
    }
}

std::string_view to_string(TransitionKind k) {
    switch (k) {
        case TransitionKind::MwHyperfine: return "MW_hyperfine";
        case TransitionKind::RfIntraManifold: return "RF_intra_manifold";
        case TransitionKind::Optical1140: return "Optical1140";
        case TransitionKind::Probe410: return "Probe410";
        case TransitionKind::Clean530: return "Clean530";
    }
    return "?";
}

TransitionKind transition_kind_from_string(std::string_view s) {
    for (auto k : {TransitionKind::MwHyperfine, TransitionKind::RfIntraManifold, TransitionKind::Optical1140,
                   TransitionKind::Probe410, TransitionKind::Clean530}) {
        if (to_string(k) == s) return k;
    }
    throw ConfigError("unknown transition kind '" + std::string(s) + "'");
}

double mw_relative_strength(int m4, int m3) {
    if (std::abs(m4) > 4 || std::abs(m3) > 3) return 0.0;
    const double norm = 4.0;
    if (m3 == m4) return std::sqrt(double(16 - m4 * m4)) / norm;
    if (m3 == m4 + 1) return std::sqrt(double((4 - m4) * (3 - m4))) / (norm * std::sqrt(2.0));
    if (m3 == m4 - 1) return std::sqrt(double((4 + m4) * (3 + m4))) / (norm * std::sqrt(2.0));
    return 0.0;
}

const std::vector<TransitionSpec>& transition_catalog() {
    static const std::vector<TransitionSpec> catalog = build_catalog();
    return catalog;
}

const TransitionSpec* find_transition(std::string_view name) {
    for (const auto& t : transition_catalog()) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const TransitionSpec& transition(std::string_view name) {
    const auto* t = find_transition(name);
    if (t == nullptr) throw ConfigError("unknown transition '" + std::string(name) + "'");
    return *t;
}

std::string serialize_catalog(std::span<const TransitionSpec> catalog) {
    std::string out;
    for (const auto& t : catalog) {
        out += t.name;
        out += ' ';
        out += to_string(t.kind);
        out += ' ';
        out += sublevel_token(t.lower);
        out += ' ';
        out += sublevel_token(t.upper);
        out += ' ';
        out += format_double(t.relative_strength);
        out += '\n';
    }
    return out;
}

std::vector<TransitionSpec> parse_catalog(std::string_view text) {
    std::vector<TransitionSpec> out;
    std::istringstream in{std::string(text)};
    std::string name, kind, lower, upper, strength;
    while (in >> name >> kind >> lower >> upper >> strength) {
        out.push_back({name, parse_sublevel_token(lower), parse_sublevel_token(upper),
                       transition_kind_from_string(kind), parse_double(strength)});
    }
    return out;
}

AtomModel::AtomModel(PhysicsConstants constants) : c_(constants) { c_.validate(); }

double AtomModel::qubit_transition_frequency(MagneticField b) const {
    if (b.in_tesla() < 0.0) throw ConfigError("magnetic field must be >= 0");
    const double t = b.in_tesla();
    return c_.hyperfine_splitting_ground + c_.gamma_qz * t * t;
}

const ZeemanLadder& AtomModel::ladder(const SublevelRef& s) const {
    if (!is_tracked(s)) throw ConfigError("untracked sublevel " + to_string(s));
    if (s.manifold == Manifold::Ground) return s.F == 4 ? c_.ground_f4 : c_.ground_f3;
    return s.F == 3 ? c_.meta_f3 : c_.meta_f2;
}

double AtomModel::sublevel_shift(const SublevelRef& s, MagneticField b) const {
    const auto& z = ladder(s);
    const double t = b.in_tesla();
    const double m = s.mF;
    return z.linear * m * t + z.second_order * m * m * t * t;
}

double AtomModel::field_energy(const SublevelRef& s, MagneticField b) const {
    double e = sublevel_shift(s, b);
    if (s.manifold == Manifold::Ground) {
        const double t = b.in_tesla();
        // F=4 is the lower hyperfine level.
        const double half_qz = 0.5 * c_.gamma_qz * t * t;
        e += (s.F == 3 ? half_qz : -half_qz);
    }
    return e;
}

double AtomModel::transition_frequency(const TransitionSpec& t, MagneticField b) const {
    switch (t.kind) {
        case TransitionKind::MwHyperfine:
            return c_.hyperfine_splitting_ground + field_energy(t.upper, b) - field_energy(t.lower, b);
        case TransitionKind::RfIntraManifold:
            return std::abs(field_energy(t.upper, b) - field_energy(t.lower, b));
        default:
            return field_energy(t.upper, b) - field_energy(t.lower, b);
    }
}

}  // namespace tmq
