#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tmq/atom_model.hpp"
#include "tmq/units.hpp"

namespace tmq {

// Coherent drive on one catalog transition. rabi in rad/s, detuning in Hz
// (drive minus nominal transition frequency), phase in rad.
struct MwPulse {
    std::string transition{kQubitTransition};
    double rabi = 0.0;
    double detuning = 0.0;
    double phase = 0.0;
    bool operator==(const MwPulse&) const = default;
};

// Linear RF chirp, Hz.
struct RfSweep {
    double f_start = 0.0;
    double f_stop = 0.0;
    bool operator==(const RfSweep&) const = default;
};

struct ClockPulse {
    std::string transition{kClockF4};
    double rabi = 0.0;
    double detuning = 0.0;
    double phase = 0.0;
    bool operator==(const ClockPulse&) const = default;
};

// target_F == 4: resonant 410 nm probe; target_F == 3: F=3 -> F=4 repump.
struct Probe410 {
    int target_F = 4;
    double saturation = 2.0;  // I / I_sat
    bool operator==(const Probe410&) const = default;
};

struct Clean530 {
    int target_F = 4;
    double saturation = 1.0;
    double detuning = 0.0;  // Hz, from the target-F cooling line
    bool operator==(const Clean530&) const = default;
};

struct Wait {
    bool operator==(const Wait&) const = default;
};

enum class MeasureLabel { N4, N3, N4_0, N3_0 };

std::string_view to_string(MeasureLabel l);
MeasureLabel measure_label_from_string(std::string_view s);
inline int measured_manifold(MeasureLabel l) { return (l == MeasureLabel::N4 || l == MeasureLabel::N4_0) ? 4 : 3; }
inline int measure_slot(MeasureLabel l) { return static_cast<int>(l); }

// One detection step: probe pulse followed by dead time. Duration is their sum.
struct Measure {
    MeasureLabel label = MeasureLabel::N4;
    double probe_duration = 400e-6;
    double dead_time = 4e-3;
    bool operator==(const Measure&) const = default;
};

using EventBody = std::variant<MwPulse, RfSweep, ClockPulse, Probe410, Clean530, Wait, Measure>;

struct PulseEvent {
    double duration = 0.0;  // s
    EventBody body;
    bool operator==(const PulseEvent&) const = default;
};

std::string_view event_keyword(const PulseEvent& e);

enum class InitialState { Cooled, Ground4_0, Ground3_0 };

std::string_view to_string(InitialState s);
InitialState initial_state_from_string(std::string_view s);

struct Schedule {
    std::string name;
    MagneticField bias = MagneticField::gauss(0.1);
    InitialState initial = InitialState::Ground3_0;
    std::map<std::string, double> scan_vars;
    std::vector<PulseEvent> events;

    double total_duration() const;
    /// Start time of event i on the sequential timeline.
    double start_time(size_t i) const;
    size_t count_if_kind(std::string_view keyword) const;

    /// Throws ConfigError naming the offending event.
    void validate() const;

    bool operator==(const Schedule&) const = default;
};

/// Appends b's events to a; metadata of a wins, scan vars are merged.
Schedule concat(Schedule a, const Schedule& b);

// --- text format ---------------------------------------------------------
//
//   script    = { line } ;
//   line      = [ statement { ";" statement } ] [ "#" comment ] newline ;
//   statement = keyword { argument } ;
//   argument  = key "=" value | value ;
//   keyword   = "meta" | "scan" | "mw" | "rf" | "clock" | "probe" | "clean"
//             | "wait" | "measure" ;
//
// Values take optional unit suffixes: s ms us ns | Hz kHz MHz GHz | rad deg
// and multiples of pi ("pi/2", "2pi") | G T. Bare numbers are SI.
// Positional arguments: mw/clock <angle> [<phase>], wait <duration>,
// rf <duration> <f_start> <f_stop>, measure <label>. Any event accepts
// at=<time>; a gap before it becomes a wait, an earlier time is an overlap.

Schedule parse_sequence(std::string_view text);

/// Canonical form; parse_sequence(serialize_sequence(s)) == s exactly.
std::string serialize_sequence(const Schedule& s);

// --- protocol builders ---------------------------------------------------

struct StatePrepConfig {
    MagneticField bias = MagneticField::gauss(0.6);
    double mw_pi_time = 2e-3;
    double rf_duration = 5e-3;
    double rf_start = 800e3;
    double rf_stop = 785e3;
    double clean_duration = 3e-3;
    double clean_saturation = 1.0;
    double theta = kPi;  // final MW rotation; 0 omits the pulse
    double theta_phase = 0.0;
};

// How a Ramsey scan detuning enters the sequence. Carrier: both pulses are
// detuned. PhaseStep: pulses stay resonant and the second pulse carries the
// phase 2*pi*detuning*T a frequency step during the dark time would imprint.
enum class RamseyDetuning { PhaseStep, Carrier };

struct ProtocolConfig {
    MagneticField bias = MagneticField::gauss(0.1);
    double mw_pi_time = 2e-3;
    double clock_pi_time = 1e-3;
    double probe_duration = 400e-6;
    double dead_time = 4e-3;
    RamseyDetuning ramsey_detuning = RamseyDetuning::PhaseStep;
    double final_phase = 0.0;     // phase of the last MW pi/2 pulse
    double clock_mw_window = 0.0;  // > 0: MW pi/2 separation for clock coherence
};

Schedule build_state_prep(const StatePrepConfig& cfg = {});
Schedule build_ramsey(double T, double detuning, const ProtocolConfig& cfg = {});
Schedule build_cp(int n, double T, const ProtocolConfig& cfg = {});
Schedule build_rabi_scan(double t, const ProtocolConfig& cfg = {});
Schedule build_shelving_readout(const ProtocolConfig& cfg = {});

enum class ClockMode { Single, Double };
Schedule build_clock_coherence(ClockMode mode, double T, const ProtocolConfig& cfg = {});

/// Free hold of length T (lifetime and depolarization runs).
Schedule build_hold(double T, InitialState initial, const ProtocolConfig& cfg = {});

/// Readout crosstalk scan: F=4 detection with a variable first probe, then F=3.
Schedule build_probe_scan(double first_probe, const ProtocolConfig& cfg = {});

}  // namespace tmq
