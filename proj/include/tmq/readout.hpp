#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

#include "tmq/angular.hpp"
#include "tmq/schedule.hpp"
#include "tmq/state.hpp"

namespace tmq {

using DecayMatrix = Eigen::Matrix<double, kBasisSize, kBasisSize>;

/// Population flow of the metastable decay network over time t: column j holds
/// where population starting in basis state j ends up. Column-stochastic.
DecayMatrix decay_fraction_matrix(double t, double tau_c, const DecayBranching& branching);

struct CrosstalkCalibration {
    double eps_43 = 0.015;            // F=3 fraction counted in the F=4 signal at the reference probe
    double dep_3 = 0.085;             // F=3 depletion by the reference probe
    double reference_probe = 400e-6;  // s
    double quadratic_limit = 1e-3;    // s; longer probes use the full pump-rate model
    double clock_pi_efficiency = 1.0;
    double tau_c = 0.112;
    DecayBranching branching = DecayBranching::from_angular_momentum();
    // Readout timeline the decay matrix refers to.
    double probe_duration = 400e-6;
    double dead_time = 4e-3;
    double clock_pi_time = 1e-3;
    double camera_floor = 20.0;  // atoms
    /// Decay over one measurement stage (probe + dead time).
    DecayMatrix decay_matrix = DecayMatrix::Identity();

    /// Constant F=3 pump probability per unit time implied by dep_3.
    double pump_rate() const;
    /// F=3 fraction added to the F=4 signal by a probe of duration tau.
    double crosstalk_fraction(double tau) const;
    /// F=3 fraction removed by a probe of duration tau.
    double depletion(double tau) const;

    /// Recomputes decay_matrix from tau_c, branching and the timeline.
    void refresh_decay_matrix();
    void validate() const;

    static CrosstalkCalibration defaults();
    /// eps = dep = 0, perfect pulses and no metastable decay.
    static CrosstalkCalibration identity();

    bool operator==(const CrosstalkCalibration& o) const;
};

std::string serialize_calibration(const CrosstalkCalibration& c);
CrosstalkCalibration parse_calibration(std::string_view text);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Counts per measurement slot in the order N4, N3, N4_0, N3_0 (atoms).
using SlotArray = std::array<double, 4>;

struct ReadoutRecord {
    std::uint64_t shot_index = 0;
    double initial_atoms = 0.0;
    SlotArray raw{kNaN, kNaN, kNaN, kNaN};
    SlotArray calibrated{kNaN, kNaN, kNaN, kNaN};
    SlotArray timing{kNaN, kNaN, kNaN, kNaN};  // measurement start times, s
    std::array<bool, 4> low_confidence{};

    bool has(MeasureLabel l) const { return !std::isnan(raw[measure_slot(l)]); }
    bool complete() const;
    /// Calibrated N4_0 / (N4_0 + N3_0).
    double eta4() const;
    /// Calibrated total F=4 over total detected atoms.
    double eta4_total() const;

    bool operator==(const ReadoutRecord&) const = default;
};

// Signal response of one probe stage: counted fraction of F=4 and F=3 atoms.
struct ProbeResponse {
    double f4_weight = 1.0;
    double f3_weight = 0.0;
    double f3_depletion = 0.0;
};
ProbeResponse probe_response(MeasureLabel l, double probe_duration, const CrosstalkCalibration& c);

/// Population-level forward model of the shelving readout. `populations` are
/// atom numbers at the start of the readout; when rng is non-null Gaussian
/// camera noise of sigma camera_floor is added and nothing is clipped.
SlotArray simulate_readout(const PopulationVector& populations, const CrosstalkCalibration& c,
                           std::mt19937_64* rng = nullptr);

/// Linear map from true class populations [N4(m!=0), N3(m!=0), N4_0, N3_0]
/// to raw counts, assuming empty metastable levels at the readout start.
Eigen::Matrix4d readout_response_matrix(const CrosstalkCalibration& c);

/// Inverts the forward model. Throws ConfigError when the map is singular.
SlotArray calibrate(const SlotArray& raw, const CrosstalkCalibration& c);

/// Adds camera noise to raw counts and sets the low-confidence flags.
void apply_camera_noise(ReadoutRecord& r, const CrosstalkCalibration& c, std::mt19937_64* rng);

}  // namespace tmq
