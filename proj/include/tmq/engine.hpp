#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tmq/angular.hpp"
#include "tmq/atom_model.hpp"
#include "tmq/loss.hpp"
#include "tmq/noise.hpp"
#include "tmq/quadrature.hpp"
#include "tmq/readout.hpp"
#include "tmq/schedule.hpp"
#include "tmq/state.hpp"

namespace tmq {

struct EngineOptions {
    PhysicsConstants constants;
    NoiseModel noise;
    LossParameters loss;
    bool loss_enabled = true;
    bool leakage_enabled = true;  // incoherent excitation of spectator MW lines
    double reflection_amplitude = 0.12247448713915890;  // a, intensity reflection a^2 = 1.5 %
    double initial_atoms = 5000.0;
    double max_substep = 5e-3;  // s; loss is re-evaluated at this granularity
    DecayBranching branching = DecayBranching::from_angular_momentum();
    double rf_step_efficiency = 0.7952707287670506;  // 0.4^(1/4): 40 % reach mF=0 after four crossings
    double rf_margin = 2e3;                          // Hz beyond the sweep limits that still counts as crossed
    CrosstalkCalibration readout = CrosstalkCalibration::defaults();
    bool camera_noise = true;
    QuadratureOptions quadrature{};
    int threads = 1;

    void validate() const;
};

// Shot-local mutable context: state plus the sampled noise trajectory.
struct Shot {
    EnsembleState state;
    NoiseTrajectory noise;
    ReadoutRecord record;
};

struct ShotResult {
    EnsembleState state;
    ReadoutRecord record;
};

class Engine {
public:
    explicit Engine(EngineOptions options = {});

    const EngineOptions& options() const { return opt_; }
    const AtomModel& atom() const { return atom_; }

    Shot start_shot(const Schedule& schedule, std::uint64_t shot_index, std::uint64_t master_seed) const;

    void apply(Shot& shot, const PulseEvent& event) const;
    void apply_mw_pulse(Shot& shot, const PulseEvent& event) const;
    void apply_clock_pulse(Shot& shot, const PulseEvent& event) const;
    void apply_probe_410(Shot& shot, const PulseEvent& event) const;
    void apply_clean_530(Shot& shot, const PulseEvent& event) const;
    void apply_rf_sweep(Shot& shot, const PulseEvent& event) const;
    void apply_measure(Shot& shot, const PulseEvent& event) const;
    void evolve_free(Shot& shot, double duration) const;

    /// Four sequential rotations along prep1..prep4, each transferring the
    /// fraction efficiencies[k] of the addressed population.
    void coherent_prep_transfer(Shot& shot, const std::array<double, 4>& efficiencies) const;

    /// Calibrates the shot's record in place (camera noise, inversion).
    void finish_record(Shot& shot) const;

    ShotResult run_shot(const Schedule& schedule, std::uint64_t shot_index, std::uint64_t master_seed) const;

    /// Shots execute on a worker pool; the result depends only on the master
    /// seed and the shot index, never on the thread count.
    /// Shot k uses the seed stream of index first_index + k.
    std::vector<ShotResult> run_schedule(const Schedule& schedule, int n_shots, std::uint64_t master_seed,
                                         std::uint64_t first_index = 0) const;

    /// Readout calibration consistent with this engine's clock-pulse model.
    CrosstalkCalibration matched_calibration(double clock_pi_time = 1e-3) const;

private:
    struct PairDrive {
        int lower;
        int upper;
        double rabi;        // rad/s
        double detuning;    // Hz, drive minus nominal transition frequency
        double phase;       // rad
        double upper_decay; // 1/s amplitude-squared decay of the upper level
        bool z_average;
    };

    void pair_step(Shot& shot, const PairDrive& d, double duration) const;
    void apply_loss(Shot& shot, double dt) const;
    void apply_spectator_leakage(Shot& shot, const TransitionSpec& addressed, const MwPulse& p, double t0,
                                 double duration) const;
    // Cycles of phase accumulated by level i over [t0, t1] relative to the nominal-field frame.
    void frame_phases(Shot& shot, double t0, double t1, std::array<double, kBasisSize>& cycles) const;
    double mean_field_tesla(Shot& shot, double t0, double t1) const;

    EngineOptions opt_;
    AtomModel atom_;
    std::array<double, kBasisSize> c1_;  // Hz/T
    std::array<double, kBasisSize> c2_;  // Hz/T^2
    std::array<bool, kBasisSize> metastable_;
    std::array<std::vector<DecayChannel>, kBasisSize> decay_;
};

/// Mean transfer of one resonant clock pi-pulse under the lattice-averaged
/// Rabi frequency, without spontaneous decay.
double clock_pi_efficiency(double reflection_amplitude, const QuadratureOptions& q = {});

/// Off-resonant peak excitation Omega^2 / (Omega^2 + (2 pi dnu)^2).
double offresonant_peak_probability(double rabi, double detuning_hz);

/// 530 nm photon-scattering probability Gamma s t / (2 (1 + s + (4 pi dnu / Gamma)^2)).
double scattering_probability(double gamma, double saturation, double duration, double detuning_hz);

}  // namespace tmq
