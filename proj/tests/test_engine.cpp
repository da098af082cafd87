#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tmq/engine.hpp"
#include "tmq/errors.hpp"

using namespace tmq;

namespace {

double f4_fraction(const EnsembleState& s) {
    const double f4 = s.manifold_population(Manifold::Ground, 4);
    const double f3 = s.manifold_population(Manifold::Ground, 3);
    return f4 / (f4 + f3);
}

Shot run_events(const Engine& e, const Schedule& s, std::uint64_t index = 0, std::uint64_t seed = 1) {
    Shot shot = e.start_shot(s, index, seed);
    for (const auto& ev : s.events) e.apply(shot, ev);
    return shot;
}

// Ensemble contrast from four final-pulse phases, each averaged over the same
// shot indices so every phase sees identical noise.
double ensemble_contrast(const Engine& e, const std::function<Schedule(double)>& make, int shots) {
    double m[4];
    for (int k = 0; k < 4; ++k) {
        const Schedule s = make(k * kPi / 2);
        double sum = 0.0;
        for (int i = 0; i < shots; ++i) sum += f4_fraction(run_events(e, s, i, 11).state);
        m[k] = sum / shots;
    }
    return std::hypot(m[0] - m[2], m[1] - m[3]);
}

struct Fringe {
    double contrast;
    double phase;
};

// Four-phase fringe through the full shelving readout, normalised to all
// detected atoms so metastable decay products are counted.
Fringe detected_fringe(const Engine& e, const std::function<Schedule(const ProtocolConfig&)>& make) {
    double m[4];
    for (int k = 0; k < 4; ++k) {
        ProtocolConfig pc;
        pc.final_phase = k * kPi / 2;
        pc.clock_mw_window = 0.5;
        m[k] = e.run_shot(concat(make(pc), build_shelving_readout(pc)), 0, 1).record.eta4_total();
    }
    return {std::hypot(m[0] - m[2], m[1] - m[3]), std::atan2(-(m[1] - m[3]), m[0] - m[2])};
}

PulseEvent qubit_pulse(double rabi, double t, double detuning = 0.0, double phase = 0.0) {
    return {t, MwPulse{std::string(kQubitTransition), rabi, detuning, phase}};
}

}  // namespace

TEST(Engine, ResonantRabiFollowsSineSquared) {
    const Engine e(test::quiet_options());
    const double rabi = kTwoPi * 250.0;
    Schedule s;
    for (double t : {0.0, 1e-4, 5e-4, 1.3e-3, 2e-3, 3.7e-3, 7e-3, 12e-3}) {
        Shot shot = e.start_shot(s, 0, 1);
        e.apply(shot, qubit_pulse(rabi, t));
        const double expect = std::pow(std::sin(rabi * t / 2), 2);
        EXPECT_NEAR(shot.state.population(kGround4_0), expect, 1e-12) << t;
        EXPECT_NEAR(shot.state.population(kGround3_0), 1 - expect, 1e-12) << t;
    }
}

TEST(Engine, DetunedRabiMatchesGeneralisedFormula) {
    const Engine e(test::quiet_options());
    const double rabi = kTwoPi * 250.0, dnu = 180.0, t = 3.1e-3;
    Shot shot = e.start_shot(Schedule{}, 0, 1);
    e.apply(shot, qubit_pulse(rabi, t, dnu));
    const double w = std::hypot(rabi, kTwoPi * dnu);
    EXPECT_NEAR(shot.state.population(kGround4_0), rabi * rabi / (w * w) * std::pow(std::sin(w * t / 2), 2), 1e-12);
}

TEST(Engine, TwoPiRotationRestoresState) {
    const Engine e(test::quiet_options());
    std::mt19937_64 rng(3);
    Shot shot = e.start_shot(Schedule{}, 0, 1);
    // Random pair block plus diagonal ground spectators: 2 pi flips the sign of
    // both pair amplitudes, and spectator phases only touch coherences that are
    // zero. Metastable population would decay during the pulse.
    const DensityMatrix full = test::random_density_matrix(rng);
    const int i4 = basis_index(kGround4_0), i3 = basis_index(kGround3_0);
    DensityMatrix rho = DensityMatrix::Zero();
    for (int i = 0; i < kBasisSize; ++i)
        if (basis_state(i).manifold == Manifold::Ground) rho(i, i) = full(i, i);
    rho(i4, i3) = full(i4, i3);
    rho(i3, i4) = full(i3, i4);
    shot.state.rho = rho / rho.trace().real();
    const DensityMatrix before = shot.state.rho;
    const double rabi = kTwoPi * 250.0;
    e.apply(shot, qubit_pulse(rabi, kTwoPi / rabi, 0.0, 0.7));
    EXPECT_LT((shot.state.rho - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Engine, ZeroDurationProbeIsIdentity) {
    const Engine e(test::quiet_options());
    std::mt19937_64 rng(4);
    Shot shot = e.start_shot(Schedule{}, 0, 1);
    shot.state.rho = test::random_density_matrix(rng);
    const DensityMatrix before = shot.state.rho;
    e.apply(shot, {0.0, Probe410{4, 2.0}});
    e.apply(shot, {0.0, Probe410{3, 2.0}});
    EXPECT_LT((shot.state.rho - before).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Engine, InvariantsHoldThroughEveryEventKind) {
    EngineOptions o;  // everything on, including loss and leakage
    o.noise.laser_phase = 1.0;
    o.noise.drift = RandomWalkDrift{MagneticField::gauss(1e-4), 0.5};
    const Engine e(o);
    std::mt19937_64 rng(5);
    Schedule all = concat(build_state_prep(), build_cp(2, 0.2));
    all = concat(all, build_clock_coherence(ClockMode::Double, 0.05));
    all.events.push_back({1e-3, Probe410{3, 1.0}});
    all = concat(all, build_shelving_readout());
    for (int trial = 0; trial < 5; ++trial) {
        Shot shot = e.start_shot(all, trial, 9);
        shot.state.rho = test::random_density_matrix(rng);
        double atoms = shot.state.atom_number();
        for (const auto& ev : all.events) {
            e.apply(shot, ev);
            const auto& st = shot.state;
            EXPECT_GE(st.min_eigenvalue(), -1e-9) << event_keyword(ev);
            EXPECT_NEAR(st.trace() + st.lost_fraction, 1.0, 1e-9) << event_keyword(ev);
            EXPECT_LT((st.rho - st.rho.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LE(st.atom_number(), atoms * (1 + 1e-12) + 1e-9) << event_keyword(ev);
            atoms = st.atom_number();
        }
    }
}

TEST(Engine, PiPulseLeakageIsBelowTwoTimesTenToMinusFive) {
    EngineOptions o = test::quiet_options();
    o.leakage_enabled = true;
    const Engine e(o);
    ProtocolConfig pc;
    pc.bias = MagneticField::gauss(0.6);
    Schedule s;
    s.bias = pc.bias;
    Shot shot = e.start_shot(s, 0, 1);
    e.apply(shot, qubit_pulse(kPi / 2e-3, 2e-3));
    EXPECT_GT(shot.state.population(kGround4_0), 1 - 2e-5);
    EXPECT_LT(shot.state.population(kGround4_0), 1.0);
}

TEST(Engine, OffResonantAndScatteringFormulas) {
    EXPECT_NEAR(offresonant_peak_probability(kTwoPi * 250, 60e3), 1.7e-5, 0.05e-5);
    EXPECT_DOUBLE_EQ(offresonant_peak_probability(kTwoPi * 250, 0.0), 1.0);
    EXPECT_NEAR(scattering_probability(kTwoPi * 350e3, 1.0, 3e-3, 614e6), 2.7e-4, 0.1e-4);
    EXPECT_DOUBLE_EQ(scattering_probability(kTwoPi * 350e3, 1.0, 0.0, 614e6), 0.0);
}

TEST(Engine, CleanPulseEmptiesF4) {
    const Engine e(test::quiet_options());
    Schedule s;
    s.initial = InitialState::Ground4_0;
    Shot shot = e.start_shot(s, 0, 1);
    e.apply(shot, {3e-3, Clean530{4, 1.0, 0.0}});
    EXPECT_LT(shot.state.manifold_population(Manifold::Ground, 4), 1e-10);
    EXPECT_NEAR(shot.state.lost_fraction, 1.0, 1e-10);

    Schedule s3;
    Shot f3 = e.start_shot(s3, 0, 1);
    e.apply(f3, {3e-3, Clean530{4, 1.0, 0.0}});
    // Scattered atoms spread over all 16 ground sublevels; 1/16 return to (3,0).
    const auto& k = e.atom().constants();
    const double p = scattering_probability(k.gamma_530, 1.0, 3e-3, k.delta_530_hyperfine);
    EXPECT_NEAR(1 - f3.state.population(kGround3_0), p * 15.0 / 16.0, 1e-12);
}

TEST(Engine, RamseyAtZeroDarkTimeTransfersFully) {
    const Engine e(test::quiet_options());
    const Shot shot = run_events(e, build_ramsey(0.0, 0.0));
    EXPECT_NEAR(shot.state.population(kGround4_0), 1.0, 1e-12);
}

TEST(Engine, RamseyFringePeriodIsInverseDarkTime) {
    const Engine e(test::quiet_options());
    const double T = 0.08;
    for (auto conv : {RamseyDetuning::PhaseStep, RamseyDetuning::Carrier}) {
        ProtocolConfig pc;
        pc.ramsey_detuning = conv;
        const double p0 = run_events(e, build_ramsey(T, 0.0, pc)).state.population(kGround4_0);
        const double p1 = run_events(e, build_ramsey(T, 1.0 / T, pc)).state.population(kGround4_0);
        const double ph = run_events(e, build_ramsey(T, 0.5 / T, pc)).state.population(kGround4_0);
        EXPECT_NEAR(p0, 1.0, 1e-6);
        // A carrier detuning also tilts the pi/2 pulses: error ~ (detuning / Rabi)^2.
        EXPECT_NEAR(p1, p0, conv == RamseyDetuning::PhaseStep ? 1e-12 : 5e-3);
        EXPECT_LT(ph, 1e-3);
    }
}

TEST(Engine, EchoCancelsStaticOffsets) {
    EngineOptions o = test::quiet_options();
    o.noise.sigma_B_shot = MagneticField::gauss(500e-6);
    const Engine noisy(o);
    const Engine quiet(test::quiet_options());
    for (int n : {1, 2, 4, 8}) {
        for (int shot = 0; shot < 5; ++shot) {
            const Schedule s = build_cp(n, 6.0);
            const double a = run_events(noisy, s, shot).state.population(kGround4_0);
            const double b = run_events(quiet, s, shot).state.population(kGround4_0);
            // Residual from the offset acting during the finite pi pulses.
            EXPECT_NEAR(a, b, 1e-6) << n;
        }
    }
    // Without echo the same offsets dephase the ensemble.
    const auto ramsey = [](double ph) {
        ProtocolConfig pc;
        pc.final_phase = ph;
        return build_cp(0, 6.0, pc);
    };
    const auto echo = [](double ph) {
        ProtocolConfig pc;
        pc.final_phase = ph;
        return build_cp(1, 6.0, pc);
    };
    EXPECT_LT(ensemble_contrast(noisy, ramsey, 40), 0.5);
    EXPECT_NEAR(ensemble_contrast(noisy, echo, 40), 1.0, 1e-6);
}

TEST(Engine, ClockCoherenceDecaysWithMetastableLifetime) {
    const Engine e(test::quiet_options());
    const double tau_c = 0.112;
    for (auto mode : {ClockMode::Single, ClockMode::Double}) {
        double c0 = 0.0;
        for (double T : {0.0, 0.05, 0.1, 0.2}) {
            const Fringe f =
                detected_fringe(e, [&](const ProtocolConfig& pc) { return build_clock_coherence(mode, T, pc); });
            if (T == 0.0) c0 = f.contrast;
            const double expect = std::exp(-T / (mode == ClockMode::Single ? 2 * tau_c : tau_c));
            EXPECT_NEAR(f.contrast / c0 / expect, 1.0, 0.01) << T;
        }
    }
}

TEST(Engine, SingleClockTransferImprintsPiPhase) {
    EngineOptions o = test::quiet_options();
    o.reflection_amplitude = 0.0;
    const Engine e(o);
    const double ref =
        detected_fringe(e, [](const ProtocolConfig& pc) { return build_ramsey(pc.clock_mw_window, 0.0, pc); }).phase;
    const double single =
        detected_fringe(e, [](const ProtocolConfig& pc) { return build_clock_coherence(ClockMode::Single, 0.0, pc); })
            .phase;
    const double dbl =
        detected_fringe(e, [](const ProtocolConfig& pc) { return build_clock_coherence(ClockMode::Double, 0.0, pc); })
            .phase;
    EXPECT_NEAR(std::abs(std::remainder(single - ref, kTwoPi)), kPi, 1e-6);
    EXPECT_NEAR(std::remainder(dbl - ref, kTwoPi), 0.0, 1e-6);
}

TEST(Engine, StatePrepImpurityIsSmall) {
    EngineOptions o;
    o.noise = NoiseModel::off();
    o.loss_enabled = false;
    const Engine e(o);
    StatePrepConfig cfg;
    cfg.theta = 0.0;
    const Shot shot = run_events(e, build_state_prep(cfg));
    const double tr = shot.state.trace();
    EXPECT_NEAR(tr, 0.40, 0.01);
    EXPECT_LE(1.0 - shot.state.population(kGround3_0) / tr, 5e-4);
}

TEST(Engine, RfSweepReachesFortyPercent) {
    const Engine e(test::quiet_options());
    Schedule s;
    s.bias = MagneticField::gauss(0.6);
    s.initial = InitialState::Cooled;
    Shot shot = e.start_shot(s, 0, 1);
    e.apply(shot, {5e-3, RfSweep{800e3, 785e3}});
    EXPECT_NEAR(shot.state.population(kGround4_0), 0.40, 1e-9);
    EXPECT_NEAR(shot.state.trace(), 1.0, 1e-12);
}

TEST(Engine, CoherentPrepTransfer) {
    const Engine e(test::quiet_options());
    Schedule s;
    s.initial = InitialState::Cooled;
    Shot perfect = e.start_shot(s, 0, 1);
    e.coherent_prep_transfer(perfect, {1.0, 1.0, 1.0, 1.0});
    EXPECT_NEAR(perfect.state.population(kGround4_0), 1.0, 1e-12);
    Shot real = e.start_shot(s, 0, 1);
    e.coherent_prep_transfer(real, {0.98, 0.98, 0.98, 0.98});
    EXPECT_NEAR(real.state.population(kGround4_0), std::pow(0.98, 4), 1e-12);
    EXPECT_THROW(e.coherent_prep_transfer(real, {1.2, 1.0, 1.0, 1.0}), ConfigError);
}

TEST(Engine, LossDuringHoldMatchesClosedForm) {
    EngineOptions o;
    o.noise = NoiseModel::off();
    const Engine e(o);
    const auto p = o.loss;
    Shot shot = run_events(e, build_hold(10.0, InitialState::Ground3_0));
    EXPECT_NEAR(shot.state.trace(), two_body_survival(o.initial_atoms, p.beta_30 / p.volume, p.tau, 10.0), 1e-9);
}

TEST(Engine, DepolarisationKeepsAtomsInF4) {
    EngineOptions o;
    o.noise = NoiseModel::off();
    const Engine e(o);
    Shot shot = run_events(e, build_hold(10.0, InitialState::Ground4_0));
    double others = 0.0;
    for (int m = -4; m <= 4; ++m)
        if (m != 0) others += shot.state.population({Manifold::Ground, 4, m});
    EXPECT_GT(others, 0.01);
    EXPECT_NEAR(shot.state.trace() + shot.state.lost_fraction, 1.0, 1e-12);
}

TEST(Engine, SeededRunsAreBitIdenticalAcrossThreadCounts) {
    EngineOptions o;
    o.noise.drift = SinusoidDrift{MagneticField::gauss(1e-4), 50.0};
    const Schedule s = concat(build_ramsey(0.5, 0.3), build_shelving_readout());
    const auto a = Engine(o).run_schedule(s, 12, 77);
    o.threads = 4;
    const auto b = Engine(o).run_schedule(s, 12, 77);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].record, b[i].record);
        EXPECT_TRUE(a[i].record.complete());
    }
    const auto c = Engine(o).run_schedule(s, 4, 77, 8);
    for (size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c[i].record, a[i + 8].record);
    EXPECT_NE(Engine(o).run_schedule(s, 1, 78)[0].record, a[0].record);
}

TEST(Engine, ClockPiEfficiencyWithReflection) {
    EXPECT_DOUBLE_EQ(clock_pi_efficiency(0.0), 1.0);
    const double eff = clock_pi_efficiency(std::sqrt(0.015));
    EXPECT_LT(eff, 1.0);
    EXPECT_GT(eff, 0.99);
}

TEST(Engine, OptionsValidation) {
    EngineOptions o;
    o.initial_atoms = -1.0;
    EXPECT_THROW(Engine{o}, ConfigError);
    o = {};
    o.threads = 0;
    EXPECT_THROW(Engine{o}, ConfigError);
    EXPECT_THROW(Engine().run_schedule(build_ramsey(0.1, 0.0), 0, 1), ConfigError);
}
