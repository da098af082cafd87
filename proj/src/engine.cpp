#include "tmq/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "tmq/errors.hpp"

namespace tmq {

namespace {

constexpr Complex kI{0.0, 1.0};

// Detected F=4 atoms are heated out of the probe region with this time constant.
constexpr double kProbeHeatTime = 20e-6;
// F=3 -> F=4 repump time constant ("less than 50 us").
constexpr double kRepumpTime = 10e-6;

using Mat2 = Eigen::Matrix2cd;

Complex sinc(Complex x) {
    if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0 + x * x * x * x / 120.0;
    return std::sin(x) / x;
}

// exp(-i tau M) for M = [[0, (W/2) e^{i phi}], [(W/2) e^{-i phi}, -Delta - i gamma/2]].
Mat2 two_level_propagator(double rabi, double delta, double gamma, double phase, double tau) {
    const Complex m_ee{-delta, -0.5 * gamma};
    const Complex m0 = 0.5 * m_ee;
    const Complex b = 0.5 * rabi * std::exp(kI * phase);
    const Complex c = 0.5 * rabi * std::exp(-kI * phase);
    Mat2 n;
    n << -m0, b, c, m_ee - m0;
    const Complex s = std::sqrt(m0 * m0 + b * c);
    const Complex cos_term = std::cos(s * tau);
    const Complex sin_term = tau * sinc(s * tau);
    return std::exp(-kI * tau * m0) * (cos_term * Mat2::Identity() - kI * sin_term * n);
}

// rho -> (1-p) rho + p X rho X with X swapping basis states a and b.
void mix_swap(DensityMatrix& rho, int a, int b, double p) {
    if (p <= 0.0) return;
    DensityMatrix swapped = rho;
    swapped.row(a).swap(swapped.row(b));
    swapped.col(a).swap(swapped.col(b));
    rho = (1.0 - p) * rho + p * swapped;
}

// Scales level i by survival s (population) and records the removed part.
void scale_level(DensityMatrix& rho, int i, double s) {
    const double f = std::sqrt(std::max(s, 0.0));
    rho.row(i) *= f;
    rho.col(i) *= f;
}

}  // namespace

double offresonant_peak_probability(double rabi, double detuning_hz) {
    const double d = kTwoPi * detuning_hz;
    return rabi * rabi / (rabi * rabi + d * d);
}

double scattering_probability(double gamma, double saturation, double duration, double detuning_hz) {
    const double x = 4.0 * kPi * detuning_hz / gamma;
    return gamma * saturation * duration / (2.0 * (1.0 + saturation + x * x));
}

double clock_pi_efficiency(double a, const QuadratureOptions& q) {
    if (a == 0.0) return 1.0;
    auto f = [a](double u) {
        const double s = std::sin(0.5 * kPi * std::sqrt(1.0 + a * a + a * std::cos(u)));
        return s * s;
    };
    return integrate_gk15(f, 0.0, kPi, q) / kPi;
}

void EngineOptions::validate() const {
    constants.validate();
    noise.validate();
    loss.validate();
    readout.validate();
    if (!(reflection_amplitude >= 0.0 && reflection_amplitude < 1.0)) {
        throw ConfigError("engine.reflection_amplitude must be in [0, 1)");
    }
    if (!(initial_atoms >= 0.0)) throw ConfigError("engine.initial_atoms must be >= 0");
    if (!(max_substep > 0.0)) throw ConfigError("engine.max_substep_s must be > 0");
    if (!(rf_step_efficiency >= 0.0 && rf_step_efficiency <= 1.0)) {
        throw ConfigError("engine.rf_step_efficiency must be in [0, 1]");
    }
    if (!(branching.meta3_to_f4 >= 0.0 && branching.meta3_to_f4 <= 1.0) ||
        !(branching.meta2_to_f4 >= 0.0 && branching.meta2_to_f4 <= 1.0)) {
        throw ConfigError("engine.branching must be in [0, 1]");
    }
    if (threads < 1) throw ConfigError("run.threads must be >= 1");
}

Engine::Engine(EngineOptions options) : opt_(std::move(options)), atom_(opt_.constants) {
    opt_.validate();
    const auto& c = atom_.constants();
    for (int i = 0; i < kBasisSize; ++i) {
        const auto s = basis_state(i);
        const auto& z = atom_.ladder(s);
        c1_[i] = z.linear * s.mF;
        c2_[i] = z.second_order * s.mF * s.mF;
        if (s.manifold == Manifold::Ground) c2_[i] += (s.F == 3 ? 0.5 : -0.5) * c.gamma_qz;
        metastable_[i] = s.manifold == Manifold::Metastable1140;
        if (metastable_[i]) decay_[i] = decay_channels(i, opt_.branching);
    }
}

Shot Engine::start_shot(const Schedule& schedule, std::uint64_t shot_index, std::uint64_t master_seed) const {
    SublevelRef initial = kGround3_0;
    switch (schedule.initial) {
        case InitialState::Cooled: initial = kGround4_m4; break;
        case InitialState::Ground4_0: initial = kGround4_0; break;
        case InitialState::Ground3_0: initial = kGround3_0; break;
    }
    Shot shot{EnsembleState::pure(initial, opt_.initial_atoms, schedule.bias),
              NoiseTrajectory(opt_.noise, shot_seed(master_seed, shot_index)), ReadoutRecord{}};
    shot.record.shot_index = shot_index;
    shot.record.initial_atoms = opt_.initial_atoms;
    return shot;
}

void Engine::frame_phases(Shot& shot, double t0, double t1, std::array<double, kBasisSize>& cycles) const {
    const double bn = shot.state.b_nominal.in_tesla();
    const double ib = shot.noise.integral_b(t0, t1);
    const double ib2 = shot.noise.integral_b2(t0, t1);
    const double quad = 2.0 * bn * ib + ib2;  // integral of B^2 - Bn^2
    for (int i = 0; i < kBasisSize; ++i) cycles[i] = c1_[i] * ib + c2_[i] * quad;
}

double Engine::mean_field_tesla(Shot& shot, double t0, double t1) const {
    const double bn = shot.state.b_nominal.in_tesla();
    if (t1 <= t0) return bn + shot.noise.deviation(t0);
    return bn + shot.noise.integral_b(t0, t1) / (t1 - t0);
}

void Engine::pair_step(Shot& shot, const PairDrive& d, double tau) const {
    auto& st = shot.state;
    const double t0 = st.time;
    const double t1 = t0 + tau;
    std::array<double, kBasisSize> cyc{};
    frame_phases(shot, t0, t1, cyc);
    const double nu = kTwoPi * d.detuning;
    const double dg = tau > 0 ? cyc[d.lower] / tau : 0.0;
    const double de = tau > 0 ? cyc[d.upper] / tau : 0.0;
    const double delta = nu - kTwoPi * (de - dg);
    const Complex g = std::exp(-kI * kTwoPi * cyc[d.lower]);
    const Complex w0 = std::exp(kI * nu * t0);
    const Complex w1 = std::exp(-kI * nu * t1);

    auto nominal = [&](double rabi) {
        Mat2 k = two_level_propagator(rabi, delta, d.upper_decay, d.phase, tau) * g;
        k(0, 1) *= w0;
        k(1, 0) *= w1;
        k(1, 1) *= w1 * w0;
        return k;
    };

    // Averages <K> and <K (x) K*> over the lattice coordinate.
    Mat2 kbar;
    Eigen::Matrix4cd super;
    auto pack = [](const Mat2& k, Eigen::ArrayXd& out) {
        int n = 0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int p = 0; p < 2; ++p)
                    for (int q = 0; q < 2; ++q) {
                        const Complex v = k(i, p) * std::conj(k(j, q));
                        out[n++] = v.real();
                        out[n++] = v.imag();
                    }
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                out[n++] = k(i, j).real();
                out[n++] = k(i, j).imag();
            }
    };
    Eigen::ArrayXd avg(40);
    const double a = opt_.reflection_amplitude;
    if (d.z_average && a > 0.0 && d.rabi > 0.0) {
        auto integrand = [&](double u) {
            Eigen::ArrayXd out(40);
            pack(nominal(d.rabi * std::sqrt(1.0 + a * a + a * std::cos(u))), out);
            return out;
        };
        avg = integrate_gk15(integrand, 0.0, kPi, opt_.quadrature).value / kPi;
    } else {
        pack(nominal(d.rabi), avg);
    }
    {
        int n = 0;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int p = 0; p < 2; ++p)
                    for (int q = 0; q < 2; ++q, n += 2) super(2 * i + j, 2 * p + q) = Complex(avg[n], avg[n + 1]);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j, n += 2) kbar(i, j) = Complex(avg[n], avg[n + 1]);
    }

    const double tau_c = atom_.constants().tau_c;
    const double meta_amp = std::exp(-0.5 * tau / tau_c);
    std::array<Complex, kBasisSize> amp{};
    for (int r = 0; r < kBasisSize; ++r) {
        amp[r] = std::exp(-kI * kTwoPi * cyc[r]) * (metastable_[r] ? meta_amp : 1.0);
    }

    auto& rho = st.rho;
    const int idx[2] = {d.lower, d.upper};
    PopulationVector before = rho.diagonal().real();
    // Pair block.
    Eigen::Vector4cd pv(rho(idx[0], idx[0]), rho(idx[0], idx[1]), rho(idx[1], idx[0]), rho(idx[1], idx[1]));
    const Eigen::Vector4cd pn = super * pv;
    // Cross blocks and rest.
    for (int r = 0; r < kBasisSize; ++r) {
        if (r == idx[0] || r == idx[1]) continue;
        const Complex x0 = rho(idx[0], r), x1 = rho(idx[1], r);
        const Complex ar = std::conj(amp[r]);
        rho(idx[0], r) = (kbar(0, 0) * x0 + kbar(0, 1) * x1) * ar;
        rho(idx[1], r) = (kbar(1, 0) * x0 + kbar(1, 1) * x1) * ar;
        rho(r, idx[0]) = std::conj(rho(idx[0], r));
        rho(r, idx[1]) = std::conj(rho(idx[1], r));
    }
    for (int r = 0; r < kBasisSize; ++r) {
        if (r == idx[0] || r == idx[1]) continue;
        for (int s = 0; s < kBasisSize; ++s) {
            if (s == idx[0] || s == idx[1]) continue;
            rho(r, s) *= amp[r] * std::conj(amp[s]);
        }
    }
    rho(idx[0], idx[0]) = pn[0].real();
    rho(idx[0], idx[1]) = pn[1];
    rho(idx[1], idx[0]) = std::conj(pn[1]);
    rho(idx[1], idx[1]) = pn[3].real();

    // Spontaneous decay refills the ground levels incoherently.
    if (d.upper_decay > 0.0 && metastable_[d.upper]) {
        const double lost = (before[idx[0]] + before[idx[1]]) - (pn[0].real() + pn[3].real());
        for (const auto& ch : decay_[d.upper]) rho(ch.to, ch.to) += lost * ch.weight;
    }
    for (int r = 0; r < kBasisSize; ++r) {
        if (!metastable_[r] || r == idx[0] || r == idx[1]) continue;
        const double lost = before[r] * (1.0 - meta_amp * meta_amp);
        for (const auto& ch : decay_[r]) rho(ch.to, ch.to) += lost * ch.weight;
    }
    st.time = t1;
}

void Engine::apply_loss(Shot& shot, double dt) const {
    if (!opt_.loss_enabled || dt <= 0.0) return;
    auto& st = shot.state;
    auto& rho = st.rho;
    const auto& L = opt_.loss;
    const int i40 = basis_index(kGround4_0);
    const int i30 = basis_index(kGround3_0);
    const double n0 = st.initial_atoms;
    const PopulationVector p = rho.diagonal().real();

    double other = 0.0;
    for (int i = 0; i < kBasisSize; ++i) {
        if (!metastable_[i] && i != i40 && i != i30) other += p[i];
    }
    const double bg = background_survival(L.tau, dt);
    const double s40 = two_body_survival(n0 * p[i40], L.beta_40 / L.volume, L.tau, dt);
    const double s30 = two_body_survival(n0 * p[i30], L.beta_30 / L.volume, L.tau, dt);
    const double sother = two_body_survival(n0 * other, L.beta_4m4 / L.volume, L.tau, dt);

    std::array<double, kBasisSize> s{};
    for (int i = 0; i < kBasisSize; ++i) s[i] = metastable_[i] ? bg : sother;
    s[i40] = s40;
    s[i30] = s30;

    Eigen::Matrix<double, kBasisSize, 1> f;
    for (int i = 0; i < kBasisSize; ++i) f[i] = std::sqrt(s[i]);
    rho = (f * f.transpose()).cast<Complex>().cwiseProduct(rho);

    // Two-body events out of (4,0) depolarise into the other F=4 sublevels.
    const double depolarised = p[i40] * std::max(bg - s40, 0.0);
    for (int m = -4; m <= 4; ++m) {
        if (m == 0) continue;
        const int k = basis_index({Manifold::Ground, 4, m});
        rho(k, k) += depolarised / 8.0;
    }
    double removed = 0.0;
    for (int i = 0; i < kBasisSize; ++i) removed += p[i] * (1.0 - s[i]);
    st.lost_fraction += removed - depolarised;
}

void Engine::apply_spectator_leakage(Shot& shot, const TransitionSpec& addressed, const MwPulse& p, double t0,
                                     double duration) const {
    if (!opt_.leakage_enabled || p.rabi <= 0.0 || duration <= 0.0) return;
    const MagneticField bnom = shot.state.b_nominal;
    const MagneticField bact = MagneticField::tesla(mean_field_tesla(shot, t0, t0 + duration));
    const double f_drive = atom_.transition_frequency(addressed, bnom) + p.detuning;
    for (const auto& t : transition_catalog()) {
        if (t.kind != TransitionKind::MwHyperfine || t.name == addressed.name) continue;
        const double rabi = p.rabi * t.relative_strength / addressed.relative_strength;
        const double dnu = f_drive - atom_.transition_frequency(t, bact);
        const double gen = std::sqrt(rabi * rabi + kTwoPi * dnu * kTwoPi * dnu);
        const double s = std::sin(0.5 * gen * duration);
        mix_swap(shot.state.rho, basis_index(t.lower), basis_index(t.upper),
                 offresonant_peak_probability(rabi, dnu) * s * s);
    }
}

void Engine::apply_mw_pulse(Shot& shot, const PulseEvent& event) const {
    const auto& p = std::get<MwPulse>(event.body);
    const auto& t = transition(p.transition);
    if (t.kind != TransitionKind::MwHyperfine) throw ConfigError("'" + p.transition + "' is not a MW transition");
    const double t0 = shot.state.time;
    const PairDrive drive{basis_index(t.lower), basis_index(t.upper), p.rabi, p.detuning, p.phase, 0.0, false};
    double remaining = event.duration;
    while (remaining > 0.0) {
        const double dt = std::min(remaining, opt_.max_substep);
        pair_step(shot, drive, dt);
        apply_loss(shot, dt);
        remaining -= dt;
    }
    apply_spectator_leakage(shot, t, p, t0, event.duration);
}

void Engine::apply_clock_pulse(Shot& shot, const PulseEvent& event) const {
    const auto& p = std::get<ClockPulse>(event.body);
    const auto& t = transition(p.transition);
    if (t.kind != TransitionKind::Optical1140) throw ConfigError("'" + p.transition + "' is not a clock transition");
    const double laser = shot.noise.laser_phase(shot.state.time);
    const PairDrive drive{basis_index(t.lower), basis_index(t.upper), p.rabi, p.detuning,
                          p.phase + laser,      1.0 / atom_.constants().tau_c, true};
    pair_step(shot, drive, event.duration);
    apply_loss(shot, event.duration);
}

void Engine::evolve_free(Shot& shot, double duration) const {
    if (duration <= 0.0) return;
    auto& st = shot.state;
    const double tau_c = atom_.constants().tau_c;
    double remaining = duration;
    while (remaining > 0.0) {
        const double dt = opt_.loss_enabled ? std::min(remaining, opt_.max_substep) : remaining;
        std::array<double, kBasisSize> cyc{};
        frame_phases(shot, st.time, st.time + dt, cyc);
        const double meta_amp = std::exp(-0.5 * dt / tau_c);
        Eigen::Matrix<Complex, kBasisSize, 1> amp;
        for (int i = 0; i < kBasisSize; ++i) {
            amp[i] = std::exp(-kI * kTwoPi * cyc[i]) * (metastable_[i] ? meta_amp : 1.0);
        }
        const PopulationVector before = st.rho.diagonal().real();
        st.rho = (amp * amp.adjoint()).cwiseProduct(st.rho);
        for (int i = 0; i < kBasisSize; ++i) {
            if (!metastable_[i]) continue;
            const double lost = before[i] * (1.0 - meta_amp * meta_amp);
            for (const auto& ch : decay_[i]) st.rho(ch.to, ch.to) += lost * ch.weight;
        }
        st.time += dt;
        apply_loss(shot, dt);
        remaining -= dt;
    }
}

void Engine::apply_probe_410(Shot& shot, const PulseEvent& event) const {
    const auto& p = std::get<Probe410>(event.body);
    auto& rho = shot.state.rho;
    const double tau = event.duration;
    if (tau > 0.0) {
        // Pump rate scales with the probe saturation relative to the calibrated s = 2.
        const double scale = (p.saturation / (1.0 + p.saturation)) / (2.0 / 3.0);
        for (int i = 0; i < kBasisSize; ++i) {
            const auto s = basis_state(i);
            if (s.manifold != Manifold::Ground) continue;
            const double before = rho(i, i).real();
            if (p.target_F == 4) {
                const double survive = s.F == 4 ? std::exp(-tau / kProbeHeatTime)
                                                : std::exp(-opt_.readout.pump_rate() * scale * tau);
                scale_level(rho, i, survive);
                shot.state.lost_fraction += before * (1.0 - survive);
            }
        }
        if (p.target_F == 3) {
            const double moved = -std::expm1(-tau / kRepumpTime);
            for (int m = -3; m <= 3; ++m) {
                const int from = basis_index({Manifold::Ground, 3, m});
                const int to = basis_index({Manifold::Ground, 4, m});
                const double pop = rho(from, from).real();
                scale_level(rho, from, 1.0 - moved);
                rho(to, to) += pop * moved;
            }
        }
    }
    evolve_free(shot, tau);
}

void Engine::apply_clean_530(Shot& shot, const PulseEvent& event) const {
    const auto& c = std::get<Clean530>(event.body);
    const auto& k = atom_.constants();
    auto& rho = shot.state.rho;
    const double tau = event.duration;
    if (tau > 0.0) {
        const double x = 4.0 * kPi * c.detuning / k.gamma_530;
        const double rate = (c.saturation / (1.0 + c.saturation + x * x)) / 0.5 / k.tau_clean;
        const double half = std::exp(-0.5 * rate * tau);
        const int other_F = c.target_F == 4 ? 3 : 4;
        const double p_scatter =
            std::min(1.0, scattering_probability(k.gamma_530, c.saturation, tau, k.delta_530_hyperfine + c.detuning));
        auto clean = [&]() {
            for (int i = 0; i < kBasisSize; ++i) {
                const auto s = basis_state(i);
                if (s.manifold != Manifold::Ground || s.F != c.target_F) continue;
                shot.state.lost_fraction += rho(i, i).real() * (1.0 - half);
                scale_level(rho, i, half);
            }
        };
        clean();
        // Scattered atoms land uniformly on the 16 ground sublevels.
        double scattered = 0.0;
        for (int i = 0; i < kBasisSize; ++i) {
            const auto s = basis_state(i);
            if (s.manifold != Manifold::Ground || s.F != other_F) continue;
            scattered += rho(i, i).real() * p_scatter;
            scale_level(rho, i, 1.0 - p_scatter);
        }
        for (int i = 0; i < kBasisSize; ++i) {
            if (!metastable_[i]) rho(i, i) += scattered / 16.0;
        }
        clean();
    }
    evolve_free(shot, tau);
}

void Engine::apply_rf_sweep(Shot& shot, const PulseEvent& event) const {
    const auto& rf = std::get<RfSweep>(event.body);
    const double t0 = shot.state.time;
    const MagneticField b = MagneticField::tesla(mean_field_tesla(shot, t0, t0 + event.duration));
    const double lo = std::min(rf.f_start, rf.f_stop) - opt_.rf_margin;
    const double hi = std::max(rf.f_start, rf.f_stop) + opt_.rf_margin;
    struct Crossing {
        double order;
        int a, b;
    };
    std::vector<Crossing> crossings;
    for (const auto& t : transition_catalog()) {
        if (t.kind != TransitionKind::RfIntraManifold) continue;
        const double f = atom_.transition_frequency(t, b);
        if (f < lo || f > hi) continue;
        const double order = rf.f_stop == rf.f_start ? 0.0 : (f - rf.f_start) / (rf.f_stop - rf.f_start);
        crossings.push_back({order, basis_index(t.lower), basis_index(t.upper)});
    }
    std::stable_sort(crossings.begin(), crossings.end(),
                     [](const Crossing& x, const Crossing& y) { return x.order < y.order; });
    for (const auto& c : crossings) mix_swap(shot.state.rho, c.a, c.b, opt_.rf_step_efficiency);
    evolve_free(shot, event.duration);
}

void Engine::coherent_prep_transfer(Shot& shot, const std::array<double, 4>& eff) const {
    static constexpr std::array<std::string_view, 4> kSteps{"prep1", "prep2", "prep3", "prep4"};
    for (int k = 0; k < 4; ++k) {
        if (!(eff[k] >= 0.0 && eff[k] <= 1.0)) throw ConfigError("prep efficiency must be in [0, 1]");
        const auto& t = transition(kSteps[k]);
        const double theta = 2.0 * std::asin(std::sqrt(eff[k]));
        const Mat2 u = two_level_propagator(1.0, 0.0, 0.0, 0.0, theta);
        const int idx[2] = {basis_index(t.lower), basis_index(t.upper)};
        auto& rho = shot.state.rho;
        // rho -> U rho U^dagger on rows/columns of the pair.
        for (int c = 0; c < kBasisSize; ++c) {
            const Complex x0 = rho(idx[0], c), x1 = rho(idx[1], c);
            rho(idx[0], c) = u(0, 0) * x0 + u(0, 1) * x1;
            rho(idx[1], c) = u(1, 0) * x0 + u(1, 1) * x1;
        }
        for (int r = 0; r < kBasisSize; ++r) {
            const Complex x0 = rho(r, idx[0]), x1 = rho(r, idx[1]);
            rho(r, idx[0]) = x0 * std::conj(u(0, 0)) + x1 * std::conj(u(0, 1));
            rho(r, idx[1]) = x0 * std::conj(u(1, 0)) + x1 * std::conj(u(1, 1));
        }
    }
}

void Engine::apply_measure(Shot& shot, const PulseEvent& event) const {
    const auto& m = std::get<Measure>(event.body);
    auto& st = shot.state;
    auto& rho = st.rho;
    const auto r = probe_response(m.label, m.probe_duration, opt_.readout);
    double f4 = 0.0, f3 = 0.0;
    for (int i = 0; i < kBasisSize; ++i) {
        const auto s = basis_state(i);
        if (s.manifold != Manifold::Ground) continue;
        (s.F == 4 ? f4 : f3) += rho(i, i).real();
    }
    const int slot = measure_slot(m.label);
    shot.record.raw[slot] = st.initial_atoms * (r.f4_weight * f4 + r.f3_weight * f3);
    shot.record.timing[slot] = st.time;
    for (int i = 0; i < kBasisSize; ++i) {
        const auto s = basis_state(i);
        if (s.manifold != Manifold::Ground) continue;
        const double survive = s.F == 4 ? 0.0 : 1.0 - r.f3_depletion;
        st.lost_fraction += rho(i, i).real() * (1.0 - survive);
        scale_level(rho, i, survive);
    }
    evolve_free(shot, event.duration);
}

void Engine::apply(Shot& shot, const PulseEvent& event) const {
    std::visit(
        [&](const auto& body) {
            using T = std::decay_t<decltype(body)>;
            if constexpr (std::is_same_v<T, MwPulse>) apply_mw_pulse(shot, event);
            else if constexpr (std::is_same_v<T, ClockPulse>) apply_clock_pulse(shot, event);
            else if constexpr (std::is_same_v<T, RfSweep>) apply_rf_sweep(shot, event);
            else if constexpr (std::is_same_v<T, Probe410>) apply_probe_410(shot, event);
            else if constexpr (std::is_same_v<T, Clean530>) apply_clean_530(shot, event);
            else if constexpr (std::is_same_v<T, Measure>) apply_measure(shot, event);
            else evolve_free(shot, event.duration);
        },
        event.body);
}

void Engine::finish_record(Shot& shot) const {
    auto& rec = shot.record;
    apply_camera_noise(rec, opt_.readout, opt_.camera_noise ? &shot.noise.rng() : nullptr);
    if (rec.complete()) rec.calibrated = calibrate(rec.raw, opt_.readout);
}

ShotResult Engine::run_shot(const Schedule& schedule, std::uint64_t shot_index, std::uint64_t master_seed) const {
    Shot shot = start_shot(schedule, shot_index, master_seed);
    for (const auto& e : schedule.events) apply(shot, e);
    finish_record(shot);
    return {std::move(shot.state), std::move(shot.record)};
}

std::vector<ShotResult> Engine::run_schedule(const Schedule& schedule, int n_shots, std::uint64_t master_seed,
                                             std::uint64_t first_index) const {
    if (n_shots < 1) throw ConfigError("shots must be >= 1");
    schedule.validate();
    std::vector<ShotResult> out(static_cast<size_t>(n_shots));
    const int workers = std::min(opt_.threads, n_shots);
    if (workers <= 1) {
        for (int i = 0; i < n_shots; ++i) out[i] = run_shot(schedule, first_index + static_cast<std::uint64_t>(i), master_seed);
        return out;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < n_shots && !failed; i = next++) {
                try {
                    out[i] = run_shot(schedule, first_index + static_cast<std::uint64_t>(i), master_seed);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

CrosstalkCalibration Engine::matched_calibration(double clock_pi_time) const {
    CrosstalkCalibration c = opt_.readout;
    c.clock_pi_efficiency = clock_pi_efficiency(opt_.reflection_amplitude, opt_.quadrature);
    c.tau_c = atom_.constants().tau_c;
    c.branching = opt_.branching;
    c.clock_pi_time = clock_pi_time;
    c.refresh_decay_matrix();
    return c;
}

}  // namespace tmq
