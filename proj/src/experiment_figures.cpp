// Figure reproductions: simulated points plus model overlays per figure.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "tmq/errors.hpp"
#include "tmq/experiment.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

namespace {

using ScheduleFn = std::function<Schedule(double final_phase)>;

struct Stat {
    double mean = 0.0;
    double sem = 0.0;
};

Stat stat(const std::vector<double>& v) {
    Stat s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sem = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    return s;
}

// Every series draws from its own block of shot indices.
constexpr std::uint64_t kSeriesStride = 1u << 24;

Stat run_point(const Engine& e, const Schedule& s, int shots, std::uint64_t seed, std::uint64_t first,
               std::string_view obs) {
    std::vector<double> ys;
    for (const auto& r : e.run_schedule(s, shots, seed, first)) ys.push_back(observable(r.record, obs));
    return stat(ys);
}

// Fringe from four final-pulse phases 0, pi/2, pi, 3pi/2 evaluated on the
// same noise realisations: eta(phi) = A + (C/2) cos(phi + phi0).
struct FringeEstimate {
    double contrast = 0.0;
    double sigma = 0.0;
    double phase = 0.0;
    double peak_to_peak = 0.0;
};

FringeEstimate four_phase(const Engine& e, const ScheduleFn& make, int shots, std::uint64_t seed,
                          std::uint64_t first, std::string_view obs = "eta4") {
    std::array<Stat, 4> m;
    for (int k = 0; k < 4; ++k) m[k] = run_point(e, make(k * kPi / 2), shots, seed, first, obs);
    const double dc = m[0].mean - m[2].mean;
    const double ds = m[1].mean - m[3].mean;
    FringeEstimate f;
    f.contrast = std::hypot(dc, ds);
    f.phase = std::atan2(-ds, dc);
    if (f.contrast > 0.0) {
        const double v = dc * dc * (m[0].sem * m[0].sem + m[2].sem * m[2].sem) +
                         ds * ds * (m[1].sem * m[1].sem + m[3].sem * m[3].sem);
        f.sigma = std::sqrt(v) / f.contrast;
    }
    double lo = m[0].mean, hi = m[0].mean;
    for (const auto& s : m) {
        lo = std::min(lo, s.mean);
        hi = std::max(hi, s.mean);
    }
    f.peak_to_peak = hi - lo;
    return f;
}

double wrap_phase(double p) {
    p = std::remainder(p, kTwoPi);
    return p <= -kPi ? p + kTwoPi : p;
}

// Config copy at a given field with the matching loss table row.
RunConfig at_field(const RunConfig& c, double gauss) {
    RunConfig f = c;
    f.schedule.num["bias_gauss"] = gauss;
    LossParameters l = LossParameters::measured_row(MagneticField::gauss(gauss));
    l.tau = c.engine.loss.tau;
    l.volume = c.engine.loss.volume;
    f.engine.loss = l;
    return f;
}

ProtocolConfig protocol(const RunConfig& c) {
    ProtocolConfig p;
    p.bias = MagneticField::gauss(c.schedule.get("bias_gauss"));
    p.mw_pi_time = c.schedule.get("mw_pi_time");
    p.clock_pi_time = c.schedule.get("clock_pi_time");
    p.probe_duration = c.schedule.get("probe_duration");
    p.dead_time = c.schedule.get("dead_time");
    return p;
}

Schedule with_readout(Schedule s, const ProtocolConfig& p) { return concat(std::move(s), build_shelving_readout(p)); }

Dataset dataset_with_sigma(std::vector<double> x, std::vector<double> y, std::vector<double> sigma) {
    Dataset d{std::move(x), std::move(y), std::move(sigma)};
    for (double s : d.sigma)
        if (!(s > 0.0)) {
            d.sigma.clear();
            break;
        }
    return d;
}

// --- individual figures ---------------------------------------------------------

std::vector<Table> fig2e(const RunConfig& c0) {
    const RunConfig c = at_field(c0, 0.6);
    const Engine e = make_engine(c);
    const ProtocolConfig p = protocol(c);
    const std::uint64_t seed = c.require_seed();
    const double rabi = kPi / p.mw_pi_time;
    const double period = kTwoPi / rabi;
    const int per_period = 16;

    Table data{"fig2e_rabi", {"window", "t", "eta3", "eta3_sigma", "eta3_ideal"}, {}};
    Table vis{"fig2e_visibility", {"window", "periods_start", "periods_stop", "visibility"}, {}};
    const std::array<int, 3> windows{0, 124, 248};
    for (size_t w = 0; w < windows.size(); ++w) {
        double lo = 1e300, hi = -1e300;
        for (int k = 0; k <= 2 * per_period; ++k) {
            const double t = (windows[w] + static_cast<double>(k) / per_period) * period;
            Schedule s = with_readout(build_rabi_scan(t, p), p);
            const Stat st = run_point(e, s, c.shots, seed, (w * 64 + k) * static_cast<std::uint64_t>(c.shots),
                                      "eta3_total");
            lo = std::min(lo, st.mean);
            hi = std::max(hi, st.mean);
            data.add({std::to_string(w), cell(t), cell(st.mean), cell(st.sem), cell(0.5 * (1.0 + std::cos(rabi * t)))});
        }
        vis.add({std::to_string(w), std::to_string(windows[w]), std::to_string(windows[w] + 2), cell((hi - lo) / (hi + lo))});
    }
    return {data, vis};
}

std::vector<Table> fig4(const RunConfig& c0) {
    Table data{"fig4_lifetime", {"field_gauss", "initial", "T", "atoms", "atoms_sigma", "atoms_model"}, {}};
    Table fit{"fig4_fit", {"field_gauss", "initial", "beta_fit_cm3_per_s", "beta_sigma_cm3_per_s", "beta_reference_cm3_per_s"}, {}};
    const std::vector<double> times{0.0, 5.0, 10.0, 20.0, 30.0, 45.0, 60.0};
    struct Series {
        InitialState initial;
        const char* obs;
        LossClass cls;
    };
    const std::array<Series, 3> series{{{InitialState::Cooled, "n4", LossClass::Ground4_m4},
                                        {InitialState::Ground4_0, "n4_0", LossClass::Ground4_0},
                                        {InitialState::Ground3_0, "n3_0", LossClass::Ground3_0}}};
    std::uint64_t block = 0;
    for (double gauss : {0.1, 0.6}) {
        const RunConfig c = at_field(c0, gauss);
        const Engine e = make_engine(c);
        const ProtocolConfig p = protocol(c);
        const auto& L = c.engine.loss;
        const double n0 = c.engine.initial_atoms;
        for (const auto& sr : series) {
            std::vector<double> xs, ys, ss;
            for (size_t k = 0; k < times.size(); ++k) {
                const Schedule s = with_readout(build_hold(times[k], sr.initial, p), p);
                const Stat st = run_point(e, s, c.shots, c.require_seed(),
                                          block * kSeriesStride + k * static_cast<std::uint64_t>(c.shots), sr.obs);
                const double model = model_two_body_loss(times[k], n0, L.tau, L.beta(sr.cls) / L.volume);
                data.add({cell(gauss), std::string(to_string(sr.initial)), cell(times[k]), cell(st.mean),
                          cell(st.sem), cell(model)});
                xs.push_back(times[k]);
                ys.push_back(st.mean);
                ss.push_back(st.sem);
            }
            ++block;
            const Dataset d = dataset_with_sigma(xs, ys, ss);
            FitOptions o;
            o.fixed = {false, true, false};
            const FitResult r = least_squares(find_model("two_body_loss"), d, {ys.front(), L.tau, L.beta(sr.cls) / L.volume}, o);
            const double to_cm3 = L.volume / units::kCubicCentimetre;
            fit.add({cell(gauss), std::string(to_string(sr.initial)), cell(r.value("beta_over_V") * to_cm3),
                     cell(r.error("beta_over_V") * to_cm3), cell(L.beta(sr.cls) / units::kCubicCentimetre)});
        }
    }
    return {data, fit};
}

// Quasi-static Gaussian field noise sigma gives exp(-(T/T2*)^2) with
// T2* = 1 / (sqrt(2) pi (2 gamma_qz B) sigma).
double predicted_t2star(const RunConfig& c, double gauss) {
    const double sigma = c.engine.noise.sigma_B_shot.in_tesla();
    if (!(sigma > 0.0)) return 0.0;
    const double slope = 2.0 * c.engine.constants.gamma_qz * gauss * MagneticField::kTeslaPerGauss;
    return 1.0 / (std::sqrt(2.0) * kPi * slope * sigma);
}

std::vector<Table> fig5(const RunConfig& c0) {
    Table data{"fig5_contrast", {"field_gauss", "T", "contrast", "contrast_sigma", "peak_to_peak", "contrast_model"}, {}};
    Table fit{"fig5_fit", {"field_gauss", "C0", "T2star", "T2star_sigma", "T2star_predicted"}, {}};
    const std::vector<double> fractions{0.01, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5};
    std::uint64_t block = 0;
    for (double gauss : {0.1, 0.6}) {
        const RunConfig c = at_field(c0, gauss);
        const Engine e = make_engine(c);
        ProtocolConfig p = protocol(c);
        const double pred = predicted_t2star(c, gauss);
        std::vector<double> ts;
        if (pred > 0.0)
            for (double f : fractions) ts.push_back(f * pred);
        else
            ts = {0.08, 1.0, 2.0, 5.0, 10.0, 20.0};
        std::vector<double> cs, ss, ptp;
        for (size_t k = 0; k < ts.size(); ++k) {
            const auto make = [&](double phi) {
                ProtocolConfig q = p;
                q.final_phase = phi;
                return with_readout(build_ramsey(ts[k], 0.0, q), q);
            };
            const FringeEstimate f =
                four_phase(e, make, c.shots, c.require_seed(), block * kSeriesStride + k * static_cast<std::uint64_t>(c.shots));
            cs.push_back(f.contrast);
            ss.push_back(f.sigma);
            ptp.push_back(f.peak_to_peak);
        }
        ++block;
        const Dataset d = dataset_with_sigma(ts, cs, ss);
        const FitResult r = least_squares(find_model("gaussian_decay"), d, {cs.front(), pred > 0 ? pred : ts.back()});
        for (size_t k = 0; k < ts.size(); ++k)
            data.add({cell(gauss), cell(ts[k]), cell(cs[k]), cell(ss[k]), cell(ptp[k]),
                      cell(model_gaussian_decay(ts[k], r.value("C0"), r.value("T2")))});
        fit.add({cell(gauss), cell(r.value("C0")), cell(r.value("T2")), cell(r.error("T2")), cell(pred)});
    }
    return {data, fit};
}

std::vector<Table> fig6(const RunConfig& c0) {
    const RunConfig c = at_field(c0, 0.1);
    const Engine e = make_engine(c);
    ProtocolConfig p = protocol(c);
    p.clock_mw_window = 0.5;
    const double tau_c = c.engine.constants.tau_c;
    const std::vector<double> ts{0.0, 0.025, 0.05, 0.1, 0.15, 0.2};
    const std::uint64_t seed = c.require_seed();

    const auto reference = four_phase(
        e,
        [&](double phi) {
            ProtocolConfig q = p;
            q.final_phase = phi;
            return with_readout(build_ramsey(p.clock_mw_window, 0.0, q), q);
        },
        c.shots, seed, 0, "eta4_total");

    Table data{"fig6_clock_coherence",
               {"mode", "T", "contrast", "contrast_sigma", "contrast_norm", "overlay", "phase_shift"},
               {}};
    for (ClockMode mode : {ClockMode::Single, ClockMode::Double}) {
        double c_at_zero = 0.0;
        for (size_t k = 0; k < ts.size(); ++k) {
            const auto make = [&](double phi) {
                ProtocolConfig q = p;
                q.final_phase = phi;
                return with_readout(build_clock_coherence(mode, ts[k], q), q);
            };
            // Same shot indices as the reference so the noise realisations match.
            // Normalised to all detected atoms: decay products stay in the ground manifold.
            const FringeEstimate f = four_phase(e, make, c.shots, seed, 0, "eta4_total");
            if (k == 0) c_at_zero = f.contrast;
            const double rate = mode == ClockMode::Single ? 0.5 / tau_c : 1.0 / tau_c;
            data.add({mode == ClockMode::Single ? "single" : "double", cell(ts[k]), cell(f.contrast), cell(f.sigma),
                      cell(c_at_zero > 0 ? f.contrast / c_at_zero : 0.0), cell(std::exp(-rate * ts[k])),
                      cell(wrap_phase(f.phase - reference.phase))});
        }
    }
    Table ref{"fig6_reference", {"window", "contrast", "phase"}, {}};
    ref.add({cell(p.clock_mw_window), cell(reference.contrast), cell(reference.phase)});
    return {data, ref};
}

std::vector<Table> fig7(const RunConfig& c0) {
    const RunConfig c = at_field(c0, 0.1);
    const Engine e = make_engine(c);
    const ProtocolConfig p = protocol(c);
    const std::vector<double> probes{50e-6, 100e-6, 200e-6, 300e-6, 400e-6, 500e-6, 600e-6,
                                     800e-6, 1e-3,   1.5e-3, 2e-3,   3e-3};
    ProbeScan scan;
    for (size_t k = 0; k < probes.size(); ++k) {
        const Schedule s = build_probe_scan(probes[k], p);
        const auto first = k * static_cast<std::uint64_t>(c.shots);
        const Stat n4 = run_point(e, s, c.shots, c.require_seed(), first, "raw_n4");
        const Stat n3 = run_point(e, s, c.shots, c.require_seed(), first, "raw_n3");
        scan.probe.push_back(probes[k]);
        scan.n4.push_back(n4.mean);
        scan.n4_sigma.push_back(n4.sem);
        scan.n3.push_back(n3.mean);
        scan.n3_sigma.push_back(n3.sem);
    }
    const CalibrationFit cal = cmd_calibrate_readout(scan, e.options().readout);
    Table data{"fig7_probe_scan", {"probe", "n4", "n4_sigma", "n3", "n3_sigma", "n4_model", "n3_model"}, {}};
    for (size_t k = 0; k < probes.size(); ++k) {
        const double x = probes[k];
        const double growth = x <= e.options().readout.quadratic_limit ? cal.growth.value("k") * x * x : kNaN;
        data.add({cell(x), cell(scan.n4[k]), cell(scan.n4_sigma[k]), cell(scan.n3[k]), cell(scan.n3_sigma[k]),
                  cell(growth), cell(model_exponential(x, cal.depletion.value("A"), cal.depletion.value("tau")))});
    }
    Table fit{"fig7_fit", {"eps_43", "eps_43_sigma", "dep_3", "dep_3_sigma", "reference_probe"}, {}};
    fit.add({cell(cal.calibration.eps_43), cell(cal.eps_sigma), cell(cal.calibration.dep_3), cell(cal.dep_sigma),
             cell(cal.calibration.reference_probe)});
    return {data, fit};
}

std::vector<Table> fig8(const RunConfig& c) {
    // Synthetic points from the lattice-averaged model; the engine's clock
    // pulses share the same averaging, so the model is the generator.
    const double omega0 = kPi / c.schedule.get("clock_pi_time");
    const double a = c.engine.reflection_amplitude;
    const double tau_c = c.engine.constants.tau_c;
    const double noise = 0.01;
    std::mt19937_64 rng(shot_seed(c.require_seed(), 8));
    std::normal_distribution<double> gauss(0.0, noise);
    Dataset d;
    for (int k = 0; k <= 100; ++k) {
        const double t = 20e-3 * k / 100.0;
        d.x.push_back(t);
        d.y.push_back(model_rabi_reflection(t, omega0, a, tau_c) + gauss(rng));
        d.sigma.push_back(noise);
    }
    FitOptions o;
    o.fixed = {false, false, true};
    const FitResult r = least_squares(find_model("rabi_reflection"), d, {omega0 * 1.02, 0.1, tau_c}, o);
    Table data{"fig8_clock_rabi", {"t", "eta", "eta_sigma", "eta_fit", "eta_no_reflection"}, {}};
    for (size_t k = 0; k < d.size(); ++k)
        data.add({cell(d.x[k]), cell(d.y[k]), cell(noise),
                  cell(model_rabi_reflection(d.x[k], r.value("Omega0"), r.value("a"), tau_c)),
                  cell(model_rabi_reflection(d.x[k], r.value("Omega0"), 0.0, tau_c))});
    Table fit{"fig8_fit", {"Omega0", "Omega0_sigma", "a", "a_sigma", "reflection_intensity", "reflection_intensity_sigma",
                           "injected_intensity"}, {}};
    fit.add({cell(r.value("Omega0")), cell(r.error("Omega0")), cell(r.value("a")), cell(r.error("a")),
             cell(r.value("a") * r.value("a")), cell(2.0 * std::abs(r.value("a")) * r.error("a")), cell(a * a)});
    return {data, fit};
}

// Slow field wander refocused only partially by the decoupling pulses.
NoiseModel decoupling_noise(const NoiseModel& n) {
    if (!std::holds_alternative<std::monostate>(n.drift)) return n;
    NoiseModel m = n;
    m.drift = RandomWalkDrift{MagneticField::gauss(5e-4), 1.0};
    return m;
}

std::vector<Table> fig10(const RunConfig& c0) {
    RunConfig c = at_field(c0, 0.1);
    c.engine.noise = decoupling_noise(c.engine.noise);
    const Engine e = make_engine(c);
    const ProtocolConfig p = protocol(c);
    const int n = 8;
    const std::vector<double> ts{0.5, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0};
    std::vector<double> eta, sig;
    for (size_t k = 0; k < ts.size(); ++k) {
        const Schedule s = with_readout(build_cp(n, ts[k], p), p);
        const Stat st = run_point(e, s, c.shots, c.require_seed(), k * static_cast<std::uint64_t>(c.shots), "eta4");
        eta.push_back(st.mean);
        sig.push_back(st.sem);
    }
    const Dataset d_eta = dataset_with_sigma(ts, eta, sig);
    const FitResult r_eta = least_squares(find_model("gaussian_decay_offset"), d_eta,
                                          {2.0 * (eta.front() - 0.5), ts.back() / 2});
    std::vector<double> contrast, csig;
    for (size_t k = 0; k < ts.size(); ++k) {
        contrast.push_back(contrast_from_eta(eta[k]));
        csig.push_back(2.0 * sig[k]);
    }
    const Dataset d_c = dataset_with_sigma(ts, contrast, csig);
    const Model& gm = find_model("gaussian_decay");
    FitResult r_c = least_squares(gm, d_c, {contrast.front(), r_eta.value("T")});
    const auto interval = chi2_profile(gm, d_c, r_c, "T2");
    r_c.profile_intervals["T2"] = interval;

    Table data{"fig10_decoupling",
               {"t", "eta_target", "eta_sigma", "eta_fit", "eta_lower", "contrast", "contrast_sigma", "contrast_fit"},
               {}};
    for (size_t k = 0; k < ts.size(); ++k) {
        const double fit_eta = model_gaussian_decay_offset(ts[k], r_eta.value("eta_max0"), r_eta.value("T"));
        data.add({cell(ts[k]), cell(eta[k]), cell(sig[k]), cell(fit_eta), cell(1.0 - fit_eta), cell(contrast[k]),
                  cell(csig[k]), cell(model_gaussian_decay(ts[k], r_c.value("C0"), r_c.value("T2")))});
    }
    const double delta = (r_c.unit_weights && r_c.dof > 0) ? r_c.reduced_chi2() : 1.0;
    Table profile{"fig10_profile", {"T2", "chi2", "chi2_threshold"}, {}};
    const double width = interval.second - interval.first;
    const double lo = std::max(interval.first - width, 1e-3 * r_c.value("T2"));
    const double hi = interval.second + width;
    for (int k = 0; k <= 40; ++k) {
        const double v = lo + (hi - lo) * k / 40.0;
        profile.add({cell(v), cell(profile_chi2_at(gm, d_c, r_c, "T2", v)), cell(r_c.chi2 + delta)});
    }
    Table fit{"fig10_fit", {"n", "T_eta", "T_eta_sigma", "C0", "T2", "T2_sigma", "T2_profile_lo", "T2_profile_hi", "chi2_min"}, {}};
    fit.add({std::to_string(n), cell(r_eta.value("T")), cell(r_eta.error("T")), cell(r_c.value("C0")), cell(r_c.value("T2")),
             cell(r_c.error("T2")), cell(interval.first), cell(interval.second), cell(r_c.chi2)});
    return {data, profile, fit};
}

}  // namespace

std::vector<Table> cmd_reproduce(const std::string& figure, const RunConfig& c) {
    if (figure == "fig2e") return fig2e(c);
    if (figure == "fig4") return fig4(c);
    if (figure == "fig5") return fig5(c);
    if (figure == "fig6") return fig6(c);
    if (figure == "fig7") return fig7(c);
    if (figure == "fig8") return fig8(c);
    if (figure == "fig10") return fig10(c);
    std::string known;
    for (const auto& id : figure_ids()) known += (known.empty() ? "" : ", ") + id;
    throw ConfigError("run.figure: unknown figure '" + figure + "' (known: " + known + ")");
}

}  // namespace tmq
