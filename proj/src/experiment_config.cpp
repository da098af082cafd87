// INI configuration: parsing, resolution and canonical serialization.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <set>
#include <sstream>

#include "tmq/errors.hpp"
#include "tmq/experiment.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

namespace {

namespace pt = boost::property_tree;

constexpr double kGauss = MagneticField::kTeslaPerGauss;

// Numeric schedule parameters and their defaults (SI, bias in gauss).
const std::map<std::string, double>& schedule_defaults() {
    static const std::map<std::string, double> d{
        {"bias_gauss", 0.1},       {"mw_pi_time", 2e-3},   {"clock_pi_time", 1e-3},   {"probe_duration", 400e-6},
        {"dead_time", 4e-3},       {"final_phase", 0.0},   {"clock_mw_window", 0.0},  {"T", 0.08},
        {"detuning", 0.0},         {"n", 0.0},             {"t", 2e-3},               {"first_probe", 400e-6},
        {"theta", kPi},            {"theta_phase", 0.0},   {"rf_duration", 5e-3},     {"rf_start", 800e3},
        {"rf_stop", 785e3},        {"clean_duration", 3e-3}, {"clean_saturation", 1.0},
    };
    return d;
}

const std::set<std::string>& schedule_names() {
    static const std::set<std::string> s{"ramsey", "cp",   "rabi",       "state_prep", "shelving",
                                         "clock_coherence", "hold", "probe_scan", "script"};
    return s;
}

bool parse_bool(const std::string& key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + std::string(v) + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::vector<std::string> split_list(std::string_view v) {
    std::vector<std::string> out;
    for (auto part : split(v, ',')) {
        const auto t = trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& v, const std::string& sep = ", ") {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        if constexpr (std::is_same_v<T, double>)
            out += format_double(v[i]);
        else
            out += v[i];
    }
    return out;
}

// Reads one section, tracking which keys were consumed.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    std::optional<std::string> text(const std::string& key) {
        used_.insert(key);
        if (!tree_) return std::nullopt;
        auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
        if (!v) return std::nullopt;
        return std::string(trim(*v));
    }
    std::string label(const std::string& key) const { return name_ + "." + key; }

    void number(const std::string& key, double& dst, double scale = 1.0) {
        if (auto v = text(key)) dst = parse(key, *v) * scale;
    }
    void flag(const std::string& key, bool& dst) {
        if (auto v = text(key)) dst = parse_bool(label(key), *v);
    }
    double parse(const std::string& key, std::string_view v) const {
        try {
            return parse_double(v);
        } catch (const ConfigError&) {
            throw ConfigError(label(key) + ": expected a number, got '" + std::string(v) + "'");
        }
    }
    long long integer(const std::string& key, std::string_view v) const {
        try {
            return parse_int(v);
        } catch (const ConfigError&) {
            throw ConfigError(label(key) + ": expected an integer, got '" + std::string(v) + "'");
        }
    }

    void check_unused() const {
        if (!tree_) return;
        for (const auto& [k, _] : *tree_)
            if (!used_.count(k)) throw ConfigError("unknown key " + label(k));
    }
    const pt::ptree* tree() const { return tree_; }

private:
    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> used_;
};

void parse_constants(Section& s, PhysicsConstants& k) {
    s.number("hyperfine_splitting_ground_hz", k.hyperfine_splitting_ground);
    s.number("gamma_qz_hz_per_gauss2", k.gamma_qz, 1.0 / (kGauss * kGauss));
    s.number("tau_c_s", k.tau_c);
    s.number("gamma_410_hz", k.gamma_410, kTwoPi);
    s.number("gamma_530_hz", k.gamma_530, kTwoPi);
    s.number("i_sat_410_uw_per_mm2", k.i_sat_410, units::kMicroWattPerMm2);
    s.number("delta_530_hyperfine_hz", k.delta_530_hyperfine);
    s.number("tau_single_atom_s", k.tau_single_atom);
    s.number("trap_volume_mm3", k.trap_volume, units::kCubicMillimetre);
    s.number("tau_clean_s", k.tau_clean);
    s.number("clock_wavelength_m", k.clock_wavelength);
    s.number("lattice_wavelength_m", k.lattice_wavelength);
    s.number("lattice_depth_er", k.lattice_depth);
    s.number("recoil_frequency_hz", k.recoil_frequency);
    auto ladder = [&](const std::string& prefix, ZeemanLadder& z) {
        s.number(prefix + "_linear_hz_per_gauss", z.linear, 1.0 / kGauss);
        s.number(prefix + "_quadratic_hz_per_gauss2", z.second_order, 1.0 / (kGauss * kGauss));
    };
    ladder("ground_f4", k.ground_f4);
    ladder("ground_f3", k.ground_f3);
    ladder("meta_f3", k.meta_f3);
    ladder("meta_f2", k.meta_f2);
}

void write_constants(std::ostream& o, const PhysicsConstants& k) {
    o << "[constants]\n";
    auto w = [&](const char* key, double v) { o << key << " = " << format_double(v) << "\n"; };
    w("hyperfine_splitting_ground_hz", k.hyperfine_splitting_ground);
    w("gamma_qz_hz_per_gauss2", k.gamma_qz * kGauss * kGauss);
    w("tau_c_s", k.tau_c);
    w("gamma_410_hz", k.gamma_410 / kTwoPi);
    w("gamma_530_hz", k.gamma_530 / kTwoPi);
    w("i_sat_410_uw_per_mm2", k.i_sat_410 / units::kMicroWattPerMm2);
    w("delta_530_hyperfine_hz", k.delta_530_hyperfine);
    w("tau_single_atom_s", k.tau_single_atom);
    w("trap_volume_mm3", k.trap_volume / units::kCubicMillimetre);
    w("tau_clean_s", k.tau_clean);
    w("clock_wavelength_m", k.clock_wavelength);
    w("lattice_wavelength_m", k.lattice_wavelength);
    w("lattice_depth_er", k.lattice_depth);
    w("recoil_frequency_hz", k.recoil_frequency);
    auto ladder = [&](const std::string& prefix, const ZeemanLadder& z) {
        o << prefix << "_linear_hz_per_gauss = " << format_double(z.linear * kGauss) << "\n";
        o << prefix << "_quadratic_hz_per_gauss2 = " << format_double(z.second_order * kGauss * kGauss) << "\n";
    };
    ladder("ground_f4", k.ground_f4);
    ladder("ground_f3", k.ground_f3);
    ladder("meta_f3", k.meta_f3);
    ladder("meta_f2", k.meta_f2);
}

}  // namespace

double ScheduleSpec::get(const std::string& key) const {
    if (auto it = num.find(key); it != num.end()) return it->second;
    if (auto it = schedule_defaults().find(key); it != schedule_defaults().end()) return it->second;
    throw ConfigError("schedule." + key + ": unknown parameter");
}

RunConfig RunConfig::defaults() {
    RunConfig c;
    c.schedule.num = schedule_defaults();
    c.schedule.str = {{"mode", "single"}, {"initial", "default"}, {"ramsey_detuning", "phase_step"}};
    return c;
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw ConfigError("run.seed: a seed is required for simulation commands");
    return *seed;
}

RunConfig parse_config(std::string_view text) {
    pt::ptree tree;
    {
        std::istringstream in{std::string(text)};
        try {
            pt::read_ini(in, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ParseError(static_cast<int>(e.line()), 1, e.message());
        }
    }
    static const std::set<std::string> sections{"run",   "schedule", "scan", "constants", "noise",
                                                "loss",  "engine",   "readout", "fit"};
    for (const auto& [name, sub] : tree) {
        if (!sections.count(name)) throw ConfigError("unknown section [" + name + "]");
        if (sub.empty() && !sub.data().empty()) throw ConfigError("key '" + name + "' outside of a section");
    }
    auto section = [&](const std::string& name) {
        auto it = tree.find(name);
        return Section(it == tree.not_found() ? nullptr : &it->second, name);
    };

    RunConfig c = RunConfig::defaults();

    Section run = section("run");
    if (auto v = run.text("seed")) c.seed = static_cast<std::uint64_t>(run.integer("seed", *v));
    if (auto v = run.text("shots")) {
        const long long n = run.integer("shots", *v);
        if (n < 1) throw ConfigError("run.shots: must be >= 1");
        c.shots = static_cast<int>(n);
    }
    if (auto v = run.text("out")) c.out = *v;
    if (auto v = run.text("figure")) c.figure = *v;
    if (auto v = run.text("threads")) {
        const long long n = run.integer("threads", *v);
        if (n < 1) throw ConfigError("run.threads: must be >= 1");
        c.engine.threads = static_cast<int>(n);
    }
    run.check_unused();

    Section sch = section("schedule");
    if (auto v = sch.text("name")) {
        if (!schedule_names().count(*v)) throw ConfigError("schedule.name: unknown schedule '" + *v + "'");
        c.schedule.name = *v;
    }
    if (auto v = sch.text("script")) c.schedule.script = *v;
    bool bias_given = false;
    for (const auto& [key, def] : schedule_defaults()) {
        if (auto v = sch.text(key)) {
            c.schedule.num[key] = sch.parse(key, *v);
            bias_given |= key == "bias_gauss";
        }
    }
    if (!bias_given && c.schedule.name == "state_prep") c.schedule.num["bias_gauss"] = 0.6;
    if (auto v = sch.text("mode")) {
        if (*v != "single" && *v != "double") throw ConfigError("schedule.mode: expected single or double");
        c.schedule.str["mode"] = *v;
    }
    if (auto v = sch.text("initial")) {
        if (*v != "default") initial_state_from_string(*v);
        c.schedule.str["initial"] = *v;
    }
    if (auto v = sch.text("ramsey_detuning")) {
        if (*v != "phase_step" && *v != "carrier")
            throw ConfigError("schedule.ramsey_detuning: expected phase_step or carrier");
        c.schedule.str["ramsey_detuning"] = *v;
    }
    if (c.schedule.name == "script" && c.schedule.script.empty())
        throw ConfigError("schedule.script: required when schedule.name = script");
    sch.check_unused();

    Section scan = section("scan");
    if (auto v = scan.text("variable")) {
        if (!schedule_defaults().count(*v)) throw ConfigError("scan.variable: '" + *v + "' is not a schedule parameter");
        c.scan.variable = *v;
    }
    if (auto v = scan.text("values")) {
        for (const auto& item : split_list(*v)) c.scan.values.push_back(scan.parse("values", item));
    }
    {
        auto start = scan.text("start");
        auto stop = scan.text("stop");
        auto points = scan.text("points");
        if (start || stop || points) {
            if (!start || !stop || !points) throw ConfigError("scan.start, scan.stop and scan.points go together");
            if (!c.scan.values.empty()) throw ConfigError("scan.values conflicts with scan.start/stop/points");
            const double a = scan.parse("start", *start);
            const double b = scan.parse("stop", *stop);
            const long long n = scan.integer("points", *points);
            if (n < 1) throw ConfigError("scan.points: must be >= 1");
            for (long long i = 0; i < n; ++i)
                c.scan.values.push_back(n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
        }
    }
    if (auto v = scan.text("observable")) {
        ReadoutRecord probe;
        probe.raw = probe.calibrated = {1, 1, 1, 1};
        observable(probe, *v);  // validates the name
        c.scan.observable = *v;
    }
    if (c.scan.variable.empty() != c.scan.values.empty())
        throw ConfigError("scan.variable and scan values must be given together");
    if (c.schedule.name == "script" && !c.scan.variable.empty())
        throw ConfigError("scan.variable: script schedules cannot be scanned");
    scan.check_unused();

    Section cons = section("constants");
    parse_constants(cons, c.engine.constants);
    cons.check_unused();

    Section noise = section("noise");
    {
        auto& n = c.engine.noise;
        double sigma_g = n.sigma_B_shot.in_gauss();
        noise.number("sigma_b_gauss", sigma_g);
        n.sigma_B_shot = MagneticField::gauss(sigma_g);
        noise.number("laser_phase_rad2_per_s", n.laser_phase);
        std::string drift = "none";
        if (auto v = noise.text("drift")) drift = *v;
        double amp = 0.0, period = 100.0, step = 0.0, interval = 1.0;
        noise.number("drift_amplitude_gauss", amp);
        noise.number("drift_period_s", period);
        noise.number("drift_step_gauss", step);
        noise.number("drift_interval_s", interval);
        if (drift == "none")
            n.drift = std::monostate{};
        else if (drift == "sinusoid")
            n.drift = SinusoidDrift{MagneticField::gauss(amp), period};
        else if (drift == "random_walk")
            n.drift = RandomWalkDrift{MagneticField::gauss(step), interval};
        else
            throw ConfigError("noise.drift: expected none, sinusoid or random_walk");
    }
    noise.check_unused();

    Section loss = section("loss");
    {
        std::string row = "auto";
        if (auto v = loss.text("row")) row = *v;
        const MagneticField bias = MagneticField::gauss(c.schedule.get("bias_gauss"));
        if (row == "auto")
            c.engine.loss = LossParameters::measured_row(bias);
        else if (row == "0.1G")
            c.engine.loss = LossParameters::measured_row(MagneticField::gauss(0.1));
        else if (row == "0.6G")
            c.engine.loss = LossParameters::measured_row(MagneticField::gauss(0.6));
        else if (row != "custom")
            throw ConfigError("loss.row: expected auto, 0.1G, 0.6G or custom");
        c.engine.loss.tau = c.engine.constants.tau_single_atom;
        c.engine.loss.volume = c.engine.constants.trap_volume;
        auto& l = c.engine.loss;
        loss.flag("enabled", c.engine.loss_enabled);
        loss.number("tau_s", l.tau);
        loss.number("beta_4m4_cm3_per_s", l.beta_4m4, units::kCubicCentimetre);
        loss.number("beta_40_cm3_per_s", l.beta_40, units::kCubicCentimetre);
        loss.number("beta_30_cm3_per_s", l.beta_30, units::kCubicCentimetre);
        loss.number("volume_mm3", l.volume, units::kCubicMillimetre);
    }
    loss.check_unused();

    Section eng = section("engine");
    {
        auto& e = c.engine;
        eng.flag("leakage", e.leakage_enabled);
        eng.number("reflection_amplitude", e.reflection_amplitude);
        eng.number("initial_atoms", e.initial_atoms);
        eng.number("max_substep_s", e.max_substep);
        eng.number("rf_step_efficiency", e.rf_step_efficiency);
        eng.number("rf_margin_hz", e.rf_margin);
        eng.number("branching_meta3_to_f4", e.branching.meta3_to_f4);
        eng.number("branching_meta2_to_f4", e.branching.meta2_to_f4);
        eng.flag("camera_noise", e.camera_noise);
        eng.number("quadrature_abs_tol", e.quadrature.abs_tol);
        eng.number("quadrature_rel_tol", e.quadrature.rel_tol);
    }
    eng.check_unused();

    Section ro = section("readout");
    {
        auto& r = c.engine.readout;
        if (auto v = ro.text("calibration")) c.calibration_file = *v;
        ro.flag("matched", c.matched_readout);
        ro.number("eps_43", r.eps_43);
        ro.number("dep_3", r.dep_3);
        ro.number("reference_probe_s", r.reference_probe);
        ro.number("quadratic_limit_s", r.quadratic_limit);
        ro.number("camera_floor", r.camera_floor);
        ro.number("clock_pi_efficiency", r.clock_pi_efficiency);
        r.tau_c = c.engine.constants.tau_c;
        r.branching = c.engine.branching;
    }
    ro.check_unused();

    Section fit = section("fit");
    {
        auto& f = c.fit;
        if (auto v = fit.text("model")) f.model = *v;
        if (auto v = fit.text("data")) f.data = *v;
        if (auto v = fit.text("init")) {
            for (const auto& item : split_list(*v)) {
                const auto eq = item.find('=');
                if (eq == std::string::npos) throw ConfigError("fit.init: expected name=value, got '" + item + "'");
                f.init[std::string(trim(std::string_view(item).substr(0, eq)))] =
                    fit.parse("init", trim(std::string_view(item).substr(eq + 1)));
            }
        }
        if (auto v = fit.text("fixed")) f.fixed = split_list(*v);
        if (auto v = fit.text("profile")) f.profile = split_list(*v);
        if (auto v = fit.text("multistart")) {
            const long long n = fit.integer("multistart", *v);
            if (n < 1) throw ConfigError("fit.multistart: must be >= 1");
            f.multistart = static_cast<int>(n);
        }
        if (!f.model.empty()) {
            const Model& m = find_model(f.model);
            for (const auto& [name, _] : f.init) m.index_of(name);
            for (const auto& name : f.fixed) m.index_of(name);
            for (const auto& name : f.profile) m.index_of(name);
        }
    }
    fit.check_unused();

    c.engine.validate();
    return c;
}

RunConfig load_config(const std::string& path) { return parse_config(load_text(path)); }

std::string serialize_config(const RunConfig& c) {
    std::ostringstream o;
    auto w = [&](const std::string& key, const std::string& v) { o << key << " = " << v << "\n"; };
    auto wn = [&](const std::string& key, double v) { w(key, format_double(v)); };

    o << "[run]\n";
    if (c.seed) w("seed", std::to_string(*c.seed));
    w("shots", std::to_string(c.shots));
    if (!c.out.empty()) w("out", c.out);
    if (!c.figure.empty()) w("figure", c.figure);
    w("threads", std::to_string(c.engine.threads));

    o << "\n[schedule]\n";
    w("name", c.schedule.name);
    if (!c.schedule.script.empty()) w("script", c.schedule.script);
    for (const auto& [key, _] : schedule_defaults()) wn(key, c.schedule.get(key));
    for (const auto& [key, v] : c.schedule.str) w(key, v);

    if (!c.scan.variable.empty()) {
        o << "\n[scan]\n";
        w("variable", c.scan.variable);
        w("values", join(c.scan.values));
        w("observable", c.scan.observable);
    } else if (c.scan.observable != "eta4") {
        o << "\n[scan]\n";
        w("observable", c.scan.observable);
    }

    o << "\n";
    write_constants(o, c.engine.constants);

    const auto& n = c.engine.noise;
    o << "\n[noise]\n";
    wn("sigma_b_gauss", n.sigma_B_shot.in_gauss());
    wn("laser_phase_rad2_per_s", n.laser_phase);
    if (const auto* s = std::get_if<SinusoidDrift>(&n.drift)) {
        w("drift", "sinusoid");
        wn("drift_amplitude_gauss", s->amplitude.in_gauss());
        wn("drift_period_s", s->period);
    } else if (const auto* r = std::get_if<RandomWalkDrift>(&n.drift)) {
        w("drift", "random_walk");
        wn("drift_step_gauss", r->step.in_gauss());
        wn("drift_interval_s", r->interval);
    } else {
        w("drift", "none");
    }

    const auto& l = c.engine.loss;
    o << "\n[loss]\n";
    w("row", "custom");
    w("enabled", bool_str(c.engine.loss_enabled));
    wn("tau_s", l.tau);
    wn("beta_4m4_cm3_per_s", l.beta_4m4 / units::kCubicCentimetre);
    wn("beta_40_cm3_per_s", l.beta_40 / units::kCubicCentimetre);
    wn("beta_30_cm3_per_s", l.beta_30 / units::kCubicCentimetre);
    wn("volume_mm3", l.volume / units::kCubicMillimetre);

    const auto& e = c.engine;
    o << "\n[engine]\n";
    w("leakage", bool_str(e.leakage_enabled));
    wn("reflection_amplitude", e.reflection_amplitude);
    wn("initial_atoms", e.initial_atoms);
    wn("max_substep_s", e.max_substep);
    wn("rf_step_efficiency", e.rf_step_efficiency);
    wn("rf_margin_hz", e.rf_margin);
    wn("branching_meta3_to_f4", e.branching.meta3_to_f4);
    wn("branching_meta2_to_f4", e.branching.meta2_to_f4);
    w("camera_noise", bool_str(e.camera_noise));
    wn("quadrature_abs_tol", e.quadrature.abs_tol);
    wn("quadrature_rel_tol", e.quadrature.rel_tol);

    const auto& r = e.readout;
    o << "\n[readout]\n";
    if (!c.calibration_file.empty()) w("calibration", c.calibration_file);
    w("matched", bool_str(c.matched_readout));
    wn("eps_43", r.eps_43);
    wn("dep_3", r.dep_3);
    wn("reference_probe_s", r.reference_probe);
    wn("quadratic_limit_s", r.quadratic_limit);
    wn("camera_floor", r.camera_floor);
    wn("clock_pi_efficiency", r.clock_pi_efficiency);

    if (!c.fit.model.empty() || !c.fit.data.empty()) {
        o << "\n[fit]\n";
        if (!c.fit.model.empty()) w("model", c.fit.model);
        if (!c.fit.data.empty()) w("data", c.fit.data);
        if (!c.fit.init.empty()) {
            std::vector<std::string> items;
            for (const auto& [k, v] : c.fit.init) items.push_back(k + "=" + format_double(v));
            w("init", join(items));
        }
        if (!c.fit.fixed.empty()) w("fixed", join(c.fit.fixed));
        if (!c.fit.profile.empty()) w("profile", join(c.fit.profile));
        w("multistart", std::to_string(c.fit.multistart));
    }
    return o.str();
}

}  // namespace tmq
