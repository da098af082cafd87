#include "tmq/experiment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "tmq/errors.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

namespace {

ProtocolConfig protocol_config(const ScheduleSpec& s) {
    ProtocolConfig p;
    p.bias = MagneticField::gauss(s.get("bias_gauss"));
    p.mw_pi_time = s.get("mw_pi_time");
    p.clock_pi_time = s.get("clock_pi_time");
    p.probe_duration = s.get("probe_duration");
    p.dead_time = s.get("dead_time");
    p.final_phase = s.get("final_phase");
    p.clock_mw_window = s.get("clock_mw_window");
    const auto it = s.str.find("ramsey_detuning");
    p.ramsey_detuning =
        (it != s.str.end() && it->second == "carrier") ? RamseyDetuning::Carrier : RamseyDetuning::PhaseStep;
    return p;
}

std::string str_or(const ScheduleSpec& s, const std::string& key, const std::string& fallback) {
    const auto it = s.str.find(key);
    return it == s.str.end() ? fallback : it->second;
}

int as_count(double v, const std::string& key) {
    if (v < 0.0 || v != std::floor(v) || v > 1e6) throw ConfigError("schedule." + key + ": expected a count");
    return static_cast<int>(v);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

Schedule resolve_schedule(const RunConfig& c, std::optional<double> scan_value) {
    ScheduleSpec spec = c.schedule;
    if (scan_value) {
        if (c.scan.variable.empty()) throw ConfigError("scan.variable: not set");
        spec.num[c.scan.variable] = *scan_value;
    }
    const ProtocolConfig pc = protocol_config(spec);
    const std::string& name = spec.name;
    Schedule s;
    bool with_readout = true;
    if (name == "ramsey") {
        s = build_ramsey(spec.get("T"), spec.get("detuning"), pc);
    } else if (name == "cp") {
        s = build_cp(as_count(spec.get("n"), "n"), spec.get("T"), pc);
    } else if (name == "rabi") {
        s = build_rabi_scan(spec.get("t"), pc);
    } else if (name == "state_prep") {
        StatePrepConfig sp;
        sp.bias = pc.bias;
        sp.mw_pi_time = pc.mw_pi_time;
        sp.rf_duration = spec.get("rf_duration");
        sp.rf_start = spec.get("rf_start");
        sp.rf_stop = spec.get("rf_stop");
        sp.clean_duration = spec.get("clean_duration");
        sp.clean_saturation = spec.get("clean_saturation");
        sp.theta = spec.get("theta");
        sp.theta_phase = spec.get("theta_phase");
        s = build_state_prep(sp);
    } else if (name == "shelving") {
        s = build_shelving_readout(pc);
        with_readout = false;
    } else if (name == "clock_coherence") {
        const std::string mode = str_or(spec, "mode", "single");
        s = build_clock_coherence(mode == "double" ? ClockMode::Double : ClockMode::Single, spec.get("T"), pc);
    } else if (name == "hold") {
        const std::string init = str_or(spec, "initial", "default");
        s = build_hold(spec.get("T"), init == "default" ? InitialState::Ground3_0 : initial_state_from_string(init),
                       pc);
    } else if (name == "probe_scan") {
        s = build_probe_scan(spec.get("first_probe"), pc);
        with_readout = false;
    } else if (name == "script") {
        s = parse_sequence(load_text(spec.script));
        with_readout = false;
    } else {
        throw ConfigError("schedule.name: unknown schedule '" + name + "'");
    }
    if (name != "script") {
        const std::string init = str_or(spec, "initial", "default");
        if (init != "default") s.initial = initial_state_from_string(init);
    }
    if (with_readout) s = concat(std::move(s), build_shelving_readout(pc));
    s.validate();
    return s;
}

Engine make_engine(const RunConfig& c) {
    EngineOptions o = c.engine;
    if (!c.calibration_file.empty()) {
        o.readout = parse_calibration(load_text(c.calibration_file));
        return Engine(o);
    }
    o.readout.probe_duration = c.schedule.get("probe_duration");
    o.readout.dead_time = c.schedule.get("dead_time");
    o.readout.clock_pi_time = c.schedule.get("clock_pi_time");
    o.readout.tau_c = o.constants.tau_c;
    o.readout.branching = o.branching;
    if (c.matched_readout) {
        const Engine probe(o);
        o.readout = probe.matched_calibration(o.readout.clock_pi_time);
    } else {
        o.readout.refresh_decay_matrix();
    }
    return Engine(o);
}

double observable(const ReadoutRecord& r, std::string_view name) {
    const auto& cal = r.calibrated;
    const auto& raw = r.raw;
    if (name == "eta4") return r.eta4();
    if (name == "eta3") return 1.0 - r.eta4();
    if (name == "eta4_total") return r.eta4_total();
    if (name == "eta3_total") return 1.0 - r.eta4_total();
    if (name == "atoms") return cal[0] + cal[1] + cal[2] + cal[3];
    if (name == "n4") return cal[0];
    if (name == "n3") return cal[1];
    if (name == "n4_0") return cal[2];
    if (name == "n3_0") return cal[3];
    if (name == "raw_n4") return raw[0];
    if (name == "raw_n3") return raw[1];
    if (name == "raw_n4_0") return raw[2];
    if (name == "raw_n3_0") return raw[3];
    throw ConfigError("scan.observable: unknown observable '" + std::string(name) + "'");
}

namespace {

std::vector<std::optional<double>> scan_points(const RunConfig& c) {
    std::vector<std::optional<double>> pts;
    if (c.scan.variable.empty())
        pts.push_back(std::nullopt);
    else
        for (double v : c.scan.values) pts.emplace_back(v);
    return pts;
}

}  // namespace

std::string cmd_simulate(const RunConfig& c, SimulationSummary* summary) {
    const std::uint64_t seed = c.require_seed();
    const Engine engine = make_engine(c);
    const auto pts = scan_points(c);
    std::ostringstream o;
    o << "# schema=1\n";
    o << "# schedule=" << c.schedule.name << " seed=" << seed << " shots=" << c.shots << " points=" << pts.size()
      << "\n";
    o << "x,shot,measure,label,t,raw,calibrated\n";
    size_t rows = 0;
    for (size_t k = 0; k < pts.size(); ++k) {
        const Schedule s = resolve_schedule(c, pts[k]);
        const auto results = engine.run_schedule(s, c.shots, seed, k * static_cast<std::uint64_t>(c.shots));
        const double x = pts[k].value_or(0.0);
        for (const auto& r : results) {
            int ordinal = 0;
            for (MeasureLabel l : {MeasureLabel::N4, MeasureLabel::N3, MeasureLabel::N4_0, MeasureLabel::N3_0}) {
                if (!r.record.has(l)) continue;
                const int slot = measure_slot(l);
                o << format_double(x) << ',' << r.record.shot_index << ',' << ordinal++ << ',' << to_string(l) << ','
                  << format_double(r.record.timing[slot]) << ',' << format_double(r.record.raw[slot]) << ','
                  << format_double(r.record.calibrated[slot]) << '\n';
                ++rows;
            }
        }
    }
    if (summary) *summary = {pts.size(), static_cast<size_t>(c.shots), rows};
    return o.str();
}

Dataset cmd_scan(const RunConfig& c) {
    if (c.scan.variable.empty()) throw ConfigError("scan.variable: the scan command needs a scan variable");
    const std::uint64_t seed = c.require_seed();
    const Engine engine = make_engine(c);
    Dataset d;
    bool sigma_ok = c.shots >= 2;
    for (size_t k = 0; k < c.scan.values.size(); ++k) {
        const Schedule s = resolve_schedule(c, c.scan.values[k]);
        const auto results = engine.run_schedule(s, c.shots, seed, k * static_cast<std::uint64_t>(c.shots));
        std::vector<double> ys;
        for (const auto& r : results) ys.push_back(observable(r.record, c.scan.observable));
        d.x.push_back(c.scan.values[k]);
        d.y.push_back(mean_of(ys));
        const double se = standard_error(ys);
        sigma_ok = sigma_ok && se > 0.0 && std::isfinite(se);
        d.sigma.push_back(se);
    }
    if (!sigma_ok) d.sigma.clear();
    d.validate();
    return d;
}

// --- fitting -------------------------------------------------------------------

std::vector<double> default_initial_values(const Model& m, const Dataset& d, const RunConfig& c) {
    if (d.size() == 0) throw FitError(FitError::Kind::BadInput, "empty dataset");
    std::vector<size_t> order(d.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return d.x[a] < d.x[b]; });
    const double x0 = d.x[order.front()], x1 = d.x[order.back()];
    const double y0 = d.y[order.front()], y1 = d.y[order.back()];
    const double span = x1 > x0 ? x1 - x0 : 1.0;
    const auto [ymin, ymax] = std::minmax_element(d.y.begin(), d.y.end());
    const double ymean = mean_of(d.y);

    if (m.name == "two_body_loss") return {y0, c.engine.loss.tau, c.engine.loss.beta_40 / c.engine.loss.volume};
    if (m.name == "exponential") {
        const double tau = (y0 > 0 && y1 > 0 && y1 < y0) ? span / std::log(y0 / y1) : span;
        return {y0, tau};
    }
    if (m.name == "gaussian_decay") {
        double t2 = span;
        for (size_t i : order)
            if (d.y[i] < y0 / std::exp(1.0)) {
                t2 = std::max(d.x[i], 1e-300);
                break;
            }
        return {y0, t2};
    }
    if (m.name == "gaussian_decay_offset") return {2.0 * (y0 - 0.5), span};
    if (m.name == "ramsey_fringe") {
        // Best linear fit over a grid of fringe parameters T; picks phase and
        // amplitude by least squares for each.
        double best_t = 2.0 * c.schedule.get("T"), best_r = std::numeric_limits<double>::infinity();
        double best_a = ymean, best_c = *ymax - *ymin, best_phi = 0.0;
        // Up to the sampling limit cos(pi T dx) = -1 of a uniform grid; higher T
        // are aliases with identical residuals.
        const int n_grid = 400;
        const double t_max = static_cast<double>(std::max<size_t>(d.size(), 2) - 1) / span;
        for (int g = 1; g <= n_grid; ++g) {
            const double T = t_max * g / n_grid;
            Eigen::MatrixXd a(d.size(), 3);
            Eigen::VectorXd y(d.size());
            for (size_t i = 0; i < d.size(); ++i) {
                a(i, 0) = 1.0;
                a(i, 1) = std::cos(kPi * T * d.x[i]);
                a(i, 2) = std::sin(kPi * T * d.x[i]);
                y[i] = d.y[i];
            }
            const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(y);
            const double res = (a * coef - y).squaredNorm();
            if (res < best_r) {
                best_r = res;
                best_t = T;
                best_a = coef[0];
                best_c = 2.0 * std::hypot(coef[1], coef[2]);
                best_phi = std::atan2(-coef[2], coef[1]);
            }
        }
        return {best_a, best_c, best_t, best_phi};
    }
    if (m.name == "rabi_reflection") return {kPi / c.schedule.get("clock_pi_time"), 0.1, c.engine.constants.tau_c};
    if (m.name == "quadratic_growth") {
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < d.size(); ++i) {
            num += d.y[i] * d.x[i] * d.x[i];
            den += std::pow(d.x[i], 4);
        }
        return {den > 0 ? num / den : 0.0};
    }
    return std::vector<double>(m.parameters.size(), 0.0);
}

namespace {

FitResult fit_with_starts(const Model& m, const Dataset& d, std::vector<double> init, const FitOptions& opts,
                          int starts, std::uint64_t seed) {
    std::optional<FitResult> best;
    std::optional<FitError> first_error;
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int s = 0; s < starts; ++s) {
        std::vector<double> p = init;
        if (s > 0)
            for (size_t k = 0; k < p.size(); ++k)
                if (opts.fixed.empty() || !opts.fixed[k]) p[k] *= 1.0 + u(rng);
        try {
            FitResult r = least_squares(m, d, p, opts);
            if (!best || r.chi2 < best->chi2) best = std::move(r);
        } catch (const FitError& e) {
            if (!first_error) first_error = e;
        }
    }
    if (!best) throw *first_error;
    return *best;
}

}  // namespace

FitReport cmd_fit(const RunConfig& c, const Dataset& data) {
    if (c.fit.model.empty()) throw ConfigError("fit.model: no model given");
    const Model& m = find_model(c.fit.model);
    std::vector<double> init = default_initial_values(m, data, c);
    for (const auto& [name, v] : c.fit.init) init[m.index_of(name)] = v;
    FitOptions opts;
    opts.fixed.assign(m.parameters.size(), false);
    for (const auto& name : c.fit.fixed) opts.fixed[m.index_of(name)] = true;

    FitReport rep;
    rep.result = fit_with_starts(m, data, init, opts, c.fit.multistart, c.seed.value_or(0));
    for (const auto& name : c.fit.profile)
        rep.result.profile_intervals[name] = chi2_profile(m, data, rep.result, name, opts);
    const FitResult& r = rep.result;

    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["model"] = m.name;
    j["data"] = c.fit.data;
    j["points"] = data.size();
    j["weights"] = data.has_sigma() ? "sigma" : "unit";
    if (!data.has_sigma())
        j["note"] = "no sigma column: unit weights, covariance scaled by the reduced chi2";
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    std::ostringstream t;
    t << "model " << m.name << " (" << data.size() << " points, " << (data.has_sigma() ? "sigma" : "unit")
      << " weights)\n";
    for (size_t k = 0; k < r.names.size(); ++k) {
        nlohmann::ordered_json p;
        p["name"] = r.names[k];
        p["value"] = r.params[k];
        p["sigma"] = r.error(r.names[k]);
        p["fixed"] = static_cast<bool>(r.fixed[k]);
        t << "  " << r.names[k] << " = " << format_double(r.params[k]);
        if (r.fixed[k])
            t << " (fixed)";
        else
            t << " +/- " << format_double(r.error(r.names[k]));
        if (auto it = r.profile_intervals.find(r.names[k]); it != r.profile_intervals.end()) {
            p["profile"] = {it->second.first, it->second.second};
            t << "  profile [" << format_double(it->second.first) << ", " << format_double(it->second.second) << "]";
        }
        t << "\n";
        params.push_back(p);
    }
    j["parameters"] = params;
    if (m.name == "two_body_loss") {
        // beta in the customary cm^3/s using the configured trap volume.
        const double v = c.engine.loss.volume;
        j["derived"]["beta_cm3_per_s"] = r.value("beta_over_V") * v / units::kCubicCentimetre;
        j["derived"]["beta_sigma_cm3_per_s"] = r.error("beta_over_V") * v / units::kCubicCentimetre;
    }
    if (m.name == "ramsey_fringe") {
        j["derived"]["period"] = 2.0 / r.value("T");
        j["derived"]["free_evolution_time"] = r.value("T") / 2.0;
    }
    if (m.name == "rabi_reflection") {
        j["derived"]["reflection_intensity"] = r.value("a") * r.value("a");
        j["derived"]["reflection_intensity_sigma"] = 2.0 * std::abs(r.value("a")) * r.error("a");
    }
    j["chi2"] = r.chi2;
    j["dof"] = r.dof;
    j["reduced_chi2"] = r.reduced_chi2();
    j["iterations"] = r.iterations;
    nlohmann::ordered_json cov = nlohmann::ordered_json::array();
    for (Eigen::Index a = 0; a < r.covariance.rows(); ++a) {
        std::vector<double> row(r.covariance.cols());
        for (Eigen::Index b = 0; b < r.covariance.cols(); ++b) row[b] = r.covariance(a, b);
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["config"] = serialize_config(c);
    rep.json = j.dump(2) + "\n";
    t << "  chi2 = " << format_double(r.chi2) << ", dof = " << r.dof << ", chi2/dof = " << format_double(r.reduced_chi2())
      << ", iterations = " << r.iterations << "\n";
    rep.text = t.str();
    return rep;
}

// --- readout calibration -------------------------------------------------------

ProbeScan probe_scan_from_rows(std::string_view csv) {
    std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_x;
    int line_no = 0;
    bool header = false;
    int ix = -1, il = -1, ir = -1;
    size_t pos = 0;
    while (pos < csv.size()) {
        size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        const auto line = trim(csv.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto cells = split(line, ',');
        if (!header) {
            for (size_t k = 0; k < cells.size(); ++k) {
                const auto name = trim(cells[k]);
                if (name == "x") ix = static_cast<int>(k);
                if (name == "label") il = static_cast<int>(k);
                if (name == "raw") ir = static_cast<int>(k);
            }
            if (ix < 0 || il < 0 || ir < 0) throw ParseError(line_no, 1, "expected simulate output with x, label, raw");
            header = true;
            continue;
        }
        if (static_cast<int>(cells.size()) <= std::max({ix, il, ir})) throw ParseError(line_no, 1, "short row");
        double x = 0.0, raw = 0.0;
        try {
            x = parse_double(trim(cells[ix]));
            raw = parse_double(trim(cells[ir]));
        } catch (const ConfigError& e) {
            throw ParseError(line_no, 1, e.what());
        }
        const auto label = trim(cells[il]);
        if (label == "N4")
            by_x[x].first.push_back(raw);
        else if (label == "N3")
            by_x[x].second.push_back(raw);
    }
    ProbeScan s;
    for (const auto& [x, v] : by_x) {
        if (v.first.empty() || v.second.empty()) throw ConfigError("probe scan point " + format_double(x) + " lacks N4 or N3");
        s.probe.push_back(x);
        s.n4.push_back(mean_of(v.first));
        s.n4_sigma.push_back(standard_error(v.first));
        s.n3.push_back(mean_of(v.second));
        s.n3_sigma.push_back(standard_error(v.second));
    }
    if (s.probe.size() < 3) throw ConfigError("probe scan needs at least three probe durations");
    return s;
}

CalibrationFit cmd_calibrate_readout(const ProbeScan& scan, const CrosstalkCalibration& base) {
    auto dataset = [&](const std::vector<double>& y, const std::vector<double>& sigma, double x_max) {
        Dataset d;
        bool sig = true;
        for (size_t i = 0; i < scan.probe.size(); ++i) {
            if (scan.probe[i] > x_max) continue;
            d.x.push_back(scan.probe[i]);
            d.y.push_back(y[i]);
            d.sigma.push_back(sigma[i]);
            sig = sig && sigma[i] > 0.0;
        }
        if (!sig) d.sigma.clear();
        return d;
    };
    const double inf = std::numeric_limits<double>::infinity();
    const Dataset n3 = dataset(scan.n3, scan.n3_sigma, inf);
    const Dataset n4 = dataset(scan.n4, scan.n4_sigma, base.quadratic_limit * (1.0 + 1e-12));

    CalibrationFit out;
    const Model& expo = find_model("exponential");
    const double tau_guess = base.dep_3 > 0.0 ? -base.reference_probe / std::log1p(-base.dep_3) : 1.0;
    out.depletion = least_squares(expo, n3, {*std::max_element(n3.y.begin(), n3.y.end()), tau_guess});
    const Model& growth = find_model("quadratic_growth");
    RunConfig dummy = RunConfig::defaults();
    out.growth = least_squares(growth, n4, default_initial_values(growth, n4, dummy));

    const double a = out.depletion.value("A");
    const double sa = out.depletion.error("A");
    const double tau = out.depletion.value("tau");
    const double stau = out.depletion.error("tau");
    const double k = out.growth.value("k");
    const double sk = out.growth.error("k");
    const double ref = base.reference_probe;

    out.calibration = base;
    out.calibration.eps_43 = k * ref * ref / a;
    out.eps_sigma = std::hypot(sk * ref * ref / a, out.calibration.eps_43 * sa / a);
    const double survive = std::exp(-ref / tau);
    out.calibration.dep_3 = 1.0 - survive;
    out.dep_sigma = survive * ref / (tau * tau) * stau;
    out.calibration.refresh_decay_matrix();
    return out;
}

// --- tables --------------------------------------------------------------------

std::string cell(double v) { return format_double(v); }

void Table::add(std::vector<std::string> row) {
    if (row.size() != columns.size())
        throw std::logic_error("table " + name + ": row has " + std::to_string(row.size()) + " cells");
    rows.push_back(std::move(row));
}

size_t Table::column(std::string_view col) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == col) return i;
    throw ConfigError("table " + name + " has no column '" + std::string(col) + "'");
}

double Table::number(size_t row, std::string_view col) const { return parse_double(rows.at(row).at(column(col))); }

std::string Table::csv() const {
    std::string out = "# schema=1\n# table=" + name + "\n";
    for (size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
        out += "\n";
    }
    return out;
}

}  // namespace tmq
