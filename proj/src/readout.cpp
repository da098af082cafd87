#include "tmq/readout.hpp"

#include <Eigen/LU>
#include <cmath>
#include <sstream>

#include "tmq/errors.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

DecayMatrix decay_fraction_matrix(double t, double tau_c, const DecayBranching& branching) {
    if (!(t >= 0.0)) throw ConfigError("decay time must be >= 0");
    if (!(tau_c > 0.0)) throw ConfigError("tau_c must be > 0");
    DecayMatrix d = DecayMatrix::Identity();
    const double survive = std::exp(-t / tau_c);
    const double decayed = -std::expm1(-t / tau_c);
    for (int j = 0; j < kBasisSize; ++j) {
        if (basis_state(j).manifold != Manifold::Metastable1140) continue;
        d(j, j) = survive;
        for (const auto& ch : decay_channels(j, branching)) d(ch.to, j) += decayed * ch.weight;
    }
    return d;
}

double CrosstalkCalibration::pump_rate() const { return -std::log1p(-dep_3) / reference_probe; }

double CrosstalkCalibration::crosstalk_fraction(double tau) const {
    if (tau <= 0.0) return 0.0;
    if (tau <= quadratic_limit) return eps_43 * (tau / reference_probe) * (tau / reference_probe);
    const double P = pump_rate();
    if (P == 0.0) return 0.0;
    auto integral = [P](double t) { return t + std::expm1(-P * t) / P; };  // int_0^t (1 - e^{-Ps}) ds
    const double kappa = eps_43 / integral(reference_probe);
    return kappa * integral(tau);
}

double CrosstalkCalibration::depletion(double tau) const {
    if (tau <= 0.0) return 0.0;
    return -std::expm1(-pump_rate() * tau);
}

void CrosstalkCalibration::refresh_decay_matrix() {
    decay_matrix = decay_fraction_matrix(probe_duration + dead_time, tau_c, branching);
}

void CrosstalkCalibration::validate() const {
    auto fraction = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("readout.") + name + " must be in [0, 1]");
    };
    fraction(eps_43, "eps_43");
    fraction(dep_3, "dep_3");
    if (dep_3 >= 1.0) throw ConfigError("readout.dep_3 must be < 1");
    fraction(clock_pi_efficiency, "clock_pi_efficiency");
    fraction(branching.meta3_to_f4, "branching_f3_to_f4");
    fraction(branching.meta2_to_f4, "branching_f2_to_f4");
    if (!(reference_probe > 0.0)) throw ConfigError("readout.reference_probe_s must be > 0");
    if (!(quadratic_limit >= 0.0)) throw ConfigError("readout.quadratic_limit_s must be >= 0");
    if (!(tau_c > 0.0)) throw ConfigError("readout.tau_c must be > 0");
    if (!(probe_duration >= 0.0) || !(dead_time >= 0.0) || !(clock_pi_time >= 0.0)) {
        throw ConfigError("readout timeline durations must be >= 0");
    }
    if (!(camera_floor >= 0.0)) throw ConfigError("readout.camera_floor must be >= 0");
    for (int j = 0; j < kBasisSize; ++j) {
        if (std::abs(decay_matrix.col(j).sum() - 1.0) > 1e-9 || decay_matrix.col(j).minCoeff() < 0.0) {
            throw ConfigError("readout.decay_matrix must be column-stochastic");
        }
    }
}

CrosstalkCalibration CrosstalkCalibration::defaults() {
    CrosstalkCalibration c;
    c.refresh_decay_matrix();
    return c;
}

CrosstalkCalibration CrosstalkCalibration::identity() {
    CrosstalkCalibration c;
    c.eps_43 = 0.0;
    c.dep_3 = 0.0;
    c.clock_pi_efficiency = 1.0;
    c.tau_c = std::numeric_limits<double>::infinity();
    c.decay_matrix = DecayMatrix::Identity();
    return c;
}

bool CrosstalkCalibration::operator==(const CrosstalkCalibration& o) const {
    return eps_43 == o.eps_43 && dep_3 == o.dep_3 && reference_probe == o.reference_probe &&
           quadratic_limit == o.quadratic_limit && clock_pi_efficiency == o.clock_pi_efficiency &&
           tau_c == o.tau_c && branching.meta3_to_f4 == o.branching.meta3_to_f4 &&
           branching.meta2_to_f4 == o.branching.meta2_to_f4 && probe_duration == o.probe_duration &&
           dead_time == o.dead_time && clock_pi_time == o.clock_pi_time && camera_floor == o.camera_floor &&
           decay_matrix == o.decay_matrix;
}

// --- serialization -----------------------------------------------------------

std::string serialize_calibration(const CrosstalkCalibration& c) {
    std::ostringstream out;
    out << "# readout calibration v1\n";
    auto kv = [&](const char* k, double v) { out << k << " = " << format_double(v) << '\n'; };
    kv("eps_43", c.eps_43);
    kv("dep_3", c.dep_3);
    kv("reference_probe", c.reference_probe);
    kv("quadratic_limit", c.quadratic_limit);
    kv("clock_pi_efficiency", c.clock_pi_efficiency);
    kv("tau_c", c.tau_c);
    kv("branching_f3_to_f4", c.branching.meta3_to_f4);
    kv("branching_f2_to_f4", c.branching.meta2_to_f4);
    kv("probe_duration", c.probe_duration);
    kv("dead_time", c.dead_time);
    kv("clock_pi_time", c.clock_pi_time);
    kv("camera_floor", c.camera_floor);
    out << "decay_matrix =\n";
    for (int i = 0; i < kBasisSize; ++i) {
        for (int j = 0; j < kBasisSize; ++j) out << (j ? " " : "") << format_double(c.decay_matrix(i, j));
        out << '\n';
    }
    return out.str();
}

CrosstalkCalibration parse_calibration(std::string_view text) {
    CrosstalkCalibration c;
    auto lines = split(text, '\n');
    bool have_matrix = false;
    for (size_t n = 0; n < lines.size(); ++n) {
        const auto line = trim(lines[n]);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(int(n + 1), 1, "expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "decay_matrix") {
            for (int i = 0; i < kBasisSize; ++i) {
                if (n + 1 + i >= lines.size()) throw ParseError(int(n + 1), 1, "truncated decay_matrix");
                int j = 0;
                for (auto tok : split(trim(lines[n + 1 + i]), ' ')) {
                    if (tok.empty()) continue;
                    if (j >= kBasisSize) throw ParseError(int(n + 2 + i), 1, "too many decay_matrix columns");
                    c.decay_matrix(i, j++) = parse_double(tok);
                }
                if (j != kBasisSize) throw ParseError(int(n + 2 + i), 1, "too few decay_matrix columns");
            }
            n += kBasisSize;
            have_matrix = true;
            continue;
        }
        double v = 0.0;
        try {
            v = parse_double(value);
        } catch (const ConfigError& e) {
            throw ParseError(int(n + 1), int(eq + 2), e.what());
        }
        if (key == "eps_43") c.eps_43 = v;
        else if (key == "dep_3") c.dep_3 = v;
        else if (key == "reference_probe") c.reference_probe = v;
        else if (key == "quadratic_limit") c.quadratic_limit = v;
        else if (key == "clock_pi_efficiency") c.clock_pi_efficiency = v;
        else if (key == "tau_c") c.tau_c = v;
        else if (key == "branching_f3_to_f4") c.branching.meta3_to_f4 = v;
        else if (key == "branching_f2_to_f4") c.branching.meta2_to_f4 = v;
        else if (key == "probe_duration") c.probe_duration = v;
        else if (key == "dead_time") c.dead_time = v;
        else if (key == "clock_pi_time") c.clock_pi_time = v;
        else if (key == "camera_floor") c.camera_floor = v;
        else throw ParseError(int(n + 1), 1, "unknown calibration key '" + std::string(key) + "'");
    }
    if (!have_matrix) c.refresh_decay_matrix();
    c.validate();
    return c;
}

// --- records -----------------------------------------------------------------

bool ReadoutRecord::complete() const {
    for (double v : raw) {
        if (std::isnan(v)) return false;
    }
    return true;
}

double ReadoutRecord::eta4() const {
    const double a = calibrated[measure_slot(MeasureLabel::N4_0)];
    const double b = calibrated[measure_slot(MeasureLabel::N3_0)];
    return a / (a + b);
}

double ReadoutRecord::eta4_total() const {
    const double f4 = calibrated[0] + calibrated[2];
    const double f3 = calibrated[1] + calibrated[3];
    return f4 / (f4 + f3);
}

ProbeResponse probe_response(MeasureLabel l, double probe_duration, const CrosstalkCalibration& c) {
    if (measured_manifold(l) == 4) {
        return {1.0, c.crosstalk_fraction(probe_duration), c.depletion(probe_duration)};
    }
    // Repump then detect: every ground atom is counted and removed.
    return {1.0, 1.0, 1.0};
}

// --- forward model -----------------------------------------------------------

namespace {

void clock_transfer(PopulationVector& p, const SublevelRef& g, const SublevelRef& m, const CrosstalkCalibration& c,
                    const DecayMatrix& half) {
    p = half * p;
    const int a = basis_index(g), b = basis_index(m);
    const double e = c.clock_pi_efficiency;
    const double pa = p[a], pb = p[b];
    p[a] = (1 - e) * pa + e * pb;
    p[b] = e * pa + (1 - e) * pb;
    p = half * p;
}

double ground_sum(const PopulationVector& p, int F) {
    double s = 0.0;
    for (int i = 0; i < kBasisSize; ++i) {
        const auto st = basis_state(i);
        if (st.manifold == Manifold::Ground && st.F == F) s += p[i];
    }
    return s;
}

double measure_stage(PopulationVector& p, MeasureLabel l, const CrosstalkCalibration& c) {
    const auto r = probe_response(l, c.probe_duration, c);
    const double signal = r.f4_weight * ground_sum(p, 4) + r.f3_weight * ground_sum(p, 3);
    for (int i = 0; i < kBasisSize; ++i) {
        const auto st = basis_state(i);
        if (st.manifold != Manifold::Ground) continue;
        p[i] *= st.F == 4 ? 0.0 : 1.0 - r.f3_depletion;
    }
    p = c.decay_matrix * p;
    return signal;
}

}  // namespace

SlotArray simulate_readout(const PopulationVector& populations, const CrosstalkCalibration& c, std::mt19937_64* rng) {
    const DecayMatrix half = std::isinf(c.tau_c) ? DecayMatrix::Identity().eval()
                                                 : decay_fraction_matrix(0.5 * c.clock_pi_time, c.tau_c, c.branching);
    PopulationVector p = populations;
    SlotArray raw{};
    clock_transfer(p, kGround4_0, kMeta3_0, c, half);
    clock_transfer(p, kGround3_0, kMeta2_0, c, half);
    raw[0] = measure_stage(p, MeasureLabel::N4, c);
    raw[1] = measure_stage(p, MeasureLabel::N3, c);
    clock_transfer(p, kGround4_0, kMeta3_0, c, half);
    clock_transfer(p, kGround3_0, kMeta2_0, c, half);
    raw[2] = measure_stage(p, MeasureLabel::N4_0, c);
    raw[3] = measure_stage(p, MeasureLabel::N3_0, c);
    if (rng != nullptr && c.camera_floor > 0.0) {
        std::normal_distribution<double> noise(0.0, c.camera_floor);
        for (double& v : raw) v += noise(*rng);
    }
    return raw;
}

Eigen::Matrix4d readout_response_matrix(const CrosstalkCalibration& c) {
    const std::array<SublevelRef, 4> representatives{
        SublevelRef{Manifold::Ground, 4, 1}, SublevelRef{Manifold::Ground, 3, 1}, kGround4_0, kGround3_0};
    Eigen::Matrix4d m;
    for (int k = 0; k < 4; ++k) {
        PopulationVector p = PopulationVector::Zero();
        p[basis_index(representatives[k])] = 1.0;
        const auto raw = simulate_readout(p, c);
        for (int i = 0; i < 4; ++i) m(i, k) = raw[i];
    }
    return m;
}

SlotArray calibrate(const SlotArray& raw, const CrosstalkCalibration& c) {
    const Eigen::Matrix4d m = readout_response_matrix(c);
    Eigen::FullPivLU<Eigen::Matrix4d> lu(m);
    if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-12) {
        throw ConfigError("readout calibration matrix is singular");
    }
    const Eigen::Vector4d x = lu.solve(Eigen::Vector4d(raw[0], raw[1], raw[2], raw[3]));
    return {x[0], x[1], x[2], x[3]};
}

void apply_camera_noise(ReadoutRecord& r, const CrosstalkCalibration& c, std::mt19937_64* rng) {
    std::normal_distribution<double> noise(0.0, c.camera_floor);
    for (int k = 0; k < 4; ++k) {
        if (std::isnan(r.raw[k])) continue;
        if (rng != nullptr && c.camera_floor > 0.0) r.raw[k] += noise(*rng);
        r.low_confidence[k] = r.raw[k] < c.camera_floor;
    }
}

}  // namespace tmq
