#include "tmq/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "tmq/errors.hpp"
#include "tmq/quadrature.hpp"
#include "tmq/text_format.hpp"

namespace tmq {

void Dataset::validate() const {
    if (x.size() != y.size()) throw ConfigError("dataset: x and y lengths differ");
    if (has_sigma() && sigma.size() != x.size()) throw ConfigError("dataset: sigma length differs from x");
    for (double s : sigma)
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("dataset: sigma must be positive and finite");
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ConfigError("dataset: non-finite value");
}

size_t Model::index_of(std::string_view parameter) const {
    for (size_t i = 0; i < parameters.size(); ++i)
        if (parameters[i] == parameter) return i;
    throw ConfigError("model " + name + " has no parameter '" + std::string(parameter) + "'");
}

double FitResult::value(std::string_view name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return params[i];
    throw ConfigError("fit result has no parameter '" + std::string(name) + "'");
}

double FitResult::error(std::string_view name) const {
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return std::sqrt(std::max(0.0, covariance(i, i)));
    throw ConfigError("fit result has no parameter '" + std::string(name) + "'");
}

namespace {

constexpr double kPi = std::numbers::pi;

// Step ~ cbrt(eps) * scale balances truncation against rounding for central differences.
double fd_step(double p) {
    const double scale = p != 0.0 ? std::abs(p) : 1.0;
    return std::cbrt(std::numeric_limits<double>::epsilon()) * scale;
}

struct Problem {
    const Model& model;
    const Dataset& data;
    std::vector<int> free;  // indices into the parameter vector
    bool analytic = true;   // use model.gradient when the model provides one

    Eigen::VectorXd residuals(const std::vector<double>& p) const {
        Eigen::VectorXd r(data.size());
        for (size_t i = 0; i < data.size(); ++i) {
            const double s = data.has_sigma() ? data.sigma[i] : 1.0;
            r[i] = (data.y[i] - model.f(data.x[i], p)) / s;
        }
        return r;
    }

    // Jacobian of the model (not the residual) divided by sigma, free columns only.
    Eigen::MatrixXd jacobian(const std::vector<double>& p) const {
        Eigen::MatrixXd j(data.size(), free.size());
        if (analytic && model.gradient) {
            for (size_t i = 0; i < data.size(); ++i) {
                const double s = data.has_sigma() ? data.sigma[i] : 1.0;
                const std::vector<double> g = model.gradient(data.x[i], p);
                for (size_t c = 0; c < free.size(); ++c) j(i, c) = g[free[c]] / s;
            }
            return j;
        }
        std::vector<double> q = p;
        for (size_t c = 0; c < free.size(); ++c) {
            const int k = free[c];
            const double h = fd_step(p[k]);
            q[k] = p[k] + h;
            const double hp = q[k] - p[k];
            std::vector<double> fp(data.size());
            for (size_t i = 0; i < data.size(); ++i) fp[i] = model.f(data.x[i], q);
            q[k] = p[k] - h;
            const double hm = p[k] - q[k];
            for (size_t i = 0; i < data.size(); ++i) {
                const double s = data.has_sigma() ? data.sigma[i] : 1.0;
                j(i, c) = (fp[i] - model.f(data.x[i], q)) / (hp + hm) / s;
            }
            q[k] = p[k];
        }
        return j;
    }
};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Scaled inverse of a normal matrix; throws when it is numerically singular.
Eigen::MatrixXd invert_normal(const Eigen::MatrixXd& n) {
    const Eigen::Index k = n.rows();
    Eigen::VectorXd d(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(n(i, i) > 0.0) || !std::isfinite(n(i, i)))
            throw FitError(FitError::Kind::SingularNormalMatrix, "singular normal matrix: parameter has no effect");
        d[i] = 1.0 / std::sqrt(n(i, i));
    }
    const Eigen::MatrixXd scaled = d.asDiagonal() * n * d.asDiagonal();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(scaled);
    lu.setThreshold(1e-13);
    if (lu.rank() < k) throw FitError(FitError::Kind::SingularNormalMatrix, "singular normal matrix");
    Eigen::MatrixXd inv = d.asDiagonal() * lu.inverse() * d.asDiagonal();
    return 0.5 * (inv + inv.transpose());
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const Model& model, const std::vector<double>& x, const std::vector<double>& p) {
    Dataset d;
    d.x = x;
    d.y.assign(x.size(), 0.0);
    Problem prob{model, d, {}, false};
    for (size_t k = 0; k < p.size(); ++k) prob.free.push_back(static_cast<int>(k));
    return prob.jacobian(p);
}

FitResult least_squares(const Model& model, const Dataset& data, const std::vector<double>& init,
                        const FitOptions& opts) {
    try {
        data.validate();
    } catch (const ConfigError& e) {
        throw FitError(FitError::Kind::BadInput, e.what());
    }
    const size_t np = model.parameters.size();
    if (init.size() != np)
        throw FitError(FitError::Kind::BadInput, "model " + model.name + " expects " + std::to_string(np) +
                                                     " initial values, got " + std::to_string(init.size()));
    for (double v : init)
        if (!std::isfinite(v)) throw FitError(FitError::Kind::BadInput, "initial values must be finite");
    if (!opts.fixed.empty() && opts.fixed.size() != np)
        throw FitError(FitError::Kind::BadInput, "fixed mask length differs from parameter count");

    Problem prob{model, data, {}};
    std::vector<bool> fixed(np, false);
    for (size_t k = 0; k < np; ++k) {
        fixed[k] = !opts.fixed.empty() && opts.fixed[k];
        if (!fixed[k]) prob.free.push_back(static_cast<int>(k));
    }
    const int nfree = static_cast<int>(prob.free.size());
    const int dof = static_cast<int>(data.size()) - nfree;
    if (dof < 0)
        throw FitError(FitError::Kind::BadInput, "underdetermined fit: " + std::to_string(data.size()) +
                                                     " points for " + std::to_string(nfree) + " free parameters");

    std::vector<double> p = init;
    Eigen::VectorXd r = prob.residuals(p);
    if (!all_finite(r)) throw FitError(FitError::Kind::BadInput, "model is not finite at the initial values");
    double chi2 = r.squaredNorm();

    FitResult out;
    out.names = model.parameters;
    out.fixed = fixed;
    out.dof = dof;
    out.unit_weights = !data.has_sigma();

    int iter = 0;
    if (nfree > 0) {
        double lambda = opts.initial_damping;
        bool converged = chi2 == 0.0;
        while (!converged) {
            if (iter >= opts.max_iterations)
                throw FitError(FitError::Kind::NonConvergence,
                               model.name + ": no convergence after " + std::to_string(iter) + " iterations");
            ++iter;
            const Eigen::MatrixXd j = prob.jacobian(p);
            const Eigen::MatrixXd n = j.transpose() * j;
            const Eigen::VectorXd g = j.transpose() * r;
            Eigen::VectorXd pfree(nfree);
            for (int c = 0; c < nfree; ++c) pfree[c] = p[prob.free[c]];
            const double pnorm = pfree.norm();
            const double max_diag = n.diagonal().maxCoeff();
            if (!(max_diag > 0.0))
                throw FitError(FitError::Kind::SingularNormalMatrix, model.name + ": Jacobian vanishes");

            bool accepted = false;
            while (!accepted) {
                Eigen::MatrixXd a = n;
                for (int c = 0; c < nfree; ++c) a(c, c) += lambda * std::max(n(c, c), 1e-12 * max_diag);
                const Eigen::VectorXd delta = a.ldlt().solve(g);
                if (!all_finite(delta))
                    throw FitError(FitError::Kind::SingularNormalMatrix, model.name + ": singular normal matrix");
                const bool tiny_step = delta.norm() <= opts.step_tol * (pnorm + opts.step_tol);
                std::vector<double> trial = p;
                for (int c = 0; c < nfree; ++c) trial[prob.free[c]] += delta[c];
                const Eigen::VectorXd rt = prob.residuals(trial);
                const double chi2t = all_finite(rt) ? rt.squaredNorm() : std::numeric_limits<double>::infinity();
                if (chi2t <= chi2) {
                    const double rel = chi2 > 0.0 ? (chi2 - chi2t) / chi2 : 0.0;
                    p = trial;
                    r = rt;
                    chi2 = chi2t;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    converged = rel < opts.rel_chi2_tol || tiny_step || chi2 == 0.0;
                } else {
                    lambda *= 10.0;
                    // No descent direction left at working precision.
                    if (tiny_step || lambda > 1e20) {
                        accepted = true;
                        converged = true;
                    }
                }
            }
        }
    }
    out.params = p;
    out.chi2 = chi2;
    out.iterations = iter;
    out.covariance = Eigen::MatrixXd::Zero(np, np);
    if (nfree > 0) {
        const Eigen::MatrixXd j = prob.jacobian(p);
        Eigen::MatrixXd cov = invert_normal(j.transpose() * j);
        if (out.unit_weights && dof > 0) cov *= chi2 / dof;
        for (int a = 0; a < nfree; ++a)
            for (int b = 0; b < nfree; ++b) out.covariance(prob.free[a], prob.free[b]) = cov(a, b);
    }
    return out;
}

double profile_chi2_at(const Model& model, const Dataset& data, const FitResult& fit, std::string_view parameter,
                       double value, const FitOptions& opts) {
    const size_t k = model.index_of(parameter);
    FitOptions o = opts;
    o.fixed = fit.fixed.empty() ? std::vector<bool>(model.parameters.size(), false) : fit.fixed;
    o.fixed[k] = true;
    std::vector<double> start = fit.params;
    start[k] = value;
    return least_squares(model, data, start, o).chi2;
}

std::pair<double, double> chi2_profile(const Model& model, const Dataset& data, const FitResult& fit,
                                       std::string_view parameter, const FitOptions& opts) {
    const size_t k = model.index_of(parameter);
    const double best = fit.params[k];
    const double delta = (fit.unit_weights && fit.dof > 0) ? fit.chi2 / fit.dof : 1.0;
    const double target = fit.chi2 + delta;
    double s0 = std::sqrt(std::max(0.0, fit.covariance(k, k)));
    if (!(s0 > 0.0) || !std::isfinite(s0)) s0 = best != 0.0 ? 0.1 * std::abs(best) : 1e-3;

    auto crossing = [&](double dir) {
        double inner = best;
        double outer = best;
        double step = 0.5 * s0;
        bool found = false;
        for (int e = 0; e < 60; ++e) {
            outer = best + dir * step;
            if (profile_chi2_at(model, data, fit, parameter, outer, opts) >= target) {
                found = true;
                break;
            }
            inner = outer;
            step *= 2.0;
        }
        if (!found)
            throw FitError(FitError::Kind::DegenerateProfile,
                           "chi2 profile of '" + std::string(parameter) + "' is flat within the search range");
        for (int b = 0; b < 200 && std::abs(outer - inner) > 1e-10 * (std::abs(best) + s0); ++b) {
            const double mid = 0.5 * (inner + outer);
            if (profile_chi2_at(model, data, fit, parameter, mid, opts) >= target)
                outer = mid;
            else
                inner = mid;
        }
        return 0.5 * (inner + outer);
    };
    const double lo = crossing(-1.0);
    const double hi = crossing(+1.0);
    return {lo, hi};
}

double peak_to_peak_contrast(const std::vector<double>& y) {
    if (y.size() < 2) throw ConfigError("peak-to-peak contrast needs at least two points");
    const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
    return *mx - *mn;
}

double peak_to_peak_contrast(const Dataset& d) {
    d.validate();
    std::map<double, std::pair<double, int>> groups;
    for (size_t i = 0; i < d.size(); ++i) {
        auto& g = groups[d.x[i]];
        g.first += d.y[i];
        g.second += 1;
    }
    std::vector<double> means;
    for (const auto& [x, g] : groups) means.push_back(g.first / g.second);
    if (means.size() < 2) throw ConfigError("peak-to-peak contrast needs at least two distinct abscissae");
    return peak_to_peak_contrast(means);
}

// --- model zoo ---------------------------------------------------------------

double model_two_body_loss(double t, double n0, double tau, double beta_over_v) {
    const double e = std::exp(-t / tau);
    return n0 * e / (1.0 + beta_over_v * tau * n0 * (1.0 - e));
}

double model_ramsey_fringe(double dnu, double A, double C, double T, double phi0) {
    return A + 0.5 * C * std::cos(kPi * T * dnu + phi0);
}

double model_gaussian_decay(double T, double C0, double T2) {
    const double u = T / T2;
    return C0 * std::exp(-u * u);
}

double model_gaussian_decay_offset(double t, double eta_max0, double T) {
    const double u = t / T;
    return 0.5 * eta_max0 * std::exp(-u * u) + 0.5;
}

double contrast_from_eta(double eta_max) { return 2.0 * eta_max - 1.0; }

double model_exponential(double t, double A, double tau) { return A * std::exp(-t / tau); }

double model_rabi_reflection(double t, double omega0, double a, double tau_c) {
    if (a == 0.0) return 0.5 * (1.0 - std::cos(omega0 * t)) * std::exp(-t / (2.0 * tau_c));
    QuadratureOptions q;
    q.abs_tol = 1e-8 * kPi;  // the result is divided by pi
    q.rel_tol = 0.0;
    q.max_subdivisions = 20000;
    const double one_plus = 1.0 + a * a;
    const double integral = integrate_gk15(
        [&](double u) { return 0.5 * (1.0 - std::cos(omega0 * std::sqrt(one_plus + a * std::cos(u)) * t)); }, 0.0,
        kPi, q);
    // Uniform average over one lattice period; cos(2kz) is symmetric so [0, pi] suffices.
    return integral / kPi * std::exp(-t / (2.0 * tau_c));
}

namespace {

std::vector<Model> build_zoo() {
    std::vector<Model> z;
    z.push_back({"two_body_loss",
                 {"N0", "tau", "beta_over_V"},
                 [](double t, const std::vector<double>& p) { return model_two_body_loss(t, p[0], p[1], p[2]); },
                 [](double t, const std::vector<double>& p) {
                     const double n0 = p[0], tau = p[1], b = p[2];
                     const double e = std::exp(-t / tau);
                     const double d = 1.0 + b * tau * n0 * (1.0 - e);
                     const double de_dtau = e * t / (tau * tau);
                     const double dd_dn0 = b * tau * (1.0 - e);
                     const double dd_dtau = b * n0 * (1.0 - e) - b * tau * n0 * de_dtau;
                     const double dd_db = tau * n0 * (1.0 - e);
                     return std::vector<double>{e / d - n0 * e * dd_dn0 / (d * d),
                                                n0 * de_dtau / d - n0 * e * dd_dtau / (d * d),
                                                -n0 * e * dd_db / (d * d)};
                 }});
    z.push_back({"ramsey_fringe",
                 {"A", "C", "T", "phi0"},
                 [](double x, const std::vector<double>& p) { return model_ramsey_fringe(x, p[0], p[1], p[2], p[3]); },
                 [](double x, const std::vector<double>& p) {
                     const double arg = kPi * p[2] * x + p[3];
                     const double s = std::sin(arg);
                     return std::vector<double>{1.0, 0.5 * std::cos(arg), -0.5 * p[1] * s * kPi * x, -0.5 * p[1] * s};
                 }});
    z.push_back({"gaussian_decay",
                 {"C0", "T2"},
                 [](double x, const std::vector<double>& p) { return model_gaussian_decay(x, p[0], p[1]); },
                 [](double x, const std::vector<double>& p) {
                     const double u = x / p[1];
                     const double e = std::exp(-u * u);
                     return std::vector<double>{e, p[0] * e * 2.0 * u * u / p[1]};
                 }});
    z.push_back({"gaussian_decay_offset",
                 {"eta_max0", "T"},
                 [](double x, const std::vector<double>& p) { return model_gaussian_decay_offset(x, p[0], p[1]); },
                 [](double x, const std::vector<double>& p) {
                     const double u = x / p[1];
                     const double e = std::exp(-u * u);
                     return std::vector<double>{0.5 * e, 0.5 * p[0] * e * 2.0 * u * u / p[1]};
                 }});
    z.push_back({"exponential",
                 {"A", "tau"},
                 [](double x, const std::vector<double>& p) { return model_exponential(x, p[0], p[1]); },
                 [](double x, const std::vector<double>& p) {
                     const double e = std::exp(-x / p[1]);
                     return std::vector<double>{e, p[0] * e * x / (p[1] * p[1])};
                 }});
    z.push_back({"rabi_reflection",
                 {"Omega0", "a", "tau_c"},
                 [](double x, const std::vector<double>& p) { return model_rabi_reflection(x, p[0], p[1], p[2]); },
                 {}});
    // Crosstalk growth of the F=3 leak through the first probe.
    z.push_back({"quadratic_growth",
                 {"k"},
                 [](double x, const std::vector<double>& p) { return p[0] * x * x; },
                 [](double x, const std::vector<double>&) { return std::vector<double>{x * x}; }});
    z.push_back({"linear",
                 {"a", "b"},
                 [](double x, const std::vector<double>& p) { return p[0] + p[1] * x; },
                 [](double x, const std::vector<double>&) { return std::vector<double>{1.0, x}; }});
    z.push_back({"quadratic",
                 {"a", "b", "c"},
                 [](double x, const std::vector<double>& p) { return p[0] + p[1] * x + p[2] * x * x; },
                 [](double x, const std::vector<double>&) { return std::vector<double>{1.0, x, x * x}; }});
    return z;
}

const std::vector<Model>& zoo() {
    static const std::vector<Model> z = build_zoo();
    return z;
}

}  // namespace

const Model& find_model(std::string_view name) {
    for (const auto& m : zoo())
        if (m.name == name) return m;
    std::string known;
    for (const auto& m : zoo()) known += (known.empty() ? "" : ", ") + m.name;
    throw ConfigError("unknown model '" + std::string(name) + "' (known: " + known + ")");
}

std::vector<std::string> model_names() {
    std::vector<std::string> out;
    for (const auto& m : zoo()) out.push_back(m.name);
    return out;
}

// --- CSV -----------------------------------------------------------------------

Dataset read_dataset_csv(std::string_view text) {
    Dataset d;
    int ix = -1, iy = -1, is = -1;
    bool header = false;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        const size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        const auto cells = split(line, ',');
        if (!header) {
            for (size_t c = 0; c < cells.size(); ++c) {
                const auto name = trim(cells[c]);
                if (name == "x") ix = static_cast<int>(c);
                if (name == "y") iy = static_cast<int>(c);
                if (name == "sigma") is = static_cast<int>(c);
            }
            if (ix < 0 || iy < 0) throw ParseError(line_no, 1, "CSV header must name x and y columns");
            header = true;
        } else {
            const int need = std::max({ix, iy, is});
            if (static_cast<int>(cells.size()) <= need)
                throw ParseError(line_no, 1, "row has " + std::to_string(cells.size()) + " cells");
            try {
                d.x.push_back(parse_double(trim(cells[ix])));
                d.y.push_back(parse_double(trim(cells[iy])));
                if (is >= 0) d.sigma.push_back(parse_double(trim(cells[is])));
            } catch (const ConfigError& e) {
                throw ParseError(line_no, 1, e.what());
            }
        }
        if (end == text.size()) break;
    }
    if (!header) throw ParseError(line_no, 1, "CSV has no header row");
    d.validate();
    return d;
}

std::string write_dataset_csv(const Dataset& d) {
    d.validate();
    std::string out = "# schema=1\n";
    out += d.has_sigma() ? "x,y,sigma\n" : "x,y\n";
    for (size_t i = 0; i < d.size(); ++i) {
        out += format_double(d.x[i]) + "," + format_double(d.y[i]);
        if (d.has_sigma()) out += "," + format_double(d.sigma[i]);
        out += "\n";
    }
    return out;
}

std::string load_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read error on '" + path + "'");
    return ss.str();
}

void save_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write error on '" + path + "'");
}

Dataset load_dataset(const std::string& path) { return read_dataset_csv(load_text(path)); }

}  // namespace tmq
