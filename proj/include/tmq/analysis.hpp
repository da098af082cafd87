#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tmq {

struct Dataset {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> sigma;  // empty: unit weights

    bool has_sigma() const { return !sigma.empty(); }
    size_t size() const { return x.size(); }
    /// Throws ConfigError on length mismatch or non-positive sigma.
    void validate() const;
};

using ModelFunction = std::function<double(double x, const std::vector<double>& p)>;
using ModelGradient = std::function<std::vector<double>(double x, const std::vector<double>& p)>;

struct Model {
    std::string name;
    std::vector<std::string> parameters;
    ModelFunction f;
    ModelGradient gradient;  // analytic, optional; the fitter always differentiates numerically

    size_t index_of(std::string_view parameter) const;  // throws ConfigError
};

struct FitOptions {
    int max_iterations = 200;
    double rel_chi2_tol = 1e-10;
    double step_tol = 1e-12;
    double initial_damping = 1e-3;
    std::vector<bool> fixed;  // per parameter; empty: all free
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> params;
    std::vector<bool> fixed;
    Eigen::MatrixXd covariance;  // full size; zero rows/cols for fixed parameters
    double chi2 = 0.0;
    int dof = 0;
    int iterations = 0;
    bool unit_weights = false;  // covariance scaled by the reduced chi^2
    std::map<std::string, std::pair<double, double>> profile_intervals;

    double value(std::string_view name) const;
    double error(std::string_view name) const;  // sqrt of the covariance diagonal
    double reduced_chi2() const { return dof > 0 ? chi2 / dof : 0.0; }
};

/// Damped Gauss-Newton (Levenberg-Marquardt) minimisation of sum((y - f)/sigma)^2
/// with central-difference Jacobians. Converges when the relative chi^2 change
/// of an accepted step is below rel_chi2_tol or the step norm is below step_tol.
/// Throws FitError on non-convergence, singular normal matrix or bad input.
FitResult least_squares(const Model& model, const Dataset& data, const std::vector<double>& init,
                        const FitOptions& opts = {});

/// Central-difference Jacobian of the model at p, rows = points.
Eigen::MatrixXd numerical_jacobian(const Model& model, const std::vector<double>& x, const std::vector<double>& p);

/// Parameter values at which the refitted chi^2 reaches chi2_min + delta, with
/// delta = 1 for known sigma and the reduced chi^2 otherwise. Throws FitError
/// (DegenerateProfile) when the profile does not rise within the search range.
std::pair<double, double> chi2_profile(const Model& model, const Dataset& data, const FitResult& fit,
                                       std::string_view parameter, const FitOptions& opts = {});

/// Chi^2 of the refit with `parameter` pinned to `value`.
double profile_chi2_at(const Model& model, const Dataset& data, const FitResult& fit, std::string_view parameter,
                       double value, const FitOptions& opts = {});

/// max(y) - min(y); throws ConfigError for fewer than two points.
double peak_to_peak_contrast(const std::vector<double>& y);

/// Groups y by exact x, averages each group, then takes max - min of the means.
double peak_to_peak_contrast(const Dataset& grouped_by_detuning);

// --- model zoo ---------------------------------------------------------------

double model_two_body_loss(double t, double n0, double tau, double beta_over_v);
double model_ramsey_fringe(double dnu, double A, double C, double T, double phi0);
double model_gaussian_decay(double T, double C0, double T2);
double model_gaussian_decay_offset(double t, double eta_max0, double T);
double contrast_from_eta(double eta_max);
double model_exponential(double t, double A, double tau);
/// Lattice-averaged clock Rabi excitation with amplitude reflection a.
double model_rabi_reflection(double t, double omega0, double a, double tau_c);

/// Names: two_body_loss, ramsey_fringe, gaussian_decay, gaussian_decay_offset,
/// exponential, rabi_reflection, quadratic_growth, linear, quadratic.
const Model& find_model(std::string_view name);
std::vector<std::string> model_names();

// --- CSV -----------------------------------------------------------------------

/// Lines starting with '#' are comments; the first other line is a header
/// naming x, y and optionally sigma columns.
Dataset read_dataset_csv(std::string_view text);
std::string write_dataset_csv(const Dataset& d);

Dataset load_dataset(const std::string& path);  // IoError on failure
void save_text(const std::string& path, const std::string& content);
std::string load_text(const std::string& path);

}  // namespace tmq
