#pragma once

#include <Eigen/Core>
#include <functional>

namespace tmq {

struct QuadratureOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-12;
    int max_subdivisions = 2000;
};

struct QuadratureResult {
    Eigen::ArrayXd value;
    double error_estimate = 0.0;  // max component estimate
    int evaluations = 0;
};

using VectorIntegrand = std::function<Eigen::ArrayXd(double)>;

/// Adaptive 7/15-point Gauss-Kronrod integration of a vector-valued function
/// on [a, b]. The interval with the largest error is bisected until the max
/// component error is below max(abs_tol, rel_tol*|I|). Throws
/// std::runtime_error when the subdivision budget is exhausted.
QuadratureResult integrate_gk15(const VectorIntegrand& f, double a, double b, const QuadratureOptions& opts = {});

double integrate_gk15(const std::function<double(double)>& f, double a, double b,
                      const QuadratureOptions& opts = {});

}  // namespace tmq
