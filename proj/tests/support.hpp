#pragma once

// Independent oracles shared by the test suites. Nothing here calls into the
// library's numerical routines.

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "tmq/engine.hpp"

namespace tmq::test {

// Classic fixed-step RK4 for a scalar ODE y' = f(t, y).
inline double rk4(const std::function<double(double, double)>& f, double y0, double t1, int steps) {
    const double h = t1 / steps;
    double y = y0;
    double t = 0.0;
    for (int i = 0; i < steps; ++i) {
        const double k1 = f(t, y);
        const double k2 = f(t + h / 2, y + h / 2 * k1);
        const double k3 = f(t + h / 2, y + h / 2 * k2);
        const double k4 = f(t + h, y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        t += h;
    }
    return y;
}

// Midpoint rule with n nodes.
inline double midpoint(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
    return s * h;
}

// Engine with every stochastic and dissipative channel off.
inline EngineOptions quiet_options() {
    EngineOptions o;
    o.noise = NoiseModel::off();
    o.loss_enabled = false;
    o.leakage_enabled = false;
    o.camera_noise = false;
    return o;
}

inline DensityMatrix random_density_matrix(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    DensityMatrix a;
    for (int i = 0; i < kBasisSize; ++i)
        for (int j = 0; j < kBasisSize; ++j) a(i, j) = Complex(g(rng), g(rng));
    DensityMatrix rho = a * a.adjoint();
    return rho / rho.trace().real();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("tmq_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace tmq::test
