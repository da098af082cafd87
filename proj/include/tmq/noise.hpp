#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "tmq/units.hpp"

namespace tmq {

/// SplitMix64 finaliser; also the per-shot seed derivation.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t shot_seed(std::uint64_t master, std::uint64_t shot_index);

struct SinusoidDrift {
    MagneticField amplitude;
    double period = 100.0;  // s; phase drawn uniformly per shot
    bool operator==(const SinusoidDrift&) const = default;
};

// Field performs a Gaussian step of standard deviation `step` every `interval`.
struct RandomWalkDrift {
    MagneticField step;
    double interval = 1.0;  // s
    bool operator==(const RandomWalkDrift&) const = default;
};

using DriftProcess = std::variant<std::monostate, SinusoidDrift, RandomWalkDrift>;

struct NoiseModel {
    MagneticField sigma_B_shot = MagneticField::gauss(150e-6);
    DriftProcess drift;
    double laser_phase = 0.0;  // rad^2/s, 1140 nm phase diffusion
    std::uint64_t seed = 0;

    static NoiseModel off() {
        NoiseModel n;
        n.sigma_B_shot = MagneticField::tesla(0.0);
        return n;
    }
    void validate() const;
};

// One shot's sampled field deviation b(t) = B_actual(t) - B_nominal and
// laser phase walk. Integrals are exact for the piecewise-analytic processes.
class NoiseTrajectory {
public:
    NoiseTrajectory() = default;
    NoiseTrajectory(const NoiseModel& model, std::uint64_t seed);

    /// Quasi-static offset (tesla).
    double offset() const { return offset_; }
    double deviation(double t);  // tesla
    /// Integral of b over [t0, t1], tesla*s.
    double integral_b(double t0, double t1);
    /// Integral of b^2 over [t0, t1], tesla^2*s.
    double integral_b2(double t0, double t1);

    /// Laser phase at time t; a random walk with variance laser_phase*dt per step.
    double laser_phase(double t);

    std::mt19937_64& rng() { return rng_; }

private:
    void extend_walk(double t);
    template <class F>
    void for_each_step(const RandomWalkDrift& w, double t0, double t1, F&& f);

    NoiseModel model_;
    std::mt19937_64 rng_;
    double offset_ = 0.0;
    double sin_phase_ = 0.0;
    std::vector<double> walk_;  // field value on [k*interval, (k+1)*interval)
    double laser_time_ = 0.0;
    double laser_value_ = 0.0;
};

}  // namespace tmq
