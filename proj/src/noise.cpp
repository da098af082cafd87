#include "tmq/noise.hpp"

#include <cmath>

#include "tmq/errors.hpp"

namespace tmq {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t shot_seed(std::uint64_t master, std::uint64_t shot_index) {
    return splitmix64(splitmix64(master) ^ (shot_index * 0xD1B54A32D192ED03ull));
}

void NoiseModel::validate() const {
    if (!(sigma_B_shot.in_tesla() >= 0.0)) throw ConfigError("noise.sigma_b_gauss must be >= 0");
    if (!(laser_phase >= 0.0)) throw ConfigError("noise.laser_phase_rad2_per_s must be >= 0");
    if (const auto* s = std::get_if<SinusoidDrift>(&drift); s && !(s->period > 0.0)) {
        throw ConfigError("noise.drift_period_s must be > 0");
    }
    if (const auto* w = std::get_if<RandomWalkDrift>(&drift); w && !(w->interval > 0.0)) {
        throw ConfigError("noise.drift_interval_s must be > 0");
    }
}

NoiseTrajectory::NoiseTrajectory(const NoiseModel& model, std::uint64_t seed) : model_(model), rng_(seed) {
    std::normal_distribution<double> normal(0.0, 1.0);
    offset_ = model_.sigma_B_shot.in_tesla() * normal(rng_);
    if (std::holds_alternative<SinusoidDrift>(model_.drift)) {
        sin_phase_ = std::uniform_real_distribution<double>(0.0, kTwoPi)(rng_);
    }
}

void NoiseTrajectory::extend_walk(double t) {
    const auto& w = std::get<RandomWalkDrift>(model_.drift);
    const auto needed = static_cast<size_t>(std::floor(t / w.interval)) + 1;
    std::normal_distribution<double> normal(0.0, w.step.in_tesla());
    while (walk_.size() < needed) walk_.push_back((walk_.empty() ? 0.0 : walk_.back() + normal(rng_)));
}

// Calls f(step index, overlap length) for every walk step overlapping [t0, t1].
// Indices advance explicitly so rounding at step edges cannot stall the loop.
template <class F>
void NoiseTrajectory::for_each_step(const RandomWalkDrift& w, double t0, double t1, F&& f) {
    if (!(t1 > t0)) return;
    extend_walk(t1);
    const auto first = static_cast<size_t>(std::floor(t0 / w.interval));
    const auto last = std::min(static_cast<size_t>(std::floor(t1 / w.interval)), walk_.size() - 1);
    for (size_t k = first; k <= last; ++k) {
        const double lo = std::max(t0, static_cast<double>(k) * w.interval);
        const double hi = k == last ? t1 : std::min(t1, static_cast<double>(k + 1) * w.interval);
        if (hi > lo) f(k, hi - lo);
    }
}

double NoiseTrajectory::deviation(double t) {
    double b = offset_;
    if (const auto* s = std::get_if<SinusoidDrift>(&model_.drift)) {
        b += s->amplitude.in_tesla() * std::sin(kTwoPi * t / s->period + sin_phase_);
    } else if (const auto* w = std::get_if<RandomWalkDrift>(&model_.drift)) {
        extend_walk(t);
        b += walk_[static_cast<size_t>(std::floor(t / w->interval))];
    }
    return b;
}

double NoiseTrajectory::integral_b(double t0, double t1) {
    double I = offset_ * (t1 - t0);
    if (const auto* s = std::get_if<SinusoidDrift>(&model_.drift)) {
        const double w = kTwoPi / s->period;
        I += s->amplitude.in_tesla() * (std::cos(w * t0 + sin_phase_) - std::cos(w * t1 + sin_phase_)) / w;
    } else if (const auto* rw = std::get_if<RandomWalkDrift>(&model_.drift)) {
        for_each_step(*rw, t0, t1, [&](size_t k, double len) { I += walk_[k] * len; });
    }
    return I;
}

double NoiseTrajectory::integral_b2(double t0, double t1) {
    const double dt = t1 - t0;
    if (const auto* s = std::get_if<SinusoidDrift>(&model_.drift)) {
        // (c + A sin(wt+p))^2 = c^2 + 2cA sin + A^2 (1 - cos(2(wt+p)))/2
        const double w = kTwoPi / s->period;
        const double A = s->amplitude.in_tesla();
        const double c = offset_;
        const double int_sin = (std::cos(w * t0 + sin_phase_) - std::cos(w * t1 + sin_phase_)) / w;
        const double int_cos2 = (std::sin(2 * (w * t1 + sin_phase_)) - std::sin(2 * (w * t0 + sin_phase_))) / (2 * w);
        return c * c * dt + 2 * c * A * int_sin + 0.5 * A * A * (dt - int_cos2);
    }
    if (const auto* rw = std::get_if<RandomWalkDrift>(&model_.drift)) {
        double I = 0.0;
        for_each_step(*rw, t0, t1, [&](size_t k, double len) {
            const double b = offset_ + walk_[k];
            I += b * b * len;
        });
        return I;
    }
    return offset_ * offset_ * dt;
}

double NoiseTrajectory::laser_phase(double t) {
    if (model_.laser_phase > 0.0 && t > laser_time_) {
        std::normal_distribution<double> normal(0.0, std::sqrt(model_.laser_phase * (t - laser_time_)));
        laser_value_ += normal(rng_);
        laser_time_ = t;
    }
    return laser_value_;
}

}  // namespace tmq
