#include "tmq/angular.hpp"

#include <cmath>
#include <cstdlib>

#include "tmq/errors.hpp"

namespace tmq {

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// Doubled arguments a, b, c; false unless they form a triangle with integer sum.
bool triangle(int a, int b, int c) {
    return a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= std::abs(a - b) && (a + b + c) % 2 == 0;
}

double delta(int a, int b, int c) {
    return std::sqrt(factorial((a + b - c) / 2) * factorial((a - b + c) / 2) * factorial((-a + b + c) / 2) /
                     factorial((a + b + c) / 2 + 1));
}

}  // namespace

double wigner_3j(int j1, int j2, int j3, int m1, int m2, int m3) {
    if (m1 + m2 + m3 != 0 || !triangle(j1, j2, j3)) return 0.0;
    if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(m3) > j3) return 0.0;
    if ((j1 + m1) % 2 || (j2 + m2) % 2 || (j3 + m3) % 2) return 0.0;
    const int t_min = std::max({0, (j2 - j3 - m1) / 2, (j1 - j3 + m2) / 2});
    const int t_max = std::min({(j1 + j2 - j3) / 2, (j1 - m1) / 2, (j2 + m2) / 2});
    double sum = 0.0;
    for (int t = t_min; t <= t_max; ++t) {
        const double denom = factorial(t) * factorial((j3 - j2 + m1) / 2 + t) * factorial((j3 - j1 - m2) / 2 + t) *
                             factorial((j1 + j2 - j3) / 2 - t) * factorial((j1 - m1) / 2 - t) *
                             factorial((j2 + m2) / 2 - t);
        sum += (t % 2 ? -1.0 : 1.0) / denom;
    }
    const double pre = delta(j1, j2, j3) *
                       std::sqrt(factorial((j1 + m1) / 2) * factorial((j1 - m1) / 2) * factorial((j2 + m2) / 2) *
                                 factorial((j2 - m2) / 2) * factorial((j3 + m3) / 2) * factorial((j3 - m3) / 2));
    const int phase = (j1 - j2 - m3) / 2;
    return (phase % 2 ? -1.0 : 1.0) * pre * sum;
}

double wigner_6j(int j1, int j2, int j3, int j4, int j5, int j6) {
    if (!triangle(j1, j2, j3) || !triangle(j1, j5, j6) || !triangle(j4, j2, j6) || !triangle(j4, j5, j3)) {
        return 0.0;
    }
    const int a1 = (j1 + j2 + j3) / 2, a2 = (j1 + j5 + j6) / 2, a3 = (j4 + j2 + j6) / 2, a4 = (j4 + j5 + j3) / 2;
    const int b1 = (j1 + j2 + j4 + j5) / 2, b2 = (j2 + j3 + j5 + j6) / 2, b3 = (j3 + j1 + j6 + j4) / 2;
    const int t_min = std::max({a1, a2, a3, a4});
    const int t_max = std::min({b1, b2, b3});
    double sum = 0.0;
    for (int t = t_min; t <= t_max; ++t) {
        const double denom = factorial(t - a1) * factorial(t - a2) * factorial(t - a3) * factorial(t - a4) *
                             factorial(b1 - t) * factorial(b2 - t) * factorial(b3 - t);
        sum += (t % 2 ? -1.0 : 1.0) * factorial(t + 1) / denom;
    }
    return delta(j1, j2, j3) * delta(j1, j5, j6) * delta(j4, j2, j6) * delta(j4, j5, j3) * sum;
}

DecayBranching DecayBranching::from_angular_momentum() {
    constexpr int J = 7, Jp = 5, I = 1, k = 2;  // doubled
    auto weight = [&](int Fp, int F) {
        const double s = wigner_6j(J, Jp, k, Fp, F, I);
        return (F + 1) * s * s;
    };
    DecayBranching out;
    out.meta3_to_f4 = weight(6, 8) / (weight(6, 8) + weight(6, 6));
    const double w24 = weight(4, 8), w23 = weight(4, 6);
    out.meta2_to_f4 = w24 / (w24 + w23);
    return out;
}

std::vector<DecayChannel> decay_channels(int meta_index, const DecayBranching& branching) {
    const SublevelRef src = basis_state(meta_index);
    if (src.manifold != Manifold::Metastable1140) throw ConfigError("decay source must be metastable");
    const double to_f4 = src.F == 3 ? branching.meta3_to_f4 : branching.meta2_to_f4;
    std::vector<DecayChannel> out;
    for (int F : {4, 3}) {
        const double manifold_weight = F == 4 ? to_f4 : 1.0 - to_f4;
        if (manifold_weight <= 0.0) continue;
        double norm = 0.0;
        std::vector<DecayChannel> part;
        for (int q = -1; q <= 1; ++q) {
            const int m = src.mF - q;
            if (std::abs(m) > F) continue;
            const double w = wigner_3j(2 * F, 2, 2 * src.F, 2 * m, 2 * q, -2 * src.mF);
            if (w == 0.0) continue;
            part.push_back({basis_index({Manifold::Ground, F, m}), w * w});
            norm += w * w;
        }
        if (part.empty())
            throw ConfigError("branching: F'=" + std::to_string(src.F) + " has no dipole channel to F=" + std::to_string(F));
        for (auto& c : part) out.push_back({c.to, manifold_weight * c.weight / norm});
    }
    return out;
}

}  // namespace tmq
