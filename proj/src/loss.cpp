#include "tmq/loss.hpp"

#include <cmath>

#include "tmq/errors.hpp"

namespace tmq {

double LossParameters::beta(LossClass c) const {
    switch (c) {
        case LossClass::Ground4_m4: return beta_4m4;
        case LossClass::Ground4_0: return beta_40;
        case LossClass::Ground3_0: return beta_30;
    }
    return 0.0;
}

void LossParameters::validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss.tau_s must be > 0");
    if (!(volume > 0.0)) throw ConfigError("loss.volume_mm3 must be > 0");
    if (!(beta_4m4 > 0.0) || !(beta_40 > 0.0) || !(beta_30 > 0.0)) throw ConfigError("loss.beta_* must be > 0");
}

LossParameters LossParameters::measured_row(MagneticField b) {
    LossParameters p;
    if (std::abs(b.in_gauss() - 0.6) < std::abs(b.in_gauss() - 0.1)) {
        p.beta_4m4 = 6.6e-11 * units::kCubicCentimetre;
        p.beta_40 = 1.1e-9 * units::kCubicCentimetre;
        p.beta_30 = 4.3e-9 * units::kCubicCentimetre;
    }
    return p;
}

double two_body_survival(double n0, double beta_over_v, double tau, double t) {
    const double e = std::exp(-t / tau);
    return e / (1.0 + beta_over_v * tau * n0 * -std::expm1(-t / tau));
}

double background_survival(double tau, double t) { return std::exp(-t / tau); }

}  // namespace tmq
