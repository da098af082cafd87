#pragma once

#include "tmq/units.hpp"

namespace tmq {

enum class LossClass { Ground4_m4, Ground4_0, Ground3_0 };

// Two-body loss. beta in m^3/s and volume in m^3 internally; the config layer
// converts from cm^3/s and mm^3.
struct LossParameters {
    double tau = 16.4;
    double beta_4m4 = 2.5e-11 * units::kCubicCentimetre;
    double beta_40 = 2.8e-9 * units::kCubicCentimetre;
    double beta_30 = 3.2e-9 * units::kCubicCentimetre;
    double volume = 0.16 * units::kCubicMillimetre;

    double beta(LossClass c) const;
    void validate() const;

    /// Measured loss row at the nearer of the two calibrated fields (0.1 G, 0.6 G).
    static LossParameters measured_row(MagneticField b);
};

/// N(t)/N0 for dN/dt = -N/tau - (beta/V) N^2, N(0) = N0 (closed form).
double two_body_survival(double n0, double beta_over_v, double tau, double t);

/// Fraction removed by background collisions alone over the same interval,
/// e^{-t/tau}; the remainder of the total decrease is the two-body part.
double background_survival(double tau, double t);

}  // namespace tmq
