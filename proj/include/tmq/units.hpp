#pragma once

#include <compare>
#include <numbers>

namespace tmq {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Field magnitude. Stored in tesla; gauss only appears at configuration
// boundaries and in the builders' defaults.
class MagneticField {
public:
    constexpr MagneticField() = default;

    static constexpr MagneticField tesla(double t) { return MagneticField(t); }
    static constexpr MagneticField gauss(double g) { return MagneticField(g * kTeslaPerGauss); }

    constexpr double in_tesla() const { return tesla_; }
    constexpr double in_gauss() const { return tesla_ / kTeslaPerGauss; }

    constexpr MagneticField operator+(MagneticField o) const { return MagneticField(tesla_ + o.tesla_); }
    constexpr MagneticField operator-(MagneticField o) const { return MagneticField(tesla_ - o.tesla_); }
    constexpr auto operator<=>(const MagneticField&) const = default;

    static constexpr double kTeslaPerGauss = 1e-4;

private:
    constexpr explicit MagneticField(double t) : tesla_(t) {}
    double tesla_ = 0.0;
};

namespace units {
inline constexpr double kCubicCentimetre = 1e-6;  // m^3
inline constexpr double kCubicMillimetre = 1e-9;  // m^3
inline constexpr double kMicroWattPerMm2 = 1.0;   // 1 uW/mm^2 = 1 W/m^2
}  // namespace units

}  // namespace tmq
