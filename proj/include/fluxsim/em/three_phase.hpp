#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fluxsim::em {

/// Instantaneous three-phase quantity (voltage, current, flux, ...).
struct ThreePhase {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    [[nodiscard]] constexpr double zero_sequence() const { return (a + b + c) / 3.0; }

    [[nodiscard]] double max_abs() const {
        return std::max({std::fabs(a), std::fabs(b), std::fabs(c)});
    }

    [[nodiscard]] bool finite() const {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
    }

    constexpr ThreePhase& operator+=(const ThreePhase& o) {
        a += o.a; b += o.b; c += o.c;
        return *this;
    }
    constexpr ThreePhase& operator-=(const ThreePhase& o) {
        a -= o.a; b -= o.b; c -= o.c;
        return *this;
    }

    friend constexpr ThreePhase operator+(ThreePhase l, const ThreePhase& r) { return l += r; }
    friend constexpr ThreePhase operator-(ThreePhase l, const ThreePhase& r) { return l -= r; }
    friend constexpr ThreePhase operator*(double s, const ThreePhase& p) {
        return {s * p.a, s * p.b, s * p.c};
    }
    friend constexpr ThreePhase operator*(const ThreePhase& p, double s) { return s * p; }

    /// Per-phase inner product, sum(this_j * o_j).
    [[nodiscard]] constexpr double dot(const ThreePhase& o) const {
        return a * o.a + b * o.b + c * o.c;
    }
};

/// Projection onto the stationary two-axis frame (zero sequence discarded).
struct AlphaBeta {
    double alpha = 0.0;
    double beta = 0.0;

    [[nodiscard]] double magnitude() const { return std::hypot(alpha, beta); }
    [[nodiscard]] double angle() const { return std::atan2(beta, alpha); }
};

[[nodiscard]] constexpr AlphaBeta alpha_beta(const ThreePhase& p) {
    return {(2.0 * p.a - p.b - p.c) / 3.0, (p.b - p.c) / std::numbers::sqrt3};
}

/// Balanced three-phase set from polar coordinates:
/// (m cos t, m cos(t - 2pi/3), m cos(t + 2pi/3)). Inverse of alpha_beta for
/// zero-sequence-free sets: alpha = m cos t, beta = m sin t.
[[nodiscard]] inline ThreePhase polar_to_abc(double magnitude, double angle) {
    constexpr double third = 2.0 * std::numbers::pi / 3.0;
    return {magnitude * std::cos(angle),
            magnitude * std::cos(angle - third),
            magnitude * std::cos(angle + third)};
}

/// Amplitude of the rotating component (alpha-beta magnitude). Equals the
/// sinusoid peak for a balanced set regardless of zero sequence.
[[nodiscard]] inline double vector_magnitude(const ThreePhase& p) {
    return alpha_beta(p).magnitude();
}

}  // namespace fluxsim::em
