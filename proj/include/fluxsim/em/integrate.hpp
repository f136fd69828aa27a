#pragma once

namespace fluxsim::em {

/// One explicit-Euler step.
[[nodiscard]] constexpr double euler_step(double x, double dxdt, double dt) {
    return x + dt * dxdt;
}

/// One trapezoidal step given the derivative at both interval ends. The new
/// derivative may be an implicit solution, a measured input at the new time,
/// or a predictor evaluation (Heun); the combinator does not care.
[[nodiscard]] constexpr double trapezoid_step(double x, double dxdt_new, double dxdt_prev,
                                              double dt) {
    return x + 0.5 * dt * (dxdt_new + dxdt_prev);
}

/// Dispatch used by callers that fall back to Euler on the first step or
/// right after a discontinuity, when no trustworthy previous derivative
/// exists: pass `have_prev = false` there.
[[nodiscard]] constexpr double integrate_step(double x, double dxdt_new, double dxdt_prev,
                                              double dt, bool have_prev = true) {
    return have_prev ? trapezoid_step(x, dxdt_new, dxdt_prev, dt) : euler_step(x, dxdt_new, dt);
}

/// First-order low-pass update, x += dt/tau * (u - x), stable for dt < tau.
[[nodiscard]] constexpr double low_pass_step(double x, double u, double tau, double dt) {
    return x + dt / tau * (u - x);
}

}  // namespace fluxsim::em
