#pragma once

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>

#include "fluxsim/em/cycle_window.hpp"
#include "fluxsim/em/per_unit.hpp"
#include "fluxsim/em/three_phase.hpp"
#include "fluxsim/inv/inverter.hpp"

namespace fluxsim::ctrl {

/// Previous-step snapshot consumed by every controller (one-step measurement
/// latency throughout).
struct Measurements {
    em::ThreePhase v_pcc{};   ///< PCC bus voltage, p.u.
    em::ThreePhase i_l{};     ///< filter inductor current, p.u.
    em::ThreePhase u_c{};     ///< filter capacitor voltage, p.u.
    em::ThreePhase psi_bus{}; ///< PCC bus flux, p.u.
    double v_dc = 1110.0;     ///< DC-link voltage, volts
};

/// Reference angle driven by the squared DC-link voltage error:
///     d(delta_theta)/dt = k_i * (v_dc^2 - v_nom^2) / v_nom^2,
///     theta = delta_theta + omega_nom * t.
/// Units with equal k_i and equal initial v_dc synchronize their DC voltages
/// through the network power flow; the angle state carries the swing.
struct PhaseLoop {
    double k_i = 10.0;
    double v_nom = 1110.0;
    double delta_theta = 0.0;
    double last_rate = 0.0;

    void step(double v_dc, double dt) {
        const double dv_sq = (v_dc * v_dc - v_nom * v_nom) / (v_nom * v_nom);
        last_rate = k_i * dv_sq;
        delta_theta += dt * last_rate;
    }

    [[nodiscard]] double theta(double omega_nom, double t) const {
        return delta_theta + omega_nom * t;
    }
};

/// Reference-magnitude loop mimicking an exciter: integral action on the
/// terminal-voltage error on top of the nominal set point, clamped to
/// [lo, hi], then rate-limited (soft start and bump-free transients).
/// The error is limited before integration; without that, the start-up
/// interval (terminal voltage far below the set point for around a second)
/// winds the integrator by a tenth of a unit, and at this gain the closed
/// loop needs tens of seconds to work that off. An over-magnetized flux
/// reference keeps the modulator saturated against what the grid voltage
/// can support, so the error must stay bounded.
struct MagnitudeLoop {
    double k = 0.2;
    double v_ref = 1.0;
    double nominal = 1.0;
    double lo = 0.2;
    double hi = 1.5;
    double ramp = 20.0;     ///< p.u. per second slew of the applied reference
    double err_lim = 0.05;  ///< integrator input limiter, p.u.

    double integ = 0.0;
    double applied = 0.2;

    void seed(double mag0) { applied = std::clamp(mag0, lo, hi); }

    double step(double v_t_meas, double dt) {
        const double err = std::clamp(v_ref - v_t_meas, -err_lim, err_lim);
        integ = std::clamp(integ + k * err * dt, lo - nominal, hi - nominal);
        const double raw = std::clamp(nominal + integ, lo, hi);
        const double dmax = ramp * dt;
        applied += std::clamp(raw - applied, -dmax, dmax);
        return applied;
    }
};

/// Trapezoidal accumulator for the measured node flux,
/// psi(t) = psi(t0) + omega * integral(v dt),
/// with a slow washout that drains DC picked up through asymmetric
/// transients. A pure integral keeps such offsets forever, and the tracking
/// servo would fight them indefinitely: a standing DC flux offset is not
/// reachable through an AC-coupled path. Matches the washout applied to the
/// network-side flux measurement so a reseed from the bus flux is
/// consistent.
struct FluxTracker {
    em::ThreePhase psi{};
    em::ThreePhase v_prev{};
    bool have_prev = false;
    double washout_tau = 0.15;  ///< DC drain time constant, s

    void seed(const em::ThreePhase& psi0) { psi = psi0; }

    void advance(const em::ThreePhase& v, double omega_nom, double dt) {
        const double decay = 1.0 - dt / washout_tau;
        if (have_prev)
            psi = decay * psi + (0.5 * omega_nom * dt) * (v_prev + v);
        else
            psi = decay * psi + (omega_nom * dt) * v;
        v_prev = v;
        have_prev = true;
    }
};

/// Node-flux synchronizing controller: polar flux reference from the phase
/// and magnitude loops, tracked per phase by hysteresis switching against the
/// measured flux integral.
class Nfscm {
public:
    PhaseLoop phase{};
    MagnitudeLoop mag{};
    FluxTracker flux{};
    inv::HysteresisModulator mod{};
    double v_t_tau = 0.01;  ///< terminal-voltage measurement low-pass, s
    double v_t_filt = 0.0;

    /// Advances the angle loop; returns theta at time t.
    double phase_step(double v_dc, double omega_nom, double t, double dt);

    /// Advances the magnitude loop on the filtered terminal voltage.
    double magnitude_step(double v_t_meas, double dt);

    /// Advances the measured-flux integral and returns the per-phase flux
    /// error (reference minus measured) for the modulator.
    em::ThreePhase output(double theta, double magnitude, const em::ThreePhase& v_pcc,
                          double omega_nom, double dt);

    /// Full controller step. While the funnel controller owns the bridge,
    /// pass hold_references = true: the two controllers run in a switched
    /// manner, so the angle and magnitude integrators freeze at their
    /// pre-takeover values (the angle still rotates at nominal speed).
    /// Integrating through the takeover instead lets the rising DC voltage
    /// wind the angle forward and the depressed terminal voltage wind the
    /// magnitude up, and the handback then happens far from where the grid
    /// actually is.
    inv::SwitchState step(const Measurements& m, double omega_nom, double t, double dt,
                          bool hold_references = false);

    /// Re-seeds the measured-flux integral (mode handback, scenario start).
    /// At start this is what makes trapped core flux invisible to the
    /// tracker's error: the reference simply walks the core from wherever it
    /// is, at magnetizing-current levels, instead of fighting it.
    void reseed_flux(const em::ThreePhase& psi_meas) { flux.seed(psi_meas); }

    void save_state(nlohmann::json& j) const;
    void load_state(const nlohmann::json& j);

    [[nodiscard]] const em::ThreePhase& last_error() const { return last_err_; }

private:
    em::ThreePhase last_err_{};
};

/// Funnel membership latch: q flips on at the upper boundary, off at the
/// lower one, and holds in between.
[[nodiscard]] constexpr bool lbfc_logic(double e, double phi_plus, double phi_minus,
                                        bool q_prev) {
    return e >= phi_plus || (e > phi_minus && q_prev);
}

/// Bang-bang arm command from the funnel latch: inside-from-above means pull
/// the current down (upper arm off), below means push it up.
[[nodiscard]] constexpr int lbfc_control(bool q) { return q ? 0 : 1; }

/// Per-phase funnel current controller around a zero current reference.
struct Lbfc {
    double phi_plus = 0.3;
    double phi_minus = -0.3;
    std::array<bool, 3> q{false, false, false};

    inv::SwitchState step(const em::ThreePhase& i_meas, const em::ThreePhase& i_ref = {}) {
        q[0] = lbfc_logic(i_meas.a - i_ref.a, phi_plus, phi_minus, q[0]);
        q[1] = lbfc_logic(i_meas.b - i_ref.b, phi_plus, phi_minus, q[1]);
        q[2] = lbfc_logic(i_meas.c - i_ref.c, phi_plus, phi_minus, q[2]);
        return {lbfc_control(q[0]) == 1, lbfc_control(q[1]) == 1, lbfc_control(q[2]) == 1};
    }
};

enum class ControlMode : std::uint8_t { flux_sync = 0, current_funnel = 1 };

/// Supervisor between flux tracking and funnel current limiting. Any phase
/// current at or above `gamma` trips all three phases into the funnel mode;
/// return requires the per-phase voltage-integral proxy, windowed over one
/// fundamental cycle collected entirely inside the funnel mode, to deviate
/// from its cycle mean by at least `tau` (the PCC voltage has recovered).
class ModeSwitcher {
public:
    ModeSwitcher() : ModeSwitcher(false, 1667) {}
    ModeSwitcher(bool lbfc_available, std::size_t steps_per_cycle)
        : available_(lbfc_available),
          win_{em::CycleWindow(steps_per_cycle), em::CycleWindow(steps_per_cycle),
               em::CycleWindow(steps_per_cycle)} {}

    double gamma = 1.75;
    double tau_recover = 0.5;

    ControlMode step(const em::ThreePhase& i_l_meas, const em::ThreePhase& v_pcc_meas,
                     double omega_nom, double dt);

    [[nodiscard]] ControlMode mode() const { return mode_; }
    [[nodiscard]] bool lbfc_available() const { return available_; }
    /// True exactly on the step the controller handed back to flux tracking.
    [[nodiscard]] bool handed_back() const { return handed_back_; }

    void save_state(nlohmann::json& j) const;
    void load_state(const nlohmann::json& j);

private:
    bool available_ = false;
    ControlMode mode_ = ControlMode::flux_sync;
    bool handed_back_ = false;
    std::array<em::CycleWindow, 3> win_;
    std::array<double, 3> proxy_{0.0, 0.0, 0.0};
    std::array<double, 3> v_prev_{0.0, 0.0, 0.0};
    bool have_prev_ = false;
};

/// Voltage-source baseline: identical phase and magnitude loops, but the
/// output is a voltage reference a quarter period ahead of the flux position,
/// tracked by voltage hysteresis on the filter-capacitor voltage. No flux
/// integration and no current bound.
class Avscm {
public:
    PhaseLoop phase{};
    MagnitudeLoop mag{};
    inv::HysteresisModulator mod{.band = 0.05};
    double v_t_tau = 0.01;
    double v_t_filt = 0.0;

    inv::SwitchState step(const Measurements& m, double omega_nom, double t, double dt);

    void save_state(nlohmann::json& j) const;
    void load_state(const nlohmann::json& j);

    [[nodiscard]] const em::ThreePhase& last_error() const { return last_err_; }

private:
    em::ThreePhase last_err_{};
};

}  // namespace fluxsim::ctrl
