#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fluxsim::em {

/// Per-unit system shared by every AC-side quantity in the simulator.
///
/// Conventions, fixed here once so the rest of the code can stay terse:
///
///  * AC voltages and currents are instantaneous phase quantities normalized
///    to their *peak* bases: v_base_peak = sqrt(2/3) * v_base_ac_ll and
///    i_base_peak = sqrt(2) * s_base / (sqrt(3) * v_base_ac_ll). A balanced
///    system at rated power and voltage has unit-amplitude sinusoids.
///  * Three-phase instantaneous power in per unit is (2/3) * sum(v_j * i_j),
///    so rated balanced operation gives p = 1.
///  * Inductances and capacitances are stored as per-unit reactance and
///    susceptance at f_nom (the usual power-system convention). The omega_nom
///    factor therefore appears explicitly in the differential equations:
///    di/dt = omega_nom * (v - r*i) / l, and dv/dt = omega_nom * i / b.
///  * Flux linkage uses the base v_base_peak / omega_nom, which makes a
///    1 p.u. sinusoidal voltage produce a 1 p.u. flux amplitude:
///    psi_pu(t) = psi_pu(t0) + omega_nom * integral(v_pu dt). With this base
///    a magnetizing current is simply i = psi / l for l in per-unit reactance.
///  * DC-link voltage, storage current and powers stay in SI (volts, amps,
///    watts); s_base converts at the bridge boundary.
struct PerUnitBase {
    double s_base_va = 889e6;     ///< three-phase apparent power base
    double v_base_ac_ll = 575.0;  ///< AC line-to-line RMS voltage base
    double v_base_dc = 1110.0;    ///< DC-link voltage base
    double f_nom = 60.0;          ///< nominal frequency, Hz

    [[nodiscard]] constexpr double omega_nom() const { return 2.0 * std::numbers::pi * f_nom; }

    /// Peak of the rated phase-to-ground voltage; base for instantaneous v.
    [[nodiscard]] double v_base_peak() const { return std::sqrt(2.0 / 3.0) * v_base_ac_ll; }

    /// Peak of the rated phase current; base for instantaneous i.
    [[nodiscard]] double i_base_peak() const {
        return std::sqrt(2.0) * s_base_va / (std::sqrt(3.0) * v_base_ac_ll);
    }

    [[nodiscard]] double z_base() const { return v_base_ac_ll * v_base_ac_ll / s_base_va; }

    /// Flux-linkage base, v_base_peak / omega_nom.
    [[nodiscard]] double flux_base() const { return v_base_peak() / omega_nom(); }

    /// DC current base s_base / v_base_dc, used by the storage governor.
    [[nodiscard]] double i_base_dc() const { return s_base_va / v_base_dc; }

    void validate() const {
        if (s_base_va <= 0.0 || v_base_ac_ll <= 0.0 || v_base_dc <= 0.0 || f_nom <= 0.0)
            throw std::invalid_argument("per-unit base: all base quantities must be positive");
    }
};

}  // namespace fluxsim::em
