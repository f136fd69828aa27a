#pragma once

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fluxsim/em/integrate.hpp"
#include "fluxsim/errors.hpp"

namespace fluxsim::plant {

/// Aggregate DC-link capacitor. The energy balance
///     C * v * dv/dt = p_me - p_e
/// is advanced exactly in the squared voltage u = v^2, which is linear in the
/// power imbalance: u += 2 * (p_me - p_e) * dt / C.
struct DcLink {
    double c = 540.0;       ///< farads
    double v_nom = 1110.0;  ///< volts
    double v = 1110.0;      ///< volts
    double p_me = 0.0;      ///< last mechanical-side power, watts
    double p_e = 0.0;       ///< last electrical draw, watts

    void step(double p_me_w, double p_e_w, double dt) {
        p_me = p_me_w;
        p_e = p_e_w;
        const double u = v * v + 2.0 * (p_me_w - p_e_w) * dt / c;
        if (!(u > 0.0))
            throw SimulationFault("dc link collapsed: capacitor fully discharged", -1);
        v = std::sqrt(u);
    }

    /// Normalized voltage error (v - v_nom) / v_nom.
    [[nodiscard]] double dv_norm() const { return (v - v_nom) / v_nom; }

    /// Normalized squared-voltage error (v^2 - v_nom^2) / v_nom^2.
    [[nodiscard]] double dv_sq_norm() const { return (v * v - v_nom * v_nom) / (v_nom * v_nom); }
};

/// First-order stand-in for the machine-side converter: injected power tracks
/// its reference with time constant tau and saturates at the turbine rating.
struct MachineSurrogate {
    double tau = 0.5;     ///< seconds
    double p_max = 800e6; ///< watts
    double p_ref = 0.0;   ///< watts
    double p = 0.0;       ///< watts, current injection

    void step(double dt) {
        const double target = std::clamp(p_ref, 0.0, p_max);
        p = em::low_pass_step(p, target, tau, dt);
        p = std::clamp(p, 0.0, p_max);
    }
};

/// Storage droop governor on the DC-link voltage error. Output is a storage
/// current reference in amps: proportional droop, a low-passed derivative for
/// damping, and a weak integral for slow bias trim. The integral state is
/// clamped so the commanded current alone can never exceed the rating.
struct Governor {
    bool enabled = true;
    double k1 = 30.0;
    double k2 = 15.0;
    double k3 = 0.1;
    double meas_tau = 0.005;     ///< seconds, voltage-error measurement low-pass
    double deriv_tau = 0.02;     ///< seconds, derivative low-pass
    double i_base = 889e6 / 1110.0;    ///< amps per unit of command
    double i_rating = 300e6 / 1110.0;  ///< amps, |i_ref| cap (rating / v_nom)

    double dv_lp = 0.0;
    double deriv_lp = 0.0;
    double integ = 0.0;
    double prev_dv = 0.0;
    bool have_prev = false;

    /// dv is the normalized measured DC voltage error; returns amps. The
    /// error is low-passed before any gain sees it: the raw measurement
    /// carries switching ripple, and the derivative branch would otherwise
    /// slam the command rail to rail at ripple frequency.
    double step(double dv, double dt) {
        if (!enabled) return 0.0;
        dv_lp = em::low_pass_step(dv_lp, dv, meas_tau, dt);
        const double raw_deriv = have_prev ? (dv_lp - prev_dv) / dt : 0.0;
        prev_dv = dv_lp;
        have_prev = true;
        deriv_lp = em::low_pass_step(deriv_lp, raw_deriv, deriv_tau, dt);

        const double rating_pu = i_rating / i_base;
        integ = std::clamp(integ + dv_lp * dt, -rating_pu / k3, rating_pu / k3);

        const double cmd = -(k1 * dv_lp + k2 * deriv_lp + k3 * integ);
        return std::clamp(cmd, -rating_pu, rating_pu) * i_base;
    }
};

/// Average-value bidirectional boost stage between the storage bank and the
/// DC link. Inner proportional duty loop tracks the current reference; the
/// exchanged power is hard-limited at the storage rating.
struct StorageBoost {
    double l = 0.0012;         ///< henries
    double v_storage = 899.1;  ///< volts, storage-side terminal
    double duty_nom = 0.19;
    double duty_max = 0.95;
    double k_duty = 1e-4;      ///< duty per amp of current error
    double p_rating = 300e6;   ///< watts

    double i = 0.0;    ///< amps, current into the DC link (positive injects)
    double duty = 0.19;

    void step(double i_ref, double v_dc, double dt) {
        // The inner loop modulates inside [0, 2*duty_nom]: authority is then
        // symmetric about the operating point (equal inductor slew up and
        // down near nominal voltage). Letting it reach duty_max makes the up
        // slew several times the down slew, and command noise rectifies into
        // a standing injection.
        const double hi = std::min(duty_max, 2.0 * duty_nom);
        duty = std::clamp(1.0 - v_storage / v_dc + k_duty * (i_ref - i), 0.0, hi);
        i += dt * (v_storage - (1.0 - duty) * v_dc) / l;
        if (std::fabs(i * v_dc) > p_rating) i = std::copysign(p_rating / v_dc, i);
    }

    [[nodiscard]] double power(double v_dc) const { return i * v_dc; }
};

/// One wind-plant aggregate behind an inverter: DC link fed by the
/// machine-side surrogate plus the governed storage path.
struct WpgPlant {
    DcLink dc{};
    MachineSurrogate machine{};
    Governor gov{};
    StorageBoost boost{};
    double i_s_ref = 0.0;  ///< amps, last governor command

    /// dv_meas is the previous-step normalized DC voltage error (controllers
    /// and plant share one measurement snapshot per step).
    void step(double p_e_w, double dv_meas, double dt) {
        i_s_ref = gov.step(dv_meas, dt);
        boost.step(i_s_ref, dc.v, dt);
        machine.step(dt);
        const double p_me = machine.p + boost.power(dc.v);
        dc.step(p_me, p_e_w, dt);
    }

    void save_state(nlohmann::json& j) const {
        j = nlohmann::json{{"v_dc", dc.v},
                           {"p_in", machine.p},
                           {"p_ref", machine.p_ref},
                           {"gov_dv_lp", gov.dv_lp},
                           {"gov_lp", gov.deriv_lp},
                           {"gov_integ", gov.integ},
                           {"gov_prev", gov.prev_dv},
                           {"gov_have_prev", gov.have_prev},
                           {"i_s", boost.i},
                           {"duty", boost.duty},
                           {"i_s_ref", i_s_ref}};
    }

    void load_state(const nlohmann::json& j) {
        dc.v = j.at("v_dc").get<double>();
        machine.p = j.at("p_in").get<double>();
        machine.p_ref = j.at("p_ref").get<double>();
        gov.dv_lp = j.at("gov_dv_lp").get<double>();
        gov.deriv_lp = j.at("gov_lp").get<double>();
        gov.integ = j.at("gov_integ").get<double>();
        gov.prev_dv = j.at("gov_prev").get<double>();
        gov.have_prev = j.at("gov_have_prev").get<bool>();
        boost.i = j.at("i_s").get<double>();
        boost.duty = j.at("duty").get<double>();
        i_s_ref = j.at("i_s_ref").get<double>();
    }
};

}  // namespace fluxsim::plant
