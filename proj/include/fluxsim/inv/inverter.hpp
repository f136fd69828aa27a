#pragma once

#include <nlohmann/json.hpp>

#include "fluxsim/em/per_unit.hpp"
#include "fluxsim/em/three_phase.hpp"

namespace fluxsim::inv {

/// Upper-arm switch command per phase; the lower arm is the complement.
struct SwitchState {
    bool a = false;
    bool b = false;
    bool c = false;

    [[nodiscard]] constexpr int count() const { return int(a) + int(b) + int(c); }
    [[nodiscard]] constexpr bool operator==(const SwitchState&) const = default;
};

/// Phase voltages of a two-level bridge with an isolated DC mid-point:
/// v_j = v_dc * s_j + u_on with the common-mode term u_on = -(v_dc/3) * sum(s),
/// so the three bridge voltages always sum to zero. Unit-agnostic in v_dc.
[[nodiscard]] inline em::ThreePhase bridge_voltages(const SwitchState& s, double v_dc) {
    const double u_on = -v_dc * static_cast<double>(s.count()) / 3.0;
    return {v_dc * (s.a ? 1.0 : 0.0) + u_on,
            v_dc * (s.b ? 1.0 : 0.0) + u_on,
            v_dc * (s.c ? 1.0 : 0.0) + u_on};
}

/// Three-level hysteresis latch shared by the flux and voltage modulators:
/// error >= +band latches the upper arm on, error <= -band latches it off,
/// anything in between holds the previous command.
struct HysteresisModulator {
    double band = 0.02;
    SwitchState state{};

    SwitchState update(const em::ThreePhase& err) {
        if (err.a >= band) state.a = true;
        else if (err.a <= -band) state.a = false;
        if (err.b >= band) state.b = true;
        else if (err.b <= -band) state.b = false;
        if (err.c >= band) state.c = true;
        else if (err.c <= -band) state.c = false;
        return state;
    }
};

/// Output LC filter inductor and the electrical interface of one inverter.
/// The filter capacitor lives in the network (it is a bus shunt); this class
/// advances the inductor current against the switched bridge voltage and the
/// previous-step PCC voltage, and accounts the DC-side power draw.
class Inverter {
public:
    Inverter() = default;
    Inverter(em::PerUnitBase base, double r_filter, double l_filter)
        : base_(base), r_(r_filter), l_(l_filter) {}

    /// Advances i_L one step. v_dc in volts, v_pcc in p.u.; returns the new
    /// inductor current (the network injection), p.u.
    em::ThreePhase step(const SwitchState& s, double v_dc, const em::ThreePhase& v_pcc,
                        double dt) {
        const double v_dc_pu = v_dc / base_.v_base_peak();
        v_br_ = bridge_voltages(s, v_dc_pu);

        const double a = base_.omega_nom() * dt / (2.0 * l_);
        const double den = 1.0 + a * r_;
        const em::ThreePhase i_old = i_l_;
        i_l_ = {(i_old.a * (1.0 - a * r_) + 2.0 * a * (v_br_.a - v_pcc.a)) / den,
                (i_old.b * (1.0 - a * r_) + 2.0 * a * (v_br_.b - v_pcc.b)) / den,
                (i_old.c * (1.0 - a * r_) + 2.0 * a * (v_br_.c - v_pcc.c)) / den};

        // DC-side draw is exactly the bridge-voltage / inductor-current inner
        // product; the trapezoidal mid-current keeps the energy audit tight.
        const em::ThreePhase i_mid = 0.5 * (i_old + i_l_);
        p_e_pu_ = (2.0 / 3.0) * v_br_.dot(i_mid);
        return i_l_;
    }

    [[nodiscard]] const em::ThreePhase& i_l() const { return i_l_; }
    [[nodiscard]] const em::ThreePhase& v_bridge() const { return v_br_; }
    [[nodiscard]] double p_e_pu() const { return p_e_pu_; }
    [[nodiscard]] double p_e_watts() const { return p_e_pu_ * base_.s_base_va; }
    [[nodiscard]] double r_filter() const { return r_; }
    [[nodiscard]] double l_filter() const { return l_; }

    void save_state(nlohmann::json& j) const {
        j = nlohmann::json{{"i_l", {i_l_.a, i_l_.b, i_l_.c}}, {"p_e_pu", p_e_pu_}};
    }
    void load_state(const nlohmann::json& j) {
        i_l_ = {j.at("i_l").at(0).get<double>(), j.at("i_l").at(1).get<double>(),
                j.at("i_l").at(2).get<double>()};
        p_e_pu_ = j.at("p_e_pu").get<double>();
    }

private:
    em::PerUnitBase base_{};
    double r_ = 0.003;
    double l_ = 0.15;
    em::ThreePhase i_l_{};
    em::ThreePhase v_br_{};
    double p_e_pu_ = 0.0;
};

}  // namespace fluxsim::inv
