#include "fluxsim/ctrl/controllers.hpp"

#include <cmath>
#include <numbers>

#include "fluxsim/em/integrate.hpp"

namespace fluxsim::ctrl {

double Nfscm::phase_step(double v_dc, double omega_nom, double t, double dt) {
    phase.step(v_dc, dt);
    return phase.theta(omega_nom, t);
}

double Nfscm::magnitude_step(double v_t_meas, double dt) {
    v_t_filt = em::low_pass_step(v_t_filt, v_t_meas, v_t_tau, dt);
    return mag.step(v_t_filt, dt);
}

em::ThreePhase Nfscm::output(double theta, double magnitude, const em::ThreePhase& v_pcc,
                             double omega_nom, double dt) {
    flux.advance(v_pcc, omega_nom, dt);
    const em::ThreePhase psi_ref = em::polar_to_abc(magnitude, theta);
    last_err_ = psi_ref - flux.psi;
    return last_err_;
}

inv::SwitchState Nfscm::step(const Measurements& m, double omega_nom, double t, double dt,
                             bool hold_references) {
    double theta;
    double magnitude = mag.applied;
    if (hold_references) {
        theta = phase.theta(omega_nom, t);
        v_t_filt = em::low_pass_step(v_t_filt, em::vector_magnitude(m.u_c), v_t_tau, dt);
    } else {
        theta = phase_step(m.v_dc, omega_nom, t, dt);
        magnitude = magnitude_step(em::vector_magnitude(m.u_c), dt);
    }
    const em::ThreePhase err = output(theta, magnitude, m.v_pcc, omega_nom, dt);
    return mod.update(err);
}

void Nfscm::save_state(nlohmann::json& j) const {
    j["delta_theta"] = phase.delta_theta;
    j["mag_integ"] = mag.integ;
    j["mag_applied"] = mag.applied;
    j["psi"] = {flux.psi.a, flux.psi.b, flux.psi.c};
    j["v_prev"] = {flux.v_prev.a, flux.v_prev.b, flux.v_prev.c};
    j["have_prev"] = flux.have_prev;
    j["mod_state"] = {mod.state.a, mod.state.b, mod.state.c};
    j["v_t_filt"] = v_t_filt;
    j["last_err"] = {last_err_.a, last_err_.b, last_err_.c};
}

void Nfscm::load_state(const nlohmann::json& j) {
    phase.delta_theta = j.at("delta_theta").get<double>();
    mag.integ = j.at("mag_integ").get<double>();
    mag.applied = j.at("mag_applied").get<double>();
    const auto& p = j.at("psi");
    flux.psi = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    const auto& vp = j.at("v_prev");
    flux.v_prev = {vp.at(0).get<double>(), vp.at(1).get<double>(), vp.at(2).get<double>()};
    flux.have_prev = j.at("have_prev").get<bool>();
    const auto& ms = j.at("mod_state");
    mod.state = {ms.at(0).get<bool>(), ms.at(1).get<bool>(), ms.at(2).get<bool>()};
    v_t_filt = j.at("v_t_filt").get<double>();
    const auto& le = j.at("last_err");
    last_err_ = {le.at(0).get<double>(), le.at(1).get<double>(), le.at(2).get<double>()};
}

ControlMode ModeSwitcher::step(const em::ThreePhase& i_l_meas, const em::ThreePhase& v_pcc_meas,
                               double omega_nom, double dt) {
    handed_back_ = false;
    if (!available_) return mode_;

    if (mode_ == ControlMode::flux_sync) {
        if (i_l_meas.max_abs() >= gamma) {
            mode_ = ControlMode::current_funnel;
            for (auto& w : win_) w.reset();
            proxy_ = {0.0, 0.0, 0.0};
            have_prev_ = false;
        }
        return mode_;
    }

    // Funnel mode: integrate the voltage proxy per phase and watch the
    // within-cycle excursion. A collapsed PCC voltage leaves the proxy flat;
    // once the grid voltage is back the proxy swings and clears tau.
    const std::array<double, 3> v{v_pcc_meas.a, v_pcc_meas.b, v_pcc_meas.c};
    for (int k = 0; k < 3; ++k) {
        if (have_prev_)
            proxy_[k] += 0.5 * omega_nom * dt * (v_prev_[k] + v[k]);
        else
            proxy_[k] += omega_nom * dt * v[k];
        win_[k].push(proxy_[k]);
    }
    v_prev_ = v;
    have_prev_ = true;

    bool recovered = true;
    for (const auto& w : win_) {
        const auto dev = w.max_deviation_from_mean();
        if (!dev || *dev < tau_recover) {
            recovered = false;
            break;
        }
    }
    if (recovered) {
        mode_ = ControlMode::flux_sync;
        handed_back_ = true;
    }
    return mode_;
}

void ModeSwitcher::save_state(nlohmann::json& j) const {
    j["mode"] = static_cast<int>(mode_);
    j["proxy"] = proxy_;
    j["v_prev"] = v_prev_;
    j["have_prev"] = have_prev_;
    nlohmann::json wins = nlohmann::json::array();
    for (const auto& w : win_) {
        nlohmann::json wj;
        w.save_state(wj);
        wins.push_back(std::move(wj));
    }
    j["windows"] = std::move(wins);
}

void ModeSwitcher::load_state(const nlohmann::json& j) {
    mode_ = static_cast<ControlMode>(j.at("mode").get<int>());
    proxy_ = j.at("proxy").get<std::array<double, 3>>();
    v_prev_ = j.at("v_prev").get<std::array<double, 3>>();
    have_prev_ = j.at("have_prev").get<bool>();
    const auto& wins = j.at("windows");
    for (std::size_t k = 0; k < win_.size(); ++k) win_[k].load_state(wins.at(k));
    handed_back_ = false;
}

inv::SwitchState Avscm::step(const Measurements& m, double omega_nom, double t, double dt) {
    phase.step(m.v_dc, dt);
    const double theta = phase.theta(omega_nom, t);
    v_t_filt = em::low_pass_step(v_t_filt, em::vector_magnitude(m.u_c), v_t_tau, dt);
    const double magnitude = mag.step(v_t_filt, dt);

    // Voltage leads the flux position by a quarter period; track it on the
    // filter-capacitor voltage.
    const em::ThreePhase v_ref = em::polar_to_abc(magnitude, theta + 0.5 * std::numbers::pi);
    last_err_ = v_ref - m.u_c;
    return mod.update(last_err_);
}

void Avscm::save_state(nlohmann::json& j) const {
    j["delta_theta"] = phase.delta_theta;
    j["mag_integ"] = mag.integ;
    j["mag_applied"] = mag.applied;
    j["mod_state"] = {mod.state.a, mod.state.b, mod.state.c};
    j["v_t_filt"] = v_t_filt;
    j["last_err"] = {last_err_.a, last_err_.b, last_err_.c};
}

void Avscm::load_state(const nlohmann::json& j) {
    phase.delta_theta = j.at("delta_theta").get<double>();
    mag.integ = j.at("mag_integ").get<double>();
    mag.applied = j.at("mag_applied").get<double>();
    const auto& ms = j.at("mod_state");
    mod.state = {ms.at(0).get<bool>(), ms.at(1).get<bool>(), ms.at(2).get<bool>()};
    v_t_filt = j.at("v_t_filt").get<double>();
    const auto& le = j.at("last_err");
    last_err_ = {le.at(0).get<double>(), le.at(1).get<double>(), le.at(2).get<double>()};
}

}  // namespace fluxsim::ctrl
