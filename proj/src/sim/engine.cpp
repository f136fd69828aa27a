#include "fluxsim/sim/engine.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "fluxsim/errors.hpp"
#include "fluxsim/sim/metrics.hpp"

namespace fluxsim::sim {

namespace {

using json = nlohmann::json;

json tp_to_json(const em::ThreePhase& p) { return json::array({p.a, p.b, p.c}); }

em::ThreePhase tp_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

Engine::Engine(const cfg::Scenario& sc)
    : sc_(sc), base_(sc.base), dt_(sc.dt), n_steps_(sc.total_steps()) {
    net_ = std::make_unique<net::Network>(base_, sc_.buses);

    for (const auto& c : sc_.lines)
        net_->add_series({.id = c.id,
                          .from = net_->bus_index(c.from),
                          .to = net_->bus_index(c.to),
                          .r = c.r,
                          .l = c.x});

    const double s_mva = base_.s_base_va / 1e6;
    for (const auto& c : sc_.loads) {
        const int bus = net_->bus_index(c.bus);
        const double p_pu = c.p_mw / s_mva;
        loads_.push_back({c.id,
                          net_->add_resistor({.id = c.id, .bus = bus, .r = 1.0 / p_pu}),
                          c.p_mw});
        if (c.q_mvar > 0.0) {
            const double x = s_mva / c.q_mvar;
            net_->add_series({.id = c.id + "_q",
                              .from = bus,
                              .to = net::kGround,
                              .r = 0.05 * x,
                              .l = x});
        }
    }

    for (const auto& c : sc_.caps)
        net_->add_shunt({.id = c.id,
                         .bus = net_->bus_index(c.bus),
                         .r = c.r,
                         .b = c.mvar / s_mva});

    for (const auto& c : sc_.transformers) {
        const int lv = net_->bus_index(c.lv);
        const em::ThreePhase res{c.residual[0], c.residual[1], c.residual[2]};
        net_->add_transformer({.id = c.id,
                               .lv = lv,
                               .hv = net_->bus_index(c.hv),
                               .r = c.r,
                               .l = c.x,
                               .sat = {.l_m0 = c.mag_l0, .psi_knee = c.knee, .l_ms = c.mag_lsat},
                               .psi_m = res});
        // The measured bus flux and the core flux are the same integral; a
        // core that holds residual flux defines the bus's starting point.
        net_->set_bus_flux(lv, res);
    }

    for (const auto& c : sc_.breakers)
        breaker_idx_.push_back(net_->add_switch({.id = c.id,
                                                 .from = net_->bus_index(c.from),
                                                 .to = net_->bus_index(c.to),
                                                 .closed = c.closed}));

    for (const auto& c : sc_.faults)
        fault_idx_.push_back(
            net_->add_fault({.id = c.id, .bus = net_->bus_index(c.bus), .r_on = c.r_on}));

    for (const auto& w : sc_.wpgs) {
        WpgUnit u;
        u.name = w.name;
        u.kind = w.controller == "avscm" ? ControllerKind::avscm : ControllerKind::nfscm;
        u.bus = net_->bus_index(w.bus);
        u.filter_cap_idx = net_->add_shunt(
            {.id = w.name + "_fcap", .bus = u.bus, .r = w.filter_cap_r, .b = w.filter_cap_b});
        const auto tf = net_->transformer_at_lv(u.bus);
        if (!tf)
            throw ConfigError("unit '" + w.name + "': no transformer at bus '" + w.bus + "'");
        u.tfmr_idx = *tf;

        u.plant.dc.v_nom = base_.v_base_dc;
        u.plant.dc.v = base_.v_base_dc;
        u.plant.machine.p_ref = w.p_in_mw * 1e6;
        // The prime-mover side starts settled so the system energizes from
        // live sources instead of draining every DC link at once.
        u.plant.machine.p = std::clamp(u.plant.machine.p_ref, 0.0, u.plant.machine.p_max);
        u.plant.gov.enabled = w.governor;
        u.plant.gov.i_base = base_.s_base_va / base_.v_base_dc;
        u.plant.gov.i_rating = u.plant.boost.p_rating / base_.v_base_dc;

        u.inverter = inv::Inverter(base_, w.filter_r, w.filter_x);

        u.nfscm.phase.k_i = w.k_sync;
        u.nfscm.phase.v_nom = base_.v_base_dc;
        u.nfscm.mag.k = w.k_mag;
        u.nfscm.mag.ramp = w.ramp;
        u.nfscm.mod.band = w.flux_band;
        u.avscm.phase.k_i = w.k_sync;
        u.avscm.phase.v_nom = base_.v_base_dc;
        u.avscm.mag.k = w.k_mag;
        u.avscm.mag.ramp = w.ramp;
        u.avscm.mod.band = w.volt_band;

        u.lbfc.phi_plus = w.lbfc.band;
        u.lbfc.phi_minus = -w.lbfc.band;
        u.switcher = ctrl::ModeSwitcher(w.lbfc.enabled, sc_.steps_per_cycle());
        u.switcher.gamma = w.lbfc.gamma;
        u.switcher.tau_recover = w.lbfc.tau_recover;

        // The flux measurement starts from the core flux trapped behind the
        // step-up transformer (zero unless the scenario set a residual).
        // The controller then walks the core from the trapped state to the
        // symmetric reference during the soft-start ramp at magnetizing
        // current levels; starting the measurement at zero would leave the
        // core offset invisible and permanent, since the core integral has
        // no resistive path of its own. The reference is not touched: it
        // starts at angle zero like every other unit's.
        u.nfscm.reseed_flux(net_->transformer(u.tfmr_idx).psi_m);

        u.meas.v_dc = u.plant.dc.v;
        u.meas.psi_bus = net_->bus_flux(u.bus);

        units_.push_back(std::move(u));
    }

    net_->finalize(dt_);

    for (const auto& e : sc_.events) events_.push_back({e, false});
    std::stable_sort(events_.begin(), events_.end(),
                     [](const PendingEvent& a, const PendingEvent& b) { return a.ev.t < b.ev.t; });

    inj_.resize(sc_.buses.size());
    rec_.set_decimation(sc_.record_every);
    wire_capture();
    metrics_ = std::make_unique<Metrics>(*this);
}

Engine::~Engine() = default;

int Engine::wpg_index(const std::string& name) const {
    for (std::size_t i = 0; i < units_.size(); ++i)
        if (units_[i].name == name) return static_cast<int>(i);
    return -1;
}

void Engine::wire_capture() {
    for (auto& u : units_) {
        const WpgUnit* p = &u;
        rec_.add_channel(u.name + "_v_dc", [p] { return p->plant.dc.v; });
        rec_.add_channel(u.name + "_mode", [p] {
            return p->switcher.mode() == ctrl::ControlMode::current_funnel ? 1.0 : 0.0;
        });
        rec_.add_channel(u.name + "_i_la", [p] { return p->inverter.i_l().a; });
        rec_.add_channel(u.name + "_i_lb", [p] { return p->inverter.i_l().b; });
        rec_.add_channel(u.name + "_i_lc", [p] { return p->inverter.i_l().c; });
        rec_.add_channel(u.name + "_dtheta", [p] {
            return p->kind == ControllerKind::avscm ? p->avscm.phase.delta_theta
                                                    : p->nfscm.phase.delta_theta;
        });
        rec_.add_channel(u.name + "_ref_mag", [p] {
            return p->kind == ControllerKind::avscm ? p->avscm.mag.applied
                                                    : p->nfscm.mag.applied;
        });
        rec_.add_channel(u.name + "_p_e_mw", [p] { return p->inverter.p_e_watts() / 1e6; });
        rec_.add_channel(u.name + "_p_me_mw", [p] { return p->plant.dc.p_me / 1e6; });
        rec_.add_channel(u.name + "_p_st_mw", [p] { return p->plant.boost.power(p->plant.dc.v) / 1e6; });
        rec_.add_channel(u.name + "_duty", [p] { return p->plant.boost.duty; });
        const net::Network* n = net_.get();
        const int bus = u.bus;
        rec_.add_channel(u.name + "_v_pcc_a", [n, bus] { return n->bus_voltage(bus).a; });
        rec_.add_channel(u.name + "_v_pcc_b", [n, bus] { return n->bus_voltage(bus).b; });
        rec_.add_channel(u.name + "_v_pcc_c", [n, bus] { return n->bus_voltage(bus).c; });
    }
    for (std::size_t x = 0; x < net_->transformer_count(); ++x) {
        const net::Network* n = net_.get();
        const std::string id = net_->transformer(x).id;
        rec_.add_channel(id + "_psi_a", [n, x] { return n->transformer(x).psi_m.a; });
        rec_.add_channel(id + "_psi_b", [n, x] { return n->transformer(x).psi_m.b; });
        rec_.add_channel(id + "_psi_c", [n, x] { return n->transformer(x).psi_m.c; });
        rec_.add_channel(id + "_i_lv_a", [n, x] { return n->transformer(x).lv_current().a; });
        rec_.add_channel(id + "_i_lv_b", [n, x] { return n->transformer(x).lv_current().b; });
        rec_.add_channel(id + "_i_lv_c", [n, x] { return n->transformer(x).lv_current().c; });
    }
}

void Engine::fire_due_events() {
    const double t = time();
    for (auto& pe : events_) {
        if (pe.fired) continue;
        if (pe.ev.t - t > dt_ / 2.0) continue;
        apply_event(pe.ev);
        pe.fired = true;
    }
}

void Engine::apply_event(const cfg::EventCfg& ev) {
    switch (ev.kind) {
        case cfg::EventKind::load_step: {
            for (auto& le : loads_) {
                if (le.id != ev.target) continue;
                le.p_mw += ev.value;
                if (le.p_mw <= 0.0)
                    throw SimulationFault("load '" + le.id + "' stepped to non-positive power",
                                          k_);
                const double p_pu = le.p_mw * 1e6 / base_.s_base_va;
                net_->set_resistance(le.res_idx, 1.0 / p_pu);
                return;
            }
            break;
        }
        case cfg::EventKind::fault_on:
        case cfg::EventKind::fault_off: {
            for (std::size_t i = 0; i < sc_.faults.size(); ++i) {
                if (sc_.faults[i].id != ev.target) continue;
                net_->set_fault_active(fault_idx_[i], ev.kind == cfg::EventKind::fault_on);
                return;
            }
            break;
        }
        case cfg::EventKind::breaker_close:
        case cfg::EventKind::breaker_open: {
            for (std::size_t i = 0; i < sc_.breakers.size(); ++i) {
                if (sc_.breakers[i].id != ev.target) continue;
                net_->set_switch_closed(breaker_idx_[i], ev.kind == cfg::EventKind::breaker_close);
                return;
            }
            break;
        }
        case cfg::EventKind::set_p_in: {
            const int i = wpg_index(ev.target);
            if (i >= 0) {
                units_[static_cast<std::size_t>(i)].plant.machine.p_ref = ev.value * 1e6;
                return;
            }
            break;
        }
    }
    throw SimulationFault("event target '" + ev.target + "' not found", k_);
}

void Engine::step() {
    const double t = time();
    const double om = base_.omega_nom();

    fire_due_events();

    // Sample first: every controller sees the state the previous step left.
    for (auto& u : units_) {
        u.meas.v_pcc = net_->bus_voltage(u.bus);
        u.meas.i_l = u.inverter.i_l();
        u.meas.u_c = net_->shunt(u.filter_cap_idx).u;
        u.meas.psi_bus = net_->bus_flux(u.bus);
        u.meas.v_dc = u.plant.dc.v;
    }

    for (auto& u : units_) {
        const ctrl::ControlMode before = u.switcher.mode();
        const ctrl::ControlMode mode = u.switcher.step(u.meas.i_l, u.meas.v_pcc, om, dt_);
        if (mode == ctrl::ControlMode::current_funnel &&
            before == ctrl::ControlMode::flux_sync) {
            if (u.engaged_at < 0.0) u.engaged_at = t;
            ++u.funnel_entries;
        }
        if (u.switcher.handed_back()) {
            u.handback_at = t;
            // Resume tracking from the flux the system actually holds.
            u.nfscm.reseed_flux(u.meas.psi_bus);
        }

        const bool funnel = mode == ctrl::ControlMode::current_funnel;
        inv::SwitchState cmd;
        if (u.kind == ControllerKind::avscm)
            cmd = u.avscm.step(u.meas, om, t, dt_);
        else
            cmd = u.nfscm.step(u.meas, om, t, dt_, funnel);
        if (funnel) cmd = u.lbfc.step(u.meas.i_l);
        u.sw = cmd;
    }

    for (auto& b : inj_) b = {};
    for (auto& u : units_) {
        const em::ThreePhase i_inj =
            u.inverter.step(u.sw, u.plant.dc.v, net_->bus_voltage(u.bus), dt_);

        const double p_e = debug_stale_power ? u.prev_p_e : u.inverter.p_e_watts();
        u.plant.step(p_e, (u.meas.v_dc - base_.v_base_dc) / base_.v_base_dc, dt_);
        u.prev_p_e = u.inverter.p_e_watts();

        inj_[u.bus] += i_inj;
    }

    net_->step(inj_, dt_);

    ++k_;
    check_health();
    rec_.on_step(k_, time());
    metrics_->on_step(*this);
}

void Engine::check_health() {
    if (net_->last_kcl_residual() > 1e-6)
        throw SimulationFault("network solve lost accuracy (KCL residual " +
                                  std::to_string(net_->last_kcl_residual()) + ")",
                              k_);
    for (const auto& u : units_) {
        if (!std::isfinite(u.plant.dc.v))
            throw SimulationFault("DC-link voltage of '" + u.name + "' is not finite", k_);
    }
    if (k_ % 1024 == 0) {
        for (const auto& u : units_)
            if (!u.inverter.i_l().finite())
                throw SimulationFault("bridge current of '" + u.name + "' is not finite", k_);
        for (int b = 0; b < net_->bus_count(); ++b)
            if (!net_->bus_voltage(b).finite())
                throw SimulationFault("voltage of bus '" + net_->bus_name(b) + "' is not finite",
                                      k_);
    }
}

void Engine::run() {
    if (k_ == 0) {
        rec_.on_step(0, 0.0);
        metrics_->on_step(*this);
    }
    while (k_ < n_steps_) step();
}

void Engine::save_state(json& j) const {
    j["scenario"] = sc_.name;
    j["step"] = k_;
    net_->save_state(j["network"]);
    json units = json::array();
    for (const auto& u : units_) {
        json ju;
        u.plant.save_state(ju["plant"]);
        u.inverter.save_state(ju["inverter"]);
        u.nfscm.save_state(ju["nfscm"]);
        u.avscm.save_state(ju["avscm"]);
        u.switcher.save_state(ju["switcher"]);
        ju["lbfc_q"] = {u.lbfc.q[0], u.lbfc.q[1], u.lbfc.q[2]};
        ju["sw"] = {u.sw.a, u.sw.b, u.sw.c};
        ju["prev_p_e"] = u.prev_p_e;
        ju["meas"] = {{"v_pcc", tp_to_json(u.meas.v_pcc)},
                      {"i_l", tp_to_json(u.meas.i_l)},
                      {"u_c", tp_to_json(u.meas.u_c)},
                      {"psi_bus", tp_to_json(u.meas.psi_bus)},
                      {"v_dc", u.meas.v_dc}};
        ju["engaged_at"] = u.engaged_at;
        ju["handback_at"] = u.handback_at;
        ju["funnel_entries"] = u.funnel_entries;
        units.push_back(std::move(ju));
    }
    j["units"] = std::move(units);
    json ev = json::array();
    for (const auto& pe : events_) ev.push_back(pe.fired);
    j["events_fired"] = std::move(ev);
    json lp = json::array();
    for (const auto& le : loads_) lp.push_back(le.p_mw);
    j["load_p_mw"] = std::move(lp);
}

void Engine::load_state(const json& j) {
    if (j.at("scenario").get<std::string>() != sc_.name)
        throw ConfigError("state was saved from scenario '" +
                          j.at("scenario").get<std::string>() + "', not '" + sc_.name + "'");
    k_ = j.at("step").get<long long>();
    net_->load_state(j.at("network"));
    const auto& units = j.at("units");
    for (std::size_t i = 0; i < units_.size(); ++i) {
        auto& u = units_[i];
        const auto& ju = units.at(i);
        u.plant.load_state(ju.at("plant"));
        u.inverter.load_state(ju.at("inverter"));
        u.nfscm.load_state(ju.at("nfscm"));
        u.avscm.load_state(ju.at("avscm"));
        u.switcher.load_state(ju.at("switcher"));
        const auto& q = ju.at("lbfc_q");
        u.lbfc.q = {q.at(0).get<bool>(), q.at(1).get<bool>(), q.at(2).get<bool>()};
        const auto& sw = ju.at("sw");
        u.sw = {sw.at(0).get<bool>(), sw.at(1).get<bool>(), sw.at(2).get<bool>()};
        u.prev_p_e = ju.at("prev_p_e").get<double>();
        const auto& m = ju.at("meas");
        u.meas.v_pcc = tp_from_json(m.at("v_pcc"));
        u.meas.i_l = tp_from_json(m.at("i_l"));
        u.meas.u_c = tp_from_json(m.at("u_c"));
        u.meas.psi_bus = tp_from_json(m.at("psi_bus"));
        u.meas.v_dc = m.at("v_dc").get<double>();
        u.engaged_at = ju.at("engaged_at").get<double>();
        u.handback_at = ju.at("handback_at").get<double>();
        u.funnel_entries = ju.at("funnel_entries").get<int>();
    }
    const auto& ev = j.at("events_fired");
    for (std::size_t i = 0; i < events_.size(); ++i) events_[i].fired = ev.at(i).get<bool>();
    const auto& lp = j.at("load_p_mw");
    for (std::size_t i = 0; i < loads_.size(); ++i) loads_[i].p_mw = lp.at(i).get<double>();
}

}  // namespace fluxsim::sim
