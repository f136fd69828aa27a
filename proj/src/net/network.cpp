#include "fluxsim/net/network.hpp"

#include <array>
#include <cmath>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fluxsim/errors.hpp"

namespace fluxsim::net {

namespace {

using json = nlohmann::json;

json tp_to_json(const em::ThreePhase& p) { return json::array({p.a, p.b, p.c}); }

em::ThreePhase tp_from_json(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

double SaturationCurve::current(double psi) const {
    const double m = std::fabs(psi);
    const double i = m <= psi_knee ? m / l_m0 : psi_knee / l_m0 + (m - psi_knee) / l_ms;
    return std::copysign(i, psi);
}

Network::Network(em::PerUnitBase base, std::vector<std::string> bus_names)
    : base_(base), bus_names_(std::move(bus_names)) {
    base_.validate();
    v_.resize(bus_names_.size());
    flux_.resize(bus_names_.size());
}

int Network::bus_index(const std::string& name) const {
    for (int i = 0; i < bus_count(); ++i)
        if (bus_names_[i] == name) return i;
    throw ConfigError("unknown bus '" + name + "'");
}

std::size_t Network::add_series(SeriesRl b) {
    if (b.l <= 0.0) throw ConfigError("branch '" + b.id + "': inductance must be positive");
    if (b.r < 0.0) throw ConfigError("branch '" + b.id + "': negative resistance");
    series_.push_back(std::move(b));
    return series_.size() - 1;
}

std::size_t Network::add_shunt(ShuntRc s) {
    if (s.b <= 0.0) throw ConfigError("shunt '" + s.id + "': susceptance must be positive");
    if (s.r < 0.0) throw ConfigError("shunt '" + s.id + "': negative resistance");
    shunts_.push_back(std::move(s));
    return shunts_.size() - 1;
}

std::size_t Network::add_resistor(ShuntResistor r) {
    if (r.r <= 0.0) throw ConfigError("resistor '" + r.id + "': resistance must be positive");
    res_.push_back(std::move(r));
    return res_.size() - 1;
}

std::size_t Network::add_transformer(Transformer t) {
    if (t.l <= 0.0) throw ConfigError("transformer '" + t.id + "': leakage must be positive");
    if (t.sat.l_m0 <= 0.0 || t.sat.l_ms <= 0.0 || t.sat.psi_knee <= 0.0)
        throw ConfigError("transformer '" + t.id + "': magnetizing curve parameters must be positive");
    tfmr_.push_back(std::move(t));
    return tfmr_.size() - 1;
}

std::size_t Network::add_switch(SwitchBranch s) {
    if (s.r_closed <= 0.0 || s.r_open <= s.r_closed)
        throw ConfigError("switch '" + s.id + "': need 0 < r_closed < r_open");
    switches_.push_back(std::move(s));
    return switches_.size() - 1;
}

std::size_t Network::add_fault(FaultElement f) {
    if (f.r_on <= 0.0) throw ConfigError("fault '" + f.id + "': resistance must be positive");
    faults_.push_back(std::move(f));
    return faults_.size() - 1;
}

void Network::finalize(double dt) {
    if (dt <= 0.0) throw ConfigError("network step size must be positive");
    check_islands();
    dt_ = dt;
    finalized_ = true;
    rhs_.resize(bus_count(), 3);
    sol_.resize(bus_count(), 3);
    rebuild();
}

void Network::check_islands() const {
    const int n = bus_count();
    std::vector<std::vector<int>> adj(n);
    std::vector<bool> grounded(n, false);

    auto connect = [&](int f, int t) {
        if (f == kGround && t == kGround) return;
        if (f == kGround) { grounded[t] = true; return; }
        if (t == kGround) { grounded[f] = true; return; }
        adj[f].push_back(t);
        adj[t].push_back(f);
    };

    for (const auto& s : series_)
        if (s.enabled) connect(s.from, s.to);
    for (const auto& s : shunts_) grounded[s.bus] = true;
    for (const auto& r : res_) grounded[r.bus] = true;
    for (const auto& t : tfmr_) connect(t.lv, t.hv);
    for (const auto& s : switches_) connect(s.from, s.to);

    std::vector<bool> seen(n, false);
    std::queue<int> q;
    for (int i = 0; i < n; ++i)
        if (grounded[i]) { seen[i] = true; q.push(i); }
    while (!q.empty()) {
        const int b = q.front();
        q.pop();
        for (int nb : adj[b])
            if (!seen[nb]) { seen[nb] = true; q.push(nb); }
    }

    std::ostringstream bad;
    for (int i = 0; i < n; ++i)
        if (!seen[i]) bad << (bad.tellp() > 0 ? ", " : "") << bus_names_[i];
    if (bad.tellp() > 0)
        throw ConfigError("singular network: buses {" + bad.str() +
                          "} have no conductive path to ground");
}

void Network::rebuild() {
    const int n = bus_count();
    const double om = base_.omega_nom();

    g_ = Eigen::MatrixXd::Zero(n, n);

    auto stamp_series = [&](int f, int t, double g) {
        if (f != kGround) g_(f, f) += g;
        if (t != kGround) g_(t, t) += g;
        if (f != kGround && t != kGround) {
            g_(f, t) -= g;
            g_(t, f) -= g;
        }
    };

    ser_g_.assign(series_.size(), 0.0);
    ser_k1_.assign(series_.size(), 0.0);
    for (std::size_t i = 0; i < series_.size(); ++i) {
        const auto& s = series_[i];
        if (!s.enabled) continue;
        const double a = om * dt_ / (2.0 * s.l);
        const double den = 1.0 + a * s.r;
        ser_g_[i] = a / den;
        ser_k1_[i] = (1.0 - a * s.r) / den;
        stamp_series(s.from, s.to, ser_g_[i]);
    }

    tf_g_.assign(tfmr_.size(), 0.0);
    tf_k1_.assign(tfmr_.size(), 0.0);
    for (std::size_t i = 0; i < tfmr_.size(); ++i) {
        const auto& t = tfmr_[i];
        const double a = om * dt_ / (2.0 * t.l);
        const double den = 1.0 + a * t.r;
        tf_g_[i] = a / den;
        tf_k1_[i] = (1.0 - a * t.r) / den;
        stamp_series(t.lv, t.hv, tf_g_[i]);
    }

    sh_g_.assign(shunts_.size(), 0.0);
    sh_k_.assign(shunts_.size(), 0.0);
    for (std::size_t i = 0; i < shunts_.size(); ++i) {
        const auto& s = shunts_[i];
        sh_k_[i] = om * dt_ / (2.0 * s.b);
        sh_g_[i] = 1.0 / (s.r + sh_k_[i]);
        g_(s.bus, s.bus) += sh_g_[i];
    }

    for (const auto& r : res_) g_(r.bus, r.bus) += 1.0 / r.r;

    for (const auto& s : switches_)
        stamp_series(s.from, s.to, 1.0 / (s.closed ? s.r_closed : s.r_open));

    for (const auto& f : faults_)
        if (f.active) g_(f.bus, f.bus) += 1.0 / f.r_on;

    lu_.compute(g_);
    // PartialPivLU has no rank query; a vanishing pivot means an island the
    // structural check could not see. Guard against silent garbage.
    const double dmin = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!(dmin > 1e-12))
        throw ConfigError("singular nodal matrix after topology change");
}

void Network::set_fault_active(std::size_t idx, bool active) {
    auto& f = faults_.at(idx);
    if (f.active == active) return;
    f.active = active;
    if (finalized_) rebuild();
}

void Network::set_switch_closed(std::size_t idx, bool closed) {
    auto& s = switches_.at(idx);
    if (s.closed == closed) return;
    s.closed = closed;
    if (finalized_) rebuild();
}

void Network::set_resistance(std::size_t idx, double r) {
    auto& el = res_.at(idx);
    if (r <= 0.0) throw ConfigError("resistor '" + el.id + "': resistance must be positive");
    if (el.r == r) return;
    el.r = r;
    if (finalized_) rebuild();
}

void Network::set_series_enabled(std::size_t idx, bool enabled) {
    auto& s = series_.at(idx);
    if (s.enabled == enabled) return;
    s.enabled = enabled;
    if (finalized_) {
        if (!enabled) s.i = {};
        rebuild();
    }
}

std::optional<std::size_t> Network::transformer_at_lv(int bus) const {
    for (std::size_t i = 0; i < tfmr_.size(); ++i)
        if (tfmr_[i].lv == bus) return i;
    return std::nullopt;
}

void Network::step(const std::vector<em::ThreePhase>& injections, double dt) {
    if (!finalized_) throw SimulationFault("network step before finalize", -1);
    if (dt != dt_) {
        dt_ = dt;
        rebuild();
    }
    const int n = bus_count();
    const double om = base_.omega_nom();
    const double half_flux = 0.5 * om * dt_;

    static thread_local std::vector<em::ThreePhase> vold;
    vold = v_;

    auto vp = [&](const std::vector<em::ThreePhase>& v, int bus, int ph) -> double {
        if (bus == kGround) return 0.0;
        const auto& t = v[bus];
        return ph == 0 ? t.a : (ph == 1 ? t.b : t.c);
    };

    rhs_.setZero();
    for (int b = 0; b < n && b < static_cast<int>(injections.size()); ++b) {
        rhs_(b, 0) += injections[b].a;
        rhs_(b, 1) += injections[b].b;
        rhs_(b, 2) += injections[b].c;
    }

    // history sources; also stash them for the post-solve state update
    static thread_local std::vector<std::array<double, 3>> ser_h, tf_h, sh_h;
    ser_h.assign(series_.size(), {});
    tf_h.assign(tfmr_.size(), {});
    sh_h.assign(shunts_.size(), {});

    for (std::size_t i = 0; i < series_.size(); ++i) {
        const auto& s = series_[i];
        if (!s.enabled) continue;
        const double* ist = &s.i.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double vd = vp(vold, s.from, ph) - vp(vold, s.to, ph);
            const double h = ser_k1_[i] * ist[ph] + ser_g_[i] * vd;
            ser_h[i][ph] = h;
            if (s.from != kGround) rhs_(s.from, ph) -= h;
            if (s.to != kGround) rhs_(s.to, ph) += h;
        }
    }

    for (std::size_t i = 0; i < tfmr_.size(); ++i) {
        auto& t = tfmr_[i];
        const double* ist = &t.i_series.a;
        const double* psim = &t.psi_m.a;
        double* imag = &t.i_mag.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double vd = vp(vold, t.lv, ph) - vp(vold, t.hv, ph);
            const double h = tf_k1_[i] * ist[ph] + tf_g_[i] * vd;
            tf_h[i][ph] = h;
            if (t.lv != kGround) rhs_(t.lv, ph) -= h;
            if (t.hv != kGround) rhs_(t.hv, ph) += h;
            imag[ph] = t.sat.current(psim[ph]);
            rhs_(t.lv, ph) -= imag[ph];
        }
    }

    for (std::size_t i = 0; i < shunts_.size(); ++i) {
        const auto& s = shunts_[i];
        const double* u = &s.u.a;
        const double* ip = &s.i.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double h = -sh_g_[i] * (u[ph] + sh_k_[i] * ip[ph]);
            sh_h[i][ph] = h;
            rhs_(s.bus, ph) -= h;
        }
    }

    sol_ = lu_.solve(rhs_);
    last_residual_ = (g_ * sol_ - rhs_).cwiseAbs().maxCoeff();

    for (int b = 0; b < n; ++b) v_[b] = {sol_(b, 0), sol_(b, 1), sol_(b, 2)};

    for (std::size_t i = 0; i < series_.size(); ++i) {
        auto& s = series_[i];
        if (!s.enabled) continue;
        double* ist = &s.i.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double vd = vp(v_, s.from, ph) - vp(v_, s.to, ph);
            ist[ph] = ser_g_[i] * vd + ser_h[i][ph];
        }
    }

    for (std::size_t i = 0; i < tfmr_.size(); ++i) {
        auto& t = tfmr_[i];
        double* ist = &t.i_series.a;
        double* psim = &t.psi_m.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double vd = vp(v_, t.lv, ph) - vp(v_, t.hv, ph);
            ist[ph] = tf_g_[i] * vd + tf_h[i][ph];
            psim[ph] += half_flux * (vp(vold, t.lv, ph) + vp(v_, t.lv, ph));
        }
    }

    for (std::size_t i = 0; i < shunts_.size(); ++i) {
        auto& s = shunts_[i];
        double* u = &s.u.a;
        double* ip = &s.i.a;
        for (int ph = 0; ph < 3; ++ph) {
            const double inew = sh_g_[i] * vp(v_, s.bus, ph) + sh_h[i][ph];
            u[ph] += sh_k_[i] * (ip[ph] + inew);
            ip[ph] = inew;
        }
    }

    const double flux_decay = 1.0 - dt_ / flux_washout_tau;
    for (int b = 0; b < n; ++b) flux_[b] = flux_decay * flux_[b] + half_flux * (vold[b] + v_[b]);
}

void Network::save_state(nlohmann::json& j) const {
    json ser = json::array();
    for (const auto& s : series_) ser.push_back({{"i", tp_to_json(s.i)}, {"enabled", s.enabled}});
    json sh = json::array();
    for (const auto& s : shunts_) sh.push_back({{"u", tp_to_json(s.u)}, {"i", tp_to_json(s.i)}});
    json tf = json::array();
    for (const auto& t : tfmr_)
        tf.push_back({{"psi", tp_to_json(t.psi_m)}, {"i", tp_to_json(t.i_series)}});
    json sw = json::array();
    for (const auto& s : switches_) sw.push_back(s.closed);
    json fl = json::array();
    for (const auto& f : faults_) fl.push_back(f.active);
    json rs = json::array();
    for (const auto& r : res_) rs.push_back(r.r);
    json bv = json::array(), bf = json::array();
    for (const auto& p : v_) bv.push_back(tp_to_json(p));
    for (const auto& p : flux_) bf.push_back(tp_to_json(p));
    j = json{{"series", ser}, {"shunts", sh},  {"transformers", tf}, {"switches", sw},
             {"faults", fl},  {"resistors", rs}, {"bus_v", bv},  {"bus_flux", bf}};
}

void Network::load_state(const nlohmann::json& j) {
    const auto& ser = j.at("series");
    for (std::size_t i = 0; i < series_.size(); ++i) {
        series_[i].i = tp_from_json(ser.at(i).at("i"));
        series_[i].enabled = ser.at(i).at("enabled").get<bool>();
    }
    const auto& sh = j.at("shunts");
    for (std::size_t i = 0; i < shunts_.size(); ++i) {
        shunts_[i].u = tp_from_json(sh.at(i).at("u"));
        shunts_[i].i = tp_from_json(sh.at(i).at("i"));
    }
    const auto& tf = j.at("transformers");
    for (std::size_t i = 0; i < tfmr_.size(); ++i) {
        tfmr_[i].psi_m = tp_from_json(tf.at(i).at("psi"));
        tfmr_[i].i_series = tp_from_json(tf.at(i).at("i"));
    }
    for (std::size_t i = 0; i < switches_.size(); ++i)
        switches_[i].closed = j.at("switches").at(i).get<bool>();
    for (std::size_t i = 0; i < faults_.size(); ++i)
        faults_[i].active = j.at("faults").at(i).get<bool>();
    for (std::size_t i = 0; i < res_.size(); ++i)
        res_[i].r = j.at("resistors").at(i).get<double>();
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] = tp_from_json(j.at("bus_v").at(i));
    for (std::size_t i = 0; i < flux_.size(); ++i)
        flux_[i] = tp_from_json(j.at("bus_flux").at(i));
    if (finalized_) rebuild();
}

}  // namespace fluxsim::net
