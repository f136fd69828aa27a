#include "fluxsim/cfg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fluxsim/errors.hpp"

namespace fluxsim::cfg {

namespace {

using json = nlohmann::json;

/// Strict object reader: every recognized key is marked, everything else is
/// reported, and type mismatches are collected instead of thrown so the user
/// sees all problems in one pass.
class Reader {
public:
    Reader(const json& j, std::string ctx, std::vector<std::string>& errs)
        : j_(j), ctx_(std::move(ctx)), errs_(errs) {
        if (!j_.is_object()) errs_.push_back(ctx_ + ": expected an object");
    }

    template <typename T>
    T req(const char* key, T fallback) {
        if (!j_.is_object() || !j_.contains(key)) {
            errs_.push_back(ctx_ + ": missing required key '" + key + "'");
            return fallback;
        }
        return get<T>(key, fallback);
    }

    template <typename T>
    T opt(const char* key, T fallback) {
        if (!j_.is_object() || !j_.contains(key)) return fallback;
        return get<T>(key, fallback);
    }

    /// Optional child object/array; null when absent or mistyped.
    const json* child(const char* key, bool array) {
        if (!j_.is_object() || !j_.contains(key)) return nullptr;
        seen_.insert(key);
        const json& c = j_.at(key);
        if (array != c.is_array()) {
            errs_.push_back(ctx_ + "." + key + (array ? ": expected an array"
                                                      : ": expected an object"));
            return nullptr;
        }
        return &c;
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [key, value] : j_.items())
            if (!seen_.contains(key)) errs_.push_back(ctx_ + ": unknown key '" + key + "'");
    }

private:
    template <typename T>
    T get(const char* key, T fallback) {
        seen_.insert(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            errs_.push_back(ctx_ + "." + key + ": wrong type");
            return fallback;
        }
    }

    const json& j_;
    std::string ctx_;
    std::vector<std::string>& errs_;
    std::set<std::string> seen_;
};

std::string item_ctx(const std::string& list, std::size_t i, const std::string& id) {
    std::ostringstream os;
    os << list << "[" << i << "]";
    if (!id.empty()) os << " ('" << id << "')";
    return os.str();
}

}  // namespace

long long Scenario::total_steps() const {
    return static_cast<long long>(std::llround(t_end / dt));
}

std::size_t Scenario::steps_per_cycle() const {
    return static_cast<std::size_t>(std::llround(1.0 / (base.f_nom * dt)));
}

Scenario parse_scenario(const json& j) {
    std::vector<std::string> errs;
    Scenario s;

    Reader top(j, "scenario", errs);
    s.name = top.req<std::string>("name", "");
    s.description = top.opt<std::string>("description", "");
    s.dt = top.opt<double>("dt", s.dt);
    s.t_end = top.req<double>("t_end", s.t_end);
    s.record_every = top.opt<int>("record_every", s.record_every);

    if (const json* b = top.child("base", false)) {
        Reader rb(*b, "base", errs);
        s.base.s_base_va = rb.opt<double>("s_va", s.base.s_base_va);
        s.base.v_base_ac_ll = rb.opt<double>("v_ll", s.base.v_base_ac_ll);
        s.base.v_base_dc = rb.opt<double>("v_dc", s.base.v_base_dc);
        s.base.f_nom = rb.opt<double>("f_nom", s.base.f_nom);
        rb.finish();
    }

    s.buses = top.opt<std::vector<std::string>>("buses", {});
    if (s.buses.empty()) errs.push_back("scenario: needs at least one bus");
    {
        std::set<std::string> uniq(s.buses.begin(), s.buses.end());
        if (uniq.size() != s.buses.size()) errs.push_back("buses: duplicate names");
    }

    auto known_bus = [&](const std::string& b) {
        return std::find(s.buses.begin(), s.buses.end(), b) != s.buses.end();
    };
    auto need_bus = [&](const std::string& ctx, const std::string& b) {
        if (!b.empty() && !known_bus(b)) errs.push_back(ctx + ": unknown bus '" + b + "'");
    };

    std::set<std::string> ids;
    auto need_fresh_id = [&](const std::string& ctx, const std::string& id) {
        if (id.empty()) return;
        if (!ids.insert(id).second) errs.push_back(ctx + ": duplicate id '" + id + "'");
    };

    if (const json* arr = top.child("lines", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            LineCfg c;
            Reader r((*arr)[i], item_ctx("lines", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("lines", i, c.id);
            c.from = r.req<std::string>("from", "");
            c.to = r.req<std::string>("to", "");
            c.r = r.opt<double>("r", 0.0);
            c.x = r.req<double>("x", 0.0);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.from);
            need_bus(ctx, c.to);
            if (c.x <= 0.0) errs.push_back(ctx + ": x must be positive");
            s.lines.push_back(std::move(c));
        }
    }

    if (const json* arr = top.child("loads", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            LoadCfg c;
            Reader r((*arr)[i], item_ctx("loads", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("loads", i, c.id);
            c.bus = r.req<std::string>("bus", "");
            c.p_mw = r.req<double>("p_mw", 0.0);
            c.q_mvar = r.opt<double>("q_mvar", 0.0);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.bus);
            if (c.p_mw <= 0.0) errs.push_back(ctx + ": p_mw must be positive");
            if (c.q_mvar < 0.0) errs.push_back(ctx + ": q_mvar must be non-negative");
            s.loads.push_back(std::move(c));
        }
    }

    if (const json* arr = top.child("shunt_caps", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            CapCfg c;
            Reader r((*arr)[i], item_ctx("shunt_caps", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("shunt_caps", i, c.id);
            c.bus = r.req<std::string>("bus", "");
            c.mvar = r.req<double>("mvar", 0.0);
            c.r = r.opt<double>("r", c.r);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.bus);
            if (c.mvar <= 0.0) errs.push_back(ctx + ": mvar must be positive");
            s.caps.push_back(std::move(c));
        }
    }

    if (const json* arr = top.child("transformers", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            TransformerCfg c;
            Reader r((*arr)[i], item_ctx("transformers", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("transformers", i, c.id);
            c.lv = r.req<std::string>("lv", "");
            c.hv = r.req<std::string>("hv", "");
            c.r = r.opt<double>("r", c.r);
            c.x = r.opt<double>("x", c.x);
            c.mag_l0 = r.opt<double>("mag_l0", c.mag_l0);
            c.knee = r.opt<double>("knee", c.knee);
            c.mag_lsat = r.opt<double>("mag_lsat", c.mag_lsat);
            c.residual = r.opt<std::array<double, 3>>("residual", c.residual);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.lv);
            need_bus(ctx, c.hv);
            if (c.x <= 0.0) errs.push_back(ctx + ": x must be positive");
            s.transformers.push_back(std::move(c));
        }
    }

    if (const json* arr = top.child("breakers", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            BreakerCfg c;
            Reader r((*arr)[i], item_ctx("breakers", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("breakers", i, c.id);
            c.from = r.req<std::string>("from", "");
            c.to = r.req<std::string>("to", "");
            c.closed = r.opt<bool>("closed", true);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.from);
            need_bus(ctx, c.to);
            s.breakers.push_back(std::move(c));
        }
    }

    if (const json* arr = top.child("faults", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            FaultCfg c;
            Reader r((*arr)[i], item_ctx("faults", i, ""), errs);
            c.id = r.req<std::string>("id", "");
            const std::string ctx = item_ctx("faults", i, c.id);
            c.bus = r.req<std::string>("bus", "");
            c.r_on = r.opt<double>("r_on", c.r_on);
            r.finish();
            need_fresh_id(ctx, c.id);
            need_bus(ctx, c.bus);
            s.faults.push_back(std::move(c));
        }
    }

    auto known_tfmr = [&](const std::string& id) {
        return std::any_of(s.transformers.begin(), s.transformers.end(),
                           [&](const TransformerCfg& t) { return t.id == id; });
    };

    if (const json* arr = top.child("wpgs", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            WpgCfg c;
            Reader r((*arr)[i], item_ctx("wpgs", i, ""), errs);
            c.name = r.req<std::string>("name", "");
            const std::string ctx = item_ctx("wpgs", i, c.name);
            c.bus = r.req<std::string>("bus", "");
            c.transformer = r.req<std::string>("transformer", "");
            c.controller = r.opt<std::string>("controller", c.controller);
            c.p_in_mw = r.opt<double>("p_in_mw", 0.0);
            c.governor = r.opt<bool>("governor", true);
            c.k_sync = r.opt<double>("k_sync", c.k_sync);
            c.k_mag = r.opt<double>("k_mag", c.k_mag);
            c.flux_band = r.opt<double>("flux_band", c.flux_band);
            c.volt_band = r.opt<double>("volt_band", c.volt_band);
            c.filter_r = r.opt<double>("filter_r", c.filter_r);
            c.filter_x = r.opt<double>("filter_x", c.filter_x);
            c.filter_cap_b = r.opt<double>("filter_cap_b", c.filter_cap_b);
            c.filter_cap_r = r.opt<double>("filter_cap_r", c.filter_cap_r);
            c.ramp = r.opt<double>("ramp", c.ramp);
            if (const json* lb = r.child("lbfc", false)) {
                Reader rl(*lb, ctx + ".lbfc", errs);
                c.lbfc.enabled = rl.opt<bool>("enabled", false);
                c.lbfc.gamma = rl.opt<double>("gamma", c.lbfc.gamma);
                c.lbfc.band = rl.opt<double>("band", c.lbfc.band);
                c.lbfc.tau_recover = rl.opt<double>("tau_recover", c.lbfc.tau_recover);
                rl.finish();
            }
            r.finish();
            need_fresh_id(ctx, c.name);
            need_bus(ctx, c.bus);
            if (!c.transformer.empty() && !known_tfmr(c.transformer))
                errs.push_back(ctx + ": unknown transformer '" + c.transformer + "'");
            if (c.controller != "nfscm" && c.controller != "avscm")
                errs.push_back(ctx + ": controller must be 'nfscm' or 'avscm'");
            if (c.filter_x <= 0.0) errs.push_back(ctx + ": filter_x must be positive");
            if (c.filter_cap_b <= 0.0) errs.push_back(ctx + ": filter_cap_b must be positive");
            if (c.lbfc.gamma <= 0.0) errs.push_back(ctx + ": lbfc.gamma must be positive");
            if (c.lbfc.band <= 0.0) errs.push_back(ctx + ": lbfc.band must be positive");
            s.wpgs.push_back(std::move(c));
        }
    }
    if (s.wpgs.empty()) errs.push_back("scenario: needs at least one generating unit");

    auto id_of = [](const auto& v, const std::string& id) {
        return std::any_of(v.begin(), v.end(), [&](const auto& e) { return e.id == id; });
    };
    auto wpg_named = [&](const std::string& n) {
        return std::any_of(s.wpgs.begin(), s.wpgs.end(),
                           [&](const WpgCfg& w) { return w.name == n; });
    };

    if (const json* arr = top.child("events", true)) {
        for (std::size_t i = 0; i < arr->size(); ++i) {
            EventCfg c;
            Reader r((*arr)[i], item_ctx("events", i, ""), errs);
            c.t = r.req<double>("t", 0.0);
            const std::string kind = r.req<std::string>("type", "");
            const std::string ctx = item_ctx("events", i, kind);
            c.target = r.req<std::string>("target", "");
            if (kind == "load_step") {
                c.kind = EventKind::load_step;
                c.value = r.req<double>("delta_p_mw", 0.0);
                if (!id_of(s.loads, c.target))
                    errs.push_back(ctx + ": unknown load '" + c.target + "'");
            } else if (kind == "fault_on" || kind == "fault_off") {
                c.kind = kind == "fault_on" ? EventKind::fault_on : EventKind::fault_off;
                if (!id_of(s.faults, c.target))
                    errs.push_back(ctx + ": unknown fault '" + c.target + "'");
            } else if (kind == "breaker_close" || kind == "breaker_open") {
                c.kind = kind == "breaker_close" ? EventKind::breaker_close
                                                 : EventKind::breaker_open;
                if (!id_of(s.breakers, c.target))
                    errs.push_back(ctx + ": unknown breaker '" + c.target + "'");
            } else if (kind == "set_p_in") {
                c.kind = EventKind::set_p_in;
                c.value = r.req<double>("p_mw", 0.0);
                if (!wpg_named(c.target))
                    errs.push_back(ctx + ": unknown unit '" + c.target + "'");
            } else {
                errs.push_back(ctx + ": unknown event type");
            }
            r.finish();
            if (c.t < 0.0) errs.push_back(ctx + ": t must be non-negative");
            s.events.push_back(std::move(c));
        }
    }

    top.finish();

    if (s.dt <= 0.0) errs.push_back("scenario: dt must be positive");
    if (s.t_end <= s.dt) errs.push_back("scenario: t_end must exceed dt");
    if (s.record_every < 1) errs.push_back("scenario: record_every must be >= 1");
    if (s.base.s_base_va <= 0.0 || s.base.v_base_ac_ll <= 0.0 || s.base.v_base_dc <= 0.0 ||
        s.base.f_nom <= 0.0)
        errs.push_back("base: all quantities must be positive");
    for (const auto& e : s.events)
        if (e.t > s.t_end) errs.push_back("events: event at t=" + std::to_string(e.t) +
                                          " is past t_end");

    if (!errs.empty()) {
        std::ostringstream os;
        os << "scenario validation failed (" << errs.size() << " problem"
           << (errs.size() == 1 ? "" : "s") << "):";
        for (const auto& e : errs) os << "\n  - " << e;
        throw ConfigError(os.str());
    }
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(j);
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["description"] = s.description;
    j["dt"] = s.dt;
    j["t_end"] = s.t_end;
    j["record_every"] = s.record_every;
    j["base"] = {{"s_va", s.base.s_base_va},
                 {"v_ll", s.base.v_base_ac_ll},
                 {"v_dc", s.base.v_base_dc},
                 {"f_nom", s.base.f_nom}};
    j["buses"] = s.buses;
    j["lines"] = json::array();
    for (const auto& c : s.lines)
        j["lines"].push_back(
            {{"id", c.id}, {"from", c.from}, {"to", c.to}, {"r", c.r}, {"x", c.x}});
    j["loads"] = json::array();
    for (const auto& c : s.loads)
        j["loads"].push_back(
            {{"id", c.id}, {"bus", c.bus}, {"p_mw", c.p_mw}, {"q_mvar", c.q_mvar}});
    j["shunt_caps"] = json::array();
    for (const auto& c : s.caps)
        j["shunt_caps"].push_back({{"id", c.id}, {"bus", c.bus}, {"mvar", c.mvar}, {"r", c.r}});
    j["transformers"] = json::array();
    for (const auto& c : s.transformers)
        j["transformers"].push_back({{"id", c.id},
                                     {"lv", c.lv},
                                     {"hv", c.hv},
                                     {"r", c.r},
                                     {"x", c.x},
                                     {"mag_l0", c.mag_l0},
                                     {"knee", c.knee},
                                     {"mag_lsat", c.mag_lsat},
                                     {"residual", c.residual}});
    j["breakers"] = json::array();
    for (const auto& c : s.breakers)
        j["breakers"].push_back(
            {{"id", c.id}, {"from", c.from}, {"to", c.to}, {"closed", c.closed}});
    j["faults"] = json::array();
    for (const auto& c : s.faults)
        j["faults"].push_back({{"id", c.id}, {"bus", c.bus}, {"r_on", c.r_on}});
    j["wpgs"] = json::array();
    for (const auto& c : s.wpgs)
        j["wpgs"].push_back({{"name", c.name},
                             {"bus", c.bus},
                             {"transformer", c.transformer},
                             {"controller", c.controller},
                             {"p_in_mw", c.p_in_mw},
                             {"governor", c.governor},
                             {"k_sync", c.k_sync},
                             {"k_mag", c.k_mag},
                             {"flux_band", c.flux_band},
                             {"volt_band", c.volt_band},
                             {"filter_r", c.filter_r},
                             {"filter_x", c.filter_x},
                             {"filter_cap_b", c.filter_cap_b},
                             {"filter_cap_r", c.filter_cap_r},
                             {"ramp", c.ramp},
                             {"lbfc",
                              {{"enabled", c.lbfc.enabled},
                               {"gamma", c.lbfc.gamma},
                               {"band", c.lbfc.band},
                               {"tau_recover", c.lbfc.tau_recover}}}});
    j["events"] = json::array();
    for (const auto& e : s.events) {
        json ev{{"t", e.t}, {"target", e.target}};
        switch (e.kind) {
            case EventKind::load_step:
                ev["type"] = "load_step";
                ev["delta_p_mw"] = e.value;
                break;
            case EventKind::fault_on: ev["type"] = "fault_on"; break;
            case EventKind::fault_off: ev["type"] = "fault_off"; break;
            case EventKind::breaker_close: ev["type"] = "breaker_close"; break;
            case EventKind::breaker_open: ev["type"] = "breaker_open"; break;
            case EventKind::set_p_in:
                ev["type"] = "set_p_in";
                ev["p_mw"] = e.value;
                break;
        }
        j["events"].push_back(std::move(ev));
    }
    return j;
}

}  // namespace fluxsim::cfg
