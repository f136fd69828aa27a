#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fluxsim/em/per_unit.hpp"

namespace fluxsim::cfg {

/// Series line between two buses; impedance in p.u. on the system base.
struct LineCfg {
    std::string id;
    std::string from;
    std::string to;
    double r = 0.0;
    double x = 0.0;
};

/// Constant-impedance load: active part as a shunt resistor, reactive part as
/// a grounded series reactor, both sized at nominal voltage.
struct LoadCfg {
    std::string id;
    std::string bus;
    double p_mw = 0.0;
    double q_mvar = 0.0;
};

/// Shunt capacitor bank.
struct CapCfg {
    std::string id;
    std::string bus;
    double mvar = 0.0;
    double r = 0.01;
};

struct TransformerCfg {
    std::string id;
    std::string lv;
    std::string hv;
    double r = 0.002;
    double x = 0.148;
    double mag_l0 = 500.0;
    double knee = 1.2;
    double mag_lsat = 0.3;
    std::array<double, 3> residual{0.0, 0.0, 0.0};  ///< initial core flux, p.u.
};

struct BreakerCfg {
    std::string id;
    std::string from;
    std::string to;
    bool closed = true;
};

struct FaultCfg {
    std::string id;
    std::string bus;
    double r_on = 1e-4;
};

struct LbfcCfg {
    bool enabled = false;
    double gamma = 1.75;        ///< current threshold arming the funnel, p.u.
    double band = 0.3;          ///< funnel half-width phi, p.u.
    double tau_recover = 0.5;   ///< voltage-integral excursion releasing it
};

struct WpgCfg {
    std::string name;
    std::string bus;          ///< PCC bus (LV terminal of its transformer)
    std::string transformer;  ///< id of the associated step-up transformer
    std::string controller = "nfscm";  ///< "nfscm" or "avscm"
    double p_in_mw = 0.0;
    bool governor = true;
    double k_sync = 10.0;
    double k_mag = 0.2;
    double flux_band = 0.02;
    double volt_band = 0.05;
    double filter_r = 0.003;
    double filter_x = 0.15;
    double filter_cap_b = 0.05;
    /// Series damping of the capacitor branch. Sized against the filter
    /// characteristic impedance sqrt(x_l / b) so the L-C pole is roughly
    /// half-critically damped; a lightly damped branch rings under the
    /// switched bridge voltage.
    double filter_cap_r = 1.7;
    double ramp = 20.0;  ///< reference-magnitude slew, p.u. per second
    LbfcCfg lbfc{};
};

enum class EventKind {
    load_step,      ///< add `value` MW to the named load's active power
    fault_on,       ///< engage the named fault
    fault_off,      ///< clear the named fault
    breaker_close,  ///< close the named breaker
    breaker_open,   ///< open the named breaker
    set_p_in,       ///< set the named unit's source dispatch to `value` MW
};

struct EventCfg {
    double t = 0.0;
    EventKind kind = EventKind::load_step;
    std::string target;
    double value = 0.0;
};

/// Fully resolved scenario. Field defaults are the rated values of the
/// bundled test system; the parser only fills what the file provides and
/// rejects anything it does not recognize.
struct Scenario {
    std::string name;
    std::string description;
    double dt = 1.0 / 96000.0;  ///< 1600 steps per 60 Hz cycle
    double t_end = 1.0;
    int record_every = 32;

    em::PerUnitBase base{};
    std::vector<std::string> buses;
    std::vector<LineCfg> lines;
    std::vector<LoadCfg> loads;
    std::vector<CapCfg> caps;
    std::vector<TransformerCfg> transformers;
    std::vector<BreakerCfg> breakers;
    std::vector<FaultCfg> faults;
    std::vector<WpgCfg> wpgs;
    std::vector<EventCfg> events;

    [[nodiscard]] long long total_steps() const;
    [[nodiscard]] std::size_t steps_per_cycle() const;
};

/// Parses and validates a scenario document. Collects every violation it can
/// find (unknown keys, missing fields, bad references, bad ranges) and throws
/// a single ConfigError listing all of them.
[[nodiscard]] Scenario parse_scenario(const nlohmann::json& j);

/// Reads and parses a scenario file; throws ConfigError on unreadable input.
[[nodiscard]] Scenario load_scenario_file(const std::string& path);

/// Serializes the resolved scenario back to JSON (defaults filled in), the
/// form written next to run artifacts.
[[nodiscard]] nlohmann::json scenario_to_json(const Scenario& s);

}  // namespace fluxsim::cfg
