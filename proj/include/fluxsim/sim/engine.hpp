#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fluxsim/cfg/scenario.hpp"
#include "fluxsim/ctrl/controllers.hpp"
#include "fluxsim/inv/inverter.hpp"
#include "fluxsim/net/network.hpp"
#include "fluxsim/plant/wpg_plant.hpp"
#include "fluxsim/sim/recorder.hpp"

namespace fluxsim::sim {

class Metrics;

enum class ControllerKind { nfscm, avscm };

/// One generating unit: the DC-side plant, the switched bridge with its
/// filter, both controller variants (only the configured one drives the
/// bridge), the funnel current limiter and its supervisor.
struct WpgUnit {
    std::string name;
    ControllerKind kind = ControllerKind::nfscm;
    int bus = -1;
    std::size_t tfmr_idx = 0;
    std::size_t filter_cap_idx = 0;

    plant::WpgPlant plant{};
    inv::Inverter inverter{};
    ctrl::Nfscm nfscm{};
    ctrl::Avscm avscm{};
    ctrl::Lbfc lbfc{};
    ctrl::ModeSwitcher switcher{};
    ctrl::Measurements meas{};
    inv::SwitchState sw{};
    double prev_p_e = 0.0;  ///< bridge power of the previous step, watts

    double engaged_at = -1.0;   ///< first funnel engagement, seconds
    double handback_at = -1.0;  ///< latest handback to flux tracking, seconds
    int funnel_entries = 0;
};

/// Deterministic fixed-step simulation of the whole test system. The step
/// order is part of the contract:
///   events -> sample measurements -> mode supervision -> controllers ->
///   bridge currents -> DC-side plants -> network solve -> capture.
/// Measurements are the states left by the previous step, giving every
/// controller exactly one step of latency.
class Engine {
public:
    explicit Engine(const cfg::Scenario& sc);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;
    ~Engine();

    /// Advances one step; throws SimulationFault on numeric breakdown.
    void step();

    /// Runs to t_end, feeding the recorder and metrics.
    void run();

    [[nodiscard]] double time() const { return static_cast<double>(k_) * dt_; }
    [[nodiscard]] long long step_index() const { return k_; }
    [[nodiscard]] long long total_steps() const { return n_steps_; }
    [[nodiscard]] double dt() const { return dt_; }

    [[nodiscard]] const em::PerUnitBase& base() const { return base_; }
    [[nodiscard]] const cfg::Scenario& scenario() const { return sc_; }
    [[nodiscard]] net::Network& network() { return *net_; }
    [[nodiscard]] const net::Network& network() const { return *net_; }
    [[nodiscard]] std::size_t wpg_count() const { return units_.size(); }
    [[nodiscard]] WpgUnit& wpg(std::size_t i) { return units_.at(i); }
    [[nodiscard]] const WpgUnit& wpg(std::size_t i) const { return units_.at(i); }
    [[nodiscard]] int wpg_index(const std::string& name) const;

    [[nodiscard]] Recorder& recorder() { return rec_; }
    [[nodiscard]] const Recorder& recorder() const { return rec_; }
    [[nodiscard]] Metrics& metrics() { return *metrics_; }
    [[nodiscard]] const Metrics& metrics() const { return *metrics_; }

    /// Full dynamic state (not the configuration), enough to resume a run
    /// that continues bit for bit like the uninterrupted one.
    void save_state(nlohmann::json& j) const;
    void load_state(const nlohmann::json& j);

    /// Test hook: feed each plant the bridge power of the previous step
    /// instead of the current one. Exists to show the step ordering is
    /// observable and therefore pinned.
    bool debug_stale_power = false;

private:
    struct LoadEntry {
        std::string id;
        std::size_t res_idx = 0;
        double p_mw = 0.0;
    };
    struct PendingEvent {
        cfg::EventCfg ev;
        bool fired = false;
    };

    void fire_due_events();
    void apply_event(const cfg::EventCfg& ev);
    void wire_capture();
    void check_health();

    cfg::Scenario sc_;
    em::PerUnitBase base_;
    double dt_;
    long long n_steps_;
    long long k_ = 0;

    std::unique_ptr<net::Network> net_;
    std::vector<WpgUnit> units_;
    std::vector<LoadEntry> loads_;
    std::vector<std::size_t> breaker_idx_;  // parallel to sc_.breakers
    std::vector<std::size_t> fault_idx_;    // parallel to sc_.faults
    std::vector<PendingEvent> events_;
    std::vector<em::ThreePhase> inj_;

    Recorder rec_;
    std::unique_ptr<Metrics> metrics_;
};

}  // namespace fluxsim::sim
