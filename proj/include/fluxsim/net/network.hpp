#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fluxsim/em/per_unit.hpp"
#include "fluxsim/em/three_phase.hpp"

#include <nlohmann/json.hpp>

namespace fluxsim::net {

inline constexpr int kGround = -1;

/// Series resistive-inductive branch (line, load, transformer leakage).
/// `l` is per-unit reactance at f_nom; dynamics carry the omega factor.
struct SeriesRl {
    std::string id;
    int from = kGround;
    int to = kGround;
    double r = 0.0;
    double l = 0.0;
    bool enabled = true;
    em::ThreePhase i{};  ///< branch current from->to, p.u.
};

/// Capacitor with series damping resistance, bus to ground.
/// `b` is per-unit susceptance at f_nom.
struct ShuntRc {
    std::string id;
    int bus = 0;
    double r = 0.0;
    double b = 0.0;
    em::ThreePhase u{};      ///< capacitor voltage, p.u.
    em::ThreePhase i{};      ///< branch current at the previous solve, p.u.
};

/// Piecewise-linear magnetizing characteristic, odd-symmetric about zero.
/// Inductances are per-unit reactances; with the flux base v_base/omega the
/// magnetizing current is i = psi / l directly.
struct SaturationCurve {
    double l_m0 = 500.0;
    double psi_knee = 1.2;
    double l_ms = 0.3;

    [[nodiscard]] double current(double psi) const;
};

/// Constant-impedance resistive load, bus to ground. Stateless: it stamps
/// conductance only, so its current follows the bus voltage within the step.
struct ShuntResistor {
    std::string id;
    int bus = 0;
    double r = 1.0;
};

/// Two-winding transformer: series leakage branch lv->hv plus a saturable
/// magnetizing branch hanging at the lv terminal, so the core flux equals the
/// lv bus flux when both start from the same residual.
struct Transformer {
    std::string id;
    int lv = 0;
    int hv = 0;
    double r = 0.0;
    double l = 0.0;
    SaturationCurve sat{};
    em::ThreePhase psi_m{};     ///< core flux, p.u., starts at the residual
    em::ThreePhase i_series{};  ///< leakage current lv->hv, p.u.
    em::ThreePhase i_mag{};     ///< magnetizing current drawn at lv, p.u.

    /// Current flowing from the lv bus into the transformer.
    [[nodiscard]] em::ThreePhase lv_current() const { return i_series + i_mag; }
};

/// Ideal-ish breaker: series resistance toggling between closed and open.
struct SwitchBranch {
    std::string id;
    int from = 0;
    int to = 0;
    double r_closed = 1e-4;
    double r_open = 1e7;
    bool closed = true;
};

/// Three-phase shunt fault applied at a bus.
struct FaultElement {
    std::string id;
    int bus = 0;
    double r_on = 1e-4;
    bool active = false;
};

/// Fixed-step trapezoidal nodal network. Phases are balanced and uncoupled,
/// so one real conductance matrix serves all three; it is refactored only
/// when topology changes (fault, breaker, load switching). Magnetizing
/// branches enter the solve as explicit current injections from the flux
/// state, which is stable at EMT step sizes because the magnetizing
/// inductance is large against dt.
class Network {
public:
    Network(em::PerUnitBase base, std::vector<std::string> bus_names);

    int bus_count() const { return static_cast<int>(bus_names_.size()); }
    [[nodiscard]] int bus_index(const std::string& name) const;
    [[nodiscard]] const std::string& bus_name(int bus) const { return bus_names_.at(bus); }

    std::size_t add_series(SeriesRl b);
    std::size_t add_shunt(ShuntRc s);
    std::size_t add_resistor(ShuntResistor r);
    std::size_t add_transformer(Transformer t);
    std::size_t add_switch(SwitchBranch s);
    std::size_t add_fault(FaultElement f);

    /// Freezes topology, verifies every bus has a conductive path to ground,
    /// and factorizes the conductance matrix for the given step size.
    void finalize(double dt);

    void set_fault_active(std::size_t idx, bool active);
    void set_switch_closed(std::size_t idx, bool closed);
    void set_series_enabled(std::size_t idx, bool enabled);
    void set_resistance(std::size_t idx, double r);

    /// Advances every branch current, capacitor voltage and flux one step.
    /// `injections` holds the externally injected current per bus (p.u.).
    void step(const std::vector<em::ThreePhase>& injections, double dt);

    [[nodiscard]] const em::ThreePhase& bus_voltage(int bus) const { return v_.at(bus); }
    [[nodiscard]] const em::ThreePhase& bus_flux(int bus) const { return flux_.at(bus); }
    void set_bus_flux(int bus, const em::ThreePhase& f) { flux_.at(bus) = f; }

    /// Washout time constant of the per-bus flux measurement, seconds. The
    /// flux is the voltage integral; a pure integral holds any DC picked up
    /// through an asymmetric transient forever, and controllers that servo
    /// on the flux would fight that offset indefinitely. The washout drains
    /// DC over a few tenths of a second while leaving the fundamental
    /// essentially untouched (pole more than fifty times below line
    /// frequency, under 0.1% amplitude error at 60 Hz).
    double flux_washout_tau = 0.15;

    [[nodiscard]] const SeriesRl& series(std::size_t i) const { return series_.at(i); }
    [[nodiscard]] const Transformer& transformer(std::size_t i) const { return tfmr_.at(i); }
    [[nodiscard]] const ShuntRc& shunt(std::size_t i) const { return shunts_.at(i); }
    [[nodiscard]] const ShuntResistor& resistor(std::size_t i) const { return res_.at(i); }
    [[nodiscard]] std::size_t transformer_count() const { return tfmr_.size(); }
    [[nodiscard]] std::optional<std::size_t> transformer_at_lv(int bus) const;

    /// Worst KCL residual of the last solve, infinity norm over buses/phases.
    [[nodiscard]] double last_kcl_residual() const { return last_residual_; }

    void save_state(nlohmann::json& j) const;
    void load_state(const nlohmann::json& j);

private:
    void rebuild();
    void check_islands() const;

    em::PerUnitBase base_;
    std::vector<std::string> bus_names_;
    std::vector<SeriesRl> series_;
    std::vector<ShuntRc> shunts_;
    std::vector<ShuntResistor> res_;
    std::vector<Transformer> tfmr_;
    std::vector<SwitchBranch> switches_;
    std::vector<FaultElement> faults_;

    std::vector<em::ThreePhase> v_;     // bus voltages
    std::vector<em::ThreePhase> flux_;  // bus flux, omega * integral(v dt)

    double dt_ = 0.0;
    bool finalized_ = false;

    // companion coefficients, recomputed on rebuild
    std::vector<double> ser_g_, ser_k1_;  // per series branch
    std::vector<double> sh_g_, sh_k_;     // per shunt
    std::vector<double> tf_g_, tf_k1_;    // per transformer leakage

    Eigen::MatrixXd g_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    Eigen::MatrixXd rhs_;   // n x 3
    Eigen::MatrixXd sol_;   // n x 3
    double last_residual_ = 0.0;
};

}  // namespace fluxsim::net
