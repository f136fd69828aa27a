#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fluxsim/em/cycle_window.hpp"
#include "fluxsim/errors.hpp"
#include "fluxsim/net/network.hpp"

using namespace fluxsim;

namespace {
constexpr double kDt = 1.0 / 96000.0;
const em::PerUnitBase kBase{};
}  // namespace

TEST_CASE("saturation curve is piecewise linear and odd") {
    const net::SaturationCurve sat{};  // l_m0 = 500, knee = 1.2, l_ms = 0.3
    CHECK(sat.current(0.0) == 0.0);
    CHECK(sat.current(0.6) == doctest::Approx(0.0012).epsilon(1e-12));
    CHECK(sat.current(1.2) == doctest::Approx(0.0024).epsilon(1e-12));
    // Past the knee the incremental inductance drops to l_ms:
    // i(2.0) = 1.2/500 + 0.8/0.3.
    CHECK(sat.current(2.0) == doctest::Approx(2.669066666666667).epsilon(1e-12));
    CHECK(sat.current(-2.0) == doctest::Approx(-2.669066666666667).epsilon(1e-12));
    CHECK(sat.current(-0.6) == doctest::Approx(-0.0012).epsilon(1e-12));
}

TEST_CASE("time-domain solve matches the phasor solution") {
    // One bus, shunt resistor R = 5 in parallel with a series RL to ground
    // (r = 0.1, x = 0.5), driven by a 1 pu 60 Hz current injection. The
    // steady-state bus voltage amplitude is |R (r+jx) / (R+r+jx)| = 0.497519,
    // an independent frequency-domain route to the same answer.
    net::Network net(kBase, {"b"});
    net.add_resistor({.id = "R", .bus = 0, .r = 5.0});
    net.add_series({.id = "L", .from = 0, .to = net::kGround, .r = 0.1, .l = 0.5});
    net.finalize(kDt);

    const double w = kBase.omega_nom();
    const std::size_t spc = 1600;
    em::CycleWindow win_v(spc);
    em::CycleWindow win_psi(spc);
    std::vector<em::ThreePhase> inj(1);

    for (std::size_t k = 0; k < 4 * spc; ++k) {
        const double t = static_cast<double>(k) * kDt;
        inj[0] = em::polar_to_abc(1.0, w * t);
        net.step(inj, kDt);
        if (k >= 3 * spc) {
            win_v.push(net.bus_voltage(0).a);
            win_psi.push(net.bus_flux(0).a);
        }
        CHECK(net.last_kcl_residual() < 1e-9);
    }

    REQUIRE(win_v.filled());
    CHECK(*win_v.fundamental_amplitude() ==
          doctest::Approx(0.49751859510499463).epsilon(1e-5));

    // The bus flux is the washed-out voltage integral; at 60 Hz the washout
    // (tau = 0.15 s) passes 0.999844 of the pure-integral amplitude.
    CHECK(*win_psi.fundamental_amplitude() ==
          doctest::Approx(0.49751859510499463 * 0.9998436768117505).epsilon(1e-4));
}

TEST_CASE("bus flux washout drains a DC offset") {
    net::Network net(kBase, {"b"});
    net.add_resistor({.id = "R", .bus = 0, .r = 1.0});
    net.finalize(kDt);
    net.set_bus_flux(0, {0.3, 0.3, 0.3});

    // With no injection the bus voltage stays at zero and the flux follows
    // the pure geometric decay (1 - dt/tau)^N; 0.15 s is one time constant.
    std::vector<em::ThreePhase> inj(1);
    for (int k = 0; k < 14400; ++k) net.step(inj, kDt);
    CHECK(net.bus_flux(0).a == doctest::Approx(0.3 * 0.3678666672100608).epsilon(1e-12));
    CHECK(net.bus_voltage(0).max_abs() == 0.0);
}

TEST_CASE("transformer core flux follows the lv bus flux in the linear region") {
    // Stiff Norton source at lv (1 mpu resistor plus matching injection),
    // light resistive load at hv. A hard energization traps a DC flux of up
    // to 0.87 of the drive amplitude in the core (the integral of a cosine
    // started off-peak), so the drive is kept at 0.25 pu: DC plus AC stays
    // inside the 1.2 pu knee and the core never saturates. The core flux and
    // the lv bus flux then agree in fundamental amplitude, and the
    // magnetizing current is psi / l_m0.
    net::Network net(kBase, {"lv", "hv"});
    const double r_src = 0.001;
    net.add_resistor({.id = "src", .bus = 0, .r = r_src});
    net.add_resistor({.id = "load", .bus = 1, .r = 10.0});
    net.add_transformer({.id = "t1", .lv = 0, .hv = 1, .r = 0.002, .l = 0.148});
    net.finalize(kDt);

    const double w = kBase.omega_nom();
    const std::size_t spc = 1600;
    em::CycleWindow win_psi_bus(spc), win_psi_core(spc);
    double i_mag_peak = 0.0;
    std::vector<em::ThreePhase> inj(2);

    for (std::size_t k = 0; k < 4 * spc; ++k) {
        const double t = static_cast<double>(k) * kDt;
        inj[0] = (1.0 / r_src) * em::polar_to_abc(0.25, w * t);
        net.step(inj, kDt);
        if (k >= 3 * spc) {
            win_psi_bus.push(net.bus_flux(0).a);
            win_psi_core.push(net.transformer(0).psi_m.a);
            i_mag_peak = std::max(i_mag_peak, net.transformer(0).i_mag.max_abs());
        }
    }

    const double psi_bus = *win_psi_bus.fundamental_amplitude();
    const double psi_core = *win_psi_core.fundamental_amplitude();
    CHECK(psi_core == doctest::Approx(psi_bus).epsilon(2e-3));
    CHECK(i_mag_peak > 0.0);
    CHECK(i_mag_peak < 0.01);
    CHECK(net.transformer(0).lv_current().finite());
    CHECK(net.transformer_at_lv(0).has_value());
    CHECK(*net.transformer_at_lv(0) == 0);
    CHECK_FALSE(net.transformer_at_lv(1).has_value());
}

TEST_CASE("floating buses are rejected at finalize") {
    net::Network net(kBase, {"a", "b", "c"});
    net.add_resistor({.id = "R", .bus = 0, .r = 1.0});
    net.add_series({.id = "ab", .from = 0, .to = 1, .r = 0.01, .l = 0.1});
    // Bus c has no path anywhere.
    CHECK_THROWS_AS(net.finalize(kDt), ConfigError);
}

TEST_CASE("element parameter validation") {
    net::Network net(kBase, {"a"});
    CHECK_THROWS_AS(net.add_series({.id = "bad", .from = 0, .to = net::kGround,
                                    .r = 0.1, .l = 0.0}),
                    ConfigError);
    CHECK_THROWS_AS(net.add_resistor({.id = "bad", .bus = 0, .r = 0.0}), ConfigError);
    CHECK_THROWS_AS(net.add_shunt({.id = "bad", .bus = 0, .r = 0.1, .b = -1.0}), ConfigError);
    CHECK_THROWS_AS(net.add_switch({.id = "bad", .from = 0, .to = 0,
                                    .r_closed = 1.0, .r_open = 0.5}),
                    ConfigError);
}

TEST_CASE("topology changes refactorize the solve") {
    // Purely resistive network: the DC solution is plain parallel-resistor
    // algebra, checked against the hand-computed divider at every toggle.
    net::Network net(kBase, {"a", "b"});
    net.add_resistor({.id = "Ra", .bus = 0, .r = 2.0});
    net.add_resistor({.id = "Rb", .bus = 1, .r = 1.0});
    const std::size_t sw = net.add_switch({.id = "sw", .from = 0, .to = 1,
                                           .r_closed = 1e-4, .r_open = 1e7});
    const std::size_t flt = net.add_fault({.id = "flt", .bus = 0, .r_on = 1e-4});
    net.finalize(kDt);

    std::vector<em::ThreePhase> inj(2);
    inj[0] = {1.0, 1.0, 1.0};

    auto v_expected = [&](double r_link) {
        // 1 pu injected at a: v_a = Ra || (r_link + Rb).
        return 1.0 / (1.0 / 2.0 + 1.0 / (r_link + 1.0));
    };

    net.step(inj, kDt);
    CHECK(net.bus_voltage(0).a == doctest::Approx(v_expected(1e-4)).epsilon(1e-9));

    net.set_switch_closed(sw, false);
    net.step(inj, kDt);
    CHECK(net.bus_voltage(0).a == doctest::Approx(v_expected(1e7)).epsilon(1e-9));

    net.set_switch_closed(sw, true);
    net.set_fault_active(flt, true);
    net.step(inj, kDt);
    // Fault shorts bus a: everything lands across r_on.
    const double g_total = 1.0 / 2.0 + 1.0 / (1e-4 + 1.0) + 1.0 / 1e-4;
    CHECK(net.bus_voltage(0).a == doctest::Approx(1.0 / g_total).epsilon(1e-9));

    net.set_fault_active(flt, false);
    net.step(inj, kDt);
    CHECK(net.bus_voltage(0).a == doctest::Approx(v_expected(1e-4)).epsilon(1e-9));

    // Load steps re-enter through set_resistance.
    const std::size_t ra = 0;
    net.set_resistance(ra, 4.0);
    net.step(inj, kDt);
    CHECK(net.bus_voltage(0).a ==
          doctest::Approx(1.0 / (1.0 / 4.0 + 1.0 / (1e-4 + 1.0))).epsilon(1e-9));
}

TEST_CASE("network state round trip continues bit for bit") {
    auto build = [] {
        net::Network net(kBase, {"b"});
        net.add_resistor({.id = "R", .bus = 0, .r = 5.0});
        net.add_series({.id = "L", .from = 0, .to = net::kGround, .r = 0.1, .l = 0.5});
        net.add_shunt({.id = "C", .bus = 0, .r = 1.7, .b = 0.05});
        net.finalize(kDt);
        return net;
    };

    net::Network a = build();
    const double w = kBase.omega_nom();
    std::vector<em::ThreePhase> inj(1);
    long long k = 0;
    for (; k < 500; ++k) {
        inj[0] = em::polar_to_abc(1.0, w * static_cast<double>(k) * kDt);
        a.step(inj, kDt);
    }

    nlohmann::json st;
    a.save_state(st);
    net::Network b = build();
    b.load_state(st);

    for (; k < 1000; ++k) {
        inj[0] = em::polar_to_abc(1.0, w * static_cast<double>(k) * kDt);
        a.step(inj, kDt);
        b.step(inj, kDt);
        CHECK(a.bus_voltage(0).a == b.bus_voltage(0).a);
        CHECK(a.bus_flux(0).a == b.bus_flux(0).a);
    }

    nlohmann::json sa, sb;
    a.save_state(sa);
    b.save_state(sb);
    CHECK(sa == sb);
}
