#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fluxsim/ctrl/controllers.hpp"
#include "fluxsim/em/cycle_window.hpp"

using namespace fluxsim;

namespace {
constexpr double kDt = 1.0 / 96000.0;
constexpr double kOmega = 2.0 * std::numbers::pi * 60.0;
}  // namespace

TEST_CASE("phase loop integrates the squared DC voltage error") {
    ctrl::PhaseLoop pl{};

    SUBCASE("nominal voltage leaves the offset untouched") {
        for (int k = 0; k < 9600; ++k) pl.step(1110.0, kDt);
        CHECK(pl.delta_theta == 0.0);
        CHECK(pl.theta(kOmega, 0.25) == doctest::Approx(kOmega * 0.25));
    }

    SUBCASE("a 2% squared error advances at k_i times that") {
        const double v = 1110.0 * std::sqrt(1.02);
        for (int k = 0; k < 9600; ++k) pl.step(v, kDt);  // 0.1 s
        CHECK(pl.last_rate == doctest::Approx(10.0 * 0.02).epsilon(1e-9));
        CHECK(pl.delta_theta == doctest::Approx(0.02).epsilon(1e-6));
    }
}

TEST_CASE("magnitude loop soft-starts and bounds its windup") {
    ctrl::MagnitudeLoop ml{};
    CHECK(ml.applied == doctest::Approx(0.2));

    // A full second with the terminal voltage dead: the limiter caps the
    // integrator input at err_lim, so the accumulated windup is exactly
    // k * err_lim * t = 0.2 * 0.05 * 1 = 0.01 instead of k * 1 * t = 0.2.
    double applied = 0.0;
    for (int k = 0; k < 96000; ++k) applied = ml.step(0.0, kDt);
    CHECK(ml.integ == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(applied <= ml.hi);
    CHECK(applied == doctest::Approx(1.0 + ml.integ).epsilon(1e-6));

    SUBCASE("slew rate limits the applied reference") {
        ctrl::MagnitudeLoop fresh{};
        double prev = fresh.applied;
        for (int k = 0; k < 2000; ++k) {
            const double now = fresh.step(1.0, kDt);
            CHECK(std::fabs(now - prev) <= fresh.ramp * kDt * (1.0 + 1e-12));
            prev = now;
        }
    }

    SUBCASE("seed clamps into the allowed range") {
        ctrl::MagnitudeLoop fresh{};
        fresh.seed(5.0);
        CHECK(fresh.applied == doctest::Approx(fresh.hi));
        fresh.seed(0.0);
        CHECK(fresh.applied == doctest::Approx(fresh.lo));
    }
}

TEST_CASE("flux tracker integrates with a slow DC washout") {
    SUBCASE("a seeded offset drains geometrically") {
        ctrl::FluxTracker ft{};
        ft.seed({1.0, 0.0, 0.0});
        for (int k = 0; k < 14400; ++k) ft.advance({}, kOmega, kDt);  // 0.15 s
        CHECK(ft.psi.a == doctest::Approx(0.3678666672100608).epsilon(1e-12));
        CHECK(ft.psi.b == 0.0);
    }

    SUBCASE("the fundamental passes essentially unattenuated") {
        // Washout pole at 1/0.15 s against 377 rad/s: amplitude ratio
        // 1/sqrt(1 + (1/(w tau))^2) = 0.9998437 relative to a pure integral.
        ctrl::FluxTracker ft{};
        em::CycleWindow win(1600);
        for (int k = 0; k < 4 * 1600; ++k) {
            const double t = k * kDt;
            ft.advance(em::polar_to_abc(1.0, kOmega * t), kOmega, kDt);
            if (k >= 3 * 1600) win.push(ft.psi.a);
        }
        CHECK(*win.fundamental_amplitude() ==
              doctest::Approx(0.9998436768117505).epsilon(5e-4));
    }
}

TEST_CASE("flux controller locks onto a rotating voltage") {
    // Open-loop drive: the PCC voltage leads the flux position by a quarter
    // period, so the measured flux integral lines up with the reference once
    // the start-up DC has washed out and the exciter has ramped. The
    // remaining error is the washout phase lead (about 0.018 rad).
    ctrl::Nfscm c{};
    ctrl::Measurements m{};
    m.v_dc = 1110.0;

    for (int k = 0; k < 72000; ++k) {  // 0.75 s
        const double t = k * kDt;
        m.v_pcc = em::polar_to_abc(1.0, kOmega * t + 0.5 * std::numbers::pi);
        m.u_c = m.v_pcc;
        c.step(m, kOmega, t, kDt);
    }
    CHECK(em::vector_magnitude(c.last_error()) < 0.05);
    CHECK(c.mag.applied == doctest::Approx(1.0).epsilon(0.01));
    CHECK(c.v_t_filt == doctest::Approx(1.0).epsilon(0.001));
}

TEST_CASE("held references freeze the integrators but not the clock") {
    ctrl::Nfscm c{};
    ctrl::Measurements m{};
    m.v_dc = 1200.0;  // well above nominal: would wind the angle forward
    m.v_pcc = em::polar_to_abc(0.2, 0.0);
    m.u_c = m.v_pcc;

    for (int k = 0; k < 100; ++k) c.step(m, kOmega, k * kDt, kDt);
    const double delta_before = c.phase.delta_theta;
    const double mag_before = c.mag.applied;
    const double integ_before = c.mag.integ;
    const em::ThreePhase psi_before = c.flux.psi;
    CHECK(delta_before > 0.0);

    for (int k = 100; k < 200; ++k) c.step(m, kOmega, k * kDt, kDt, true);
    CHECK(c.phase.delta_theta == delta_before);
    CHECK(c.mag.applied == mag_before);
    CHECK(c.mag.integ == integ_before);
    // The measured-flux integral keeps running while the bridge is away.
    CHECK(c.flux.psi.a != psi_before.a);

    SUBCASE("reseed points the tracker wherever told") {
        c.reseed_flux({0.5, -0.25, 0.125});
        CHECK(c.flux.psi.a == 0.5);
        CHECK(c.flux.psi.b == -0.25);
        CHECK(c.flux.psi.c == 0.125);
    }
}

TEST_CASE("funnel latch truth table") {
    // Membership latch: on at or above the upper bound, off at or below the
    // lower bound, previous state anywhere between.
    CHECK(ctrl::lbfc_logic(0.30, 0.3, -0.3, false));
    CHECK(ctrl::lbfc_logic(0.31, 0.3, -0.3, false));
    CHECK_FALSE(ctrl::lbfc_logic(0.29, 0.3, -0.3, false));
    CHECK(ctrl::lbfc_logic(0.29, 0.3, -0.3, true));
    CHECK(ctrl::lbfc_logic(-0.29, 0.3, -0.3, true));
    CHECK_FALSE(ctrl::lbfc_logic(-0.30, 0.3, -0.3, true));
    CHECK_FALSE(ctrl::lbfc_logic(-0.31, 0.3, -0.3, true));
    CHECK_FALSE(ctrl::lbfc_logic(0.0, 0.3, -0.3, false));
    CHECK(ctrl::lbfc_logic(0.0, 0.3, -0.3, true));
    CHECK_FALSE(ctrl::lbfc_logic(-0.31, 0.3, -0.3, false));

    // Inside-from-above pulls down (upper arm off), otherwise push up.
    CHECK(ctrl::lbfc_control(true) == 0);
    CHECK(ctrl::lbfc_control(false) == 1);
}

TEST_CASE("per-phase funnel controller is independent across phases") {
    ctrl::Lbfc f{};
    // Phase a crosses the upper bound, phase b stays inside, phase c starts
    // below the lower bound.
    inv::SwitchState s = f.step({0.35, 0.1, -0.4});
    CHECK_FALSE(s.a);  // latched high -> pull down
    CHECK(s.b);        // never latched -> push up
    CHECK(s.c);        // below band -> push up
    // Hysteresis: phase a keeps pulling down until it reaches the lower bound.
    s = f.step({0.0, 0.1, -0.1});
    CHECK_FALSE(s.a);
    s = f.step({-0.3, 0.1, 0.35});
    CHECK(s.a);
    CHECK_FALSE(s.c);

    SUBCASE("a nonzero reference shifts the funnel") {
        ctrl::Lbfc g{};
        const inv::SwitchState r = g.step({0.5, 0.0, 0.0}, {0.4, 0.0, 0.0});
        CHECK(r.a);  // error 0.1 is inside the band, no latch
    }
}

TEST_CASE("mode switcher trips on overcurrent and releases on voltage recovery") {
    const std::size_t spc = 1600;
    ctrl::ModeSwitcher sw(true, spc);
    CHECK(sw.mode() == ctrl::ControlMode::flux_sync);

    // Below the threshold nothing happens.
    CHECK(sw.step({1.7, -1.2, 0.4}, {1.0, -0.5, -0.5}, kOmega, kDt) ==
          ctrl::ControlMode::flux_sync);

    // Any phase at or past gamma = 1.75 arms the funnel immediately.
    CHECK(sw.step({-1.8, 0.2, 0.2}, {0.0, 0.0, 0.0}, kOmega, kDt) ==
          ctrl::ControlMode::current_funnel);

    SUBCASE("collapsed voltage holds the funnel") {
        for (std::size_t k = 0; k < 3 * spc; ++k) {
            sw.step({0.1, 0.1, 0.1}, em::polar_to_abc(0.3, kOmega * k * kDt), kOmega, kDt);
            CHECK_FALSE(sw.handed_back());
        }
        CHECK(sw.mode() == ctrl::ControlMode::current_funnel);
    }

    SUBCASE("recovered voltage hands back after one clean cycle") {
        long long handback_step = -1;
        for (std::size_t k = 0; k < 3 * spc; ++k) {
            sw.step({0.1, 0.1, 0.1}, em::polar_to_abc(0.8, kOmega * k * kDt), kOmega, kDt);
            if (sw.handed_back()) {
                handback_step = static_cast<long long>(k);
                break;
            }
        }
        REQUIRE(handback_step > 0);
        // The voltage-integral proxy needs one full cycle gathered inside
        // the funnel before the excursion test can clear.
        CHECK(handback_step >= static_cast<long long>(spc) - 1);
        CHECK(handback_step <= static_cast<long long>(spc) + 64);
        CHECK(sw.mode() == ctrl::ControlMode::flux_sync);
    }

    SUBCASE("state round trip resumes mid-funnel") {
        ctrl::ModeSwitcher a = sw;
        for (int k = 0; k < 800; ++k)
            a.step({0.1, 0.1, 0.1}, em::polar_to_abc(0.8, kOmega * k * kDt), kOmega, kDt);

        nlohmann::json st;
        a.save_state(st);
        ctrl::ModeSwitcher b(true, spc);
        b.load_state(st);

        long long ha = -1, hb = -1;
        for (int k = 800; k < 4000; ++k) {
            const em::ThreePhase v = em::polar_to_abc(0.8, kOmega * k * kDt);
            a.step({0.1, 0.1, 0.1}, v, kOmega, kDt);
            b.step({0.1, 0.1, 0.1}, v, kOmega, kDt);
            if (a.handed_back() && ha < 0) ha = k;
            if (b.handed_back() && hb < 0) hb = k;
        }
        CHECK(ha > 0);
        CHECK(ha == hb);
    }
}

TEST_CASE("mode switcher without a funnel stage never trips") {
    ctrl::ModeSwitcher sw(false, 1600);
    CHECK_FALSE(sw.lbfc_available());
    for (int k = 0; k < 100; ++k)
        CHECK(sw.step({9.0, -9.0, 9.0}, {0.0, 0.0, 0.0}, kOmega, kDt) ==
              ctrl::ControlMode::flux_sync);
}

TEST_CASE("voltage-source baseline tracks a quarter period ahead") {
    // Feeding back a capacitor voltage that leads the flux position by 90
    // degrees is exactly what the baseline asks for, so its error collapses
    // once the exciter has ramped.
    ctrl::Avscm c{};
    ctrl::Measurements m{};
    m.v_dc = 1110.0;

    for (int k = 0; k < 48000; ++k) {  // 0.5 s
        const double t = k * kDt;
        m.u_c = em::polar_to_abc(1.0, kOmega * t + 0.5 * std::numbers::pi);
        m.v_pcc = m.u_c;
        c.step(m, kOmega, t, kDt);
    }
    CHECK(em::vector_magnitude(c.last_error()) < 0.02);
    CHECK(c.mag.applied == doctest::Approx(1.0).epsilon(0.01));

    nlohmann::json st;
    c.save_state(st);
    ctrl::Avscm d{};
    d.load_state(st);
    nlohmann::json st2;
    d.save_state(st2);
    CHECK(st == st2);
}

TEST_CASE("flux controller state round trip is exact") {
    ctrl::Nfscm a{};
    ctrl::Measurements m{};
    m.v_dc = 1118.0;
    for (int k = 0; k < 5000; ++k) {
        const double t = k * kDt;
        m.v_pcc = em::polar_to_abc(0.9, kOmega * t + 0.5 * std::numbers::pi);
        m.u_c = m.v_pcc;
        a.step(m, kOmega, t, kDt);
    }

    nlohmann::json st;
    a.save_state(st);
    ctrl::Nfscm b{};
    b.load_state(st);

    for (int k = 5000; k < 6000; ++k) {
        const double t = k * kDt;
        m.v_pcc = em::polar_to_abc(0.9, kOmega * t + 0.5 * std::numbers::pi);
        m.u_c = m.v_pcc;
        const inv::SwitchState sa = a.step(m, kOmega, t, kDt);
        const inv::SwitchState sb = b.step(m, kOmega, t, kDt);
        CHECK(sa == sb);
    }
    CHECK(a.flux.psi.a == b.flux.psi.a);
    CHECK(a.phase.delta_theta == b.phase.delta_theta);
}
