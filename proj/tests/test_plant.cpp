#include <doctest.h>

#include <cmath>

#include "fluxsim/errors.hpp"
#include "fluxsim/plant/wpg_plant.hpp"

using namespace fluxsim;

namespace {
constexpr double kDt = 1.0 / 96000.0;
}

TEST_CASE("dc link follows the squared-voltage closed form") {
    // C v dv/dt = p_me - p_e is linear in u = v^2:
    // u(t) = u0 + 2 (p_me - p_e) t / C, exact for constant imbalance.
    plant::DcLink dc{};
    const int n = 9600;  // 0.1 s
    for (int k = 0; k < n; ++k) dc.step(150e6, 100e6, kDt);
    CHECK(dc.v == doctest::Approx(1118.31056443124).epsilon(1e-9));
    CHECK(dc.dv_norm() == doctest::Approx((dc.v - 1110.0) / 1110.0));
    CHECK(dc.dv_sq_norm() ==
          doctest::Approx((dc.v * dc.v - 1110.0 * 1110.0) / (1110.0 * 1110.0)));

    SUBCASE("discharge below zero energy faults") {
        plant::DcLink drained{};
        CHECK_THROWS_AS(
            {
                for (int k = 0; k < 96000; ++k) drained.step(0.0, 8000e6, kDt);
            },
            SimulationFault);
    }
}

TEST_CASE("machine surrogate tracks with its time constant and saturates") {
    plant::MachineSurrogate m{};
    m.p_ref = 400e6;
    for (int k = 0; k < 48000; ++k) m.step(kDt);  // one time constant
    CHECK(m.p / m.p_ref == doctest::Approx(0.6321243909393337).epsilon(1e-9));

    SUBCASE("rating clamp") {
        plant::MachineSurrogate hot{};
        hot.p_ref = 2000e6;
        for (int k = 0; k < 96000 * 5; ++k) hot.step(kDt);  // ten time constants
        CHECK(hot.p <= 800e6);
        CHECK(hot.p == doctest::Approx(800e6).epsilon(1e-4));
    }

    SUBCASE("negative references clamp to zero") {
        plant::MachineSurrogate rev{};
        rev.p = 100e6;
        rev.p_ref = -500e6;
        for (int k = 0; k < 96000 * 5; ++k) rev.step(kDt);
        CHECK(rev.p >= 0.0);
        CHECK(rev.p < 1e4);
    }
}

TEST_CASE("governor droop signs and rating clamp") {
    plant::Governor g{};

    SUBCASE("overvoltage commands absorption") {
        double cmd = 0.0;
        for (int k = 0; k < 2000; ++k) cmd = g.step(0.01, kDt);
        CHECK(cmd < 0.0);
    }

    SUBCASE("undervoltage commands injection") {
        double cmd = 0.0;
        for (int k = 0; k < 2000; ++k) cmd = g.step(-0.01, kDt);
        CHECK(cmd > 0.0);
    }

    SUBCASE("command magnitude never exceeds the storage rating") {
        double worst = 0.0;
        for (int k = 0; k < 20000; ++k)
            worst = std::max(worst, std::fabs(g.step(-0.5, kDt)));
        CHECK(worst <= 300e6 / 1110.0 + 1e-9);
        CHECK(worst == doctest::Approx(300e6 / 1110.0).epsilon(1e-6));
    }

    SUBCASE("disabled governor is silent") {
        plant::Governor off{};
        off.enabled = false;
        CHECK(off.step(-0.5, kDt) == 0.0);
    }
}

TEST_CASE("storage boost equilibrium and current tracking") {
    plant::StorageBoost b{};

    SUBCASE("nominal duty balances the storage voltage") {
        // 1 - v_storage / v_dc = 1 - 899.1/1110 = duty_nom, so at nominal
        // DC voltage and zero reference the inductor current stays parked.
        for (int k = 0; k < 9600; ++k) b.step(0.0, 1110.0, kDt);
        CHECK(std::fabs(b.i) < 1e-6);
        CHECK(b.duty == doctest::Approx(0.19).epsilon(1e-12));
    }

    SUBCASE("current reference is tracked first order") {
        // Inner loop linearizes to di/dt = (v_dc k_duty / l)(i_ref - i),
        // tau = 0.0012 / (1110 * 1e-4) = 10.8 ms; 0.1 s is over nine taus.
        const double i_ref = 5000.0;
        for (int k = 0; k < 9600; ++k) b.step(i_ref, 1110.0, kDt);
        CHECK(b.i == doctest::Approx(i_ref).epsilon(2e-4));
    }

    SUBCASE("exchanged power is clamped at the rating") {
        for (int k = 0; k < 96000; ++k) b.step(5e6, 1110.0, kDt);
        CHECK(std::fabs(b.i * 1110.0) <= 300e6 * (1.0 + 1e-12));
    }
}

TEST_CASE("plant state round trip is exact") {
    plant::WpgPlant a{};
    a.i_s_ref = 1234.5;
    a.machine.p_ref = 300e6;
    for (int k = 0; k < 5000; ++k) a.step(280e6, a.dc.dv_norm(), kDt);

    nlohmann::json st;
    a.save_state(st);
    plant::WpgPlant b{};
    b.load_state(st);

    nlohmann::json st2;
    b.save_state(st2);
    CHECK(st == st2);

    // Both copies must continue identically.
    for (int k = 0; k < 1000; ++k) {
        a.step(285e6, a.dc.dv_norm(), kDt);
        b.step(285e6, b.dc.dv_norm(), kDt);
    }
    CHECK(a.dc.v == b.dc.v);
    CHECK(a.boost.i == b.boost.i);
}
