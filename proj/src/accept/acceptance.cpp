#include "fluxsim/accept/acceptance.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "fluxsim/cfg/scenario.hpp"
#include "fluxsim/ctrl/controllers.hpp"
#include "fluxsim/plant/wpg_plant.hpp"
#include "fluxsim/sim/engine.hpp"
#include "fluxsim/sim/metrics.hpp"

namespace fluxsim::accept {

namespace {

namespace fs = std::filesystem;
using sim::Engine;

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

cfg::Scenario load(const std::string& dir, const char* file) {
    return cfg::load_scenario_file((fs::path(dir) / file).string());
}

/// Applies one controller family to every unit. The voltage-source baseline
/// is always compared without the funnel limiter, which belongs to the
/// flux-tracking scheme.
void set_controller_all(cfg::Scenario& s, const std::string& ctl) {
    for (auto& w : s.wpgs) {
        w.controller = ctl;
        if (ctl == "avscm") w.lbfc.enabled = false;
    }
}

std::unique_ptr<Engine> run_to_end(const cfg::Scenario& sc) {
    auto e = std::make_unique<Engine>(sc);
    e->run();
    return e;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Suite {
    AcceptanceReport report;
    std::ostream& log;

    explicit Suite(std::ostream& l) : log(l) {}

    void add(int id, const std::string& name, bool pass, const std::string& detail) {
        report.results.push_back({id, name, pass, detail});
        log << (pass ? "[PASS] " : "[FAIL] ") << id << ": " << name;
        if (!detail.empty()) log << " (" << detail << ")";
        log << "\n";
        log.flush();
    }
};

}  // namespace

AcceptanceReport run_acceptance(const std::string& scenario_dir, const std::string& work_dir,
                                std::ostream& log) {
    Suite s(log);
    fs::create_directories(work_dir);
    const em::PerUnitBase base{};
    const double om = base.omega_nom();

    // 1. The DC link advances the squared voltage linearly in the power
    //    imbalance, so a constant imbalance must match the closed form
    //    v(t) = sqrt(v0^2 + 2 dP t / C) to rounding error.
    {
        plant::DcLink dc;
        const double dt = 1e-4;
        const int n = 1000;
        for (int k = 0; k < n; ++k) dc.step(150e6, 50e6, dt);
        const double expect = std::sqrt(1110.0 * 1110.0 + 2.0 * 100e6 * (n * dt) / 540.0);
        const double rel = std::fabs(dc.v - expect) / expect;
        s.add(1, "dc-link energy balance matches closed form", rel < 1e-9,
              "rel err " + fmt(rel));
    }

    // 2. The funnel latch: on at the upper boundary, off at the lower one,
    //    holding in between.
    {
        struct Case {
            double e;
            bool q_prev, expect;
        };
        const Case cases[] = {
            {0.31, false, true},  {0.31, true, true},   {0.30, false, true},
            {0.00, false, false}, {0.00, true, true},   {0.29, false, false},
            {-0.29, true, true},  {-0.30, true, false}, {-0.31, false, false},
            {-0.31, true, false},
        };
        int bad = 0;
        for (const auto& c : cases)
            if (ctrl::lbfc_logic(c.e, 0.3, -0.3, c.q_prev) != c.expect) ++bad;
        s.add(2, "funnel latch truth table", bad == 0,
              std::to_string(10 - bad) + "/10 cases");
    }

    // 3. Bang-bang drive of a switched RL branch against a sine disturbance
    //    keeps the error inside the funnel plus one step of slew, for every
    //    combination of disturbance amplitude and initial current.
    {
        const double dt = 1.0 / 96000.0;
        const double l_eff = 0.15 / om;
        const double drive = 1.5, r = 0.003, phi = 0.3;
        bool ok = true;
        std::string worst;
        for (const double vg_amp : {0.3, 0.9, 1.44}) {
            for (const double i0 : {-2.0, 0.0, 2.0}) {
                double i = i0, max_e = 0.0;
                bool q = false, inside = false;
                for (double t = 0.0; t < 0.1; t += dt) {
                    q = ctrl::lbfc_logic(i, phi, -phi, q);
                    const double u = ctrl::lbfc_control(q) == 1 ? drive : -drive;
                    i += dt * (u - vg_amp * std::cos(om * t) - r * i) / l_eff;
                    if (!inside && std::fabs(i) <= phi) inside = true;
                    if (inside) max_e = std::max(max_e, std::fabs(i));
                }
                const double bound = phi + dt * (drive + vg_amp + r * 2.5) / l_eff;
                if (!inside || max_e > bound) {
                    ok = false;
                    worst = "amp " + fmt(vg_amp) + " i0 " + fmt(i0) + " max " + fmt(max_e) +
                            " bound " + fmt(bound);
                }
            }
        }
        s.add(3, "funnel containment on a switched rl branch", ok,
              ok ? "9/9 grid points" : worst);
    }

    // Shared runs: energization + fault scenario under both controllers.
    log << "running energization scenario (flux tracking with funnel)...\n";
    auto sc_en = load(scenario_dir, "energize_fault_bus5.scn");
    sc_en.record_every = 100000;
    auto en_n = run_to_end(sc_en);
    log << "running energization scenario (voltage-source baseline)...\n";
    auto sc_ea = sc_en;
    set_controller_all(sc_ea, "avscm");
    auto en_a = run_to_end(sc_ea);

    // Event times come from the scenario itself so the criteria track it.
    double t_fault = 0.0, t_clear = 0.0, t_close = 0.0;
    for (const auto& ev : sc_en.events) {
        if (ev.kind == cfg::EventKind::fault_on) t_fault = ev.t;
        if (ev.kind == cfg::EventKind::fault_off) t_clear = ev.t;
        if (ev.kind == cfg::EventKind::breaker_close) t_close = ev.t;
    }

    // 4. The funnel takes over within 2 ms of the fault and holds the bridge
    //    current small until the fault clears; the baseline has no limiter
    //    and lets the fault current through. The hold window ends one
    //    millisecond bucket before the clearing instant so the recovery kick
    //    at voltage restoration is not charged against the hold.
    {
        const auto& u1 = en_n->wpg(0);
        const bool engaged = u1.engaged_at >= t_fault && u1.engaged_at <= t_fault + 0.002;
        const double held =
            engaged ? en_n->metrics().unit_i_peak_in(0, u1.engaged_at + 0.002, t_clear - 0.001)
                    : 1e9;
        const double base_peak = en_a->metrics().unit_i_peak_in(0, t_fault, t_clear + 0.05);
        const bool pass = engaged && held <= 0.5 && base_peak >= 5.0;
        s.add(4, "fault current limited by funnel takeover", pass,
              "engaged at " + fmt(u1.engaged_at) + " s, held " + fmt(held) +
                  " pu, baseline peak " + fmt(base_peak) + " pu");
    }

    // 5. Energizing the transformer holding residual flux: flux tracking
    //    avoids inrush and brings the node flux-linkage back to three-phase
    //    symmetry, the voltage-source baseline saturates the core and draws
    //    inrush. The symmetry check reads the bus flux (the controlled
    //    quantity): a three-wire bridge has no zero-sequence authority over
    //    the core itself, whose trapped zero-sequence can only drain through
    //    the grounded grid side after interconnection.
    {
        const double inrush_n = en_n->metrics().tfmr_i_peak_in(0, 0.0, t_close);
        const double inrush_a = en_a->metrics().tfmr_i_peak_in(0, 0.0, t_close);
        const double zseq = en_n->metrics().unit_flux_zseq_max_in(0, 0.3, t_close);
        const bool pass = inrush_n < 1.2 && inrush_a > 2.0 && zseq < 0.05;
        s.add(5, "energization without inrush under flux tracking", pass,
              "flux-tracking peak " + fmt(inrush_n) + " pu, baseline peak " + fmt(inrush_a) +
                  " pu, node flux zero-seq " + fmt(zseq) + " pu");
    }

    // Shared runs: load-step scenario under both controllers.
    log << "running load-step scenario (flux tracking)...\n";
    auto sc_ln = load(scenario_dir, "loadstep_bus9.scn");
    sc_ln.record_every = 100000;
    auto ls_n = run_to_end(sc_ln);
    log << "running load-step scenario (voltage-source baseline)...\n";
    auto sc_la = sc_ln;
    set_controller_all(sc_la, "avscm");
    auto ls_a = run_to_end(sc_la);

    // 6. After the load step every DC-link voltage settles to a common value
    //    below nominal: the units share the burden and none is left behind.
    {
        const double diff = ls_n->metrics().max_pairwise_vdc_diff(7.0, 7.5);
        bool below = true;
        std::string means;
        for (std::size_t u = 0; u < ls_n->wpg_count(); ++u) {
            const double m = ls_n->metrics().unit_vdc_mean_in(u, 7.0, 7.5);
            below = below && m < ls_n->base().v_base_dc;
            means += (u ? "/" : "") + fmt(m);
        }
        const bool pass = diff < 0.005 && below;
        s.add(6, "dc-link voltages synchronize after load step", pass,
              "pairwise spread " + fmt(diff * 100) + " % of nominal, means " + means + " V");
    }

    // 7. Flux tracking leaves no sustained DC component in the bridge
    //    currents; the voltage-source baseline does.
    {
        const auto& mn = ls_n->metrics();
        const auto& ma = ls_a->metrics();
        double worst_n = 0.0;
        for (std::size_t u = 0; u < ls_n->wpg_count(); ++u) {
            worst_n = std::max(worst_n, mn.unit_worst_dc_ratio(u, 1.0, 2.0));
            worst_n = std::max(worst_n, mn.unit_worst_dc_ratio(u, 2.5, 7.5));
        }
        double worst_a = 0.0;
        for (std::size_t u = 0; u < ls_a->wpg_count(); ++u)
            worst_a = std::max(worst_a, ma.unit_worst_dc_ratio(u, 2.0, 7.5));
        const bool pass = worst_n < 0.04 && worst_a > 0.05;
        s.add(7, "flux control rejects sustained dc current", pass,
              "flux-tracking worst " + fmt(worst_n * 100) + " %, baseline worst " +
                  fmt(worst_a * 100) + " %");
    }

    // 8. Direction conventions: power surplus raises the DC voltage, a high
    //    DC voltage advances the reference angle, the governor absorbs on
    //    overvoltage, and the magnitude loop raises a sagging reference.
    {
        bool ok = true;
        std::string which;
        {
            plant::DcLink a, b;
            a.step(10e6, 0.0, 1e-3);
            b.step(0.0, 10e6, 1e-3);
            if (!(a.v > 1110.0 && b.v < 1110.0)) { ok = false; which += " dc-link"; }
        }
        {
            ctrl::PhaseLoop pl;
            pl.step(1150.0, 1e-3);
            if (!(pl.delta_theta > 0.0)) { ok = false; which += " phase-loop"; }
        }
        {
            plant::Governor g;
            double cmd = 0.0;
            for (int k = 0; k < 100; ++k) cmd = g.step(0.05, 1e-3);
            if (!(cmd < 0.0)) { ok = false; which += " governor"; }
        }
        {
            ctrl::MagnitudeLoop ml;
            ml.seed(1.0);
            double m0 = ml.applied, m1 = 0.0;
            for (int k = 0; k < 100; ++k) m1 = ml.step(0.9, 1e-3);
            if (!(m1 > m0)) { ok = false; which += " magnitude-loop"; }
        }
        s.add(8, "control direction conventions", ok, ok ? "4/4 signs" : "wrong:" + which);
    }

    // 9. Bit-identical reruns: identical configuration twice, byte-equal CSV
    //    both for the load-step system (through its event) and the
    //    energization system (through breaker and dispatch events).
    {
        auto bytes_equal = [&](const cfg::Scenario& sc, const char* tag) {
            auto a = std::make_unique<Engine>(sc);
            a->run();
            const fs::path pa = fs::path(work_dir) / (std::string(tag) + "_a.csv");
            a->recorder().write_csv(pa.string());
            auto b = std::make_unique<Engine>(sc);
            b->run();
            const fs::path pb = fs::path(work_dir) / (std::string(tag) + "_b.csv");
            b->recorder().write_csv(pb.string());
            return slurp(pa) == slurp(pb);
        };
        auto sc1 = load(scenario_dir, "loadstep_bus9.scn");
        sc1.t_end = 2.5;
        sc1.record_every = 32;
        auto sc2 = load(scenario_dir, "energize_fault_bus5.scn");
        sc2.t_end = 1.0;
        sc2.record_every = 32;
        log << "running determinism reruns...\n";
        const bool eq1 = bytes_equal(sc1, "rerun_loadstep");
        const bool eq2 = bytes_equal(sc2, "rerun_energize");
        s.add(9, "bit-identical reruns", eq1 && eq2,
              std::string("load-step ") + (eq1 ? "equal" : "differs") + ", energization " +
                  (eq2 ? "equal" : "differs"));
    }

    // 10. Halving the step size leaves the settled DC-link voltages within
    //     0.1% of nominal of each other: the discretization is converged at
    //     the operating step size.
    {
        log << "running half-step convergence check...\n";
        auto sc_half = sc_ln;
        sc_half.dt = sc_ln.dt / 2.0;
        auto half = run_to_end(sc_half);
        double worst = 0.0;
        for (std::size_t u = 0; u < ls_n->wpg_count(); ++u) {
            const double a = ls_n->metrics().unit_vdc_mean_in(u, 7.0, 7.5);
            const double b = half->metrics().unit_vdc_mean_in(u, 7.0, 7.5);
            worst = std::max(worst, std::fabs(a - b) / ls_n->base().v_base_dc);
        }
        s.add(10, "step-size convergence of settled voltages", worst < 0.001,
              "max settle shift " + fmt(worst * 100) + " % of nominal");
    }

    // Negative controls: break the mechanism under test and verify the
    // criterion machinery notices. A passing control means the mutated
    // system fails the guarded property.
    {
        log << "running negative control (disarmed funnel)...\n";
        auto sc = load(scenario_dir, "energize_fault_bus5.scn");
        sc.record_every = 100000;
        sc.t_end = t_clear + 0.25;
        for (auto& w : sc.wpgs) w.lbfc.gamma = 1e9;
        auto e = run_to_end(sc);
        const bool never_engaged = e->wpg(0).engaged_at < 0.0;
        const double peak = e->metrics().unit_i_peak_in(0, t_fault, sc.t_end);
        const bool pass = never_engaged && peak > 1.75;
        s.add(11, "control: disarmed funnel lets fault current through", pass,
              "peak " + fmt(peak) + " pu without takeover");
    }
    {
        log << "running negative control (zero sync gain)...\n";
        auto sc = load(scenario_dir, "loadstep_bus9.scn");
        sc.record_every = 100000;
        sc.t_end = 3.0;
        sc.wpgs.at(1).k_sync = 0.0;
        auto e = run_to_end(sc);
        const double diff = e->metrics().max_pairwise_vdc_diff(2.5, 3.0);
        s.add(12, "control: zero sync gain breaks voltage agreement", diff >= 0.005,
              "pairwise spread " + fmt(diff * 100) + " % of nominal");
    }

    return s.report;
}

}  // namespace fluxsim::accept
