#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fluxsim/em/cycle_window.hpp"

namespace fluxsim::sim {

class Engine;

/// Full-rate run statistics, kept separate from the decimated recorder so
/// peak and ripple numbers never depend on the output decimation.
///
/// Fast quantities (currents, flux) keep their extreme per millisecond of
/// simulated time; slow ones (DC-link voltage) keep one sample per
/// millisecond. Current asymmetry is summarized once per fundamental cycle as
/// mean and fundamental amplitude of each phase over the trailing cycle.
class Metrics {
public:
    explicit Metrics(const Engine& e);

    /// Captures the state the engine holds right now; call once before the
    /// first step and then after every step.
    void on_step(const Engine& e);

    /// Largest |i_L| of any phase of unit `u` with time in [t0, t1].
    [[nodiscard]] double unit_i_peak_in(std::size_t u, double t0, double t1) const;
    /// Largest |i_L| over the whole run and its bucket time.
    [[nodiscard]] double unit_i_peak(std::size_t u) const;
    [[nodiscard]] double unit_i_peak_time(std::size_t u) const;

    [[nodiscard]] double unit_vdc_min_in(std::size_t u, double t0, double t1) const;
    [[nodiscard]] double unit_vdc_max_in(std::size_t u, double t0, double t1) const;
    /// Mean of the per-millisecond DC-link voltage samples in [t0, t1].
    [[nodiscard]] double unit_vdc_mean_in(std::size_t u, double t0, double t1) const;

    /// Worst relative spread of DC-link voltages across all units at any
    /// sample in [t0, t1], normalized by the nominal DC voltage.
    [[nodiscard]] double max_pairwise_vdc_diff(double t0, double t1) const;

    /// Worst per-cycle asymmetry ratio max_phase(|mean| / max(amplitude,
    /// amp_floor)) over cycles ending in [t0, t1].
    [[nodiscard]] double unit_worst_dc_ratio(std::size_t u, double t0, double t1) const;

    /// Largest |zero-sequence| of the unit's bus flux in [t0, t1].
    [[nodiscard]] double unit_flux_zseq_max_in(std::size_t u, double t0, double t1) const;

    [[nodiscard]] double tfmr_i_peak_in(std::size_t x, double t0, double t1) const;
    [[nodiscard]] double tfmr_psi_peak_in(std::size_t x, double t0, double t1) const;
    /// Largest |zero-sequence| of the core flux in the window.
    [[nodiscard]] double tfmr_psi_zseq_max_in(std::size_t x, double t0, double t1) const;

    [[nodiscard]] double kcl_residual_max() const { return kcl_max_; }

    /// Denominator floor for the asymmetry ratio, p.u.
    double amp_floor = 0.05;

    /// Anti-ripple time constant for the currents feeding the asymmetry
    /// windows, seconds. Switching chatter is not periodic in the
    /// fundamental, so unfiltered cycle means pick up an aliasing floor of a
    /// few percent; 1 ms knocks the chatter down ~15x while costing the
    /// 60 Hz component under 8%, and both the mean and the amplitude see the
    /// same filter.
    double ripple_tau = 1e-3;

    /// Summary written next to run artifacts.
    [[nodiscard]] nlohmann::json headline(const Engine& e) const;

private:
    struct CycleStats {
        double t = 0.0;
        double dc[3]{};
        double amp[3]{};
    };
    struct UnitTrack {
        std::string name;
        std::vector<double> i_max;      // per-ms max |i_L|
        std::vector<double> vdc_min;    // per-ms min
        std::vector<double> vdc_max;    // per-ms max
        std::vector<double> vdc;        // per-ms last sample
        std::vector<double> zseq_max;   // per-ms max |bus flux zero seq|
        em::CycleWindow wa, wb, wc;
        double i_filt[3]{};  ///< anti-ripple filtered currents feeding the windows
        std::vector<CycleStats> cycles;
        double peak = 0.0;
        double peak_t = 0.0;
        UnitTrack(std::string n, std::size_t spc)
            : name(std::move(n)), wa(spc), wb(spc), wc(spc) {}
    };
    struct TfmrTrack {
        std::string id;
        std::vector<double> i_max;     // per-ms max |i_lv|
        std::vector<double> psi_max;   // per-ms max |psi|
        std::vector<double> psi0_max;  // per-ms max |zero sequence of psi|
    };

    [[nodiscard]] std::size_t bucket(double t) const;
    void bucket_range(double t0, double t1, std::size_t& b0, std::size_t& b1) const;

    std::size_t spc_;
    std::size_t buckets_;
    double v_dc_nom_;
    std::vector<UnitTrack> units_;
    std::vector<TfmrTrack> tfmrs_;
    double kcl_max_ = 0.0;
    bool primed_ = false;
};

}  // namespace fluxsim::sim
