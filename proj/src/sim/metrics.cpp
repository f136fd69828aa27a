#include "fluxsim/sim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "fluxsim/em/integrate.hpp"
#include "fluxsim/sim/engine.hpp"

namespace fluxsim::sim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

Metrics::Metrics(const Engine& e)
    : spc_(e.scenario().steps_per_cycle()),
      buckets_(static_cast<std::size_t>(
                   std::ceil(static_cast<double>(e.total_steps()) * e.dt() * 1000.0)) +
               1),
      v_dc_nom_(e.base().v_base_dc) {
    for (std::size_t u = 0; u < e.wpg_count(); ++u) {
        UnitTrack t(e.wpg(u).name, spc_);
        t.i_max.assign(buckets_, 0.0);
        t.vdc_min.assign(buckets_, kInf);
        t.vdc_max.assign(buckets_, -kInf);
        t.vdc.assign(buckets_, kNaN);
        t.zseq_max.assign(buckets_, 0.0);
        units_.push_back(std::move(t));
    }
    for (std::size_t x = 0; x < e.network().transformer_count(); ++x) {
        TfmrTrack t;
        t.id = e.network().transformer(x).id;
        t.i_max.assign(buckets_, 0.0);
        t.psi_max.assign(buckets_, 0.0);
        t.psi0_max.assign(buckets_, 0.0);
        tfmrs_.push_back(std::move(t));
    }
}

std::size_t Metrics::bucket(double t) const {
    const auto b = static_cast<long long>(t * 1000.0);
    if (b < 0) return 0;
    return std::min(static_cast<std::size_t>(b), buckets_ - 1);
}

void Metrics::bucket_range(double t0, double t1, std::size_t& b0, std::size_t& b1) const {
    b0 = bucket(t0);
    b1 = bucket(t1);
    if (b1 < b0) std::swap(b0, b1);
}

void Metrics::on_step(const Engine& e) {
    const double t = e.time();
    const std::size_t b = bucket(t);
    const bool cycle_edge = e.step_index() > 0 && e.step_index() % spc_ == 0;

    for (std::size_t i = 0; i < units_.size(); ++i) {
        auto& tr = units_[i];
        const WpgUnit& u = e.wpg(i);
        const double im = u.inverter.i_l().max_abs();
        tr.i_max[b] = std::max(tr.i_max[b], im);
        if (im > tr.peak) {
            tr.peak = im;
            tr.peak_t = t;
        }
        const double v = u.plant.dc.v;
        tr.vdc_min[b] = std::min(tr.vdc_min[b], v);
        tr.vdc_max[b] = std::max(tr.vdc_max[b], v);
        tr.vdc[b] = v;
        tr.zseq_max[b] = std::max(
            tr.zseq_max[b], std::fabs(e.network().bus_flux(u.bus).zero_sequence()));

        const double dt = e.dt();
        tr.i_filt[0] = em::low_pass_step(tr.i_filt[0], u.inverter.i_l().a, ripple_tau, dt);
        tr.i_filt[1] = em::low_pass_step(tr.i_filt[1], u.inverter.i_l().b, ripple_tau, dt);
        tr.i_filt[2] = em::low_pass_step(tr.i_filt[2], u.inverter.i_l().c, ripple_tau, dt);
        tr.wa.push(tr.i_filt[0]);
        tr.wb.push(tr.i_filt[1]);
        tr.wc.push(tr.i_filt[2]);
        if (cycle_edge && tr.wa.filled()) {
            CycleStats cs;
            cs.t = t;
            cs.dc[0] = *tr.wa.mean();
            cs.dc[1] = *tr.wb.mean();
            cs.dc[2] = *tr.wc.mean();
            cs.amp[0] = *tr.wa.fundamental_amplitude();
            cs.amp[1] = *tr.wb.fundamental_amplitude();
            cs.amp[2] = *tr.wc.fundamental_amplitude();
            tr.cycles.push_back(cs);
        }
    }

    for (std::size_t x = 0; x < tfmrs_.size(); ++x) {
        auto& tr = tfmrs_[x];
        const auto& tf = e.network().transformer(x);
        tr.i_max[b] = std::max(tr.i_max[b], tf.lv_current().max_abs());
        tr.psi_max[b] = std::max(tr.psi_max[b], tf.psi_m.max_abs());
        tr.psi0_max[b] = std::max(tr.psi0_max[b], std::fabs(tf.psi_m.zero_sequence()));
    }

    kcl_max_ = std::max(kcl_max_, e.network().last_kcl_residual());
}

double Metrics::unit_i_peak_in(std::size_t u, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, units_.at(u).i_max[b]);
    return m;
}

double Metrics::unit_flux_zseq_max_in(std::size_t u, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, units_.at(u).zseq_max[b]);
    return m;
}

double Metrics::unit_i_peak(std::size_t u) const { return units_.at(u).peak; }
double Metrics::unit_i_peak_time(std::size_t u) const { return units_.at(u).peak_t; }

double Metrics::unit_vdc_min_in(std::size_t u, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = kInf;
    for (std::size_t b = b0; b <= b1; ++b) m = std::min(m, units_.at(u).vdc_min[b]);
    return m;
}

double Metrics::unit_vdc_max_in(std::size_t u, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = -kInf;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, units_.at(u).vdc_max[b]);
    return m;
}

double Metrics::unit_vdc_mean_in(std::size_t u, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t b = b0; b <= b1; ++b) {
        const double v = units_.at(u).vdc[b];
        if (std::isfinite(v)) {
            sum += v;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : kNaN;
}

double Metrics::max_pairwise_vdc_diff(double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double worst = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) {
        double lo = kInf, hi = -kInf;
        bool all = true;
        for (const auto& tr : units_) {
            const double v = tr.vdc[b];
            if (!std::isfinite(v)) {
                all = false;
                break;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (all && !units_.empty()) worst = std::max(worst, (hi - lo) / v_dc_nom_);
    }
    return worst;
}

double Metrics::unit_worst_dc_ratio(std::size_t u, double t0, double t1) const {
    double worst = 0.0;
    for (const auto& cs : units_.at(u).cycles) {
        if (cs.t < t0 || cs.t > t1) continue;
        for (int ph = 0; ph < 3; ++ph)
            worst = std::max(worst, std::fabs(cs.dc[ph]) / std::max(cs.amp[ph], amp_floor));
    }
    return worst;
}

double Metrics::tfmr_i_peak_in(std::size_t x, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, tfmrs_.at(x).i_max[b]);
    return m;
}

double Metrics::tfmr_psi_peak_in(std::size_t x, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, tfmrs_.at(x).psi_max[b]);
    return m;
}

double Metrics::tfmr_psi_zseq_max_in(std::size_t x, double t0, double t1) const {
    std::size_t b0, b1;
    bucket_range(t0, t1, b0, b1);
    double m = 0.0;
    for (std::size_t b = b0; b <= b1; ++b) m = std::max(m, tfmrs_.at(x).psi0_max[b]);
    return m;
}

nlohmann::json Metrics::headline(const Engine& e) const {
    nlohmann::json j;
    j["t_end"] = e.time();
    j["steps"] = e.step_index();
    j["kcl_residual_max"] = kcl_max_;
    const double t1 = e.time();
    j["units"] = nlohmann::json::array();
    for (std::size_t i = 0; i < units_.size(); ++i) {
        const WpgUnit& u = e.wpg(i);
        j["units"].push_back(
            {{"name", u.name},
             {"controller", u.kind == ControllerKind::avscm ? "avscm" : "nfscm"},
             {"i_peak_pu", unit_i_peak(i)},
             {"i_peak_t", unit_i_peak_time(i)},
             {"v_dc_min", unit_vdc_min_in(i, 0.0, t1)},
             {"v_dc_max", unit_vdc_max_in(i, 0.0, t1)},
             {"v_dc_final", u.plant.dc.v},
             {"funnel_engaged_at", u.engaged_at},
             {"funnel_handback_at", u.handback_at},
             {"funnel_entries", u.funnel_entries},
             {"worst_dc_ratio_after_1s", t1 > 1.0 ? unit_worst_dc_ratio(i, 1.0, t1) : kNaN}});
    }
    j["transformers"] = nlohmann::json::array();
    for (std::size_t x = 0; x < tfmrs_.size(); ++x) {
        j["transformers"].push_back({{"id", tfmrs_[x].id},
                                     {"i_lv_peak_pu", tfmr_i_peak_in(x, 0.0, t1)},
                                     {"psi_peak_pu", tfmr_psi_peak_in(x, 0.0, t1)},
                                     {"psi_zseq_max_pu", tfmr_psi_zseq_max_in(x, 0.0, t1)}});
    }
    return j;
}

}  // namespace fluxsim::sim
