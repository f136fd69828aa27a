#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace fluxsim::em {

/// Sliding window over exactly one fundamental cycle of samples, with O(1)
/// running extraction of the DC component and the fundamental amplitude.
///
/// The cosine/sine correlation tables span one period, so a slot's basis value
/// is unchanged when the buffer wraps; running sums stay consistent. Sums are
/// recomputed exactly from the buffer once per wrap to stop floating-point
/// drift over multi-million-step runs (deterministic, amortized O(1)).
class CycleWindow {
public:
    explicit CycleWindow(std::size_t length) : buf_(length, 0.0), cos_(length), sin_(length) {
        for (std::size_t k = 0; k < length; ++k) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k) /
                             static_cast<double>(length);
            cos_[k] = std::cos(w);
            sin_[k] = std::sin(w);
        }
    }

    void push(double x) {
        const double old = buf_[head_];
        sum_ += x - old;
        csum_ += (x - old) * cos_[head_];
        ssum_ += (x - old) * sin_[head_];
        buf_[head_] = x;
        if (count_ < buf_.size()) ++count_;
        if (++head_ == buf_.size()) {
            head_ = 0;
            rebuild();
        }
    }

    [[nodiscard]] std::size_t length() const { return buf_.size(); }
    [[nodiscard]] bool filled() const { return count_ == buf_.size(); }

    /// Window mean; empty until one full cycle has been collected.
    [[nodiscard]] std::optional<double> mean() const {
        if (!filled()) return std::nullopt;
        return sum_ / static_cast<double>(buf_.size());
    }

    /// Peak amplitude of the component at the window's fundamental frequency.
    [[nodiscard]] std::optional<double> fundamental_amplitude() const {
        if (!filled()) return std::nullopt;
        const double n = static_cast<double>(buf_.size());
        return 2.0 * std::hypot(csum_, ssum_) / n;
    }

    /// Largest deviation of any stored sample from the window mean.
    [[nodiscard]] std::optional<double> max_deviation_from_mean() const {
        const auto m = mean();
        if (!m) return std::nullopt;
        double dev = 0.0;
        for (const double x : buf_) dev = std::max(dev, std::fabs(x - *m));
        return dev;
    }

    void reset() {
        std::fill(buf_.begin(), buf_.end(), 0.0);
        head_ = 0;
        count_ = 0;
        sum_ = csum_ = ssum_ = 0.0;
    }

    void save_state(nlohmann::json& j) const {
        j["buf"] = buf_;
        j["head"] = head_;
        j["count"] = count_;
        // The running sums carry incremental rounding relative to an exact
        // rebuild; store them so a restored window continues bit for bit.
        j["sums"] = {sum_, csum_, ssum_};
    }

    void load_state(const nlohmann::json& j) {
        const auto b = j.at("buf").get<std::vector<double>>();
        if (b.size() != buf_.size())
            throw std::runtime_error("cycle window state length mismatch");
        buf_ = b;
        head_ = j.at("head").get<std::size_t>();
        count_ = j.at("count").get<std::size_t>();
        const auto& s = j.at("sums");
        sum_ = s.at(0).get<double>();
        csum_ = s.at(1).get<double>();
        ssum_ = s.at(2).get<double>();
    }

private:
    void rebuild() {
        sum_ = csum_ = ssum_ = 0.0;
        for (std::size_t k = 0; k < buf_.size(); ++k) {
            sum_ += buf_[k];
            csum_ += buf_[k] * cos_[k];
            ssum_ += buf_[k] * sin_[k];
        }
    }

    std::vector<double> buf_;
    std::vector<double> cos_;
    std::vector<double> sin_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    double sum_ = 0.0;
    double csum_ = 0.0;
    double ssum_ = 0.0;
};

/// Per-window mean, the conventional "DC component" metric.
[[nodiscard]] inline std::optional<double> dc_component(const CycleWindow& w) { return w.mean(); }

}  // namespace fluxsim::em
