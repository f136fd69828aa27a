#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fluxsim/errors.hpp"
#include "fluxsim/sim/csv.hpp"

namespace fluxsim::sim {

/// Decimated time-series capture. Channels are sampling closures registered
/// once; every `decimation`-th step (plus the initial state) appends one row.
/// Column 0 is always the time.
class Recorder {
public:
    void set_decimation(int every) {
        if (every < 1) throw ConfigError("recorder decimation must be >= 1");
        every_ = every;
    }

    void add_channel(std::string name, std::function<double()> sample) {
        names_.push_back(std::move(name));
        channels_.push_back(std::move(sample));
    }

    /// Samples a row when due. Call with the step counter after the state
    /// update; step 0 is the pre-run state.
    void on_step(long long step, double t) {
        if (step % every_ != 0) return;
        data_.push_back(t);
        for (const auto& ch : channels_) data_.push_back(ch());
    }

    [[nodiscard]] std::size_t column_count() const { return names_.size() + 1; }
    [[nodiscard]] std::size_t row_count() const {
        return channels_.empty() ? 0 : data_.size() / column_count();
    }
    [[nodiscard]] double value(std::size_t row, std::size_t col) const {
        return data_.at(row * column_count() + col);
    }
    [[nodiscard]] const std::vector<std::string>& channel_names() const { return names_; }
    [[nodiscard]] const std::vector<double>& raw() const { return data_; }

    void write_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write CSV file '" + path + "'");
        out << "t";
        for (const auto& n : names_) out << ',' << n;
        out << '\n';
        const std::size_t cols = column_count();
        for (std::size_t r = 0; r < row_count(); ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                if (c) out << ',';
                out << format_value(data_[r * cols + c]);
            }
            out << '\n';
        }
        if (!out) throw ConfigError("short write to CSV file '" + path + "'");
    }

private:
    int every_ = 1;
    std::vector<std::string> names_;
    std::vector<std::function<double()>> channels_;
    std::vector<double> data_;
};

}  // namespace fluxsim::sim
