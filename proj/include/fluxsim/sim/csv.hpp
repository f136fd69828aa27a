#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fluxsim/errors.hpp"

namespace fluxsim::sim {

/// Formats a double the way every CSV writer in this project does: %.12g,
/// enough digits that distinct trajectories stay distinct while identical
/// runs stay byte-identical.
inline std::string format_value(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] int column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
};

/// Reads a CSV written by this project (or anything with a header line and
/// plain numeric cells). Throws ConfigError on malformed input.
inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("CSV file '" + path + "' is empty");
    std::stringstream hdr(line);
    std::string cell;
    while (std::getline(hdr, cell, ',')) t.columns.push_back(cell);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(t.columns.size());
        std::stringstream ss(line);
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cell.size())
                throw ConfigError("CSV file '" + path + "' line " + std::to_string(lineno) +
                                  ": bad numeric cell '" + cell + "'");
            row.push_back(v);
        }
        if (row.size() != t.columns.size())
            throw ConfigError("CSV file '" + path + "' line " + std::to_string(lineno) +
                              ": expected " + std::to_string(t.columns.size()) + " cells, got " +
                              std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace fluxsim::sim
