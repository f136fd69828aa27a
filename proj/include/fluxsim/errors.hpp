#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fluxsim {

/// Raised for malformed or inconsistent scenario configuration. The message
/// aggregates every violation found, one per line.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when the simulation itself fails mid-run (non-finite state,
/// DC-link collapse, nodal solve off tolerance). Carries the failing step so
/// callers can emit partial artifacts plus a diagnostic.
struct SimulationFault : std::runtime_error {
    SimulationFault(std::string msg, std::int64_t at_step)
        : std::runtime_error(std::move(msg)), step(at_step) {}
    std::int64_t step = -1;
};

}  // namespace fluxsim
