#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fluxsim::accept {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

struct AcceptanceReport {
    std::vector<CriterionResult> results;

    [[nodiscard]] bool all_pass() const {
        for (const auto& r : results)
            if (!r.pass) return false;
        return true;
    }
};

/// Runs the full acceptance suite against the bundled scenarios.
/// `scenario_dir` holds the .scn files, `work_dir` receives run artifacts
/// (created if missing). Progress and one PASS/FAIL line per criterion go to
/// `log`.
AcceptanceReport run_acceptance(const std::string& scenario_dir, const std::string& work_dir,
                                std::ostream& log);

}  // namespace fluxsim::accept
