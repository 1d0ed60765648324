#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace metats {

struct CheckResult {
    std::string name;
    bool passed = false;
    double worst_slack = 0.0;  // smallest margin seen; negative when violated
    int cases = 0;
    std::string detail;
};

// Names accepted by run_verification, in execution order.
const std::vector<std::string>& verification_checks();

/// Runs the named invariant checks on freshly simulated data. Unknown names
/// throw ConfigError; an empty list runs nothing and returns nothing.
std::vector<CheckResult> run_verification(const std::vector<std::string>& checks, std::uint64_t seed);

}  // namespace metats
