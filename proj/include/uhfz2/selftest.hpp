#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uhfz2/io.hpp"

namespace uhfz2 {

struct SelftestCase {
    int id = 0;
    std::string name;
    bool pass = false;
    io::json details;
    double seconds = 0.0;     // wall time, never part of the report
    double time_limit = 0.0;  // seconds; 0 when the case has none
};

struct SelftestOptions {
    std::uint64_t seed = 42;
    std::vector<int> only;    // empty: every case
    Config cfg;
};

/// The acceptance corpus, cases 1 to 9. Each case draws from its own
/// generator seeded by (seed, id), so selecting a subset does not change the
/// instances.
std::vector<SelftestCase> run_selftest(const SelftestOptions& opts);

/// Deterministic report; wall times are added only when asked for.
io::json selftest_to_json(const std::vector<SelftestCase>& cases, std::uint64_t seed, bool with_times = false);

}  // namespace uhfz2
