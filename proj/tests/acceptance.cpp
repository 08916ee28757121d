// One PASS/FAIL line per acceptance criterion. Cases 1 to 9 come from the
// CLI selftest report; case 10 compares two runs byte for byte.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <json.hpp>

using json = nlohmann::json;

namespace {

struct Run {
    std::string out;
    int status = -1;
    json timings;
};

Run selftest(const std::filesystem::path& timings) {
    Run r;
    const std::string cmd = std::string("\"") + UHFZ2_CLI + "\" selftest --seed 42 --timings \"" + timings.string() + "\"";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    r.status = pclose(p);
    std::ifstream in(timings);
    if (in) {
        try {
            r.timings = json::parse(in);
        } catch (const json::exception&) {
        }
    }
    return r;
}

}  // namespace

int main() {
    const auto dir = std::filesystem::temp_directory_path();
    const auto tag = std::to_string(getpid());
    const auto t1 = dir / ("uhfz2-acceptance-" + tag + "-1.json");
    const auto t2 = dir / ("uhfz2-acceptance-" + tag + "-2.json");

    const auto start = std::chrono::steady_clock::now();
    const Run first = selftest(t1);
    const Run second = selftest(t2);
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::filesystem::remove(t1);
    std::filesystem::remove(t2);

    bool all = true;
    const json cases = first.timings.is_object() ? first.timings.value("cases", json::array()) : json::array();
    for (int id = 1; id <= 9; ++id) {
        std::string name = "missing from the report";
        bool pass = false;
        std::ostringstream note;
        for (const auto& c : cases) {
            if (c.at("id").get<int>() != id) continue;
            name = c.at("name").get<std::string>();
            const double s = c.at("seconds").get<double>();
            const double limit = c.value("time_limit", 0.0);
            pass = c.at("pass").get<bool>() && (limit <= 0.0 || s < limit);
            note.setf(std::ios::fixed);
            note.precision(2);
            note << s << " s";
            if (limit > 0.0) note << ", limit " << limit << " s";
            if (!c.at("pass").get<bool>()) note << ", details " << c.at("details").dump();
        }
        all = all && pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << name << " (" << note.str() << ")\n";
    }

    const bool same = !first.out.empty() && first.out == second.out;
    all = all && same;
    std::cout << (same ? "PASS" : "FAIL") << " criterion 10: selftest --seed 42 twice gives identical output ("
              << first.out.size() << " bytes)\n";

    const bool fast = total < 600.0;
    std::cout << (fast ? "PASS" : "FAIL") << " total runtime " << static_cast<int>(total) << " s for two runs, target 600 s\n";
    return all && fast && first.status == 0 ? 0 : 1;
}
