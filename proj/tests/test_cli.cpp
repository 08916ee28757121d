#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "uhfz2/io.hpp"

using namespace uhfz2;
using io::json;

namespace {

struct Result {
    int code = -1;
    std::string out;
    json j() const { return json::parse(out); }
};

Result cli(const std::string& args) {
    Result r;
    const std::string cmd = std::string("\"") + UHFZ2_CLI + "\" " + args;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string temp_file(const std::string& name, const json& content) {
    const auto path = std::filesystem::temp_directory_path() / ("uhfz2-cli-" + std::to_string(getpid()) + "-" + name);
    std::ofstream(path) << content.dump();
    return path.string();
}

const json kModel = {{"model", {{"f", {{"2", 1}, {"3", 2}}}}}, {"sn", {{"exponents", {{"2", 1}, {"3", 1}, {"5", "inf"}}}}}};

}  // namespace

TEST_CASE("bott of clock and shift") {
    const Result r = cli("bott --v clock:7 --w shift:7");
    CHECK(r.code == 0);
    CHECK(r.j().at("bott") == 1);
    CHECK(r.j().at("commutator_norm").get<double>() == doctest::Approx(0.8678).epsilon(1e-4));
    CHECK(r.j().contains("residual"));
}

TEST_CASE("model output loads back as a model file") {
    const Result m = cli("model --sn 2:1,3:1,5:inf --f 2=0,3=1 --budget 30");
    REQUIRE(m.code == 0);
    CHECK(m.j().at("invariant").at("3") == 1);
    const std::string file = temp_file("model-out.json", m.j());
    const Result r = cli("invariant --action " + file);
    CHECK(r.code == 0);
    CHECK(r.j().at("2") == 0);
    CHECK(r.j().at("3") == 1);
}

TEST_CASE("invariant of a model file") {
    const std::string model = temp_file("model.json", kModel);
    const Result r = cli("invariant --action " + model + " --budget 750");
    CHECK(r.code == 0);
    CHECK(r.j().at("2") == 1);
    CHECK(r.j().at("3") == 2);
    CHECK(r.j().at("details").at("2").contains("defect"));
    std::filesystem::remove(model);
}

TEST_CASE("obstructions exit with 2") {
    // one eigenvalue winds once
    json t = json::array(), u = json::array();
    for (int k = 0; k <= 32; ++k) {
        const double s = k / 32.0;
        t.push_back(s);
        CVector ph(2);
        ph << std::polar(1.0, kTwoPi * s), 1.0;
        u.push_back(io::matrix_to_json(CMatrix(ph.asDiagonal())));
    }
    const std::string loop = temp_file("loop.json", {{"t", t}, {"u", u}});
    const Result r = cli("shrink --path " + loop);
    CHECK(r.code == 2);
    CHECK(r.j().at("kind") == "WindingObstruction");

    // kappa = 1/30 is not admissible for vanishing
    const std::string model = temp_file("model30.json", kModel);
    const TruncatedUHF t30({2, 3, 5});
    const std::string coc = temp_file(
        "coc.json", {{"u1", io::matrix_to_json(testing_helpers::cyclic_phase(t30))}, {"u2", "id:30"}});
    const Result k = cli("kappa --action " + model + " --budget 30 --cocycle " + coc);
    CHECK(k.code == 0);
    CHECK(k.j().at("integer") == 1);
    CHECK(k.j().at("admissible") == false);
    const Result v = cli("vanish --action " + model + " --budget 30 --cocycle " + coc);
    CHECK(v.code == 2);
    CHECK(v.j().at("kind") == "NotAdmissible");
    for (const auto& f : {loop, model, coc}) std::filesystem::remove(f);
}

TEST_CASE("input errors exit with 1") {
    Result r = cli("frobnicate");
    CHECK(r.code == 1);
    CHECK(r.j().contains("error"));
    r = cli("bott --v clock:7");
    CHECK(r.code == 1);
    r = cli("bott --v clock:7 --w shift:5");
    CHECK(r.code == 1);
    CHECK(r.j().contains("kind"));
    r = cli("");
    CHECK(r.code == 1);
}

TEST_CASE("schemas") {
    const Result r = cli("--schema");
    CHECK(r.code == 0);
    CHECK(r.j().contains("transcript"));
}

TEST_CASE("selftest output does not depend on the thread count") {
    const Result a = cli("selftest --seed 7 --only 1,4 --threads 1");
    const Result b = cli("selftest --seed 7 --only 1,4 --threads 3");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.j().at("cases").size() == 2);
    CHECK(cli("selftest --seed 8 --only 4").out != cli("selftest --seed 7 --only 4").out);
}
