#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbreak/cli_app.hpp"

using nlohmann::json;

namespace {

const std::string kDir = "/tmp/sbreak_cli_test";

void ensure_dir() {
    static bool done = false;
    if (!done) {
        std::filesystem::create_directories(kDir);
        done = true;
    }
}

std::string path_of(const std::string& name) {
    ensure_dir();
    return kDir + "/" + name;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::initializer_list<std::string> args) {
    return sbreak::run_cli(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    CHECK(cli({}) == 2);                       // no subcommand
    CHECK(cli({"frobnicate"}) == 2);           // unknown subcommand
    CHECK(cli({"gen", "--no-such-flag"}) == 2);
    // gen needs a seed for reproducibility, there is no silent default
    CHECK(cli({"gen", "--out", path_of("noseed.csv")}) == 2);
}

TEST_CASE("constants report needs no seed") {
    const std::string out = path_of("rho.json");
    CHECK(cli({"rho", "--out", out}) == 0);
    const json j = json::parse(slurp(out));
    CHECK(j["q1"] == 2);
    CHECK(std::abs(j["c"].get<double>() - 1.5476449809282259) < 1e-12);
    CHECK(std::abs(j["K"].get<double>() - 0.5) < 1e-12);
    CHECK(j["hermite_coeffs"].contains("J_2"));
    CHECK(j["rate_constant"] == 0.4);
}

TEST_CASE("generate, refit, and recover the truth") {
    const std::string cfg = path_of("gen.ini");
    write_file(cfg, "n = 200\n[model]\nsigma0 = 0.1\n");
    const std::string data = path_of("data.csv");

    REQUIRE(cli({"gen", "--config", cfg, "--seed", "11", "--out", data}) == 0);
    // n data rows plus the header, and the sidecar next to it
    std::ifstream in(data);
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 201);
    const json truth = json::parse(slurp(data + ".truth.json"));
    CHECK(truth["true_k"] == 100);

    // generation is reproducible byte for byte
    const std::string data2 = path_of("data2.csv");
    REQUIRE(cli({"gen", "--config", cfg, "--seed", "11", "--out", data2}) == 0);
    CHECK(slurp(data) == slurp(data2));

    const std::string rep = path_of("fit.json");
    REQUIRE(cli({"fit", data, "--config", cfg, "--seed", "11", "--out", rep}) == 0);
    const json j = json::parse(slurp(rep));
    CHECK(j["method"] == "s");
    CHECK(j["truth"]["true_k"] == 100);  // sidecar picked up automatically
    const int k_hat = j["k_hat"].get<int>();
    CHECK(std::abs(k_hat - 100) <= 4);
    CHECK(j["errors"]["k"].get<int>() == k_hat - 100);
    // profile artifacts land next to the report
    CHECK(slurp(path_of("fit_profile.csv")).substr(0, 6) == "k,s_n\n");
    CHECK(slurp(path_of("fit_profile.svg")).find("<svg") != std::string::npos);
}

TEST_CASE("config problems are exit code 2") {
    const std::string cfg = path_of("bad.ini");
    write_file(cfg, "[model]\nbeta2 = 0\n");  // equal segment coefficients
    CHECK(cli({"gen", "--config", cfg, "--seed", "1", "--out", path_of("x.csv")}) == 2);

    write_file(cfg, "[model]\nalpha = 2.0\n");  // out of range
    CHECK(cli({"gen", "--config", cfg, "--seed", "1", "--out", path_of("x.csv")}) == 2);

    write_file(cfg, "[model]\nkernel = powerlaw\n");  // indefinite beyond n = 2
    CHECK(cli({"gen", "--config", cfg, "--seed", "1", "--out", path_of("x.csv")}) == 2);

    write_file(cfg, "no_such_key = 1\n");
    CHECK(cli({"gen", "--config", cfg, "--seed", "1", "--out", path_of("x.csv")}) == 2);
}

TEST_CASE("io problems are exit code 4") {
    CHECK(cli({"fit", path_of("does_not_exist.csv"), "--seed", "1"}) == 4);

    const std::string garbled = path_of("garbled.csv");
    write_file(garbled, "t,y,x1\n1,oops,3\n");
    CHECK(cli({"fit", garbled, "--seed", "1"}) == 4);

    // unwritable output path
    CHECK(cli({"rho", "--out", "/nonexistent-dir/rho.json"}) == 4);
}

TEST_CASE("tiny study runs end to end") {
    const std::string cfg = path_of("study.ini");
    write_file(cfg,
               "[model]\nsigma0 = 0.25\n"
               "[study]\nkind = rate\nns = 64, 96\nreplicates = 2\n");
    const std::string prefix = path_of("tiny");
    CHECK(cli({"mc", "--config", cfg, "--seed", "5", "--out", prefix}) == 0);
    const json j = json::parse(slurp(prefix + "_rate.json"));
    CHECK(j["kind"] == "rate");
    CHECK(j["underpowered"] == true);
    CHECK(j["cells"].size() == 10);
    CHECK(slurp(prefix + "_rate.csv").substr(0, 27) == "n,metric,median,mean,stderr");

    // underpowered studies warn instead of gating, even when checks are on
    write_file(cfg,
               "[model]\nsigma0 = 0.25\n"
               "[study]\nkind = rate\nns = 64, 96\nreplicates = 2\ncheck_slopes = true\n");
    CHECK(cli({"mc", "--config", cfg, "--seed", "5", "--out", prefix}) == 0);
}

TEST_CASE("study reports do not depend on the thread count") {
    const std::string cfg = path_of("threads.ini");
    write_file(cfg,
               "[model]\nsigma0 = 0.25\n"
               "[study]\nkind = robustness\nrobust_n = 60\nrobust_replicates = 3\n"
               "magnitude = 20\n");
    const std::string p1 = path_of("t1");
    const std::string p8 = path_of("t8");
    REQUIRE(cli({"mc", "--config", cfg, "--seed", "6", "--threads", "1", "--out", p1}) == 0);
    REQUIRE(cli({"mc", "--config", cfg, "--seed", "6", "--threads", "8", "--out", p8}) == 0);
    CHECK(slurp(p1 + "_robustness.json") == slurp(p8 + "_robustness.json"));
}
