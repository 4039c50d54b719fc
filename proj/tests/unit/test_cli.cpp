#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "pipeobs/cli.hpp"
#include "pipeobs/io.hpp"

using namespace pipeobs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("pipeobs_test_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name, const std::string& text) const {
        auto p = (path / name).string();
        write_text(p, text);
        return p;
    }
};

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "pipeobs");
    return run_cli(args);
}

std::string pulse_config(double T) {
    nlohmann::json j = nlohmann::json::parse(testutil::kRestConfig);
    j["name"] = "pulse";
    j["physics"] = {{"gamma", 0.1}, {"mu", 1.0}, {"mode", "velocity"}};
    j["initial"] = {{"*", {{"s_plus", {{"bump", {{"center", 0.5}, {"width", 0.5}, {"amplitude", 0.05}}}}},
                           {"s_minus", 0.0}}}};
    j["perturbation"] = {{"*", {{"v", {{"sine", {{"amplitude", 0.01}, {"modes", 1}}}}}}}};
    j["grid"]["cells"] = 50;
    j["time"] = {{"T", T}, {"samples", 50}};
    return j.dump(2);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("series csv round trip") {
    DiagnosticsSeries s;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        Sample x;
        x.t = 0.1 * i;
        x.l2_err_sq = std::exp(u(rng));
        x.h_rel = u(rng) / 3.0;
        x.f_aux = u(rng) * 1e-7;
        x.lyapunov = u(rng);
        x.delta_m = u(rng);
        x.max_v = u(rng);
        x.dt = 1e-3 * u(rng);
        s.samples.push_back(x);
    }
    std::string text = series_csv(s);
    CHECK(text.rfind("t,l2_err_sq,h_rel,f_aux,lyapunov,delta_m,max_v,dt\n", 0) == 0);
    DiagnosticsSeries back = parse_series_csv(text);
    REQUIRE(back.samples.size() == s.samples.size());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        CHECK(back.samples[i].l2_err_sq == s.samples[i].l2_err_sq);
        CHECK(back.samples[i].f_aux == s.samples[i].f_aux);
        CHECK(back.samples[i].dt == s.samples[i].dt);
    }
    CHECK_THROWS(parse_series_csv("t,wrong\n1,2\n"));
}

TEST_CASE("canonical dump and digest") {
    nlohmann::json a = nlohmann::json::parse(R"({"b": 1, "a": [0.1, 2]})");
    nlohmann::json b = nlohmann::json::parse(R"({"a": [0.1, 2], "b": 1})");
    CHECK(canonical_dump(a) == canonical_dump(b));
    CHECK(canonical_dump(a).find("\"a\"") < canonical_dump(a).find("\"b\""));
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("simulate on a rest config") {
    TempDir tmp;
    auto cfg = tmp.file("rest.json", testutil::kRestConfig);
    CHECK(cli({"--out", tmp.path.string(), "simulate", cfg}) == kExitOk);
    DiagnosticsSeries s = read_series_csv((tmp.path / "rest" / "series.csv").string());
    REQUIRE(s.samples.size() == 11);
    for (const auto& x : s.samples) {
        CHECK(x.l2_err_sq == 0.0);
        CHECK(x.max_v == 0.0);
    }
    CHECK(fs::exists(tmp.path / "rest" / "summary.json"));
}

TEST_CASE("malformed and invalid configs exit with code 1") {
    TempDir tmp;
    auto bad = tmp.file("bad.json", "{\n  \"name\": \"x\",\n  oops\n}\n");
    CHECK(cli({"--out", tmp.path.string(), "simulate", bad}) == kExitConfig);
    CHECK(cli({"--out", tmp.path.string(), "simulate", (tmp.path / "missing.json").string()}) ==
          kExitConfig);
}

TEST_CASE("usage errors exit with code 64") {
    CHECK(cli({}) == kExitUsage);
    CHECK(cli({"frobnicate"}) == kExitUsage);
    TempDir tmp;
    auto cfg = tmp.file("pulse.json", pulse_config(1.0));
    CHECK(cli({"--out", tmp.path.string(), "sweep", cfg, "--param", "mu"}) == kExitUsage);
}

TEST_CASE("smooth pulse simulation produces a clean series") {
    TempDir tmp;
    auto cfg = tmp.file("pulse.json", pulse_config(2.0));
    REQUIRE(cli({"--out", tmp.path.string(), "simulate", cfg}) == kExitOk);
    DiagnosticsSeries s = read_series_csv((tmp.path / "pulse" / "series.csv").string());
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
        if (i > 0) CHECK(s.samples[i].t > s.samples[i - 1].t);
        CHECK(std::isfinite(s.samples[i].max_v));
        CHECK(std::isfinite(s.samples[i].dt));
    }
}

TEST_CASE("observe with identical initials stays synchronized") {
    TempDir tmp;
    auto cfg = tmp.file("pulse.json", pulse_config(2.0));
    REQUIRE(cli({"--out", tmp.path.string(), "observe", cfg, "--perturb", "0", "--no-svg"}) ==
            kExitOk);
    DiagnosticsSeries s = read_series_csv((tmp.path / "pulse" / "series.csv").string());
    for (const auto& x : s.samples) CHECK(x.l2_err_sq <= 1e-12);
}

TEST_CASE("observe is deterministic and reports decay") {
    TempDir a, b;
    auto cfg = a.file("pulse.json", pulse_config(4.0));
    REQUIRE(cli({"--out", a.path.string(), "observe", cfg}) == kExitOk);
    REQUIRE(cli({"--out", b.path.string(), "observe", cfg}) == kExitOk);
    CHECK(read_text((a.path / "pulse" / "series.csv").string()) ==
          read_text((b.path / "pulse" / "series.csv").string()));
    CHECK(fs::exists(a.path / "pulse" / "decay.svg"));
    auto summary = nlohmann::json::parse(read_text((a.path / "pulse" / "summary.json").string()));
    CHECK(summary["fit"]["c2"].get<double>() > 0.0);
}

TEST_CASE("single-value sweep matches observe") {
    TempDir tmp;
    auto cfg = tmp.file("pulse.json", pulse_config(2.0));
    REQUIRE(cli({"--out", tmp.path.string(), "observe", cfg, "--mu", "3"}) == kExitOk);
    REQUIRE(cli({"--out", tmp.path.string(), "sweep", cfg, "--param", "mu", "--values", "3"}) ==
            kExitOk);
    CHECK(read_text((tmp.path / "pulse" / "series.csv").string()) ==
          read_text((tmp.path / "pulse_mu_0" / "series.csv").string()));
    std::string table = read_text((tmp.path / "pulse" / "sweep.csv").string());
    CHECK(table.rfind("mu,c2,status,error\n3,", 0) == 0);
}

TEST_CASE("picard exit codes") {
    TempDir tmp;
    nlohmann::json j = nlohmann::json::parse(testutil::kRestConfig);
    j["picard"] = {{"nx", 20}, {"nt", 40}};
    auto zero = tmp.file("zero.json", j.dump());
    REQUIRE(cli({"--out", tmp.path.string(), "picard", zero}) == kExitOk);
    auto rep = nlohmann::json::parse(read_text((tmp.path / "rest" / "picard.json").string()));
    CHECK(rep["truth"]["iterations"] == 1);
    CHECK(rep["certified"] == true);

    auto large = std::string(PIPEOBS_CONFIG_DIR) + "/picard_large.json";
    CHECK(cli({"--out", tmp.path.string(), "picard", large}) == kExitPicard);
}

}  // TEST_SUITE
