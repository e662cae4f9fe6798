#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "helpers.hpp"
#include "stackplan/harness.hpp"

using namespace stackplan;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

// stdout and stderr together
Run run(const std::string& args) {
    const std::string cmd = std::string(STACKPLAN_CLI) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path workdir() {
    const fs::path p = fs::temp_directory_path() / "stackplan_cli_test";
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run("").code == 1);
    CHECK(run("frobnicate").code == 1);
    CHECK(run("plan").code == 1);
    CHECK(run("--help").code == 0);
}

TEST_CASE("plan on the bowl and spoon scene") {
    const auto scene = workdir() / "bowl_spoon.json";
    write_json_file(scene, to_json(testutil::bowl_spoon()));

    auto r = run("plan " + scene.string() + " -t 0,1");
    REQUIRE(r.code == 0);
    Json j = Json::parse(r.out);
    CHECK(j.at("grasps") == 1);
    CHECK(j.at("steps").at(0).at("moved") == Json::array({0, 1}));

    r = run("plan " + scene.string() + " -t all -p one_by_one");
    REQUIRE(r.code == 0);
    CHECK(Json::parse(r.out).at("grasps") == 2);

    r = run("plan " + scene.string() + " -p greedy");
    CHECK(r.code == 2);
    CHECK(r.out.find("pomdp") != std::string::npos);

    CHECK(run("plan " + scene.string() + " -t 0,9").code == 2);
    CHECK(run("plan " + (workdir() / "missing.json").string()).code == 2);
}

TEST_CASE("invalid scenes exit 2") {
    Json j = to_json(testutil::bowl_spoon());
    j["objects"][1]["category"] = "teapot";
    const auto scene = workdir() / "teapot.json";
    write_json_file(scene, j);
    const auto r = run("plan " + scene.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("teapot") != std::string::npos);

    const auto cyclic = workdir() / "cycle.json";
    write_json_file(cyclic, Json::parse(R"({"objects":[{"id":0,"category":"bowl"},{"id":1,"category":"plate"}],
        "edges":[{"parent":0,"child":1,"kind":"weak"},{"parent":1,"child":0,"kind":"weak"}]})"));
    CHECK(run("plan " + cyclic.string()).code == 2);

    const auto cfg = workdir() / "bad_config.json";
    write_json_file(cfg, Json{{"retry_cap", -2}});
    CHECK(run("--config " + cfg.string() + " plan " + (workdir() / "bowl_spoon.json").string()).code == 2);
}

TEST_CASE("generate, evaluate and report") {
    const auto dir = workdir() / "corpus";
    fs::remove_all(dir);
    REQUIRE(run("--seed 5 --out " + dir.string() + " generate -n 4").code == 0);
    const std::string manifest = slurp(dir / "manifest.json");
    CHECK(Json::parse(manifest).at("count") == 4);
    fs::remove_all(dir);
    REQUIRE(run("--seed 5 --out " + dir.string() + " generate -n 4").code == 0);
    CHECK(slurp(dir / "manifest.json") == manifest);
    CHECK(slurp(dir / "scene_00002.json").size() > 0);

    const auto res = workdir() / "results";
    fs::remove_all(res);
    auto r = run("--seed 2 --out " + res.string() + " evaluate " + dir.string() + " --threads 2");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("rule_only") != std::string::npos);
    const std::string summary = slurp(res / "summary.json");
    REQUIRE(run("--seed 2 --out " + res.string() + " evaluate " + dir.string() + " --threads 1").code == 0);
    CHECK(slurp(res / "summary.json") == summary);

    r = run("report " + (res / "records.jsonl").string());
    CHECK(r.code == 0);
    CHECK(r.out.find("pomdp") != std::string::npos);

    const auto empty = workdir() / "empty";
    fs::remove_all(empty);
    REQUIRE(run("--out " + empty.string() + " generate -n 0").code == 0);
    CHECK(Json::parse(slurp(empty / "manifest.json")).at("count") == 0);
    CHECK(run("evaluate " + empty.string()).code == 2);
    CHECK(run("evaluate " + dir.string() + " --tasks ZZ").code == 2);
}

TEST_CASE("simulate writes a trace") {
    const auto scene = workdir() / "bowl_spoon.json";
    write_json_file(scene, to_json(testutil::bowl_spoon()));
    const auto trace = workdir() / "trace.jsonl";
    const auto r = run("--seed 1 --out " + trace.string() + " simulate " + scene.string() + " -t all");
    REQUIRE(r.code == 0);
    std::ifstream in(trace);
    std::string line;
    REQUIRE(std::getline(in, line));
    const Json first = Json::parse(line);
    CHECK(first.contains("action"));
    CHECK(first.contains("observation_digest"));
}
