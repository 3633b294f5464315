#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "fade/image.hpp"
#include "fade/metrics.hpp"
#include "fade/mot_io.hpp"

using namespace fade;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(FADE_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 512> buf;
    CliResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fade_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("full pipeline through the binary") {
    TempDir tmp;

    // gen
    CliResult gen = run_cli("gen --preset sparse --seed 7 --out " + tmp.sub("seq"));
    REQUIRE(gen.exit_code == 0);
    CHECK(fs::exists(tmp.sub("seq") + "/gt.txt"));
    CHECK(fs::exists(tmp.sub("seq") + "/frames/000001.png"));

    // track
    CliResult track = run_cli("track --seq " + tmp.sub("seq") + " --out " + tmp.sub("pred.txt") +
                              " --trace " + tmp.sub("trace.json"));
    REQUIRE(track.exit_code == 0);
    std::vector<Trajectory> pred = parse_mot(tmp.sub("pred.txt"));
    CHECK(!pred.empty());

    // eval against own gt
    CliResult ev = run_cli("eval --gt " + tmp.sub("seq") + "/gt.txt --pred " + tmp.sub("pred.txt") +
                           " --out " + tmp.sub("clean.json"));
    REQUIRE(ev.exit_code == 0);
    nlohmann::json clean = nlohmann::json::parse(read_file(tmp.sub("clean.json")));
    CHECK(clean["HOTA"].get<double>() > 0.7);
    CHECK(clean["IDSW"].get<int>() == 0);

    // attack with a small iteration budget via config
    write_file_atomic(tmp.sub("atk.json"),
                      R"({"attack": {"iters": 5, "loss": "tmc"},
                          "tracker": {"gamma": 1.0, "texture_gain": 48, "miss_tolerance": 1}})");
    CliResult atk = run_cli("attack --seq " + tmp.sub("seq") + " --config " + tmp.sub("atk.json") +
                            " --vector digital --loss tmc --frame 5 --out " + tmp.sub("atk"));
    REQUIRE(atk.exit_code == 0);
    CHECK(fs::exists(tmp.sub("atk") + "/attack.json"));
    nlohmann::json aj = nlohmann::json::parse(read_file(tmp.sub("atk") + "/attack.json"));
    CHECK(aj["frames"][0]["loss_trace"].size() == 6);
    CHECK(aj["config"]["tracker"]["gamma"].get<double>() == 1.0);
    CHECK(aj["bound_violations"].get<int>() == 0);

    // attack must not modify the input sequence
    CliResult track2 = run_cli("track --seq " + tmp.sub("seq") + " --out " + tmp.sub("pred2.txt"));
    REQUIRE(track2.exit_code == 0);
    CHECK(read_file(tmp.sub("pred.txt")) == read_file(tmp.sub("pred2.txt")));

    // track the attacked sequence and evaluate
    CliResult track3 = run_cli("track --seq " + tmp.sub("atk") + "/sequence --out " +
                               tmp.sub("pred_atk.txt"));
    REQUIRE(track3.exit_code == 0);
    CliResult ev2 = run_cli("eval --gt " + tmp.sub("seq") + "/gt.txt --pred " +
                            tmp.sub("pred_atk.txt") + " --out " + tmp.sub("attacked.json"));
    REQUIRE(ev2.exit_code == 0);

    // defend
    CliResult def = run_cli("defend --seq " + tmp.sub("seq") + " --kind gn --seed 3 --out " +
                            tmp.sub("defended"));
    REQUIRE(def.exit_code == 0);
    CHECK(fs::exists(tmp.sub("defended") + "/frames/000001.png"));

    // diagnose from the trace
    CliResult diag = run_cli("diagnose --trace " + tmp.sub("trace.json") + " --frame 5 --out " +
                             tmp.sub("diag.json"));
    REQUIRE(diag.exit_code == 0);
    nlohmann::json dj = nlohmann::json::parse(read_file(tmp.sub("diag.json")));
    CHECK(dj.contains("self_similarity"));
    CHECK(!dj["identities"].empty());

    // report table over the two eval JSONs
    CliResult rep = run_cli("report --inputs " + tmp.sub("clean.json") + " " +
                            tmp.sub("attacked.json") + " --out " + tmp.sub("table.txt"));
    REQUIRE(rep.exit_code == 0);
    std::string table = read_file(tmp.sub("table.txt"));
    CHECK(table.find("HOTA") != std::string::npos);
    CHECK(table.find("delta") != std::string::npos);
}

TEST_CASE("gradcheck subcommand") {
    CliResult gc = run_cli("gradcheck --target losses");
    CHECK(gc.exit_code == 0);
    CHECK(gc.output.find("pass") != std::string::npos);
}

TEST_CASE("error paths and exit codes") {
    TempDir tmp;
    CliResult usage = run_cli("--bogus-flag");
    CHECK(usage.exit_code == 1);

    CliResult unknown = run_cli("attack --seq /nonexistent --frame 0 --out " + tmp.sub("x"));
    CHECK(unknown.exit_code == 2);

    write_file_atomic(tmp.sub("bad.json"), R"({"tracker": {"nope": 1}})");
    CliResult badcfg = run_cli("track --seq /nonexistent --config " + tmp.sub("bad.json") +
                               " --out " + tmp.sub("p.txt"));
    CHECK(badcfg.exit_code == 2);
    CHECK(badcfg.output.find("nope") != std::string::npos);

    CliResult badpreset = run_cli("gen --preset wat --out " + tmp.sub("y"));
    CHECK(badpreset.exit_code == 1);
}

TEST_CASE("deterministic outputs byte for byte") {
    TempDir tmp;
    REQUIRE(run_cli("gen --preset crossing --seed 5 --out " + tmp.sub("a")).exit_code == 0);
    REQUIRE(run_cli("gen --preset crossing --seed 5 --out " + tmp.sub("b")).exit_code == 0);
    CHECK(read_file(tmp.sub("a") + "/gt.txt") == read_file(tmp.sub("b") + "/gt.txt"));
    CHECK(read_file(tmp.sub("a") + "/frames/000010.png") ==
          read_file(tmp.sub("b") + "/frames/000010.png"));

    write_file_atomic(tmp.sub("cfg.json"), R"({"attack": {"iters": 3}})");
    REQUIRE(run_cli("attack --seq " + tmp.sub("a") + " --config " + tmp.sub("cfg.json") +
                    " --frame 3 --out " + tmp.sub("atk1")).exit_code == 0);
    REQUIRE(run_cli("attack --seq " + tmp.sub("a") + " --config " + tmp.sub("cfg.json") +
                    " --frame 3 --out " + tmp.sub("atk2")).exit_code == 0);
    CHECK(read_file(tmp.sub("atk1") + "/attack.json") ==
          read_file(tmp.sub("atk2") + "/attack.json"));
}
