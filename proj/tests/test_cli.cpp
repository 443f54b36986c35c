#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "refevo/core.hpp"
#include "refevo/planner.hpp"

using namespace refevo;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;  // merged stdout+stderr
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(REFEVO_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buffer[4096];
    size_t n;
    while ((n = fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.output.append(buffer, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string fixture(const std::string& rel) {
    return std::string(REFEVO_SOURCE_DIR) + "/tests/fixtures/" + rel;
}

std::string scratch(const std::string& rel) {
    return std::string(REFEVO_BINARY_DIR) + "/clitest/" + rel;
}

}  // namespace

TEST_CASE("plan on a simple fixture prints schema-valid JSON with 2 tasks") {
    auto r = run_cli("plan --spec " + fixture("specs/counter_spec.md"));
    REQUIRE(r.exit_code == 0);
    auto plan = json::parse(r.output);
    CHECK(plan["complexity"]["tier"] == "simple");
    CHECK(plan["tasks"].size() == 2);
    CHECK(validate_plan_json(plan).empty());
}

TEST_CASE("plan on the complex fixture carries 7 tasks") {
    auto r = run_cli("plan --spec " + fixture("specs/axi_dma_spec.md") + " --mode fixed-tb");
    REQUIRE(r.exit_code == 0);
    auto plan = json::parse(r.output);
    CHECK(plan["complexity"]["tier"] == "complex");
    CHECK(plan["tasks"].size() == 7);
    CHECK(plan["policy"]["name"] == "fixed_tb");
}

TEST_CASE("plan --validate-only prints OK and nothing else") {
    auto r = run_cli("plan --spec " + fixture("specs/fifo_spec.md") + " --validate-only");
    CHECK(r.exit_code == 0);
    CHECK(r.output == "OK\n");
}

TEST_CASE("plan on a missing file exits 2 and names the path") {
    auto r = run_cli("plan --spec /nonexistent/widget_spec.md");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("/nonexistent/widget_spec.md") != std::string::npos);
}

TEST_CASE("run: mock happy path exits 0 with a success manifest") {
    const std::string out = scratch("run-pass");
    fs::remove_all(out);
    auto r = run_cli("run --spec " + fixture("bench/pass_counter.md") + " --script " +
                     fixture("bench/pass_counter.script.json") + " --mode refevo --out " + out);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    auto manifest = json::parse(read_text_file(out + "/manifest.json"));
    CHECK(manifest["status"] == "success");
    CHECK(fs::exists(out + "/transcript.jsonl"));
    CHECK(fs::exists(out + "/golden/dut.cpp"));
    CHECK(fs::exists(out + "/golden/tb.cpp"));
    CHECK(fs::exists(out + "/effective_config.json"));
}

TEST_CASE("run: fixed_tb with a false-asserting TB exits 1 with func_fail") {
    const std::string out = scratch("run-fixedtb");
    fs::remove_all(out);
    auto r = run_cli("run --spec " + fixture("bench/tb_flaw.md") + " --script " +
                     fixture("bench/tb_flaw.script.json") + " --mode fixed-tb --out " + out);
    INFO(r.output);
    REQUIRE(r.exit_code == 1);
    auto manifest = json::parse(read_text_file(out + "/manifest.json"));
    CHECK(manifest["status"] == "func_fail");
}

TEST_CASE("run: a bad mode name exits 2") {
    auto r = run_cli("run --spec " + fixture("bench/pass_counter.md") +
                     " --mode turbo --out " + scratch("run-badmode"));
    CHECK(r.exit_code == 2);
}

TEST_CASE("bench over the fixture dir emits a per-mode table and report") {
    const std::string out = scratch("bench-small");
    fs::remove_all(out);
    auto r = run_cli("bench --spec-dir " + fixture("bench") +
                     " --mode fixed-tb --mode refevo --out " + out);
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    auto report = json::parse(read_text_file(out + "/bench_report.json"));
    CHECK(report["sessions"].size() == 6);  // 3 specs x 2 modes
    CHECK(report["modes"].contains("fixed_tb"));
    CHECK(report["modes"].contains("refevo"));
    // refevo resolves the tb_flaw fixture that fixed_tb cannot
    CHECK(report["modes"]["refevo"]["success"].get<double>() >
          report["modes"]["fixed_tb"]["success"].get<double>());
    CHECK(r.output.find("fixed_tb") != std::string::npos);
}

TEST_CASE("bench on an empty dir exits 2") {
    const std::string empty = scratch("bench-empty-dir");
    fs::create_directories(empty);
    auto r = run_cli("bench --spec-dir " + empty + " --out " + scratch("bench-empty-out"));
    CHECK(r.exit_code == 2);
}

TEST_CASE("coevo prints the report and honors --p-detect 0") {
    auto r = run_cli("coevo --trials 4000 --max-rounds 1 --seed 11");
    REQUIRE(r.exit_code == 0);
    auto report = json::parse(r.output);
    CHECK(report["closed_form_fp"]["fixed_tb"].get<double>() == 0.2);
    auto r0 = run_cli("coevo --trials 4000 --max-rounds 1 --p-detect 0 --seed 11");
    REQUIRE(r0.exit_code == 0);
    auto rep0 = json::parse(r0.output);
    CHECK(rep0["per_mode"]["refevo"]["false_positive_rate"] ==
          rep0["per_mode"]["fixed_tb"]["false_positive_rate"]);
}

TEST_CASE("coevo validates probabilities and trial counts with exit 2") {
    CHECK(run_cli("coevo --trials 0").exit_code == 2);
    CHECK(run_cli("coevo --p-detect 1.5").exit_code == 2);
}

TEST_CASE("coevo --chart writes the svg next to the report") {
    const std::string out = scratch("coevo-chart");
    fs::remove_all(out);
    auto r = run_cli("coevo --trials 2000 --out " + out + " --chart");
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out + "/coevo_report.json"));
    auto svg = read_text_file(out + "/coevo_chart.svg");
    CHECK(svg.find("<svg") != std::string::npos);
}

TEST_CASE("report --tiers emits positive reductions per tier") {
    auto r = run_cli("report --tiers");
    REQUIRE(r.exit_code == 0);
    auto report = json::parse(r.output);
    REQUIRE(report["token_report"]["entries"].size() == 3);
    for (const auto& entry : report["token_report"]["entries"])
        CHECK(entry["reduction_pct"].get<double>() > 0.0);
}

TEST_CASE("report replays a session transcript") {
    const std::string out = scratch("run-for-report");
    fs::remove_all(out);
    auto r = run_cli("run --spec " + fixture("bench/pass_counter.md") + " --script " +
                     fixture("bench/pass_counter.script.json") + " --mode refevo --out " + out);
    REQUIRE(r.exit_code == 0);
    auto rep = run_cli("report --transcript " + out + "/transcript.jsonl");
    REQUIRE(rep.exit_code == 0);
    auto parsed = json::parse(rep.output);
    REQUIRE(parsed["recall_report"].size() == 1);
    CHECK(parsed["recall_report"][0]["anchored_min_recall"].get<double>() == 1.0);
}

TEST_CASE("help exits 0 and lists every flag; unknown flags exit 2") {
    auto help = run_cli("--help");
    CHECK(help.exit_code == 0);
    for (const char* sub : {"plan", "run", "bench", "coevo", "report"})
        CHECK(help.output.find(sub) != std::string::npos);
    auto run_help = run_cli("run --help");
    CHECK(run_help.exit_code == 0);
    for (const char* flag : {"--spec", "--mode", "--provider", "--out"})
        CHECK(run_help.output.find(flag) != std::string::npos);
    CHECK(run_cli("coevo --definitely-not-a-flag").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
}
