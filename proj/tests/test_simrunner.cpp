#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>

#include "fixture_artifacts.hpp"
#include "refevo/simrunner.hpp"

using namespace refevo;
using namespace refevo_test;

namespace {

ToolchainConfig cpp_toolchain(const std::string& name) {
    ToolchainConfig cfg = default_cpp_toolchain();
    cfg.workdir = std::string(REFEVO_BINARY_DIR) + "/simtest/" + name;
    std::filesystem::remove_all(cfg.workdir);
    return cfg;
}

}  // namespace

TEST_CASE("toolchain validation catches missing placeholders") {
    ToolchainConfig cfg = default_cpp_toolchain();
    cfg.compile_cmd = {"g++", "{model}", "-o", "{out}"};
    CHECK_THROWS_AS(validate_toolchain(cfg), Error);
    cfg = default_cpp_toolchain();
    cfg.timeout_s = 0;
    CHECK_THROWS_AS(validate_toolchain(cfg), Error);
    CHECK_NOTHROW(validate_toolchain(default_cpp_toolchain()));
}

TEST_CASE("valid pair compiles and passes simulation") {
    auto cfg = cpp_toolchain("good");
    auto report = compile_pair(model_artifact(kGoodModel), tb_artifact(kGoodTb), cfg);
    CHECK(report.compile_ok);
    CHECK(report.signatures.empty());
    CHECK_FALSE(report.run_ok.has_value());
    report = run_simulation(report, cfg, {"dut.cpp", "tb.cpp"});
    REQUIRE(report.run_ok.has_value());
    CHECK(*report.run_ok);
    CHECK(report.exit_code == 0);
    CHECK(report.run_log->find("ALL TESTS PASS") != std::string::npos);
    CHECK(report.signatures.empty());
    // sources, binary and logs are preserved in the workdir
    CHECK(std::filesystem::exists(cfg.workdir + "/dut.cpp"));
    CHECK(std::filesystem::exists(cfg.workdir + "/compile.log"));
    CHECK(std::filesystem::exists(cfg.workdir + "/run.log"));
}

TEST_CASE("missing semicolon yields a compile signature pointing at the model file") {
    auto cfg = cpp_toolchain("broken");
    auto report = compile_pair(model_artifact(kBrokenModel), tb_artifact(kGoodTb), cfg);
    CHECK_FALSE(report.compile_ok);
    REQUIRE_FALSE(report.signatures.empty());
    const auto& sig = report.signatures.front();
    CHECK(sig.file == "dut.cpp");
    CHECK(sig.kind == SignatureKind::compile_error);
    REQUIRE(sig.line.has_value());
    CHECK(*sig.line == 2);  // g++ reports the missing ';' on the return line
    CHECK(sig.message.find("error:") != std::string::npos);
    // log fidelity: the message is a verbatim log line
    CHECK(report.compile_log.find(sig.message) != std::string::npos);
}

TEST_CASE("nonexistent compiler binary raises ToolchainMisconfigured") {
    auto cfg = cpp_toolchain("nobin");
    cfg.compile_cmd = {"definitely-not-a-compiler-xyz", "{model}", "{tb}", "-o", "{out}"};
    try {
        compile_pair(model_artifact(kGoodModel), tb_artifact(kGoodTb), cfg);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::toolchain_misconfigured);
    }
}

TEST_CASE("false assertion produces run failure with the verbatim line") {
    auto cfg = cpp_toolchain("assert");
    auto report = compile_pair(model_artifact(kGoodModel), tb_artifact(kFalseAssertTb), cfg);
    REQUIRE(report.compile_ok);
    report = run_simulation(report, cfg, {"dut.cpp", "tb.cpp"});
    REQUIRE(report.run_ok.has_value());
    CHECK_FALSE(*report.run_ok);
    REQUIRE_FALSE(report.signatures.empty());
    CHECK(report.signatures.front().kind == SignatureKind::assertion_fail);
    CHECK(report.signatures.front().message == "ASSERT FAIL: counter mismatch at t=5");
    CHECK(report.run_log->find(report.signatures.front().message) != std::string::npos);
}

TEST_CASE("hanging simulation is killed within timeout plus grace") {
    auto cfg = cpp_toolchain("hang");
    cfg.timeout_s = 1;
    auto report = compile_pair(model_artifact(kGoodModel), tb_artifact(kHangTb), cfg);
    REQUIRE(report.compile_ok);
    const auto start = std::chrono::steady_clock::now();
    report = run_simulation(report, cfg, {"dut.cpp", "tb.cpp"});
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    CHECK(elapsed <= 2000);  // timeout_s + 1s grace
    REQUIRE(report.run_ok.has_value());
    CHECK_FALSE(*report.run_ok);
    bool has_timeout = false;
    for (const auto& s : report.signatures)
        if (s.kind == SignatureKind::timeout) has_timeout = true;
    CHECK(has_timeout);
}

TEST_CASE("run failure lines include Error: prefixed output") {
    auto cfg = cpp_toolchain("errline");
    const char* tb = R"(#include <cstdio>
extern int counter_next(int);
int main() { (void)counter_next(0); std::printf("Error: bad state\n"); return 0; }
)";
    auto report = compile_pair(model_artifact(kGoodModel), tb_artifact(tb), cfg);
    REQUIRE(report.compile_ok);
    report = run_simulation(report, cfg, {"dut.cpp", "tb.cpp"});
    CHECK_FALSE(*report.run_ok);  // exit 0 but a failure line was printed
    REQUIRE_FALSE(report.signatures.empty());
    CHECK(report.signatures.front().kind == SignatureKind::assertion_fail);
}

TEST_CASE("extract_signatures dedups by (file, line, kind) and preserves order") {
    CHECK(extract_signatures("").empty());
    std::string log =
        "dut.cpp:3:1: error: first\n"
        "tb.cpp:7:2: error: second\n"
        "dut.cpp:3:9: error: first again, same line\n";
    auto sigs = extract_signatures(log, {"dut.cpp", "tb.cpp"});
    REQUIRE(sigs.size() == 2);
    CHECK(sigs[0].file == "dut.cpp");
    CHECK(sigs[1].file == "tb.cpp");

    std::string flood;
    for (int i = 0; i < 30; ++i)
        flood += "dut.cpp:" + std::to_string(i + 1) + ":1: error: e" + std::to_string(i) + "\n";
    CHECK(extract_signatures(flood).size() == 10);
}

TEST_CASE("extract_signatures classifies link errors") {
    std::string log =
        "/usr/bin/ld: /tmp/cc.o: in function `main':\n"
        "tb.cpp:(.text+0x1): undefined reference to `counter_next(int)'\n"
        "collect2: error: ld returned 1 exit status\n";
    auto sigs = extract_signatures(log, {"dut.cpp", "tb.cpp"});
    REQUIRE_FALSE(sigs.empty());
    CHECK(sigs[0].kind == SignatureKind::link_error);
    CHECK(sigs[0].file == "tb.cpp");
}

TEST_CASE("child environment contains only allowlisted variables") {
    ::setenv("REFEVO_SECRET_CANARY", "leak-me", 1);
    auto cfg = cpp_toolchain("env");
    cfg.env_allowlist = {"PATH"};
    auto report = compile_pair(model_artifact(kGoodModel), tb_artifact(kEnvDumpTb), cfg);
    REQUIRE(report.compile_ok);
    report = run_simulation(report, cfg, {"dut.cpp", "tb.cpp"});
    REQUIRE(report.run_ok.has_value());
    CHECK(*report.run_ok);
    CHECK(report.run_log->find("PATH=") != std::string::npos);
    CHECK(report.run_log->find("REFEVO_SECRET_CANARY") == std::string::npos);
    ::unsetenv("REFEVO_SECRET_CANARY");
}

TEST_CASE("compiling the same pair twice is idempotent up to durations") {
    auto cfg1 = cpp_toolchain("idem1");
    auto cfg2 = cpp_toolchain("idem2");
    auto r1 = compile_pair(model_artifact(kBrokenModel), tb_artifact(kGoodTb), cfg1);
    auto r2 = compile_pair(model_artifact(kBrokenModel), tb_artifact(kGoodTb), cfg2);
    r1.compile_ms = r2.compile_ms = 0;
    CHECK(r1 == r2);
}

TEST_CASE("sim report json round-trips and the transcript copy zeroes timing") {
    SimReport r;
    r.compile_ok = true;
    r.compile_log = "ok\n";
    r.run_ok = false;
    r.run_log = "ASSERT FAIL: x\n";
    r.exit_code = 1;
    r.compile_ms = 123;
    r.run_ms = 456;
    r.signatures = extract_signatures(*r.run_log);
    CHECK(json(r).get<SimReport>() == r);
    json rec = sim_report_record(r);
    CHECK(rec["compile_ms"] == 0);
    CHECK(rec["run_ms"] == 0);
}

TEST_CASE("shipped toolchains file matches the embedded default and loads") {
    auto shipped = json::parse(read_text_file(std::string(REFEVO_SOURCE_DIR) +
                                              "/data/toolchains.json"));
    CHECK(shipped == json::parse(default_toolchains_json()));
    auto profiles =
        load_toolchain_profiles(std::string(REFEVO_SOURCE_DIR) + "/data/toolchains.json");
    CHECK(profiles.count("cpp") == 1);
    CHECK(profiles.count("systemc") == 1);
    CHECK_NOTHROW(validate_toolchain(profiles["cpp"]));
}
