#include <catch2/catch_amalgamated.hpp>

#include "refevo/planner.hpp"

using namespace refevo;

namespace {

std::string fixture_path(const std::string& rel) {
    return std::string(REFEVO_SOURCE_DIR) + "/tests/fixtures/" + rel;
}

DesignSpec load_fixture_spec(const std::string& name) {
    return parse_spec(read_text_file(fixture_path("specs/" + name)), SpecFormat::markdown,
                      name.substr(0, name.find('.')));
}

}  // namespace

TEST_CASE("shipped rubric file matches the embedded default") {
    auto shipped = json::parse(read_text_file(std::string(REFEVO_SOURCE_DIR) +
                                              "/data/complexity_rubric.json"));
    auto embedded = json::parse(default_rubric_json());
    CHECK(shipped == embedded);
}

TEST_CASE("shipped plan schema matches the embedded default") {
    auto shipped =
        json::parse(read_text_file(std::string(REFEVO_SOURCE_DIR) + "/data/plan.schema.json"));
    auto embedded = json::parse(plan_schema_json());
    CHECK(shipped == embedded);
}

TEST_CASE("a spec with no rubric keywords scores (0,0,0) and tier simple") {
    auto spec = load_fixture_spec("counter_spec.md");
    auto profile = analyze_complexity(spec, default_rubric());
    CHECK(profile.interface_score == 0);
    CHECK(profile.state_space_score == 0);
    CHECK(profile.concurrency_score == 0);
    CHECK(profile.tier == Tier::simple);
}

TEST_CASE("axi dma fixture scores complex under the hand-applied rubric") {
    // Hand application of data/complexity_rubric.json to axi_dma_spec.md:
    //   interface: families bus (axi), handshake (valid/ready, handshake),
    //              stream (stream) -> 3
    //   state_space: fsm x2 + "state machine" x1 + state x3 + mode x1 +
    //                register x5 = 12 occurrences -> >= 6 -> 3
    //   concurrency: families clock_domains ("clock domains"), pipeline
    //                ("pipelined") -> 2
    //   sum 8 -> complex
    auto spec = load_fixture_spec("axi_dma_spec.md");
    auto profile = analyze_complexity(spec, default_rubric());
    CHECK(profile.interface_score == 3);
    CHECK(profile.state_space_score == 3);
    CHECK(profile.concurrency_score == 2);
    CHECK(profile.tier == Tier::complex_);
}

TEST_CASE("fifo fixture lands in the medium tier") {
    // stream (fifo) + handshake (valid/ready) -> interface 2; "register"
    // occurs 3x (prose, constraint text, category tag) -> state_space 2;
    // no concurrency keywords -> 0; sum 4 -> medium.
    auto spec = load_fixture_spec("fifo_spec.md");
    auto profile = analyze_complexity(spec, default_rubric());
    CHECK(profile.interface_score == 2);
    CHECK(profile.state_space_score == 2);
    CHECK(profile.concurrency_score == 0);
    CHECK(profile.tier == Tier::medium);
}

TEST_CASE("tier is a pure threshold function of the score sum") {
    auto rubric = default_rubric();
    CHECK(tier_for_sum(0, rubric) == Tier::simple);
    CHECK(tier_for_sum(2, rubric) == Tier::simple);
    CHECK(tier_for_sum(3, rubric) == Tier::medium);
    CHECK(tier_for_sum(5, rubric) == Tier::medium);
    CHECK(tier_for_sum(6, rubric) == Tier::complex_);
    CHECK(tier_for_sum(9, rubric) == Tier::complex_);
}

TEST_CASE("keyword matching respects word boundaries") {
    DesignSpec spec;
    spec.body = "the statement restates no keywords";  // "state" only as substrings
    CHECK(analyze_complexity(spec, default_rubric()).state_space_score == 0);
    spec.body = "one state here";
    CHECK(analyze_complexity(spec, default_rubric()).state_space_score == 1);
}

TEST_CASE("monotonicity: appending rubric keywords never lowers a score") {
    auto rubric = default_rubric();
    std::vector<std::string> additions = {"axi", "uart",  "fifo",     "handshake", "fsm",
                                          "state", "mode", "register", "pipeline",  "parallel",
                                          "clock domain"};
    DesignSpec spec = parse_spec("plain body with no keywords\n", SpecFormat::plain);
    auto prev = analyze_complexity(spec, rubric);
    for (const auto& word : additions) {
        spec.body += " " + word;
        auto next = analyze_complexity(spec, rubric);
        CHECK(next.interface_score >= prev.interface_score);
        CHECK(next.state_space_score >= prev.state_space_score);
        CHECK(next.concurrency_score >= prev.concurrency_score);
        prev = next;
    }
    CHECK(prev.sum() > 0);
}

TEST_CASE("determinism: same spec yields the same profile") {
    auto spec = load_fixture_spec("axi_dma_spec.md");
    auto rubric = default_rubric();
    CHECK(analyze_complexity(spec, rubric) == analyze_complexity(spec, rubric));
}

TEST_CASE("no assets means everything is regenerated") {
    auto spec = load_fixture_spec("counter_spec.md");
    auto report = evaluate_assets(spec, {});
    CHECK(report.reusable.empty());
    REQUIRE(report.regenerate.size() == 2);
    CHECK(report.regenerate[0] == ArtifactKind::reference_model);
    CHECK(report.regenerate[1] == ArtifactKind::testbench);
}

TEST_CASE("legacy testbench containing all interface keywords is reusable") {
    // uart_spec.md interface constraints contribute the keyword set
    // {idles, high, between, frames, each, frame, carries, eight, data,
    // bits}; the fixture bench quotes all of them.
    auto spec = load_fixture_spec("uart_spec.md");
    std::string tb = read_text_file(fixture_path("assets/uart_legacy_tb.cpp"));
    spec.legacy_assets.push_back({"uart_legacy_tb.cpp", AssetKind::testbench, digest(tb)});
    auto report = evaluate_assets(spec, {{"uart_legacy_tb.cpp", tb}});
    REQUIRE(report.reusable.size() == 1);
    CHECK(report.reusable[0].path == "uart_legacy_tb.cpp");
    CHECK(report.reuse_rationale.count("uart_legacy_tb.cpp") == 1);
    REQUIRE(report.regenerate.size() == 1);
    CHECK(report.regenerate[0] == ArtifactKind::reference_model);
}

TEST_CASE("an asset of kind other is never reusable") {
    auto spec = load_fixture_spec("uart_spec.md");
    std::string tb = read_text_file(fixture_path("assets/uart_legacy_tb.cpp"));
    spec.legacy_assets.push_back({"notes.txt", AssetKind::other, digest(tb)});
    auto report = evaluate_assets(spec, {{"notes.txt", tb}});
    CHECK(report.reusable.empty());
    CHECK(report.regenerate.size() == 2);
}

TEST_CASE("a testbench missing a keyword is regenerated") {
    auto spec = load_fixture_spec("uart_spec.md");
    spec.legacy_assets.push_back({"old.cpp", AssetKind::testbench, digest("x")});
    auto report = evaluate_assets(spec, {{"old.cpp", "only frames and data here"}});
    CHECK(report.reusable.empty());
}

TEST_CASE("simple tier plan has exactly two independent generation tasks") {
    auto spec = load_fixture_spec("counter_spec.md");
    auto rubric = default_rubric();
    auto profile = analyze_complexity(spec, rubric);
    auto plan = build_execution_plan(spec, profile, evaluate_assets(spec, {}),
                                     policy_for(PolicyName::refevo), rubric);
    REQUIRE(plan.tasks.size() == 2);
    CHECK(plan.tasks[0].description == "generate reference model");
    CHECK(plan.tasks[0].depends_on.empty());
    CHECK(plan.tasks[1].description == "generate testbench");
    CHECK(plan.tasks[1].depends_on.empty());
    CHECK(plan.max_iterations == 4);
    CHECK(plan.token_budget == 20000);
    CHECK_FALSE(plan.policy_conflict);
}

TEST_CASE("medium tier inserts an interface skeleton before the model") {
    auto spec = load_fixture_spec("fifo_spec.md");
    auto rubric = default_rubric();
    auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                     evaluate_assets(spec, {}), policy_for(PolicyName::refevo),
                                     rubric);
    REQUIRE(plan.tasks.size() == 3);
    CHECK(plan.tasks[0].description == "draft interface skeleton");
    CHECK(plan.tasks[1].description == "generate reference model");
    CHECK(plan.tasks[1].depends_on == std::vector<std::string>{plan.tasks[0].step_id});
    CHECK(plan.max_iterations == 6);
}

TEST_CASE("complex tier with all four categories yields 7 tasks") {
    // 2 generation + 1 skeleton + 4 per-category decomposition steps
    auto spec = load_fixture_spec("axi_dma_spec.md");
    auto rubric = default_rubric();
    auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                     evaluate_assets(spec, {}), policy_for(PolicyName::refevo),
                                     rubric);
    REQUIRE(plan.tasks.size() == 7);
    CHECK(plan.tasks[0].description == "draft interface skeleton");
    CHECK(plan.tasks[1].description == "decompose interface subblock");
    CHECK(plan.tasks[2].description == "decompose register subblock");
    CHECK(plan.tasks[3].description == "decompose timing subblock");
    CHECK(plan.tasks[4].description == "decompose behavior subblock");
    CHECK(plan.tasks[5].description == "generate reference model");
    CHECK(plan.tasks[5].depends_on.size() == 5);  // skeleton + 4 subblocks
    CHECK(plan.tasks[6].description == "generate testbench");
    CHECK(plan.max_iterations == 10);
    CHECK(plan.token_budget == 120000);
}

TEST_CASE("a reusable testbench removes the verifier generation task") {
    auto spec = load_fixture_spec("uart_spec.md");
    std::string tb = read_text_file(fixture_path("assets/uart_legacy_tb.cpp"));
    spec.legacy_assets.push_back({"uart_legacy_tb.cpp", AssetKind::testbench, digest(tb)});
    auto rubric = default_rubric();
    auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                     evaluate_assets(spec, {{"uart_legacy_tb.cpp", tb}}),
                                     policy_for(PolicyName::refevo), rubric);
    for (const auto& task : plan.tasks) CHECK(task.description != "generate testbench");
}

TEST_CASE("naive policy on a decomposed plan is flagged as a conflict") {
    auto spec = load_fixture_spec("axi_dma_spec.md");
    auto rubric = default_rubric();
    auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                     evaluate_assets(spec, {}), policy_for(PolicyName::naive),
                                     rubric);
    CHECK(plan.policy_conflict);
    CHECK(plan.tasks.size() == 7);  // plan is still produced
}

TEST_CASE("plan json round-trips losslessly and validates against the schema") {
    auto spec = load_fixture_spec("axi_dma_spec.md");
    auto rubric = default_rubric();
    auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                     evaluate_assets(spec, {}), policy_for(PolicyName::fixed_tb),
                                     rubric);
    json j = plan;
    CHECK(j.get<ExecutionPlan>() == plan);
    CHECK(validate_plan_json(j).empty());

    json broken = j;
    broken["tasks"][0]["assigned_agent"] = "painter";
    CHECK_FALSE(validate_plan_json(broken).empty());
    broken = j;
    broken.erase("token_budget");
    CHECK_FALSE(validate_plan_json(broken).empty());
    broken = j;
    broken["surprise"] = 1;
    CHECK_FALSE(validate_plan_json(broken).empty());
}

TEST_CASE("validate_plan rejects forward dependencies") {
    ExecutionPlan plan;
    plan.plan_id = "p";
    plan.tasks = {{"s1", "a", AgentKind::modeler, {"s2"}},
                  {"s2", "b", AgentKind::verifier, {}}};
    CHECK_THROWS_AS(validate_plan(plan), Error);
}

TEST_CASE("determinism: identical inputs produce identical plan json") {
    auto spec = load_fixture_spec("fifo_spec.md");
    auto rubric = default_rubric();
    auto make = [&] {
        auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                         evaluate_assets(spec, {}),
                                         policy_for(PolicyName::refevo), rubric);
        return json(plan).dump();
    };
    CHECK(make() == make());
}
