#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "refevo/core.hpp"

using namespace refevo;

namespace {

std::string fixture_path(const std::string& rel) {
    return std::string(REFEVO_SOURCE_DIR) + "/tests/fixtures/" + rel;
}

}  // namespace

TEST_CASE("digest is deterministic sha256 hex") {
    CHECK(digest("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest("a") == "ca978112ca1bbdcafac231b39a23dc4da786eff8147c4e72b9807785afee48bb");
    CHECK(digest("a") != digest("b"));
    CHECK(digest("hello").size() == 64);
    CHECK(digest("hello") == digest("hello"));
}

TEST_CASE("parse_spec rejects empty document") {
    CHECK_THROWS_AS(parse_spec("", SpecFormat::plain), Error);
    try {
        parse_spec("", SpecFormat::markdown);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_document);
    }
}

TEST_CASE("parse_spec with zero markers yields no constraints") {
    auto spec = parse_spec("# Counter\nJust prose, nothing else.\n", SpecFormat::markdown, "counter");
    CHECK(spec.constraints.empty());
    CHECK(spec.title == "Counter");
    CHECK(spec.spec_id == "counter");
    CHECK(spec.body == "# Counter\nJust prose, nothing else.\n");
}

TEST_CASE("parse_spec extracts a tagged constraint") {
    auto spec = parse_spec("intro\nCONSTRAINT: reset clears counter [register]\n",
                           SpecFormat::plain);
    REQUIRE(spec.constraints.size() == 1);
    CHECK(spec.constraints[0].text == "reset clears counter");
    CHECK(spec.constraints[0].category == ConstraintCategory::register_);
    CHECK(spec.constraints[0].id == "c1");
}

TEST_CASE("parse_spec defaults category to behavior and supports explicit ids") {
    auto spec = parse_spec(
        "CONSTRAINT: output is registered\n"
        "CONSTRAINT[rst]: reset is synchronous [timing]\n",
        SpecFormat::plain);
    REQUIRE(spec.constraints.size() == 2);
    CHECK(spec.constraints[0].category == ConstraintCategory::behavior);
    CHECK(spec.constraints[0].id == "c1");
    CHECK(spec.constraints[1].id == "rst");
    CHECK(spec.constraints[1].category == ConstraintCategory::timing);
}

TEST_CASE("parse_spec rejects duplicate explicit ids") {
    try {
        parse_spec("CONSTRAINT[x]: one\nCONSTRAINT[x]: two\n", SpecFormat::plain);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_constraint_id);
    }
}

TEST_CASE("parse_spec ignores unknown trailing tags") {
    auto spec = parse_spec("CONSTRAINT: width is 8 bits [width]\n", SpecFormat::plain);
    REQUIRE(spec.constraints.size() == 1);
    CHECK(spec.constraints[0].text == "width is 8 bits [width]");
    CHECK(spec.constraints[0].category == ConstraintCategory::behavior);
}

TEST_CASE("fifo fixture has 5 constraints in document order") {
    // Hand count of the CONSTRAINT: markers in tests/fixtures/specs/fifo_spec.md.
    auto doc = read_text_file(fixture_path("specs/fifo_spec.md"));
    auto spec = parse_spec(doc, SpecFormat::markdown, "fifo");
    REQUIRE(spec.constraints.size() == 5);
    CHECK(spec.constraints[0].category == ConstraintCategory::interface);
    CHECK(spec.constraints[1].category == ConstraintCategory::interface);
    CHECK(spec.constraints[2].category == ConstraintCategory::register_);
    CHECK(spec.constraints[3].category == ConstraintCategory::timing);
    CHECK(spec.constraints[4].category == ConstraintCategory::behavior);
}

TEST_CASE("every constraint text is a verbatim substring of the body") {
    auto doc = read_text_file(fixture_path("specs/fifo_spec.md"));
    auto spec = parse_spec(doc, SpecFormat::markdown);
    for (const auto& c : spec.constraints) {
        INFO(c.id);
        CHECK(spec.body.find(c.text) != std::string::npos);
    }
}

TEST_CASE("parse_spec is idempotent on its own body") {
    auto doc = read_text_file(fixture_path("specs/fifo_spec.md"));
    auto once = parse_spec(doc, SpecFormat::markdown, "fifo");
    auto twice = parse_spec(once.body, SpecFormat::markdown, "fifo");
    CHECK(once == twice);
}

TEST_CASE("json round-trip is lossless for every core type") {
    DesignSpec spec;
    spec.spec_id = "s1";
    spec.title = "T";
    spec.body = "body\nCONSTRAINT: a\n";
    spec.constraints = {{"c1", "a", ConstraintCategory::interface}};
    spec.legacy_assets = {{"old_tb.cpp", AssetKind::testbench, digest("x")}};
    CHECK(json(spec).get<DesignSpec>() == spec);

    Artifact art{ArtifactKind::testbench, "tb.cpp", "int main(){}", 2, AgentKind::verifier};
    CHECK(json(art).get<Artifact>() == art);

    LoopPolicy pol = policy_for(PolicyName::fixed_tb);
    CHECK(json(pol).get<LoopPolicy>() == pol);

    TokenLedger ledger;
    ledger.add({1, 100, 150, 30});
    ledger.add({2, 110, 300, 20});
    CHECK(json(ledger).get<TokenLedger>() == ledger);
    CHECK(ledger.anchored_total == 210);
    CHECK(ledger.baseline_total == 450);

    IterationRecord rec;
    rec.iteration = 3;
    rec.verdict_path = ArbiterPath::tb_realignment;
    rec.signatures[SignatureKind::assertion_fail] = 2;
    rec.tokens_spent = 42;
    rec.model_revision = 2;
    rec.tb_revision = 1;
    CHECK(json(rec).get<IterationRecord>() == rec);

    SessionOutcome outcome;
    outcome.status = SessionStatus::success;
    outcome.golden = GoldenPair{art, art};
    outcome.iterations = {rec};
    outcome.token_ledger = ledger;
    outcome.mode = pol;
    CHECK(json(outcome).get<SessionOutcome>() == outcome);
    CHECK_NOTHROW(validate_outcome(outcome));

    outcome.golden.reset();
    CHECK_THROWS_AS(validate_outcome(outcome), Error);
}

TEST_CASE("policy invariants per mode") {
    CHECK_FALSE(policy_for(PolicyName::naive).allow_iteration);
    CHECK_FALSE(policy_for(PolicyName::flow_only).allow_iteration);
    CHECK(policy_for(PolicyName::fixed_tb).allow_iteration);
    CHECK_FALSE(policy_for(PolicyName::fixed_tb).allow_tb_modification);
    CHECK(policy_for(PolicyName::refevo).allow_tb_modification);
    CHECK_THROWS_AS(validate_policy({PolicyName::naive, true, false}), Error);
    CHECK(policy_name_from_string("fixed-tb") == PolicyName::fixed_tb);
    CHECK(policy_name_from_string("flow") == PolicyName::flow_only);
}

TEST_CASE("transcript write/read round-trips records") {
    std::string path = std::string(REFEVO_BINARY_DIR) + "/test_core_transcript.jsonl";
    {
        TranscriptWriter w(path);
        w.write(transcript_record("turn", {{"iteration", 0}, {"turn", json{{"index", 0}}}}));
        w.write(transcript_record("outcome", {{"status", "success"}}));
    }
    auto records = read_transcript_file(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0]["record_type"] == "turn");
    CHECK(records[1]["record_type"] == "outcome");
}

TEST_CASE("read_transcript rejects malformed lines") {
    std::istringstream in("{\"record_type\":\"x\"}\nnot json\n");
    CHECK_THROWS_AS(read_transcript(in), Error);
}

TEST_CASE("random spec documents: constraint texts always substrings of body") {
    std::mt19937 rng(7);
    const char* cats[] = {" [interface]", " [register]", " [timing]", " [behavior]", ""};
    for (int trial = 0; trial < 50; ++trial) {
        std::string doc = "# random\n";
        int n = 1 + int(rng() % 6);
        for (int i = 0; i < n; ++i) {
            std::string text;
            int words = 1 + int(rng() % 5);
            for (int w = 0; w < words; ++w) {
                if (w) text += ' ';
                text += "w" + std::to_string(rng() % 100);
            }
            doc += "CONSTRAINT: " + text + cats[rng() % 5] + "\n";
            doc += "prose line " + std::to_string(rng() % 1000) + "\n";
        }
        auto spec = parse_spec(doc, SpecFormat::markdown);
        CHECK(spec.constraints.size() == size_t(n));
        for (const auto& c : spec.constraints)
            CHECK(spec.body.find(c.text) != std::string::npos);
        // ids unique
        for (size_t i = 0; i < spec.constraints.size(); ++i)
            for (size_t j = i + 1; j < spec.constraints.size(); ++j)
                CHECK(spec.constraints[i].id != spec.constraints[j].id);
    }
}
