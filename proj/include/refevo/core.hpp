// Shared domain types, identifiers and serialization contracts used by
// every other module: design specs and their constraint lists, artifacts,
// loop policies, session outcomes, the token ledger and the line-delimited
// JSON transcript format.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

namespace nlohmann {
template <typename T>
struct adl_serializer<std::optional<T>> {
    static void to_json(json& j, const std::optional<T>& v) {
        if (v)
            j = *v;
        else
            j = nullptr;
    }
    static void from_json(const json& j, std::optional<T>& v) {
        if (j.is_null())
            v.reset();
        else
            v = j.get<T>();
    }
};
}  // namespace nlohmann

namespace refevo {

using json = nlohmann::json;

// ── Errors ──────────────────────────────────────────────────────

enum class ErrorCode {
    empty_document,
    duplicate_constraint_id,
    spec_exceeds_budget,
    non_monotonic_turn_index,
    budget_unsatisfiable,
    script_exhausted,
    transport_error,
    malformed_provider_response,
    no_code_block,
    multiple_code_blocks,
    policy_violation,
    verdict_parse_error,
    inconsistent_verdict,
    toolchain_misconfigured,
    workdir_error,
    policy_conflict,
    config_error,
    transcript_parse_error,
    empty_group,
    schema_violation,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::empty_document: return "EmptyDocument";
        case ErrorCode::duplicate_constraint_id: return "DuplicateConstraintId";
        case ErrorCode::spec_exceeds_budget: return "SpecExceedsBudget";
        case ErrorCode::non_monotonic_turn_index: return "NonMonotonicTurnIndex";
        case ErrorCode::budget_unsatisfiable: return "BudgetUnsatisfiable";
        case ErrorCode::script_exhausted: return "ScriptExhausted";
        case ErrorCode::transport_error: return "TransportError";
        case ErrorCode::malformed_provider_response: return "MalformedProviderResponse";
        case ErrorCode::no_code_block: return "NoCodeBlockInResponse";
        case ErrorCode::multiple_code_blocks: return "MultipleCodeBlocks";
        case ErrorCode::policy_violation: return "PolicyViolation";
        case ErrorCode::verdict_parse_error: return "VerdictParseError";
        case ErrorCode::inconsistent_verdict: return "InconsistentVerdict";
        case ErrorCode::toolchain_misconfigured: return "ToolchainMisconfigured";
        case ErrorCode::workdir_error: return "WorkdirError";
        case ErrorCode::policy_conflict: return "PolicyConflict";
        case ErrorCode::config_error: return "ConfigError";
        case ErrorCode::transcript_parse_error: return "TranscriptParseError";
        case ErrorCode::empty_group: return "EmptyGroup";
        case ErrorCode::schema_violation: return "SchemaViolation";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// ── Enums ───────────────────────────────────────────────────────

enum class ConstraintCategory { interface, register_, timing, behavior };
enum class AssetKind { model_code, testbench, other };
enum class ArtifactKind { reference_model, testbench };
enum class AgentKind { modeler, verifier };
enum class Role { planner, modeler, verifier, arbiter, tool };
enum class ArbiterPath { syntax_repair, design_refinement, tb_realignment, success };
enum class TargetAgent { modeler, verifier, none };
enum class SessionStatus { success, compile_fail, func_fail, budget_exhausted };
enum class PolicyName { naive, flow_only, fixed_tb, refevo };
enum class Phase { planning, generating, simulating, arbitrating, repairing, done };
enum class SignatureKind { compile_error, link_error, assertion_fail, timeout, crash };

inline const char* to_string(ConstraintCategory c) {
    switch (c) {
        case ConstraintCategory::interface: return "interface";
        case ConstraintCategory::register_: return "register";
        case ConstraintCategory::timing: return "timing";
        case ConstraintCategory::behavior: return "behavior";
    }
    return "behavior";
}

inline ConstraintCategory constraint_category_from_string(std::string_view s) {
    if (s == "interface") return ConstraintCategory::interface;
    if (s == "register") return ConstraintCategory::register_;
    if (s == "timing") return ConstraintCategory::timing;
    if (s == "behavior") return ConstraintCategory::behavior;
    throw Error(ErrorCode::config_error, "unknown constraint category '" + std::string(s) + "'");
}

inline const char* to_string(AssetKind k) {
    switch (k) {
        case AssetKind::model_code: return "model_code";
        case AssetKind::testbench: return "testbench";
        case AssetKind::other: return "other";
    }
    return "other";
}

inline AssetKind asset_kind_from_string(std::string_view s) {
    if (s == "model_code") return AssetKind::model_code;
    if (s == "testbench") return AssetKind::testbench;
    if (s == "other") return AssetKind::other;
    throw Error(ErrorCode::config_error, "unknown asset kind '" + std::string(s) + "'");
}

inline const char* to_string(ArtifactKind k) {
    return k == ArtifactKind::reference_model ? "reference_model" : "testbench";
}

inline ArtifactKind artifact_kind_from_string(std::string_view s) {
    if (s == "reference_model") return ArtifactKind::reference_model;
    if (s == "testbench") return ArtifactKind::testbench;
    throw Error(ErrorCode::config_error, "unknown artifact kind '" + std::string(s) + "'");
}

inline const char* to_string(AgentKind a) {
    return a == AgentKind::modeler ? "modeler" : "verifier";
}

inline AgentKind agent_kind_from_string(std::string_view s) {
    if (s == "modeler") return AgentKind::modeler;
    if (s == "verifier") return AgentKind::verifier;
    throw Error(ErrorCode::config_error, "unknown agent '" + std::string(s) + "'");
}

inline const char* to_string(Role r) {
    switch (r) {
        case Role::planner: return "planner";
        case Role::modeler: return "modeler";
        case Role::verifier: return "verifier";
        case Role::arbiter: return "arbiter";
        case Role::tool: return "tool";
    }
    return "tool";
}

inline Role role_from_string(std::string_view s) {
    if (s == "planner") return Role::planner;
    if (s == "modeler") return Role::modeler;
    if (s == "verifier") return Role::verifier;
    if (s == "arbiter") return Role::arbiter;
    if (s == "tool") return Role::tool;
    throw Error(ErrorCode::config_error, "unknown role '" + std::string(s) + "'");
}

inline const char* to_string(ArbiterPath p) {
    switch (p) {
        case ArbiterPath::syntax_repair: return "syntax_repair";
        case ArbiterPath::design_refinement: return "design_refinement";
        case ArbiterPath::tb_realignment: return "tb_realignment";
        case ArbiterPath::success: return "success";
    }
    return "success";
}

inline ArbiterPath arbiter_path_from_string(std::string_view s) {
    if (s == "syntax_repair") return ArbiterPath::syntax_repair;
    if (s == "design_refinement") return ArbiterPath::design_refinement;
    if (s == "tb_realignment") return ArbiterPath::tb_realignment;
    if (s == "success") return ArbiterPath::success;
    throw Error(ErrorCode::verdict_parse_error, "unknown routing path '" + std::string(s) + "'");
}

inline const char* to_string(TargetAgent t) {
    switch (t) {
        case TargetAgent::modeler: return "modeler";
        case TargetAgent::verifier: return "verifier";
        case TargetAgent::none: return "none";
    }
    return "none";
}

inline TargetAgent target_agent_from_string(std::string_view s) {
    if (s == "modeler") return TargetAgent::modeler;
    if (s == "verifier") return TargetAgent::verifier;
    if (s == "none") return TargetAgent::none;
    throw Error(ErrorCode::verdict_parse_error, "unknown target agent '" + std::string(s) + "'");
}

inline const char* to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::success: return "success";
        case SessionStatus::compile_fail: return "compile_fail";
        case SessionStatus::func_fail: return "func_fail";
        case SessionStatus::budget_exhausted: return "budget_exhausted";
    }
    return "func_fail";
}

inline SessionStatus session_status_from_string(std::string_view s) {
    if (s == "success") return SessionStatus::success;
    if (s == "compile_fail") return SessionStatus::compile_fail;
    if (s == "func_fail") return SessionStatus::func_fail;
    if (s == "budget_exhausted") return SessionStatus::budget_exhausted;
    throw Error(ErrorCode::config_error, "unknown session status '" + std::string(s) + "'");
}

inline const char* to_string(PolicyName p) {
    switch (p) {
        case PolicyName::naive: return "naive";
        case PolicyName::flow_only: return "flow_only";
        case PolicyName::fixed_tb: return "fixed_tb";
        case PolicyName::refevo: return "refevo";
    }
    return "refevo";
}

// Accepts both the canonical names and the CLI spellings (flow, fixed-tb).
inline PolicyName policy_name_from_string(std::string_view s) {
    if (s == "naive") return PolicyName::naive;
    if (s == "flow_only" || s == "flow") return PolicyName::flow_only;
    if (s == "fixed_tb" || s == "fixed-tb") return PolicyName::fixed_tb;
    if (s == "refevo") return PolicyName::refevo;
    throw Error(ErrorCode::config_error, "unknown mode '" + std::string(s) + "'");
}

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::planning: return "planning";
        case Phase::generating: return "generating";
        case Phase::simulating: return "simulating";
        case Phase::arbitrating: return "arbitrating";
        case Phase::repairing: return "repairing";
        case Phase::done: return "done";
    }
    return "done";
}

inline const char* to_string(SignatureKind k) {
    switch (k) {
        case SignatureKind::compile_error: return "compile_error";
        case SignatureKind::link_error: return "link_error";
        case SignatureKind::assertion_fail: return "assertion_fail";
        case SignatureKind::timeout: return "timeout";
        case SignatureKind::crash: return "crash";
    }
    return "crash";
}

inline SignatureKind signature_kind_from_string(std::string_view s) {
    if (s == "compile_error") return SignatureKind::compile_error;
    if (s == "link_error") return SignatureKind::link_error;
    if (s == "assertion_fail") return SignatureKind::assertion_fail;
    if (s == "timeout") return SignatureKind::timeout;
    if (s == "crash") return SignatureKind::crash;
    throw Error(ErrorCode::config_error, "unknown signature kind '" + std::string(s) + "'");
}

// ── digest ──────────────────────────────────────────────────────

// SHA-256 of the input bytes as 64 lowercase hex chars.
inline std::string digest(std::string_view content) {
    unsigned char raw[EVP_MAX_MD_SIZE];
    unsigned int raw_len = 0;
    if (EVP_Digest(content.data(), content.size(), raw, &raw_len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("EVP_Digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(raw_len * 2);
    for (unsigned int i = 0; i < raw_len; ++i) {
        out.push_back(hex[raw[i] >> 4]);
        out.push_back(hex[raw[i] & 0xf]);
    }
    return out;
}

// ── Domain types ────────────────────────────────────────────────

struct ConstraintItem {
    std::string id;
    std::string text;  // verbatim excerpt of the spec body
    ConstraintCategory category = ConstraintCategory::behavior;

    bool operator==(const ConstraintItem&) const = default;
};

inline void to_json(json& j, const ConstraintItem& c) {
    j = json{{"id", c.id}, {"text", c.text}, {"category", to_string(c.category)}};
}

inline void from_json(const json& j, ConstraintItem& c) {
    c.id = j.at("id").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.category = constraint_category_from_string(j.at("category").get<std::string>());
}

struct AssetRef {
    std::string path;
    AssetKind kind = AssetKind::other;
    std::string content_digest;

    bool operator==(const AssetRef&) const = default;
};

inline void to_json(json& j, const AssetRef& a) {
    j = json{{"path", a.path}, {"kind", to_string(a.kind)}, {"content_digest", a.content_digest}};
}

inline void from_json(const json& j, AssetRef& a) {
    a.path = j.at("path").get<std::string>();
    a.kind = asset_kind_from_string(j.at("kind").get<std::string>());
    a.content_digest = j.at("content_digest").get<std::string>();
}

struct DesignSpec {
    std::string spec_id;
    std::string title;
    std::string body;  // the full specification prose, verbatim
    std::vector<ConstraintItem> constraints;
    std::vector<AssetRef> legacy_assets;

    bool operator==(const DesignSpec&) const = default;
};

inline void to_json(json& j, const DesignSpec& s) {
    j = json{{"spec_id", s.spec_id},
             {"title", s.title},
             {"body", s.body},
             {"constraints", s.constraints},
             {"legacy_assets", s.legacy_assets}};
}

inline void from_json(const json& j, DesignSpec& s) {
    s.spec_id = j.at("spec_id").get<std::string>();
    s.title = j.at("title").get<std::string>();
    s.body = j.at("body").get<std::string>();
    s.constraints = j.at("constraints").get<std::vector<ConstraintItem>>();
    s.legacy_assets = j.at("legacy_assets").get<std::vector<AssetRef>>();
}

struct Artifact {
    ArtifactKind kind = ArtifactKind::reference_model;
    std::string filename;
    std::string content;
    int revision = 0;  // bumps by exactly 1 per regeneration of the same kind
    AgentKind produced_by = AgentKind::modeler;

    bool operator==(const Artifact&) const = default;
};

inline void to_json(json& j, const Artifact& a) {
    j = json{{"kind", to_string(a.kind)},
             {"filename", a.filename},
             {"content", a.content},
             {"revision", a.revision},
             {"produced_by", to_string(a.produced_by)}};
}

inline void from_json(const json& j, Artifact& a) {
    a.kind = artifact_kind_from_string(j.at("kind").get<std::string>());
    a.filename = j.at("filename").get<std::string>();
    a.content = j.at("content").get<std::string>();
    a.revision = j.at("revision").get<int>();
    a.produced_by = agent_kind_from_string(j.at("produced_by").get<std::string>());
}

struct LoopPolicy {
    PolicyName name = PolicyName::refevo;
    bool allow_iteration = true;
    bool allow_tb_modification = true;

    bool operator==(const LoopPolicy&) const = default;
};

// Canonical flag assignment per experimental mode.
inline LoopPolicy policy_for(PolicyName name) {
    switch (name) {
        case PolicyName::naive: return {PolicyName::naive, false, false};
        case PolicyName::flow_only: return {PolicyName::flow_only, false, false};
        case PolicyName::fixed_tb: return {PolicyName::fixed_tb, true, false};
        case PolicyName::refevo: return {PolicyName::refevo, true, true};
    }
    return {PolicyName::refevo, true, true};
}

inline void validate_policy(const LoopPolicy& p) {
    bool ok = true;
    switch (p.name) {
        case PolicyName::naive: ok = !p.allow_iteration; break;
        case PolicyName::flow_only: ok = !p.allow_iteration; break;
        case PolicyName::fixed_tb: ok = p.allow_iteration && !p.allow_tb_modification; break;
        case PolicyName::refevo: ok = p.allow_iteration && p.allow_tb_modification; break;
    }
    if (!ok)
        throw Error(ErrorCode::config_error,
                    std::string("policy flags inconsistent for mode ") + to_string(p.name));
}

inline void to_json(json& j, const LoopPolicy& p) {
    j = json{{"name", to_string(p.name)},
             {"allow_iteration", p.allow_iteration},
             {"allow_tb_modification", p.allow_tb_modification}};
}

inline void from_json(const json& j, LoopPolicy& p) {
    p.name = policy_name_from_string(j.at("name").get<std::string>());
    p.allow_iteration = j.at("allow_iteration").get<bool>();
    p.allow_tb_modification = j.at("allow_tb_modification").get<bool>();
}

// ── Token ledger ────────────────────────────────────────────────

using TokenCount = std::uint64_t;

// One accounting row. A "round" is one prompt rendering (one provider call
// in live sessions, one appended turn in replayed/synthetic sessions).
// Counts measure segment content only; prompt decorations are excluded so
// that anchored and baseline figures stay directly comparable.
struct TokenRound {
    int round = 0;
    TokenCount anchored_prompt = 0;
    TokenCount baseline_prompt = 0;
    TokenCount response = 0;

    bool operator==(const TokenRound&) const = default;
};

inline void to_json(json& j, const TokenRound& r) {
    j = json{{"round", r.round},
             {"anchored_prompt", r.anchored_prompt},
             {"baseline_prompt", r.baseline_prompt},
             {"response", r.response}};
}

inline void from_json(const json& j, TokenRound& r) {
    r.round = j.at("round").get<int>();
    r.anchored_prompt = j.at("anchored_prompt").get<TokenCount>();
    r.baseline_prompt = j.at("baseline_prompt").get<TokenCount>();
    r.response = j.at("response").get<TokenCount>();
}

struct TokenLedger {
    std::vector<TokenRound> rounds;
    TokenCount anchored_total = 0;
    TokenCount baseline_total = 0;
    TokenCount response_total = 0;

    void add(TokenRound r) {
        anchored_total += r.anchored_prompt;
        baseline_total += r.baseline_prompt;
        response_total += r.response;
        rounds.push_back(std::move(r));
    }

    // Defined only when the baseline total is nonzero.
    std::optional<double> reduction_pct() const {
        if (baseline_total == 0) return std::nullopt;
        return 100.0 * (double(baseline_total) - double(anchored_total)) / double(baseline_total);
    }

    bool operator==(const TokenLedger&) const = default;
};

inline void to_json(json& j, const TokenLedger& l) {
    j = json{{"rounds", l.rounds},
             {"anchored_total", l.anchored_total},
             {"baseline_total", l.baseline_total},
             {"response_total", l.response_total},
             {"reduction_pct", l.reduction_pct()}};
}

inline void from_json(const json& j, TokenLedger& l) {
    l.rounds = j.at("rounds").get<std::vector<TokenRound>>();
    l.anchored_total = j.at("anchored_total").get<TokenCount>();
    l.baseline_total = j.at("baseline_total").get<TokenCount>();
    l.response_total = j.at("response_total").get<TokenCount>();
}

// ── Iteration record / session outcome ──────────────────────────

struct IterationRecord {
    int iteration = 0;
    ArbiterPath verdict_path = ArbiterPath::success;
    std::map<SignatureKind, int> signatures;  // count by kind
    TokenCount tokens_spent = 0;              // prompt + response estimates for the iteration
    int model_revision = 0;
    int tb_revision = 0;

    bool operator==(const IterationRecord&) const = default;
};

inline void to_json(json& j, const IterationRecord& r) {
    json sig = json::object();
    for (const auto& [kind, n] : r.signatures) sig[to_string(kind)] = n;
    j = json{{"iteration", r.iteration},
             {"verdict_path", to_string(r.verdict_path)},
             {"signatures", sig},
             {"tokens_spent", r.tokens_spent},
             {"artifact_revisions", {r.model_revision, r.tb_revision}}};
}

inline void from_json(const json& j, IterationRecord& r) {
    r.iteration = j.at("iteration").get<int>();
    r.verdict_path = arbiter_path_from_string(j.at("verdict_path").get<std::string>());
    r.signatures.clear();
    for (const auto& [k, v] : j.at("signatures").items())
        r.signatures[signature_kind_from_string(k)] = v.get<int>();
    r.tokens_spent = j.at("tokens_spent").get<TokenCount>();
    const auto& revs = j.at("artifact_revisions");
    r.model_revision = revs.at(0).get<int>();
    r.tb_revision = revs.at(1).get<int>();
}

struct GoldenPair {
    Artifact model;
    Artifact testbench;

    bool operator==(const GoldenPair&) const = default;
};

inline void to_json(json& j, const GoldenPair& g) {
    j = json{{"model", g.model}, {"testbench", g.testbench}};
}

inline void from_json(const json& j, GoldenPair& g) {
    g.model = j.at("model").get<Artifact>();
    g.testbench = j.at("testbench").get<Artifact>();
}

struct SessionOutcome {
    SessionStatus status = SessionStatus::func_fail;
    std::optional<GoldenPair> golden;  // present iff status == success
    std::vector<IterationRecord> iterations;
    TokenLedger token_ledger;
    LoopPolicy mode;
    std::optional<std::string> error_note;

    bool operator==(const SessionOutcome&) const = default;
};

inline void to_json(json& j, const SessionOutcome& o) {
    j = json{{"status", to_string(o.status)},
             {"golden", o.golden},
             {"iterations", o.iterations},
             {"token_ledger", o.token_ledger},
             {"mode", o.mode},
             {"error_note", o.error_note}};
}

inline void from_json(const json& j, SessionOutcome& o) {
    o.status = session_status_from_string(j.at("status").get<std::string>());
    o.golden = j.at("golden").get<std::optional<GoldenPair>>();
    o.iterations = j.at("iterations").get<std::vector<IterationRecord>>();
    o.token_ledger = j.at("token_ledger").get<TokenLedger>();
    o.mode = j.at("mode").get<LoopPolicy>();
    o.error_note = j.at("error_note").get<std::optional<std::string>>();
}

inline void validate_outcome(const SessionOutcome& o) {
    if ((o.status == SessionStatus::success) != o.golden.has_value())
        throw Error(ErrorCode::config_error, "golden artifacts present iff status is success");
}

// ── Spec parsing ────────────────────────────────────────────────

enum class SpecFormat { markdown, plain };

namespace detail {

inline std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace detail

// Constraint marker grammar, one per line:
//   CONSTRAINT: <text> [<category>]
//   CONSTRAINT[<id>]: <text> [<category>]
// The trailing [category] tag is optional and must be one of
// interface/register/timing/behavior; anything else stays part of the text.
// Bare markers get ids c1, c2, ... in document order.
inline DesignSpec parse_spec(std::string_view document, SpecFormat format,
                             std::string spec_id = "spec") {
    if (document.empty()) throw Error(ErrorCode::empty_document, "specification document is empty");

    DesignSpec spec;
    spec.spec_id = std::move(spec_id);
    spec.body = std::string(document);

    const auto lines = detail::split_lines(document);

    // Title: first markdown heading, else first non-empty line.
    for (const auto& line : lines) {
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (format == SpecFormat::markdown && t.starts_with("# ")) {
            spec.title = detail::trim(t.substr(2));
            break;
        }
        if (spec.title.empty()) spec.title = t;
        if (format == SpecFormat::plain) break;
    }

    static const std::string marker = "CONSTRAINT";
    int auto_id = 0;
    for (const auto& raw : lines) {
        size_t b = raw.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::string_view line(raw);
        line.remove_prefix(b);
        if (!line.starts_with(marker)) continue;
        std::string_view rest = line.substr(marker.size());

        std::string id;
        if (rest.starts_with('[')) {
            size_t close = rest.find(']');
            if (close == std::string_view::npos) continue;
            id = std::string(rest.substr(1, close - 1));
            rest = rest.substr(close + 1);
        }
        if (!rest.starts_with(':')) continue;
        rest = rest.substr(1);

        ConstraintCategory category = ConstraintCategory::behavior;
        std::string text = detail::trim(rest);
        if (text.ends_with(']')) {
            size_t open = text.rfind('[');
            if (open != std::string::npos) {
                std::string tag = text.substr(open + 1, text.size() - open - 2);
                if (tag == "interface" || tag == "register" || tag == "timing" ||
                    tag == "behavior") {
                    category = constraint_category_from_string(tag);
                    text = detail::trim(text.substr(0, open));
                }
            }
        }
        if (text.empty()) continue;

        ++auto_id;
        if (id.empty()) id = "c" + std::to_string(auto_id);
        for (const auto& existing : spec.constraints)
            if (existing.id == id)
                throw Error(ErrorCode::duplicate_constraint_id, "constraint id '" + id + "'");
        spec.constraints.push_back({std::move(id), std::move(text), category});
    }
    return spec;
}

// ── Transcript (line-delimited JSON, one record per line) ───────

inline json transcript_record(std::string_view record_type, json payload) {
    payload["record_type"] = std::string(record_type);
    return payload;
}

class TranscriptWriter {
public:
    TranscriptWriter() = default;

    explicit TranscriptWriter(const std::string& path) : out_(path, std::ios::trunc) {
        if (!out_) throw Error(ErrorCode::workdir_error, "cannot open transcript " + path);
        enabled_ = true;
    }

    void write(const json& record) {
        if (!enabled_) return;
        out_ << record.dump() << '\n';
        out_.flush();
    }

    bool enabled() const { return enabled_; }

private:
    std::ofstream out_;
    bool enabled_ = false;
};

inline std::vector<json> read_transcript(std::istream& in) {
    std::vector<json> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("record_type"))
            throw Error(ErrorCode::transcript_parse_error,
                        "bad record at line " + std::to_string(lineno));
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<json> read_transcript_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::transcript_parse_error, "cannot open " + path);
    return read_transcript(in);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::config_error, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::workdir_error, "cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace refevo
