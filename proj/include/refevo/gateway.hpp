// Agents 2-4: prompt templates, the text-completion provider abstraction
// with its deterministic scripted mock, and strict parsing of agent output
// into typed artifacts and verdicts. Nothing in this module writes files or
// spawns processes; tool use lives in the sim runner.
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "refevo/context.hpp"
#include "refevo/core.hpp"
#include "refevo/planner.hpp"
#include "refevo/simrunner_types.hpp"

namespace refevo {

inline constexpr const char* kModelFilename = "dut.cpp";
inline constexpr const char* kTestbenchFilename = "tb.cpp";

// ── Provider abstraction ────────────────────────────────────────

struct CompletionRequest {
    std::string prompt;
    Role role = Role::modeler;
    int max_output_tokens = 4096;
    double temperature_hint = 0.0;
};

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_ms = 100;
};

inline void to_json(json& j, const RetryPolicy& r) {
    j = json{{"max_attempts", r.max_attempts}, {"backoff_ms", r.backoff_ms}};
}

inline void from_json(const json& j, RetryPolicy& r) {
    r.max_attempts = j.at("max_attempts").get<int>();
    r.backoff_ms = j.at("backoff_ms").get<int>();
}

enum class ProviderKind { mock, http };

inline const char* to_string(ProviderKind k) { return k == ProviderKind::mock ? "mock" : "http"; }

inline ProviderKind provider_kind_from_string(std::string_view s) {
    if (s == "mock") return ProviderKind::mock;
    if (s == "http") return ProviderKind::http;
    throw Error(ErrorCode::config_error, "unknown provider kind '" + std::string(s) + "'");
}

struct ProviderConfig {
    ProviderKind kind = ProviderKind::mock;
    std::optional<std::string> endpoint;     // http
    std::optional<std::string> model_name;   // http
    std::optional<std::string> script_path;  // mock
    RetryPolicy retry;
    std::string api_key_env = "REFEVO_API_KEY";
};

inline void validate_provider_config(const ProviderConfig& cfg) {
    if (cfg.kind == ProviderKind::mock && !cfg.script_path)
        throw Error(ErrorCode::config_error, "mock provider requires script_path");
    if (cfg.kind == ProviderKind::http && (!cfg.endpoint || !cfg.model_name))
        throw Error(ErrorCode::config_error, "http provider requires endpoint and model_name");
    if (cfg.retry.max_attempts < 1)
        throw Error(ErrorCode::config_error, "retry.max_attempts must be >= 1");
}

inline void to_json(json& j, const ProviderConfig& c) {
    j = json{{"kind", to_string(c.kind)},     {"endpoint", c.endpoint},
             {"model_name", c.model_name},    {"script_path", c.script_path},
             {"retry", c.retry},              {"api_key_env", c.api_key_env}};
}

inline void from_json(const json& j, ProviderConfig& c) {
    c.kind = provider_kind_from_string(j.at("kind").get<std::string>());
    c.endpoint = j.value("endpoint", json()).is_null()
                     ? std::nullopt
                     : std::make_optional(j.at("endpoint").get<std::string>());
    c.model_name = j.value("model_name", json()).is_null()
                       ? std::nullopt
                       : std::make_optional(j.at("model_name").get<std::string>());
    c.script_path = j.value("script_path", json()).is_null()
                        ? std::nullopt
                        : std::make_optional(j.at("script_path").get<std::string>());
    if (j.contains("retry")) c.retry = j.at("retry").get<RetryPolicy>();
    if (j.contains("api_key_env")) c.api_key_env = j.at("api_key_env").get<std::string>();
}

class Provider {
public:
    virtual ~Provider() = default;
    // Must be safe for two in-flight requests (dual generation fan-out).
    virtual std::string complete(const CompletionRequest& req) = 0;
};

// Scripted mock: a JSON array of {role, response} pairs consumed in order
// per role. Exhausting a role's queue is an error, which keeps fixture
// scripts honest about exactly how many calls a session makes.
class MockScriptProvider : public Provider {
public:
    explicit MockScriptProvider(const json& script) {
        if (!script.is_array())
            throw Error(ErrorCode::config_error, "mock script must be a JSON array");
        for (const auto& entry : script) {
            const Role role = role_from_string(entry.at("role").get<std::string>());
            queues_[role].push_back(entry.at("response").get<std::string>());
        }
    }

    static std::unique_ptr<MockScriptProvider> from_file(const std::string& path) {
        return std::make_unique<MockScriptProvider>(json::parse(read_text_file(path)));
    }

    std::string complete(const CompletionRequest& req) override {
        std::lock_guard lock(mutex_);
        auto& queue = queues_[req.role];
        auto& next = cursors_[req.role];
        if (next >= queue.size())
            throw Error(ErrorCode::script_exhausted,
                        std::string("no scripted response left for role ") + to_string(req.role));
        return queue[next++];
    }

private:
    std::mutex mutex_;
    std::map<Role, std::vector<std::string>> queues_;
    std::map<Role, size_t> cursors_;
};

// ── Prompt templates ────────────────────────────────────────────

// Placeholders: {{anchor}} {{summary}} {{workspace}} {{constraints}}
// {{task}} {{logs}} {{schema}}.
struct PromptLibrary {
    std::map<std::string, std::string> templates;

    const std::string& get(const std::string& name) const {
        auto it = templates.find(name);
        if (it == templates.end())
            throw Error(ErrorCode::config_error, "no prompt template named " + name);
        return it->second;
    }
};

inline const char* default_modeler_template() {
    return R"([refevo prompt: modeler v1]
## SPECIFICATION (ANCHOR)
{{anchor}}
## CONSTRAINTS
{{constraints}}
## SUMMARY
{{summary}}
## WORKSPACE
{{workspace}}
## TASK
{{task}}
Respond with exactly one fenced code block containing the complete reference model source for dut.cpp.
)";
}

inline const char* default_verifier_template() {
    return R"([refevo prompt: verifier v1]
## SPECIFICATION (ANCHOR)
{{anchor}}
## CONSTRAINTS
{{constraints}}
## SUMMARY
{{summary}}
## WORKSPACE
{{workspace}}
## TASK
{{task}}
Respond with exactly one fenced code block containing the complete self-checking testbench source for tb.cpp. The testbench must print "ASSERT FAIL: <detail>" for every violated check and "ALL TESTS PASS" when every check holds.
)";
}

inline const char* default_arbiter_template() {
    return R"([refevo prompt: arbiter v1]
## SPECIFICATION (ANCHOR)
{{anchor}}
## CONSTRAINTS
{{constraints}}
## SUMMARY
{{summary}}
## WORKSPACE
{{workspace}}
## SIMULATION EVIDENCE
{{logs}}
## TASK
Judge the simulation evidence strictly against the anchored specification and its constraint list, then route the repair.
{{schema}}
)";
}

inline const char* default_step_template() {
    return R"([refevo prompt: step v1]
## SPECIFICATION (ANCHOR)
{{anchor}}
## CONSTRAINTS
{{constraints}}
## SUMMARY
{{summary}}
## WORKSPACE
{{workspace}}
## TASK
{{task}}
Respond with a short design note (no code).
)";
}

inline PromptLibrary default_prompts() {
    PromptLibrary lib;
    lib.templates["modeler"] = default_modeler_template();
    lib.templates["verifier"] = default_verifier_template();
    lib.templates["arbiter"] = default_arbiter_template();
    lib.templates["step"] = default_step_template();
    return lib;
}

inline PromptLibrary load_prompts(const std::string& dir) {
    PromptLibrary lib = default_prompts();
    for (const auto& name : {"modeler", "verifier", "arbiter", "step"})
        lib.templates[name] = read_text_file(dir + "/" + name + ".txt");
    return lib;
}

inline std::string render_template(std::string text,
                                   const std::map<std::string, std::string>& fills) {
    for (const auto& [key, value] : fills) {
        const std::string placeholder = "{{" + key + "}}";
        size_t pos = 0;
        while ((pos = text.find(placeholder, pos)) != std::string::npos) {
            text.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return text;
}

inline std::string constraints_block(const DesignSpec& spec) {
    if (spec.constraints.empty()) return "(none)\n";
    std::string out;
    for (const auto& c : spec.constraints)
        out += "- [" + c.id + "][" + to_string(c.category) + "] " + c.text + "\n";
    return out;
}

inline std::map<std::string, std::string> base_fills(const DesignSpec& spec,
                                                     const ContextWindow& ctx) {
    return {{"anchor", ctx.anchor},
            {"summary", ctx.summary.empty() ? "(empty)\n" : summary_block(ctx)},
            {"workspace", ctx.workspace.empty() ? "(empty)\n" : workspace_block(ctx)},
            {"constraints", constraints_block(spec)}};
}

// ── Code block extraction ───────────────────────────────────────

struct CodeBlockScan {
    int count = 0;
    std::string first;  // content of the first fenced block, verbatim
};

inline CodeBlockScan scan_code_blocks(std::string_view response) {
    CodeBlockScan scan;
    bool in_block = false;
    bool capture = false;
    std::string current;
    for (const auto& line : detail::split_lines(response)) {
        if (detail::trim(line).starts_with("```")) {
            if (!in_block) {
                in_block = true;
                ++scan.count;
                capture = scan.count == 1;
                current.clear();
            } else {
                in_block = false;
                if (capture) scan.first = current;
                capture = false;
            }
            continue;
        }
        if (in_block && capture) {
            current += line;
            current += '\n';
        }
    }
    return scan;
}

// ── Generation (Agents 2 and 3) ─────────────────────────────────

namespace detail {

inline bool plan_has_agent(const ExecutionPlan& plan, AgentKind agent) {
    for (const auto& t : plan.tasks)
        if (t.assigned_agent == agent) return true;
    return false;
}

inline std::string request_single_block(Provider& provider, CompletionRequest req) {
    std::string response = provider.complete(req);
    CodeBlockScan scan = scan_code_blocks(response);
    if (scan.count > 1) {
        // ambiguous: one stricter re-prompt, then give up
        req.prompt += "\nSTRICT: your previous reply contained several code blocks. "
                      "Respond with exactly one fenced code block and nothing else.\n";
        response = provider.complete(req);
        scan = scan_code_blocks(response);
        if (scan.count > 1)
            throw Error(ErrorCode::multiple_code_blocks, "still ambiguous after re-prompt");
    }
    if (scan.count == 0)
        throw Error(ErrorCode::no_code_block, "response contained no fenced code block");
    return scan.first;
}

}  // namespace detail

inline Artifact generate_model(const DesignSpec& spec, const ContextWindow& ctx,
                               const ExecutionPlan& plan, Provider& provider,
                               const PromptLibrary& prompts, int prev_revision = 0,
                               const std::string& task = "generate reference model") {
    if (!detail::plan_has_agent(plan, AgentKind::modeler))
        throw Error(ErrorCode::config_error, "plan contains no modeler task");
    auto fills = base_fills(spec, ctx);
    fills["task"] = task;
    CompletionRequest req{render_template(prompts.get("modeler"), fills), Role::modeler};
    Artifact artifact;
    artifact.kind = ArtifactKind::reference_model;
    artifact.filename = kModelFilename;
    artifact.content = detail::request_single_block(provider, req);
    artifact.revision = prev_revision + 1;
    artifact.produced_by = AgentKind::modeler;
    return artifact;
}

inline Artifact generate_testbench(const DesignSpec& spec, const ContextWindow& ctx,
                                   const ExecutionPlan& plan, Provider& provider,
                                   const PromptLibrary& prompts, const LoopPolicy& policy,
                                   int prev_revision = 0,
                                   const std::string& task = "generate testbench") {
    if (!policy.allow_tb_modification && prev_revision >= 1)
        throw Error(ErrorCode::policy_violation,
                    std::string("policy ") + to_string(policy.name) +
                        " forbids testbench modification");
    if (!detail::plan_has_agent(plan, AgentKind::verifier))
        throw Error(ErrorCode::config_error, "plan contains no verifier task");
    auto fills = base_fills(spec, ctx);
    fills["task"] = task;
    CompletionRequest req{render_template(prompts.get("verifier"), fills), Role::verifier};
    Artifact artifact;
    artifact.kind = ArtifactKind::testbench;
    artifact.filename = kTestbenchFilename;
    artifact.content = detail::request_single_block(provider, req);
    artifact.revision = prev_revision + 1;
    artifact.produced_by = AgentKind::verifier;
    return artifact;
}

// ── Arbiter (Agent 4) ───────────────────────────────────────────

struct ArbiterVerdict {
    ArbiterPath path = ArbiterPath::success;
    TargetAgent target_agent = TargetAgent::none;
    std::string defect_summary;
    std::vector<std::string> violated_constraints;
    std::string confidence_note;

    bool operator==(const ArbiterVerdict&) const = default;
};

inline void to_json(json& j, const ArbiterVerdict& v) {
    j = json{{"path", to_string(v.path)},
             {"target_agent", to_string(v.target_agent)},
             {"defect_summary", v.defect_summary},
             {"violated_constraints", v.violated_constraints},
             {"confidence_note", v.confidence_note}};
}

inline void from_json(const json& j, ArbiterVerdict& v) {
    v.path = arbiter_path_from_string(j.at("path").get<std::string>());
    v.target_agent = target_agent_from_string(j.at("target_agent").get<std::string>());
    v.defect_summary = j.at("defect_summary").get<std::string>();
    v.violated_constraints = j.at("violated_constraints").get<std::vector<std::string>>();
    v.confidence_note = j.at("confidence_note").get<std::string>();
}

inline void validate_verdict(const ArbiterVerdict& v) {
    switch (v.path) {
        case ArbiterPath::syntax_repair:
            if (v.target_agent == TargetAgent::none)
                throw Error(ErrorCode::inconsistent_verdict, "syntax_repair needs a target agent");
            break;
        case ArbiterPath::design_refinement:
            if (v.target_agent != TargetAgent::modeler)
                throw Error(ErrorCode::inconsistent_verdict,
                            "design_refinement must target the modeler");
            break;
        case ArbiterPath::tb_realignment:
            if (v.target_agent != TargetAgent::verifier)
                throw Error(ErrorCode::inconsistent_verdict,
                            "tb_realignment must target the verifier");
            break;
        case ArbiterPath::success:
            if (v.target_agent != TargetAgent::none || !v.violated_constraints.empty())
                throw Error(ErrorCode::inconsistent_verdict,
                            "success verdict must carry no target and no violations");
            break;
    }
}

inline const char* verdict_schema_instruction() {
    return R"(Respond with a single JSON object and no prose. Exactly these fields, no others:
{"path": "syntax_repair" | "design_refinement" | "tb_realignment" | "success",
 "target_agent": "modeler" | "verifier" | "none",
 "defect_summary": string,
 "violated_constraints": [constraint ids],
 "confidence_note": string})";
}

// Strict parse: a single JSON object, exact field set, exact enum spellings.
// Inconsistent-but-well-formed verdicts raise InconsistentVerdict instead.
inline ArbiterVerdict parse_verdict(std::string_view response) {
    std::string body = detail::trim(response);
    if (body.starts_with("```")) {
        CodeBlockScan scan = scan_code_blocks(body);
        if (scan.count >= 1) body = detail::trim(scan.first);
    }
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorCode::verdict_parse_error, "verdict is not a JSON object");
    static const std::vector<std::string> expected = {
        "path", "target_agent", "defect_summary", "violated_constraints", "confidence_note"};
    for (const auto& key : expected)
        if (!j.contains(key))
            throw Error(ErrorCode::verdict_parse_error, "verdict missing field '" + key + "'");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(expected.begin(), expected.end(), key) == expected.end())
            throw Error(ErrorCode::verdict_parse_error, "verdict has unknown field '" + key + "'");
    }
    ArbiterVerdict v;
    try {
        v = j.get<ArbiterVerdict>();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::verdict_parse_error, e.what());
    }
    validate_verdict(v);
    return v;
}

inline std::string tail_lines(const std::string& text, size_t max_lines) {
    auto lines = detail::split_lines(text);
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    std::string out;
    const size_t start = lines.size() > max_lines ? lines.size() - max_lines : 0;
    for (size_t i = start; i < lines.size(); ++i) {
        out += lines[i];
        out += '\n';
    }
    return out;
}

inline std::string sim_evidence(const SimReport& sim, const Artifact& model, const Artifact& tb) {
    std::string out = "compile_ok: " + std::string(sim.compile_ok ? "true" : "false") + "\n";
    out += "compile log (tail):\n" + tail_lines(sim.compile_log, 40);
    if (sim.run_ok.has_value()) {
        out += "run_ok: " + std::string(*sim.run_ok ? "true" : "false") + "\n";
        out += "run log (tail):\n" + tail_lines(sim.run_log.value_or(""), 40);
    }
    if (!sim.signatures.empty()) {
        out += "signatures:\n";
        for (const auto& s : sim.signatures)
            out += "  " + std::string(to_string(s.kind)) + " " + s.file +
                   (s.line ? ":" + std::to_string(*s.line) : "") + " | " + s.message + "\n";
    }
    out += "artifacts: " + model.filename + " r" + std::to_string(model.revision) + " digest " +
           digest(model.content).substr(0, 12) + ", " + tb.filename + " r" +
           std::to_string(tb.revision) + " digest " + digest(tb.content).substr(0, 12) + "\n";
    return out;
}

// Compact line diff used when an artifact is regenerated: common prefix and
// suffix are trimmed, the changed middle is reported capped at a few lines.
inline std::string artifact_diff_summary(const std::string& before, const std::string& after) {
    auto old_lines = detail::split_lines(before);
    auto new_lines = detail::split_lines(after);
    size_t prefix = 0;
    while (prefix < old_lines.size() && prefix < new_lines.size() &&
           old_lines[prefix] == new_lines[prefix])
        ++prefix;
    size_t old_tail = old_lines.size(), new_tail = new_lines.size();
    while (old_tail > prefix && new_tail > prefix &&
           old_lines[old_tail - 1] == new_lines[new_tail - 1]) {
        --old_tail;
        --new_tail;
    }
    std::string out = "-" + std::to_string(old_tail - prefix) + " +" +
                      std::to_string(new_tail - prefix) + " lines";
    const size_t cap = 6;
    size_t shown = 0;
    for (size_t i = prefix; i < old_tail && shown < cap; ++i, ++shown)
        out += "\n- " + old_lines[i];
    for (size_t i = prefix; i < new_tail && shown < cap; ++i, ++shown)
        out += "\n+ " + new_lines[i];
    return out;
}

// Compile failures never reach the LLM: the verdict is forced to
// syntax_repair and targeted at whichever artifact's filename appears first
// in the error signatures.
inline ArbiterVerdict arbitrate(const DesignSpec& spec, const ContextWindow& ctx,
                                const Artifact& model, const Artifact& tb, const SimReport& sim,
                                Provider& provider, const PromptLibrary& prompts) {
    if (!sim.compile_ok) {
        ArbiterVerdict v;
        v.path = ArbiterPath::syntax_repair;
        v.target_agent = TargetAgent::modeler;
        for (const auto& s : sim.signatures) {
            if (s.file == model.filename) {
                v.target_agent = TargetAgent::modeler;
                break;
            }
            if (s.file == tb.filename) {
                v.target_agent = TargetAgent::verifier;
                break;
            }
        }
        v.defect_summary =
            sim.signatures.empty() ? "compilation failed" : sim.signatures.front().message;
        v.confidence_note = "deterministic pre-filter (compile failure)";
        return v;
    }

    auto fills = base_fills(spec, ctx);
    fills["logs"] = sim_evidence(sim, model, tb);
    fills["schema"] = verdict_schema_instruction();
    CompletionRequest req{render_template(prompts.get("arbiter"), fills), Role::arbiter};
    std::string response = provider.complete(req);
    try {
        return parse_verdict(response);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::verdict_parse_error) throw;
        req.prompt += std::string("\nREMINDER: your previous reply was not a valid verdict (") +
                      e.what() + ").\n" + verdict_schema_instruction() + "\n";
        response = provider.complete(req);
        return parse_verdict(response);
    }
}

}  // namespace refevo
