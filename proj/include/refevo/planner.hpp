// Dynamic design planner: scores semantic complexity along three dimensions
// with a data-driven rubric, evaluates legacy assets for reuse, and emits
// the structured execution plan.
#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "refevo/core.hpp"
#include "refevo/schema.hpp"

namespace refevo {

enum class Tier { simple, medium, complex_ };

inline const char* to_string(Tier t) {
    switch (t) {
        case Tier::simple: return "simple";
        case Tier::medium: return "medium";
        case Tier::complex_: return "complex";
    }
    return "simple";
}

inline Tier tier_from_string(std::string_view s) {
    if (s == "simple") return Tier::simple;
    if (s == "medium") return Tier::medium;
    if (s == "complex") return Tier::complex_;
    throw Error(ErrorCode::config_error, "unknown tier '" + std::string(s) + "'");
}

struct ComplexityProfile {
    int interface_score = 0;
    int state_space_score = 0;
    int concurrency_score = 0;
    Tier tier = Tier::simple;

    int sum() const { return interface_score + state_space_score + concurrency_score; }
    bool operator==(const ComplexityProfile&) const = default;
};

inline void to_json(json& j, const ComplexityProfile& p) {
    j = json{{"interface_score", p.interface_score},
             {"state_space_score", p.state_space_score},
             {"concurrency_score", p.concurrency_score},
             {"tier", to_string(p.tier)}};
}

inline void from_json(const json& j, ComplexityProfile& p) {
    p.interface_score = j.at("interface_score").get<int>();
    p.state_space_score = j.at("state_space_score").get<int>();
    p.concurrency_score = j.at("concurrency_score").get<int>();
    p.tier = tier_from_string(j.at("tier").get<std::string>());
}

// ── Rubric ──────────────────────────────────────────────────────

struct DimensionRule {
    std::string method;  // "families" or "count_thresholds"
    std::vector<std::pair<std::string, std::vector<std::string>>> families;
    std::vector<std::string> keywords;
    std::vector<int> thresholds;
    int cap = 3;
};

struct TierParams {
    int max_iterations = 4;
    int token_budget = 20000;
};

struct Rubric {
    DimensionRule interface_rule;
    DimensionRule state_space_rule;
    DimensionRule concurrency_rule;
    int simple_max = 2;
    int medium_max = 5;
    std::map<std::string, TierParams> tier_params;
};

namespace detail {

inline DimensionRule parse_dimension_rule(const json& j) {
    DimensionRule rule;
    rule.method = j.at("method").get<std::string>();
    rule.cap = j.value("cap", 3);
    if (rule.method == "families") {
        for (const auto& [name, words] : j.at("families").items())
            rule.families.emplace_back(name, words.get<std::vector<std::string>>());
    } else if (rule.method == "count_thresholds") {
        rule.keywords = j.at("keywords").get<std::vector<std::string>>();
        rule.thresholds = j.at("thresholds").get<std::vector<int>>();
    } else {
        throw Error(ErrorCode::config_error, "unknown rubric method '" + rule.method + "'");
    }
    return rule;
}

}  // namespace detail

inline Rubric parse_rubric(const json& j) {
    Rubric r;
    const auto& dims = j.at("dimensions");
    r.interface_rule = detail::parse_dimension_rule(dims.at("interface"));
    r.state_space_rule = detail::parse_dimension_rule(dims.at("state_space"));
    r.concurrency_rule = detail::parse_dimension_rule(dims.at("concurrency"));
    r.simple_max = j.at("tier_thresholds").at("simple_max").get<int>();
    r.medium_max = j.at("tier_thresholds").at("medium_max").get<int>();
    for (const auto& [tier, params] : j.at("tier_params").items())
        r.tier_params[tier] = {params.at("max_iterations").get<int>(),
                               params.at("token_budget").get<int>()};
    return r;
}

// Embedded copy of data/complexity_rubric.json; a test keeps them in sync.
inline const char* default_rubric_json() {
    return R"json({
  "version": 1,
  "dimensions": {
    "interface": {
      "method": "families",
      "families": {
        "bus": ["axi", "ahb", "apb", "wishbone", "avalon"],
        "handshake": ["handshake", "valid/ready", "req/ack"],
        "stream": ["stream", "fifo", "axis"],
        "serial": ["uart", "spi", "i2c"]
      },
      "cap": 3
    },
    "state_space": {
      "method": "count_thresholds",
      "keywords": ["fsm", "state machine", "state", "mode", "register"],
      "thresholds": [1, 3, 6],
      "cap": 3
    },
    "concurrency": {
      "method": "families",
      "families": {
        "clock_domains": ["clock domain", "clock domains", "multi-clock", "dual clock", "cdc"],
        "pipeline": ["pipeline", "pipelined", "stage"],
        "parallel": ["parallel", "concurrent", "arbiter", "simultaneous"]
      },
      "cap": 3
    }
  },
  "tier_thresholds": { "simple_max": 2, "medium_max": 5 },
  "tier_params": {
    "simple":  { "max_iterations": 4,  "token_budget": 20000 },
    "medium":  { "max_iterations": 6,  "token_budget": 60000 },
    "complex": { "max_iterations": 10, "token_budget": 120000 }
  }
})json";
}

inline Rubric default_rubric() { return parse_rubric(json::parse(default_rubric_json())); }

inline Rubric load_rubric(const std::string& path) {
    return parse_rubric(json::parse(read_text_file(path)));
}

// ── Complexity analysis ─────────────────────────────────────────

namespace detail {

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

// Word-boundary occurrence count: the characters adjacent to a match must
// not be alphanumeric, so "state" does not match inside "statement".
inline int count_keyword_occurrences(std::string_view lower_text, std::string_view keyword) {
    auto is_word = [](unsigned char c) { return std::isalnum(c) != 0; };
    int n = 0;
    size_t pos = 0;
    while ((pos = lower_text.find(keyword, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_word(lower_text[pos - 1]);
        const size_t end = pos + keyword.size();
        const bool right_ok = end >= lower_text.size() || !is_word(lower_text[end]);
        if (left_ok && right_ok) {
            ++n;
            pos = end;
        } else {
            ++pos;
        }
    }
    return n;
}

inline int score_dimension(const std::string& lower_body, const DimensionRule& rule) {
    if (rule.method == "families") {
        int families_hit = 0;
        for (const auto& [name, words] : rule.families) {
            int occurrences = 0;
            for (const auto& w : words) occurrences += count_keyword_occurrences(lower_body, w);
            if (occurrences > 0) ++families_hit;
        }
        return std::min(rule.cap, families_hit);
    }
    int total = 0;
    for (const auto& w : rule.keywords) total += count_keyword_occurrences(lower_body, w);
    int score = 0;
    for (int t : rule.thresholds)
        if (total >= t) ++score;
    return std::min(rule.cap, score);
}

}  // namespace detail

inline Tier tier_for_sum(int sum, const Rubric& rubric) {
    if (sum <= rubric.simple_max) return Tier::simple;
    if (sum <= rubric.medium_max) return Tier::medium;
    return Tier::complex_;
}

inline ComplexityProfile analyze_complexity(const DesignSpec& spec, const Rubric& rubric) {
    const std::string lower = detail::to_lower(spec.body);
    ComplexityProfile p;
    p.interface_score = detail::score_dimension(lower, rubric.interface_rule);
    p.state_space_score = detail::score_dimension(lower, rubric.state_space_rule);
    p.concurrency_score = detail::score_dimension(lower, rubric.concurrency_rule);
    p.tier = tier_for_sum(p.sum(), rubric);
    return p;
}

// ── Asset evaluation ────────────────────────────────────────────

struct AssetReport {
    std::vector<AssetRef> reusable;
    std::map<std::string, std::string> reuse_rationale;  // keyed by asset path
    std::vector<ArtifactKind> regenerate;

    bool operator==(const AssetReport&) const = default;
};

inline void to_json(json& j, const AssetReport& r) {
    json regen = json::array();
    for (auto k : r.regenerate) regen.push_back(to_string(k));
    j = json{{"reusable", r.reusable}, {"reuse_rationale", r.reuse_rationale},
             {"regenerate", regen}};
}

inline void from_json(const json& j, AssetReport& r) {
    r.reusable = j.at("reusable").get<std::vector<AssetRef>>();
    r.reuse_rationale = j.at("reuse_rationale").get<std::map<std::string, std::string>>();
    r.regenerate.clear();
    for (const auto& k : j.at("regenerate"))
        r.regenerate.push_back(artifact_kind_from_string(k.get<std::string>()));
}

namespace detail {

// Keywords of a constraint: lowercase alphanumeric words of length >= 4.
inline std::set<std::string> constraint_keywords(const DesignSpec& spec,
                                                 ConstraintCategory category) {
    std::set<std::string> keywords;
    for (const auto& c : spec.constraints) {
        if (c.category != category) continue;
        std::string word;
        auto flush = [&] {
            if (word.size() >= 4) keywords.insert(word);
            word.clear();
        };
        for (unsigned char ch : c.text) {
            if (std::isalnum(ch))
                word.push_back(char(std::tolower(ch)));
            else
                flush();
        }
        flush();
    }
    return keywords;
}

}  // namespace detail

// An asset is reusable iff its kind matches a needed artifact and its
// content contains every keyword of the matching constraint category
// (reference models check behavior constraints, testbenches interface ones).
inline AssetReport evaluate_assets(const DesignSpec& spec,
                                   const std::map<std::string, std::string>& asset_contents) {
    AssetReport report;
    const struct {
        ArtifactKind artifact;
        AssetKind asset;
        ConstraintCategory category;
    } needed[] = {
        {ArtifactKind::reference_model, AssetKind::model_code, ConstraintCategory::behavior},
        {ArtifactKind::testbench, AssetKind::testbench, ConstraintCategory::interface},
    };
    for (const auto& need : needed) {
        const AssetRef* match = nullptr;
        std::string rationale;
        const auto keywords = detail::constraint_keywords(spec, need.category);
        for (const auto& asset : spec.legacy_assets) {
            if (asset.kind != need.asset) continue;
            auto it = asset_contents.find(asset.path);
            const std::string content =
                detail::to_lower(it == asset_contents.end() ? std::string{} : it->second);
            size_t hits = 0;
            for (const auto& kw : keywords)
                if (content.find(kw) != std::string::npos) ++hits;
            if (hits == keywords.size()) {
                match = &asset;
                rationale = "contains all " + std::to_string(keywords.size()) + " " +
                            std::string(to_string(need.category)) + " constraint keyword(s)";
                break;
            }
        }
        if (match) {
            report.reusable.push_back(*match);
            report.reuse_rationale[match->path] = rationale;
        } else {
            report.regenerate.push_back(need.artifact);
        }
    }
    return report;
}

// ── Execution plan ──────────────────────────────────────────────

struct TaskStep {
    std::string step_id;
    std::string description;
    AgentKind assigned_agent = AgentKind::modeler;
    std::vector<std::string> depends_on;

    bool operator==(const TaskStep&) const = default;
};

inline void to_json(json& j, const TaskStep& t) {
    j = json{{"step_id", t.step_id},
             {"description", t.description},
             {"assigned_agent", to_string(t.assigned_agent)},
             {"depends_on", t.depends_on}};
}

inline void from_json(const json& j, TaskStep& t) {
    t.step_id = j.at("step_id").get<std::string>();
    t.description = j.at("description").get<std::string>();
    t.assigned_agent = agent_kind_from_string(j.at("assigned_agent").get<std::string>());
    t.depends_on = j.at("depends_on").get<std::vector<std::string>>();
}

struct ExecutionPlan {
    std::string plan_id;
    std::vector<TaskStep> tasks;
    ComplexityProfile complexity;
    LoopPolicy policy;
    int max_iterations = 4;
    int token_budget = 20000;
    bool policy_conflict = false;

    bool operator==(const ExecutionPlan&) const = default;
};

inline void to_json(json& j, const ExecutionPlan& p) {
    j = json{{"plan_id", p.plan_id},
             {"tasks", p.tasks},
             {"complexity", p.complexity},
             {"policy", p.policy},
             {"max_iterations", p.max_iterations},
             {"token_budget", p.token_budget},
             {"policy_conflict", p.policy_conflict}};
}

inline void from_json(const json& j, ExecutionPlan& p) {
    p.plan_id = j.at("plan_id").get<std::string>();
    p.tasks = j.at("tasks").get<std::vector<TaskStep>>();
    p.complexity = j.at("complexity").get<ComplexityProfile>();
    p.policy = j.at("policy").get<LoopPolicy>();
    p.max_iterations = j.at("max_iterations").get<int>();
    p.token_budget = j.at("token_budget").get<int>();
    p.policy_conflict = j.at("policy_conflict").get<bool>();
}

// Dependencies must reference earlier-declared steps, which also makes the
// task graph acyclic.
inline void validate_plan(const ExecutionPlan& plan) {
    std::set<std::string> seen;
    for (const auto& task : plan.tasks) {
        if (seen.count(task.step_id))
            throw Error(ErrorCode::config_error, "duplicate step id " + task.step_id);
        for (const auto& dep : task.depends_on)
            if (!seen.count(dep))
                throw Error(ErrorCode::config_error,
                            "step " + task.step_id + " depends on undeclared step " + dep);
        seen.insert(task.step_id);
    }
    if (plan.max_iterations < 1 || plan.token_budget < 1)
        throw Error(ErrorCode::config_error, "plan budgets must be positive");
}

inline const char* describe_generation(ArtifactKind kind) {
    return kind == ArtifactKind::reference_model ? "generate reference model"
                                                 : "generate testbench";
}

inline ExecutionPlan build_execution_plan(const DesignSpec& spec, const ComplexityProfile& profile,
                                          const AssetReport& assets, const LoopPolicy& policy,
                                          const Rubric& rubric) {
    validate_policy(policy);
    ExecutionPlan plan;
    plan.plan_id = "plan-" + spec.spec_id;
    plan.complexity = profile;
    plan.policy = policy;
    const auto params_it = rubric.tier_params.find(to_string(profile.tier));
    if (params_it == rubric.tier_params.end())
        throw Error(ErrorCode::config_error, "rubric lacks tier params for tier");
    plan.max_iterations = params_it->second.max_iterations;
    plan.token_budget = params_it->second.token_budget;

    int next_id = 0;
    auto add = [&](std::string description, AgentKind agent,
                   std::vector<std::string> deps) -> std::string {
        TaskStep step;
        step.step_id = "s" + std::to_string(++next_id);
        step.description = std::move(description);
        step.assigned_agent = agent;
        step.depends_on = std::move(deps);
        plan.tasks.push_back(step);
        return plan.tasks.back().step_id;
    };

    std::string skeleton_id;
    std::vector<std::string> model_deps;
    if (profile.tier != Tier::simple) {
        skeleton_id = add("draft interface skeleton", AgentKind::modeler, {});
        model_deps.push_back(skeleton_id);
    }
    if (profile.tier == Tier::complex_) {
        // one decomposition step per constraint category present, enum order
        for (auto category : {ConstraintCategory::interface, ConstraintCategory::register_,
                              ConstraintCategory::timing, ConstraintCategory::behavior}) {
            bool present = false;
            for (const auto& c : spec.constraints)
                if (c.category == category) present = true;
            if (!present) continue;
            std::vector<std::string> deps;
            if (!skeleton_id.empty()) deps.push_back(skeleton_id);
            model_deps.push_back(add(std::string("decompose ") + to_string(category) +
                                         " subblock",
                                     AgentKind::modeler, std::move(deps)));
        }
    }
    const bool need_model =
        std::find(assets.regenerate.begin(), assets.regenerate.end(),
                  ArtifactKind::reference_model) != assets.regenerate.end();
    const bool need_tb = std::find(assets.regenerate.begin(), assets.regenerate.end(),
                                   ArtifactKind::testbench) != assets.regenerate.end();
    if (need_model)
        add(describe_generation(ArtifactKind::reference_model), AgentKind::modeler, model_deps);
    if (need_tb) add(describe_generation(ArtifactKind::testbench), AgentKind::verifier, {});

    plan.policy_conflict = policy.name == PolicyName::naive && profile.tier != Tier::simple;
    validate_plan(plan);
    return plan;
}

// Embedded copy of data/plan.schema.json; a test keeps them in sync.
inline const char* plan_schema_json() {
    return R"json({
  "$id": "refevo/plan.schema.json",
  "title": "Execution Plan",
  "type": "object",
  "required": ["plan_id", "tasks", "complexity", "policy", "max_iterations", "token_budget", "policy_conflict"],
  "additionalProperties": false,
  "properties": {
    "plan_id": { "type": "string" },
    "tasks": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["step_id", "description", "assigned_agent", "depends_on"],
        "additionalProperties": false,
        "properties": {
          "step_id": { "type": "string" },
          "description": { "type": "string" },
          "assigned_agent": { "type": "string", "enum": ["modeler", "verifier"] },
          "depends_on": { "type": "array", "items": { "type": "string" } }
        }
      }
    },
    "complexity": {
      "type": "object",
      "required": ["interface_score", "state_space_score", "concurrency_score", "tier"],
      "additionalProperties": false,
      "properties": {
        "interface_score": { "type": "integer", "minimum": 0, "maximum": 3 },
        "state_space_score": { "type": "integer", "minimum": 0, "maximum": 3 },
        "concurrency_score": { "type": "integer", "minimum": 0, "maximum": 3 },
        "tier": { "type": "string", "enum": ["simple", "medium", "complex"] }
      }
    },
    "policy": {
      "type": "object",
      "required": ["name", "allow_iteration", "allow_tb_modification"],
      "additionalProperties": false,
      "properties": {
        "name": { "type": "string", "enum": ["naive", "flow_only", "fixed_tb", "refevo"] },
        "allow_iteration": { "type": "boolean" },
        "allow_tb_modification": { "type": "boolean" }
      }
    },
    "max_iterations": { "type": "integer", "minimum": 1 },
    "token_budget": { "type": "integer", "minimum": 1 },
    "policy_conflict": { "type": "boolean" }
  }
})json";
}

inline std::vector<std::string> validate_plan_json(const json& plan_json) {
    return validate_against_schema(plan_json, json::parse(plan_schema_json()));
}

}  // namespace refevo
