// The symbiotic verification loop: plans, fans out dual generation, runs
// the simulation environment, arbitrates and follows the four routing
// paths until success or budget exhaustion, under a selectable policy.
#pragma once

#include <filesystem>
#include <future>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "refevo/context.hpp"
#include "refevo/core.hpp"
#include "refevo/gateway.hpp"
#include "refevo/planner.hpp"
#include "refevo/simrunner.hpp"

namespace refevo {

// Seam between the loop and the toolchain; tests drive the loop with a
// scripted stand-in so routing can be enumerated exhaustively.
class Simulator {
public:
    virtual ~Simulator() = default;
    virtual SimReport simulate(const Artifact& model, const Artifact& tb,
                               const std::string& session_id, int attempt) = 0;
};

class ToolchainSimulator : public Simulator {
public:
    explicit ToolchainSimulator(ToolchainConfig base) : base_(std::move(base)) {
        validate_toolchain(base_);
    }

    SimReport simulate(const Artifact& model, const Artifact& tb, const std::string& session_id,
                       int attempt) override {
        ToolchainConfig cfg = base_;
        cfg.workdir = base_.workdir + "/" + session_id + "/" + std::to_string(attempt);
        SimReport report = compile_pair(model, tb, cfg);
        if (report.compile_ok)
            report = run_simulation(std::move(report), cfg, {model.filename, tb.filename});
        return report;
    }

private:
    ToolchainConfig base_;
};

// ── Session state ───────────────────────────────────────────────

struct SessionState {
    Phase phase = Phase::planning;
    int iteration = 0;
    std::optional<Artifact> current_model;
    std::optional<Artifact> current_tb;
    std::optional<ArbiterVerdict> last_verdict;
    std::optional<SessionOutcome> outcome;
};

inline void validate_state(const SessionState& state, const ExecutionPlan& plan,
                           const LoopPolicy& policy) {
    if ((state.phase == Phase::done) != state.outcome.has_value())
        throw Error(ErrorCode::config_error, "phase done iff outcome present");
    if (state.iteration > plan.max_iterations)
        throw Error(ErrorCode::config_error, "iteration exceeded plan.max_iterations");
    if (policy.name == PolicyName::fixed_tb && state.current_tb && state.current_tb->revision > 1)
        throw Error(ErrorCode::config_error, "fixed_tb testbench revision exceeded 1");
}

struct RouteDecision {
    Phase next_phase = Phase::generating;
    std::optional<AgentKind> regenerate;
    bool blocked = false;  // tb change required but forbidden by policy
};

inline RouteDecision route(const ArbiterVerdict& verdict, const LoopPolicy& policy) {
    switch (verdict.path) {
        case ArbiterPath::success:
            return {Phase::done, std::nullopt, false};
        case ArbiterPath::design_refinement:
            return {Phase::generating, AgentKind::modeler, false};
        case ArbiterPath::syntax_repair: {
            const AgentKind target = verdict.target_agent == TargetAgent::verifier
                                         ? AgentKind::verifier
                                         : AgentKind::modeler;
            if (target == AgentKind::verifier && !policy.allow_tb_modification)
                return {Phase::repairing, std::nullopt, true};
            return {Phase::generating, target, false};
        }
        case ArbiterPath::tb_realignment:
            if (!policy.allow_tb_modification) return {Phase::repairing, std::nullopt, true};
            return {Phase::generating, AgentKind::verifier, false};
    }
    return {Phase::done, std::nullopt, false};
}

enum class TerminationDecision { continue_, stop_success, stop_budget };

inline TerminationDecision check_termination(const SessionState& state,
                                             const ExecutionPlan& plan,
                                             TokenCount tokens_spent) {
    if (state.last_verdict && state.last_verdict->path == ArbiterPath::success)
        return TerminationDecision::stop_success;
    if (state.iteration >= plan.max_iterations) return TerminationDecision::stop_budget;
    if (tokens_spent >= TokenCount(plan.token_budget)) return TerminationDecision::stop_budget;
    return TerminationDecision::continue_;
}

// ── Session configuration ───────────────────────────────────────

struct SessionConfig {
    std::string session_id = "session";
    ContextConfig context;
    PromptLibrary prompts = default_prompts();
    Rubric rubric = default_rubric();
    std::map<std::string, std::string> asset_contents;
    std::string out_dir;  // empty: nothing written to disk
    std::optional<int> max_iterations_override;
    std::optional<int> token_budget_override;
    json effective_config_echo;  // echoed into the output directory when set
};

// ── Loop driver ─────────────────────────────────────────────────

namespace detail {

struct LoopAccounting {
    TokenLedger ledger;
    TokenCount spec_tokens = 0;
    TokenCount history_tokens = 0;  // all appended turn contents
    int round = 0;

    // One row per logical agent call. Accounting measures content payload:
    // the anchored prompt as segment sums, the baseline as spec plus the
    // full raw history, the response as the extracted payload.
    TokenRound add_call(const ContextWindow& ctx, std::string_view response_payload,
                        TranscriptWriter& transcript, int iteration) {
        TokenRound row;
        row.round = ++round;
        row.anchored_prompt = context_tokens(ctx);
        row.baseline_prompt = spec_tokens + history_tokens;
        row.response = estimate_tokens(response_payload);
        ledger.add(row);
        transcript.write(transcript_record("tokens", {{"iteration", iteration},
                                                      {"round", row.round},
                                                      {"anchored_prompt", row.anchored_prompt},
                                                      {"baseline_prompt", row.baseline_prompt},
                                                      {"response", row.response}}));
        return row;
    }
};

inline std::map<SignatureKind, int> signature_counts(const SimReport& sim) {
    std::map<SignatureKind, int> counts;
    for (const auto& s : sim.signatures) counts[s.kind]++;
    return counts;
}

inline std::string sim_turn_content(const SimReport& sim) {
    std::string out = "compile_ok=" + std::string(sim.compile_ok ? "true" : "false");
    if (sim.run_ok.has_value())
        out += " run_ok=" + std::string(*sim.run_ok ? "true" : "false");
    out += "\n";
    out += tail_lines(sim.compile_log, 30);
    if (sim.run_log) out += tail_lines(*sim.run_log, 30);
    for (const auto& s : sim.signatures)
        out += std::string(to_string(s.kind)) + " " + s.file +
               (s.line ? ":" + std::to_string(*s.line) : "") + ": " + s.message + "\n";
    return out;
}

}  // namespace detail

// Runs one full session. Provider and toolchain faults surface as a failed
// outcome with an error note; only configuration errors propagate.
inline SessionOutcome run_session(const DesignSpec& spec, const LoopPolicy& policy,
                                  Provider& provider, Simulator& simulator,
                                  const SessionConfig& cfg) {
    validate_policy(policy);
    const ComplexityProfile profile = analyze_complexity(spec, cfg.rubric);
    const AssetReport assets = evaluate_assets(spec, cfg.asset_contents);
    ExecutionPlan plan = build_execution_plan(spec, profile, assets, policy, cfg.rubric);
    if (cfg.max_iterations_override) plan.max_iterations = *cfg.max_iterations_override;
    if (cfg.token_budget_override) plan.token_budget = *cfg.token_budget_override;

    TranscriptWriter transcript;
    if (!cfg.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out_dir, ec);
        if (ec) throw Error(ErrorCode::workdir_error, "cannot create " + cfg.out_dir);
        transcript = TranscriptWriter(cfg.out_dir + "/transcript.jsonl");
    }
    transcript.write(transcript_record("session_start", {{"spec", spec},
                                                         {"policy", policy},
                                                         {"plan", plan},
                                                         {"context_config", cfg.context}}));

    SessionState state;
    detail::LoopAccounting accounting;
    accounting.spec_tokens = estimate_tokens(spec.body);
    ContextWindow ctx = init_context(spec, cfg.context);
    std::vector<IterationRecord> iterations;
    int turn_index = 0;
    int sim_attempt = 0;
    std::optional<SimReport> last_sim;

    auto append = [&](Role role, const std::string& content) {
        Turn turn{turn_index++, role, content};
        accounting.history_tokens += estimate_tokens(turn.content);
        transcript.write(transcript_record(
            "turn", {{"iteration", int(iterations.size()) + 1}, {"turn", turn}}));
        ctx = append_turn(std::move(ctx), std::move(turn));
    };

    auto tokens_spent = [&] {
        return accounting.ledger.anchored_total + accounting.ledger.response_total;
    };

    auto classify_failure = [&]() -> SessionStatus {
        if (last_sim && !last_sim->compile_ok) return SessionStatus::compile_fail;
        if (last_sim) return SessionStatus::func_fail;
        return SessionStatus::compile_fail;  // nothing ever compiled
    };

    SessionOutcome outcome;
    outcome.mode = policy;

    try {
        // structured pre-generation steps (skipped by the one-shot policy)
        if (policy.name != PolicyName::naive) {
            for (const auto& task : plan.tasks) {
                if (task.description.starts_with("generate ")) continue;
                auto fills = base_fills(spec, ctx);
                fills["task"] = task.description;
                CompletionRequest req{render_template(cfg.prompts.get("step"), fills),
                                      Role::modeler};
                const std::string note = provider.complete(req);
                accounting.add_call(ctx, note, transcript, int(iterations.size()) + 1);
                append(Role::modeler, "[" + task.description + "]\n" + note);
            }
        }

        // initial artifacts: concurrent dual generation, reuse when planned
        auto reused_content = [&](ArtifactKind kind) -> std::optional<Artifact> {
            for (const auto& asset : assets.reusable) {
                const bool tb = asset.kind == AssetKind::testbench;
                if ((kind == ArtifactKind::testbench) != tb) continue;
                auto it = cfg.asset_contents.find(asset.path);
                std::string content = it == cfg.asset_contents.end() ? "" : it->second;
                Artifact artifact{kind, kind == ArtifactKind::testbench ? kTestbenchFilename
                                                                        : kModelFilename,
                                  content, 1,
                                  kind == ArtifactKind::testbench ? AgentKind::verifier
                                                                  : AgentKind::modeler};
                return artifact;
            }
            return std::nullopt;
        };

        Artifact model, tb;
        {
            const ContextWindow snapshot = ctx;  // independent renderings
            std::optional<Artifact> reused_model = reused_content(ArtifactKind::reference_model);
            std::optional<Artifact> reused_tb = reused_content(ArtifactKind::testbench);
            std::future<Artifact> model_future, tb_future;
            if (!reused_model)
                model_future = std::async(std::launch::async, [&] {
                    return generate_model(spec, snapshot, plan, provider, cfg.prompts, 0);
                });
            if (!reused_tb)
                tb_future = std::async(std::launch::async, [&] {
                    return generate_testbench(spec, snapshot, plan, provider, cfg.prompts,
                                              policy, 0);
                });
            if (reused_model) {
                model = *reused_model;
                append(Role::tool, "[reusing legacy asset for dut.cpp]");
            } else {
                model = model_future.get();
                accounting.add_call(snapshot, model.content, transcript, 1);
                append(Role::modeler, "[artifact dut.cpp r1]\n" + model.content);
            }
            if (reused_tb) {
                tb = *reused_tb;
                append(Role::tool, "[reusing legacy asset for tb.cpp]");
            } else {
                tb = tb_future.get();
                accounting.add_call(snapshot, tb.content, transcript, 1);
                append(Role::verifier, "[artifact tb.cpp r1]\n" + tb.content);
            }
        }
        state.current_model = model;
        state.current_tb = tb;
        state.phase = Phase::simulating;

        for (;;) {
            SimReport sim = simulator.simulate(model, tb, cfg.session_id, ++sim_attempt);
            last_sim = sim;
            transcript.write(transcript_record(
                "sim_report",
                {{"iteration", int(iterations.size()) + 1}, {"report", sim_report_record(sim)}}));
            append(Role::tool, detail::sim_turn_content(sim));

            if (!policy.allow_iteration) {
                // one-shot modes: classify and stop, no repair
                if (sim.compile_ok && sim.run_ok.value_or(false)) {
                    outcome.status = SessionStatus::success;
                    outcome.golden = GoldenPair{model, tb};
                } else {
                    outcome.status = sim.compile_ok ? SessionStatus::func_fail
                                                    : SessionStatus::compile_fail;
                }
                break;
            }

            state.phase = Phase::arbitrating;
            const bool llm_arbitration = sim.compile_ok;
            ArbiterVerdict verdict =
                arbitrate(spec, ctx, model, tb, sim, provider, cfg.prompts);
            if (llm_arbitration)
                accounting.add_call(ctx, json(verdict).dump(), transcript,
                                    int(iterations.size()) + 1);
            append(Role::arbiter, json(verdict).dump());
            state.last_verdict = verdict;

            IterationRecord record;
            record.iteration = ++state.iteration;
            record.verdict_path = verdict.path;
            record.signatures = detail::signature_counts(sim);
            record.tokens_spent = 0;
            for (const auto& row : accounting.ledger.rounds) record.tokens_spent +=
                row.anchored_prompt + row.response;
            for (const auto& prev : iterations) record.tokens_spent -= prev.tokens_spent;
            record.model_revision = model.revision;
            record.tb_revision = tb.revision;
            iterations.push_back(record);
            transcript.write(transcript_record("verdict", {{"iteration", record.iteration},
                                                           {"verdict", verdict},
                                                           {"model_revision", model.revision},
                                                           {"tb_revision", tb.revision}}));
            transcript.write(transcript_record("iteration", {{"record", record}}));
            validate_state(state, plan, policy);

            if (verdict.path == ArbiterPath::success) {
                outcome.status = SessionStatus::success;
                outcome.golden = GoldenPair{model, tb};
                break;
            }

            const RouteDecision decision = route(verdict, policy);
            if (decision.blocked) {
                // The only admissible repair is forbidden; the state is a
                // fixpoint, so remaining iterations are consumed as blocked
                // records without further provider or toolchain calls.
                while (state.iteration < plan.max_iterations) {
                    IterationRecord blocked = record;
                    blocked.iteration = ++state.iteration;
                    blocked.tokens_spent = 0;
                    iterations.push_back(blocked);
                    transcript.write(transcript_record("iteration", {{"record", blocked}}));
                }
                outcome.status = SessionStatus::func_fail;
                outcome.error_note = "tb_realignment blocked by " +
                                     std::string(to_string(policy.name)) + " policy";
                break;
            }

            if (check_termination(state, plan, tokens_spent()) ==
                TerminationDecision::stop_budget) {
                outcome.status = tokens_spent() >= TokenCount(plan.token_budget)
                                     ? SessionStatus::budget_exhausted
                                     : classify_failure();
                break;
            }

            state.phase = Phase::generating;
            if (decision.regenerate == AgentKind::modeler) {
                const std::string before = model.content;
                model = generate_model(spec, ctx, plan, provider, cfg.prompts, model.revision,
                                       "repair the reference model: " + verdict.defect_summary);
                accounting.add_call(ctx, model.content, transcript, int(iterations.size()) + 1);
                append(Role::modeler, "[artifact dut.cpp r" + std::to_string(model.revision) +
                                          "]\n" + model.content + "\ndiff: " +
                                          artifact_diff_summary(before, model.content));
                state.current_model = model;
            } else if (decision.regenerate == AgentKind::verifier) {
                const std::string before = tb.content;
                tb = generate_testbench(spec, ctx, plan, provider, cfg.prompts, policy,
                                        tb.revision,
                                        "repair the testbench: " + verdict.defect_summary);
                accounting.add_call(ctx, tb.content, transcript, int(iterations.size()) + 1);
                append(Role::verifier, "[artifact tb.cpp r" + std::to_string(tb.revision) +
                                           "]\n" + tb.content + "\ndiff: " +
                                           artifact_diff_summary(before, tb.content));
                state.current_tb = tb;
            }
            state.phase = Phase::simulating;
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::config_error || e.code() == ErrorCode::spec_exceeds_budget ||
            e.code() == ErrorCode::toolchain_misconfigured)
            throw;
        outcome.status = classify_failure();
        outcome.error_note = e.what();
        outcome.golden.reset();
    }

    outcome.iterations = iterations;
    outcome.token_ledger = accounting.ledger;
    validate_outcome(outcome);
    state.phase = Phase::done;
    state.outcome = outcome;
    transcript.write(transcript_record("outcome", {{"outcome", outcome}}));

    if (!cfg.out_dir.empty()) {
        json manifest = {{"spec_id", spec.spec_id},
                         {"status", to_string(outcome.status)},
                         {"iterations", int(outcome.iterations.size())},
                         {"mode", to_string(policy.name)},
                         {"token_totals",
                          {{"anchored", accounting.ledger.anchored_total},
                           {"baseline", accounting.ledger.baseline_total},
                           {"response", accounting.ledger.response_total}}},
                         {"golden", json()}};
        if (outcome.golden) {
            std::error_code ec;
            std::filesystem::create_directories(cfg.out_dir + "/golden", ec);
            write_text_file(cfg.out_dir + "/golden/" + outcome.golden->model.filename,
                            outcome.golden->model.content);
            write_text_file(cfg.out_dir + "/golden/" + outcome.golden->testbench.filename,
                            outcome.golden->testbench.content);
            manifest["golden"] = {{"model", "golden/" + outcome.golden->model.filename},
                                  {"testbench",
                                   "golden/" + outcome.golden->testbench.filename}};
        }
        write_text_file(cfg.out_dir + "/manifest.json", manifest.dump(2) + "\n");
        if (last_sim)
            write_text_file(cfg.out_dir + "/final_sim_report.json",
                            json(*last_sim).dump(2) + "\n");
        if (!cfg.effective_config_echo.is_null())
            write_text_file(cfg.out_dir + "/effective_config.json",
                            cfg.effective_config_echo.dump(2) + "\n");
    }
    return outcome;
}

}  // namespace refevo
