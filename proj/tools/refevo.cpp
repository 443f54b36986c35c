// refevo: turn a hardware design specification into a verified reference
// model + testbench pair with a planner-driven, arbiter-routed
// generate/compile/simulate/repair loop.
//
// Subcommands: plan, run, bench, coevo, report. Exit codes: 0 success,
// 1 failed session, 2 configuration or usage error.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "refevo/analytics.hpp"
#include "refevo/http_provider.hpp"
#include "refevo/loop.hpp"
#include "refevo/schema.hpp"

namespace fs = std::filesystem;
using namespace refevo;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string rubric_path;
    std::string prompts_dir;
    std::string toolchains_path;
    std::string toolchain_profile = "cpp";
    std::uint64_t seed = 20240501;
};

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    if (!fs::exists(path)) throw Error(ErrorCode::config_error, "config file not found: " + path);
    return json::parse(read_text_file(path));
}

DesignSpec load_spec_file(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::config_error, "spec file not found: " + path);
    const std::string stem = fs::path(path).stem().string();
    const SpecFormat format =
        fs::path(path).extension() == ".md" ? SpecFormat::markdown : SpecFormat::plain;
    return parse_spec(read_text_file(path), format, stem);
}

ContextConfig context_from_json(const json& cfg) {
    ContextConfig ctx;
    ctx.budgets = {1u << 20, 1u << 18, 1u << 19};
    if (cfg.contains("context")) {
        const json& c = cfg.at("context");
        if (c.contains("budgets")) ctx.budgets = c.at("budgets").get<ContextBudgets>();
        ctx.workspace_keep = c.value("workspace_keep", ctx.workspace_keep);
        ctx.summary_line_max = c.value("summary_line_max", ctx.summary_line_max);
    }
    return ctx;
}

Rubric rubric_from(const CommonOptions& opts, const json& cfg) {
    std::string path = opts.rubric_path;
    if (path.empty() && cfg.contains("rubric")) path = cfg.at("rubric").get<std::string>();
    return path.empty() ? default_rubric() : load_rubric(path);
}

PromptLibrary prompts_from(const CommonOptions& opts, const json& cfg) {
    std::string dir = opts.prompts_dir;
    if (dir.empty() && cfg.contains("prompts_dir")) dir = cfg.at("prompts_dir").get<std::string>();
    return dir.empty() ? default_prompts() : load_prompts(dir);
}

ToolchainConfig toolchain_from(const CommonOptions& opts, const json& cfg) {
    std::string path = opts.toolchains_path;
    if (path.empty() && cfg.contains("toolchains_file"))
        path = cfg.at("toolchains_file").get<std::string>();
    std::map<std::string, ToolchainConfig> profiles;
    if (path.empty()) {
        for (const auto& [name, value] : json::parse(default_toolchains_json()).items())
            profiles[name] = value.get<ToolchainConfig>();
    } else {
        profiles = load_toolchain_profiles(path);
    }
    auto it = profiles.find(opts.toolchain_profile);
    if (it == profiles.end())
        throw Error(ErrorCode::config_error,
                    "unknown toolchain profile '" + opts.toolchain_profile + "'");
    return it->second;
}

// --asset flags use the form kind:path with kind in model_code/testbench/other
void apply_asset_flags(DesignSpec& spec, std::map<std::string, std::string>& contents,
                       const std::vector<std::string>& asset_flags) {
    for (const auto& flag : asset_flags) {
        const size_t colon = flag.find(':');
        if (colon == std::string::npos)
            throw Error(ErrorCode::config_error, "asset flag must be kind:path, got " + flag);
        const AssetKind kind = asset_kind_from_string(flag.substr(0, colon));
        const std::string path = flag.substr(colon + 1);
        if (!fs::exists(path)) throw Error(ErrorCode::config_error, "asset not found: " + path);
        const std::string content = read_text_file(path);
        const std::string name = fs::path(path).filename().string();
        spec.legacy_assets.push_back({name, kind, digest(content)});
        contents[name] = content;
    }
}

// ── plan ────────────────────────────────────────────────────────

int do_plan(const CommonOptions& opts, const std::string& spec_path, const std::string& mode,
            const std::vector<std::string>& asset_flags, bool validate_only) {
    const json cfg = load_config_file(opts.config_path);
    DesignSpec spec = load_spec_file(spec_path);
    std::map<std::string, std::string> contents;
    apply_asset_flags(spec, contents, asset_flags);
    const Rubric rubric = rubric_from(opts, cfg);
    const LoopPolicy policy = policy_for(policy_name_from_string(mode));
    const auto plan = build_execution_plan(spec, analyze_complexity(spec, rubric),
                                           evaluate_assets(spec, contents), policy, rubric);
    const json plan_json = plan;
    const auto schema_errors = validate_plan_json(plan_json);
    if (!schema_errors.empty())
        throw Error(ErrorCode::schema_violation, schema_errors.front());
    if (validate_only) {
        std::cout << "OK\n";
        return 0;
    }
    std::cout << plan_json.dump(2) << "\n";
    return 0;
}

// ── run ─────────────────────────────────────────────────────────

struct RunOptions {
    std::string spec_path;
    std::string mode = "refevo";
    std::string provider_kind = "mock";
    std::string script_path;
    std::string endpoint;
    std::string model_name;
    std::string api_key_env = "REFEVO_API_KEY";
    std::string out_dir;
    std::vector<std::string> asset_flags;
};

std::unique_ptr<Provider> provider_from(const RunOptions& run, const json& cfg) {
    ProviderConfig pc;
    if (cfg.contains("provider")) pc = cfg.at("provider").get<ProviderConfig>();
    pc.kind = provider_kind_from_string(run.provider_kind);
    if (!run.script_path.empty()) pc.script_path = run.script_path;
    if (!run.endpoint.empty()) pc.endpoint = run.endpoint;
    if (!run.model_name.empty()) pc.model_name = run.model_name;
    pc.api_key_env = run.api_key_env;
    if (pc.kind == ProviderKind::mock && pc.script_path && !fs::exists(*pc.script_path))
        throw Error(ErrorCode::config_error, "script file not found: " + *pc.script_path);
    return make_provider(pc);
}

int do_run(const CommonOptions& opts, const RunOptions& run) {
    const json cfg = load_config_file(opts.config_path);
    if (run.out_dir.empty()) throw Error(ErrorCode::config_error, "--out is required");
    DesignSpec spec = load_spec_file(run.spec_path);

    SessionConfig session;
    session.session_id = spec.spec_id;
    session.context = context_from_json(cfg);
    session.prompts = prompts_from(opts, cfg);
    session.rubric = rubric_from(opts, cfg);
    session.out_dir = run.out_dir;
    apply_asset_flags(spec, session.asset_contents, run.asset_flags);

    ToolchainConfig toolchain = toolchain_from(opts, cfg);
    toolchain.workdir = run.out_dir + "/work";
    ToolchainSimulator simulator(toolchain);
    auto provider = provider_from(run, cfg);

    session.effective_config_echo = {{"spec", run.spec_path},
                                     {"mode", run.mode},
                                     {"provider", run.provider_kind},
                                     {"toolchain", opts.toolchain_profile},
                                     {"seed", opts.seed},
                                     {"context", session.context}};

    const LoopPolicy policy = policy_for(policy_name_from_string(run.mode));
    const SessionOutcome outcome = run_session(spec, policy, *provider, simulator, session);
    std::cout << "status: " << to_string(outcome.status) << " after "
              << outcome.iterations.size() << " iteration(s)\n";
    if (outcome.error_note) std::cout << "note: " << *outcome.error_note << "\n";
    return outcome.status == SessionStatus::success ? 0 : 1;
}

// ── bench ───────────────────────────────────────────────────────

// maps CLI mode spellings to stable directory tokens
std::string policy_token(const std::string& mode) {
    return to_string(policy_name_from_string(mode));
}

struct BenchOptions {
    std::string spec_dir;
    std::vector<std::string> modes = {"naive", "flow", "fixed-tb", "refevo"};
    std::string out_dir;
    int jobs = 1;
};

int do_bench(const CommonOptions& opts, const BenchOptions& bench) {
    const json cfg = load_config_file(opts.config_path);
    if (bench.out_dir.empty()) throw Error(ErrorCode::config_error, "--out is required");
    if (!fs::is_directory(bench.spec_dir))
        throw Error(ErrorCode::config_error, "spec dir not found: " + bench.spec_dir);

    std::vector<std::string> spec_files;
    for (const auto& entry : fs::directory_iterator(bench.spec_dir))
        if (entry.path().extension() == ".md") spec_files.push_back(entry.path().string());
    std::sort(spec_files.begin(), spec_files.end());
    if (spec_files.empty())
        throw Error(ErrorCode::config_error, "no .md specs in " + bench.spec_dir);

    struct Job {
        std::string spec_path;
        std::string mode;
    };
    std::vector<Job> jobs_list;
    for (const auto& spec_path : spec_files)
        for (const auto& mode : bench.modes) jobs_list.push_back({spec_path, mode});

    fs::create_directories(bench.out_dir);
    std::vector<SessionOutcome> outcomes(jobs_list.size());
    std::vector<std::string> labels(jobs_list.size());
    std::atomic<size_t> cursor{0};
    std::vector<std::exception_ptr> worker_errors;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const size_t i = cursor.fetch_add(1);
                if (i >= jobs_list.size()) return;
                const Job& job = jobs_list[i];
                DesignSpec spec = load_spec_file(job.spec_path);
                const std::string script =
                    fs::path(job.spec_path).parent_path() /
                    (fs::path(job.spec_path).stem().string() + ".script.json");
                if (!fs::exists(script))
                    throw Error(ErrorCode::config_error, "no mock script for " + job.spec_path);
                auto provider = MockScriptProvider::from_file(script);
                const std::string session_dir =
                    bench.out_dir + "/" + spec.spec_id + "-" + policy_token(job.mode);

                SessionConfig session;
                session.session_id = spec.spec_id;
                session.context = context_from_json(cfg);
                session.prompts = prompts_from(opts, cfg);
                session.rubric = rubric_from(opts, cfg);
                session.out_dir = session_dir;

                ToolchainConfig toolchain = toolchain_from(opts, cfg);
                toolchain.workdir = session_dir + "/work";
                ToolchainSimulator simulator(toolchain);
                const LoopPolicy policy = policy_for(policy_name_from_string(job.mode));
                outcomes[i] = run_session(spec, policy, *provider, simulator, session);
                labels[i] = spec.spec_id;
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            worker_errors.push_back(std::current_exception());
        }
    };
    std::vector<std::thread> pool;
    const int n_workers = std::max(1, bench.jobs);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!worker_errors.empty()) std::rethrow_exception(worker_errors.front());

    std::map<std::string, std::vector<SessionOutcome>> by_mode;
    json sessions = json::array();
    for (size_t i = 0; i < jobs_list.size(); ++i) {
        const std::string mode = to_string(policy_name_from_string(jobs_list[i].mode));
        by_mode[mode].push_back(outcomes[i]);
        sessions.push_back({{"spec", labels[i]},
                            {"mode", mode},
                            {"status", to_string(outcomes[i].status)},
                            {"iterations", int(outcomes[i].iterations.size())}});
    }
    // order-independent aggregation: sorted by (spec, mode)
    std::sort(sessions.begin(), sessions.end(), [](const json& a, const json& b) {
        if (a.at("spec") != b.at("spec"))
            return a.at("spec").get<std::string>() < b.at("spec").get<std::string>();
        return a.at("mode").get<std::string>() < b.at("mode").get<std::string>();
    });

    const json breakdown = failure_breakdown(by_mode);
    const json report = {{"seed", opts.seed},
                         {"modes", breakdown},
                         {"sessions", sessions}};
    write_text_file(bench.out_dir + "/bench_report.json", report.dump(2) + "\n");
    std::cout << failure_breakdown_table(breakdown);
    std::cout << "report: " << bench.out_dir << "/bench_report.json\n";
    return 0;
}

// ── coevo ───────────────────────────────────────────────────────

struct CoevoOptions {
    CoEvoParams params;
    std::string out_dir;
    bool chart = false;
};

int do_coevo(const CommonOptions& opts, const CoevoOptions& coevo) {
    CoEvoParams params = coevo.params;
    params.seed = opts.seed;
    validate_params(params);
    const CoEvoReport report = make_coevo_report(params);
    const json j = report;
    std::cout << j.dump(2) << "\n";
    if (!coevo.out_dir.empty()) {
        fs::create_directories(coevo.out_dir);
        write_text_file(coevo.out_dir + "/coevo_report.json", j.dump(2) + "\n");
        if (coevo.chart) {
            const auto& fixed = report.per_mode.at("fixed_tb");
            const auto& ref = report.per_mode.at("refevo");
            const std::string svg = svg_grouped_bars(
                "coupled validation outcomes", {"false_positive", "true_pass", "func_fail"},
                {{"fixed_tb", "#c0504d",
                  {fixed.false_positive_rate, fixed.true_pass_rate, fixed.func_fail_rate}},
                 {"refevo", "#4f81bd",
                  {ref.false_positive_rate, ref.true_pass_rate, ref.func_fail_rate}}});
            write_text_file(coevo.out_dir + "/coevo_chart.svg", svg);
        }
    }
    return 0;
}

// ── report ──────────────────────────────────────────────────────

struct ReportOptions {
    std::vector<std::string> transcripts;
    bool tiers = false;
    std::string out_dir;
};

int do_report(const CommonOptions&, const ReportOptions& opts) {
    if (opts.transcripts.empty() && !opts.tiers)
        throw Error(ErrorCode::config_error, "nothing to report: pass --transcript or --tiers");
    std::vector<TokenReportEntry> token_entries;
    json recall_entries = json::array();
    if (opts.tiers)
        for (const auto& tier : default_tier_fixtures())
            token_entries.push_back({tier.tier, synthetic_session_ledger(tier)});
    for (const auto& path : opts.transcripts) {
        if (!fs::exists(path))
            throw Error(ErrorCode::config_error, "transcript not found: " + path);
        const Replay replay = load_replay(path);
        const std::string label = fs::path(path).parent_path().filename().string().empty()
                                      ? path
                                      : fs::path(path).parent_path().filename().string();
        token_entries.push_back({label, replay_token_ledger(replay)});
        recall_entries.push_back(json(recall_for_replay(label, replay)));
    }
    json report = {{"token_report", token_report_json(token_entries)},
                   {"recall_report", recall_entries}};
    std::cout << report.dump(2) << "\n";
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        write_text_file(opts.out_dir + "/analysis_report.json", report.dump(2) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"refevo: planner-driven co-evolutionary reference model generation"};
    app.require_subcommand(1);

    CommonOptions common;
    app.add_option("--config", common.config_path, "JSON config file (flags override it)");
    app.add_option("--rubric", common.rubric_path, "complexity rubric file");
    app.add_option("--prompts", common.prompts_dir, "prompt template directory");
    app.add_option("--toolchains-file", common.toolchains_path, "toolchain profiles file");
    app.add_option("--toolchain", common.toolchain_profile, "toolchain profile name");
    app.add_option("--seed", common.seed, "seed for randomized subcommands");

    auto* plan_cmd = app.add_subcommand("plan", "print the execution plan for a spec");
    std::string plan_spec, plan_mode = "refevo";
    std::vector<std::string> plan_assets;
    bool validate_only = false;
    plan_cmd->add_option("--spec", plan_spec, "specification file")->required();
    plan_cmd->add_option("--mode", plan_mode, "naive|flow|fixed-tb|refevo");
    plan_cmd->add_option("--asset", plan_assets, "legacy asset as kind:path (repeatable)");
    plan_cmd->add_flag("--validate-only", validate_only, "only check the spec and plan schema");

    auto* run_cmd = app.add_subcommand("run", "run one full session");
    RunOptions run;
    run_cmd->add_option("--spec", run.spec_path, "specification file")->required();
    run_cmd->add_option("--mode", run.mode, "naive|flow|fixed-tb|refevo");
    run_cmd->add_option("--provider", run.provider_kind, "mock|http");
    run_cmd->add_option("--script", run.script_path, "mock provider script file");
    run_cmd->add_option("--endpoint", run.endpoint, "http provider endpoint URL");
    run_cmd->add_option("--model", run.model_name, "http provider model name");
    run_cmd->add_option("--api-key-env", run.api_key_env,
                        "environment variable holding the bearer token");
    run_cmd->add_option("--out", run.out_dir, "output directory")->required();
    run_cmd->add_option("--asset", run.asset_flags, "legacy asset as kind:path (repeatable)");

    auto* bench_cmd = app.add_subcommand("bench", "run every (spec, mode) pair in a directory");
    BenchOptions bench;
    bench_cmd->add_option("--spec-dir", bench.spec_dir, "directory of .md specs with "
                                                        "<name>.script.json mock scripts")
        ->required();
    bench_cmd->add_option("--mode", bench.modes, "modes to bench (repeatable)");
    bench_cmd->add_option("--out", bench.out_dir, "output directory")->required();
    bench_cmd->add_option("--jobs", bench.jobs, "parallel sessions");

    auto* coevo_cmd = app.add_subcommand("coevo", "coupled-validation fault-injection simulator");
    CoevoOptions coevo;
    coevo_cmd->add_option("--p-model-flaw", coevo.params.p_model_flaw, "P(model violates spec)");
    coevo_cmd->add_option("--p-shared", coevo.params.p_shared_hallucination,
                          "P(TB shares the flaw | flawed model)");
    coevo_cmd->add_option("--p-indep", coevo.params.p_indep_tb_flaw,
                          "P(TB flawed | correct model)");
    coevo_cmd->add_option("--p-detect", coevo.params.p_arbiter_detect,
                          "P(arbiter detects a violation)");
    coevo_cmd->add_option("--max-rounds", coevo.params.max_rounds, "repair rounds per trial");
    coevo_cmd->add_option("--trials", coevo.params.trials, "Monte Carlo trials");
    coevo_cmd->add_option("--out", coevo.out_dir, "write coevo_report.json here");
    coevo_cmd->add_flag("--chart", coevo.chart, "also emit coevo_chart.svg");

    auto* report_cmd = app.add_subcommand("report", "token and recall reports from transcripts");
    ReportOptions report;
    report_cmd->add_option("--transcript", report.transcripts,
                           "session transcript.jsonl (repeatable)");
    report_cmd->add_flag("--tiers", report.tiers, "include the synthetic tier fixtures");
    report_cmd->add_option("--out", report.out_dir, "write analysis_report.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (plan_cmd->parsed())
            return do_plan(common, plan_spec, plan_mode, plan_assets, validate_only);
        if (run_cmd->parsed()) return do_run(common, run);
        if (bench_cmd->parsed()) return do_bench(common, bench);
        if (coevo_cmd->parsed()) return do_coevo(common, coevo);
        if (report_cmd->parsed()) return do_report(common, report);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
