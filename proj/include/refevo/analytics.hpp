// Desk-scale science: a seeded fault-injection simulator of coupled
// validation failure, token-efficiency and recall reports replayed from
// session transcripts, failure-distribution tables and a small SVG
// bar-chart emitter.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "refevo/context.hpp"
#include "refevo/core.hpp"
#include "refevo/simrunner_types.hpp"

namespace refevo {

// ── Seeded RNG ──────────────────────────────────────────────────

// splitmix64: tiny, fully specified, identical on every platform. Each
// trial derives its own stream from (seed, trial index), so partitioning
// trials across workers cannot change the results.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t state_;
};

inline SplitMix64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
    SplitMix64 mixer(seed ^ (0xD1B54A32D192ED03ULL * (trial + 1)));
    return SplitMix64(mixer.next());
}

// ── Coupled validation fault model ──────────────────────────────

struct CoEvoParams {
    double p_model_flaw = 0.5;
    double p_shared_hallucination = 0.4;
    double p_indep_tb_flaw = 0.1;
    double p_arbiter_detect = 0.9;
    int max_rounds = 1;
    int trials = 100000;
    std::uint64_t seed = 20240501;

    bool operator==(const CoEvoParams&) const = default;
};

inline void validate_params(const CoEvoParams& p) {
    for (double prob : {p.p_model_flaw, p.p_shared_hallucination, p.p_indep_tb_flaw,
                        p.p_arbiter_detect})
        if (prob < 0.0 || prob > 1.0)
            throw Error(ErrorCode::config_error, "probability out of [0,1]");
    if (p.trials < 1) throw Error(ErrorCode::config_error, "trials must be >= 1");
    if (p.max_rounds < 1) throw Error(ErrorCode::config_error, "max_rounds must be >= 1");
}

inline void to_json(json& j, const CoEvoParams& p) {
    j = json{{"p_model_flaw", p.p_model_flaw},
             {"p_shared_hallucination", p.p_shared_hallucination},
             {"p_indep_tb_flaw", p.p_indep_tb_flaw},
             {"p_arbiter_detect", p.p_arbiter_detect},
             {"max_rounds", p.max_rounds},
             {"trials", p.trials},
             {"seed", p.seed}};
}

inline void from_json(const json& j, CoEvoParams& p) {
    p.p_model_flaw = j.at("p_model_flaw").get<double>();
    p.p_shared_hallucination = j.at("p_shared_hallucination").get<double>();
    p.p_indep_tb_flaw = j.at("p_indep_tb_flaw").get<double>();
    p.p_arbiter_detect = j.at("p_arbiter_detect").get<double>();
    p.max_rounds = j.at("max_rounds").get<int>();
    p.trials = j.at("trials").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
}

enum class TrialKind { false_positive, true_pass, func_fail };

struct TrialResult {
    TrialKind kind = TrialKind::func_fail;
    int rounds = 0;
};

// One session trial. TB state: 0 correct, 1 shares the model's flaw
// (the sycophantic pass), 2 independently flawed (false alarms).
inline TrialResult run_trial(const CoEvoParams& p, PolicyName mode, SplitMix64& rng) {
    auto draw_tb = [&](bool model_flawed) {
        if (model_flawed) return rng.bernoulli(p.p_shared_hallucination) ? 1 : 0;
        return rng.bernoulli(p.p_indep_tb_flaw) ? 2 : 0;
    };
    bool model_flawed = rng.bernoulli(p.p_model_flaw);
    int tb = draw_tb(model_flawed);
    const bool iterative = mode == PolicyName::fixed_tb || mode == PolicyName::refevo;
    const bool tb_mutable = mode == PolicyName::refevo;

    for (int round = 1; round <= p.max_rounds; ++round) {
        const bool pass = (model_flawed && tb == 1) || (!model_flawed && tb == 0);
        if (pass) {
            if (!tb_mutable)  // naive/flow/fixed_tb accept any PASS verbatim
                return {model_flawed ? TrialKind::false_positive : TrialKind::true_pass, round};
            if (!model_flawed) return {TrialKind::true_pass, round};
            // refevo audits the pass against the anchored spec
            if (!rng.bernoulli(p.p_arbiter_detect))
                return {TrialKind::false_positive, round};
            // detected shared hallucination: both sides are redrawn
            model_flawed = rng.bernoulli(p.p_model_flaw);
            tb = draw_tb(model_flawed);
            continue;
        }
        if (!iterative) return {TrialKind::func_fail, round};
        if (!rng.bernoulli(p.p_arbiter_detect)) continue;  // arbiter missed; round consumed
        if (model_flawed) {
            // design refinement: the model is redrawn, the TB untouched
            model_flawed = rng.bernoulli(p.p_model_flaw);
        } else if (tb_mutable) {
            // tb realignment: only the co-evolutionary mode may redraw
            tb = rng.bernoulli(p.p_indep_tb_flaw) ? 2 : 0;
        }
        // under fixed_tb a flawed TB stays frozen: the false alarm repeats
    }
    return {TrialKind::func_fail, p.max_rounds};
}

struct ModeStats {
    double false_positive_rate = 0;
    double true_pass_rate = 0;
    double func_fail_rate = 0;
    double mean_rounds = 0;
    int trials = 0;

    bool operator==(const ModeStats&) const = default;
};

inline void to_json(json& j, const ModeStats& s) {
    j = json{{"false_positive_rate", s.false_positive_rate},
             {"true_pass_rate", s.true_pass_rate},
             {"func_fail_rate", s.func_fail_rate},
             {"mean_rounds", s.mean_rounds},
             {"trials", s.trials}};
}

inline void from_json(const json& j, ModeStats& s) {
    s.false_positive_rate = j.at("false_positive_rate").get<double>();
    s.true_pass_rate = j.at("true_pass_rate").get<double>();
    s.func_fail_rate = j.at("func_fail_rate").get<double>();
    s.mean_rounds = j.at("mean_rounds").get<double>();
    s.trials = j.at("trials").get<int>();
}

inline ModeStats simulate_coupled_validation(const CoEvoParams& params, PolicyName mode) {
    validate_params(params);
    std::int64_t fp = 0, tp = 0, ff = 0, rounds = 0;
    for (int trial = 0; trial < params.trials; ++trial) {
        SplitMix64 rng = trial_rng(params.seed, std::uint64_t(trial));
        const TrialResult r = run_trial(params, mode, rng);
        rounds += r.rounds;
        switch (r.kind) {
            case TrialKind::false_positive: ++fp; break;
            case TrialKind::true_pass: ++tp; break;
            case TrialKind::func_fail: ++ff; break;
        }
    }
    const double n = double(params.trials);
    return {double(fp) / n, double(tp) / n, double(ff) / n, double(rounds) / n, params.trials};
}

// Single-round closed forms used as the simulator oracle.
inline double closed_form_fp_fixed_tb(const CoEvoParams& p) {
    return p.p_model_flaw * p.p_shared_hallucination;
}

inline double closed_form_fp_refevo(const CoEvoParams& p) {
    return p.p_model_flaw * p.p_shared_hallucination * (1.0 - p.p_arbiter_detect);
}

inline double binomial_stderr(double rate, int trials) {
    return std::sqrt(rate * (1.0 - rate) / double(trials));
}

struct CoEvoReport {
    CoEvoParams params;
    std::map<std::string, ModeStats> per_mode;
    double closed_form_fp_fixed = 0;
    double closed_form_fp_refevo_single = 0;
};

inline void to_json(json& j, const CoEvoReport& r) {
    j = json{{"params", r.params},
             {"per_mode", r.per_mode},
             {"closed_form_fp", {{"fixed_tb", r.closed_form_fp_fixed},
                                 {"refevo", r.closed_form_fp_refevo_single}}},
             {"seed", r.params.seed}};
}

inline CoEvoReport make_coevo_report(const CoEvoParams& params) {
    CoEvoReport report;
    report.params = params;
    for (PolicyName mode : {PolicyName::fixed_tb, PolicyName::refevo})
        report.per_mode[to_string(mode)] = simulate_coupled_validation(params, mode);
    report.closed_form_fp_fixed = closed_form_fp_fixed_tb(params);
    report.closed_form_fp_refevo_single = closed_form_fp_refevo(params);
    return report;
}

// ── Transcript replay ───────────────────────────────────────────

struct ReplayVerdict {
    int iteration = 0;
    ArbiterPath path = ArbiterPath::success;
    int model_revision = 0;
    int tb_revision = 0;
};

struct Replay {
    DesignSpec spec;
    LoopPolicy policy;
    ContextConfig context;
    std::vector<Turn> turns;
    std::vector<json> token_rows;                      // record_type=tokens
    std::vector<ReplayVerdict> verdicts;               // record_type=verdict
    std::map<int, std::map<SignatureKind, int>> sims;  // iteration -> counts
    std::vector<IterationRecord> iteration_records;
    std::optional<SessionOutcome> outcome;
};

inline Replay parse_transcript_records(const std::vector<json>& records) {
    Replay replay;
    bool started = false;
    try {
        for (const auto& rec : records) {
            const std::string type = rec.at("record_type").get<std::string>();
            if (type == "session_start") {
                replay.spec = rec.at("spec").get<DesignSpec>();
                replay.policy = rec.at("policy").get<LoopPolicy>();
                replay.context = rec.at("context_config").get<ContextConfig>();
                started = true;
            } else if (type == "turn") {
                replay.turns.push_back(rec.at("turn").get<Turn>());
            } else if (type == "tokens") {
                replay.token_rows.push_back(rec);
            } else if (type == "verdict") {
                ReplayVerdict v;
                v.iteration = rec.at("iteration").get<int>();
                v.path = arbiter_path_from_string(
                    rec.at("verdict").at("path").get<std::string>());
                v.model_revision = rec.at("model_revision").get<int>();
                v.tb_revision = rec.at("tb_revision").get<int>();
                replay.verdicts.push_back(v);
            } else if (type == "sim_report") {
                const auto report = rec.at("report").get<SimReport>();
                std::map<SignatureKind, int> counts;
                for (const auto& s : report.signatures) counts[s.kind]++;
                replay.sims[rec.at("iteration").get<int>()] = counts;
            } else if (type == "iteration") {
                replay.iteration_records.push_back(rec.at("record").get<IterationRecord>());
            } else if (type == "outcome") {
                replay.outcome = rec.at("outcome").get<SessionOutcome>();
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::transcript_parse_error, e.what());
    }
    if (!started)
        throw Error(ErrorCode::transcript_parse_error, "transcript has no session_start record");
    return replay;
}

inline Replay load_replay(const std::string& path) {
    return parse_transcript_records(read_transcript_file(path));
}

// Recomputes the per-iteration records from the verdict, sim and token
// records alone; the loop's own records must match exactly.
inline std::vector<IterationRecord> reconstruct_iteration_records(const Replay& replay) {
    std::map<int, TokenCount> spent;
    for (const auto& row : replay.token_rows)
        spent[row.at("iteration").get<int>()] += row.at("anchored_prompt").get<TokenCount>() +
                                                 row.at("response").get<TokenCount>();
    std::vector<IterationRecord> out;
    std::optional<ReplayVerdict> last_verdict;
    for (const auto& v : replay.verdicts) {
        IterationRecord rec;
        rec.iteration = v.iteration;
        rec.verdict_path = v.path;
        auto sim_it = replay.sims.find(v.iteration);
        // blocked fast-forward iterations reuse the last simulated evidence
        if (sim_it == replay.sims.end() && last_verdict) {
            auto prev = replay.sims.find(last_verdict->iteration);
            if (prev != replay.sims.end()) rec.signatures = prev->second;
        } else if (sim_it != replay.sims.end()) {
            rec.signatures = sim_it->second;
        }
        rec.tokens_spent = spent.count(v.iteration) ? spent[v.iteration] : 0;
        rec.model_revision = v.model_revision;
        rec.tb_revision = v.tb_revision;
        out.push_back(rec);
        last_verdict = v;
    }
    // iterations appended by the blocked fast-forward carry no verdict
    // record; extend from the stored records which are authoritative there
    for (size_t i = out.size(); i < replay.iteration_records.size(); ++i)
        out.push_back(replay.iteration_records[i]);
    return out;
}

// ── Token accounting reports ────────────────────────────────────

struct SyntheticSessionSpec {
    std::string tier = "simple";
    int n_rounds = 5;
    TokenCount spec_tokens = 300;
    TokenCount turn_tokens = 500;
    int workspace_keep = 2;
    TokenCount summary_line_max = 40;
};

inline void to_json(json& j, const SyntheticSessionSpec& s) {
    j = json{{"tier", s.tier},
             {"n_rounds", s.n_rounds},
             {"spec_tokens", s.spec_tokens},
             {"turn_tokens", s.turn_tokens},
             {"workspace_keep", s.workspace_keep},
             {"summary_line_max", s.summary_line_max}};
}

inline void from_json(const json& j, SyntheticSessionSpec& s) {
    s.tier = j.at("tier").get<std::string>();
    s.n_rounds = j.at("n_rounds").get<int>();
    s.spec_tokens = j.at("spec_tokens").get<TokenCount>();
    s.turn_tokens = j.at("turn_tokens").get<TokenCount>();
    s.workspace_keep = j.at("workspace_keep").get<int>();
    s.summary_line_max = j.at("summary_line_max").get<TokenCount>();
}

// Re-renders a turn sequence under both strategies, one accounting row per
// appended turn: anchored as the compacted window, baseline as the full
// unanchored concatenation (unlimited budget).
inline TokenLedger ledger_for_turns(const DesignSpec& spec, const ContextConfig& config,
                                    const std::vector<Turn>& turns) {
    TokenLedger ledger;
    ContextWindow ctx = init_context(spec, config);
    TokenCount history = 0;
    int round = 0;
    for (const auto& turn : turns) {
        Turn reindexed = turn;
        reindexed.index = round;  // replay is position-based
        ctx = append_turn(std::move(ctx), std::move(reindexed));
        history += estimate_tokens(turn.content);
        TokenRound row;
        row.round = ++round;
        row.anchored_prompt = context_tokens(ctx);
        row.baseline_prompt = estimate_tokens(spec.body) + history;
        row.response = 0;
        ledger.add(row);
    }
    return ledger;
}

inline TokenLedger synthetic_session_ledger(const SyntheticSessionSpec& s) {
    DesignSpec spec;
    spec.spec_id = "synthetic-" + s.tier;
    spec.title = s.tier;
    spec.body = std::string(size_t(s.spec_tokens) * 4, 'S');
    ContextConfig config;
    config.budgets.total = std::numeric_limits<TokenCount>::max() / 4;
    config.budgets.summary_max = config.budgets.total;
    config.budgets.workspace_max = config.budgets.total;
    config.workspace_keep = s.workspace_keep;
    config.summary_line_max = s.summary_line_max;
    std::vector<Turn> turns;
    for (int i = 0; i < s.n_rounds; ++i)
        turns.push_back({i, Role::tool, std::string(size_t(s.turn_tokens) * 4, 'x')});
    return ledger_for_turns(spec, config, turns);
}

inline TokenLedger replay_token_ledger(const Replay& replay) {
    return ledger_for_turns(replay.spec, replay.context, replay.turns);
}

// Shipped tier fixtures mirroring the simple/medium/complex scales.
inline std::vector<SyntheticSessionSpec> default_tier_fixtures() {
    return {{"simple", 5, 300, 500, 2, 40},
            {"medium", 20, 1000, 2000, 2, 40},
            {"complex", 40, 5000, 3000, 2, 40}};
}

struct TokenReportEntry {
    std::string label;
    TokenLedger ledger;
};

inline json token_report_json(const std::vector<TokenReportEntry>& entries) {
    json rows = json::array();
    for (const auto& e : entries) {
        json row = {{"label", e.label},
                    {"anchored_total", e.ledger.anchored_total},
                    {"baseline_total", e.ledger.baseline_total},
                    {"saved_tokens", e.ledger.baseline_total - e.ledger.anchored_total},
                    {"reduction_pct", e.ledger.reduction_pct()},
                    {"rounds", int(e.ledger.rounds.size())}};
        rows.push_back(row);
    }
    return json{{"entries", rows},
                {"reference_note",
                 "reported reductions of 71.04% average (81.76% medium, 68.89% complex, "
                 ">73900 tokens saved) are reference points from the original study; they "
                 "depend on a tokenizer and benchmark not shipped here and are not "
                 "reproducible by this tool"}};
}

// ── Failure distribution ────────────────────────────────────────

inline json failure_breakdown(const std::map<std::string, std::vector<SessionOutcome>>& by_mode) {
    if (by_mode.empty()) throw Error(ErrorCode::empty_group, "no outcomes");
    json out = json::object();
    for (const auto& [mode, outcomes] : by_mode) {
        if (outcomes.empty()) throw Error(ErrorCode::empty_group, "mode " + mode + " is empty");
        std::map<SessionStatus, int> counts;
        for (const auto& o : outcomes) counts[o.status]++;
        json row = json::object();
        for (SessionStatus status : {SessionStatus::success, SessionStatus::compile_fail,
                                     SessionStatus::func_fail, SessionStatus::budget_exhausted})
            row[to_string(status)] = double(counts[status]) / double(outcomes.size());
        row["sessions"] = int(outcomes.size());
        out[mode] = row;
    }
    return out;
}

inline std::string failure_breakdown_table(const json& breakdown) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "mode" << std::right << std::setw(10) << "success"
       << std::setw(14) << "compile_fail" << std::setw(11) << "func_fail" << std::setw(18)
       << "budget_exhausted" << std::setw(10) << "sessions" << '\n';
    for (const auto& [mode, row] : breakdown.items()) {
        os << std::left << std::setw(10) << mode << std::right << std::fixed
           << std::setprecision(3) << std::setw(10) << row.at("success").get<double>()
           << std::setw(14) << row.at("compile_fail").get<double>() << std::setw(11)
           << row.at("func_fail").get<double>() << std::setw(18)
           << row.at("budget_exhausted").get<double>() << std::setw(10)
           << row.at("sessions").get<int>() << '\n';
    }
    return os.str();
}

// ── Recall report ───────────────────────────────────────────────

struct RecallEntry {
    std::string label;
    double anchored_min = 1.0;
    double baseline_min = 1.0;
    int rounds = 0;
};

inline void to_json(json& j, const RecallEntry& e) {
    j = json{{"label", e.label},
             {"anchored_min_recall", e.anchored_min},
             {"baseline_min_recall", e.baseline_min},
             {"rounds", e.rounds}};
}

// Replays the turn history measuring constraint recall after every round,
// anchored against the compacted window and baseline against a plain
// sliding window with the same total budget (spec travels as turn 0).
inline RecallEntry recall_for_replay(const std::string& label, const Replay& replay) {
    RecallEntry entry;
    entry.label = label;
    ContextWindow ctx = init_context(replay.spec, replay.context);
    std::vector<Turn> history{{0, Role::tool, replay.spec.body}};
    entry.anchored_min = measure_recall(ctx, replay.spec);
    entry.baseline_min =
        baseline_recall(history, replay.context.budgets.total, replay.spec);
    int index = 0;
    for (const auto& turn : replay.turns) {
        Turn reindexed = turn;
        reindexed.index = index++;
        ctx = append_turn(std::move(ctx), reindexed);
        history.push_back({index, turn.role, turn.content});
        entry.anchored_min = std::min(entry.anchored_min, measure_recall(ctx, replay.spec));
        entry.baseline_min =
            std::min(entry.baseline_min,
                     baseline_recall(history, replay.context.budgets.total, replay.spec));
        ++entry.rounds;
    }
    return entry;
}

// ── SVG emitter ─────────────────────────────────────────────────

struct SvgSeries {
    std::string name;
    std::string color;
    std::vector<double> values;
};

// Self-contained grouped bar chart; values are expected in [0, 1] unless a
// larger maximum is present, in which case the axis rescales.
inline std::string svg_grouped_bars(const std::string& title,
                                    const std::vector<std::string>& categories,
                                    const std::vector<SvgSeries>& series) {
    const int width = 640, height = 360, margin = 50;
    double max_value = 1.0;
    for (const auto& s : series)
        for (double v : s.values) max_value = std::max(max_value, v);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << title << "</text>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
       << width - margin << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << height - margin << "\" stroke=\"black\"/>\n";
    const double plot_w = width - 2.0 * margin;
    const double plot_h = height - 2.0 * margin;
    const size_t n_cat = categories.size();
    const size_t n_series = series.size();
    const double group_w = n_cat ? plot_w / double(n_cat) : plot_w;
    const double bar_w = n_series ? group_w * 0.7 / double(n_series) : group_w;
    for (size_t c = 0; c < n_cat; ++c) {
        for (size_t s = 0; s < n_series; ++s) {
            if (c >= series[s].values.size()) continue;
            const double v = series[s].values[c];
            const double h = plot_h * (v / max_value);
            const double x = margin + group_w * double(c) + group_w * 0.15 + bar_w * double(s);
            const double y = height - margin - h;
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w * 0.9
               << "\" height=\"" << h << "\" fill=\"" << series[s].color << "\"/>\n";
            os << "<text x=\"" << x + bar_w * 0.45 << "\" y=\"" << y - 4
               << "\" text-anchor=\"middle\" font-size=\"10\">" << std::fixed
               << std::setprecision(3) << v << "</text>\n";
        }
        os << "<text x=\"" << margin + group_w * (double(c) + 0.5) << "\" y=\""
           << height - margin + 18 << "\" text-anchor=\"middle\" font-size=\"12\">"
           << categories[c] << "</text>\n";
    }
    double legend_x = margin;
    for (const auto& s : series) {
        os << "<rect x=\"" << legend_x << "\" y=\"" << height - 18 << "\" width=\"12\" "
           << "height=\"12\" fill=\"" << s.color << "\"/>\n";
        os << "<text x=\"" << legend_x + 16 << "\" y=\"" << height - 8
           << "\" font-size=\"12\">" << s.name << "</text>\n";
        legend_x += 16.0 + 8.0 * double(s.name.size()) + 24.0;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace refevo
