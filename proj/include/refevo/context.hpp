// Spec-anchored context window: three segments under a token budget.
//
// The anchor holds the specification verbatim and is never evicted; older
// workspace turns are compressed into summary entries, and overflowing
// summaries collapse into coarse per-range verdict counts. Token accounting
// measures segment content only (prompt decorations are excluded) so that
// anchored and baseline figures stay comparable across strategies.
#pragma once

#include <algorithm>
#include <array>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "refevo/core.hpp"

namespace refevo {

// ceil(utf8_bytes / 4): provider-agnostic stand-in for tokenizer counts.
inline TokenCount estimate_tokens(std::string_view text) {
    return (TokenCount(text.size()) + 3) / 4;
}

struct Turn {
    int index = 0;
    Role role = Role::tool;
    std::string content;

    bool operator==(const Turn&) const = default;
};

inline void to_json(json& j, const Turn& t) {
    j = json{{"index", t.index}, {"role", to_string(t.role)}, {"content", t.content}};
}

inline void from_json(const json& j, Turn& t) {
    t.index = j.at("index").get<int>();
    t.role = role_from_string(j.at("role").get<std::string>());
    t.content = j.at("content").get<std::string>();
}

// verdict_counts: occurrences of the four routing paths in the covered
// turns, kept so coarse merges can report counts without re-parsing text.
struct SummaryEntry {
    int turn_begin = 0;
    int turn_end = 0;
    std::string text;
    std::array<int, 4> verdict_counts{};  // indexed by ArbiterPath

    bool operator==(const SummaryEntry&) const = default;
};

inline void to_json(json& j, const SummaryEntry& e) {
    j = json{{"turn_begin", e.turn_begin},
             {"turn_end", e.turn_end},
             {"text", e.text},
             {"verdict_counts", e.verdict_counts}};
}

inline void from_json(const json& j, SummaryEntry& e) {
    e.turn_begin = j.at("turn_begin").get<int>();
    e.turn_end = j.at("turn_end").get<int>();
    e.text = j.at("text").get<std::string>();
    e.verdict_counts = j.at("verdict_counts").get<std::array<int, 4>>();
}

struct ContextBudgets {
    TokenCount total = 16384;
    TokenCount summary_max = 2048;
    TokenCount workspace_max = 8192;

    bool operator==(const ContextBudgets&) const = default;
};

inline void to_json(json& j, const ContextBudgets& b) {
    j = json{{"total", b.total}, {"summary_max", b.summary_max}, {"workspace_max", b.workspace_max}};
}

inline void from_json(const json& j, ContextBudgets& b) {
    b.total = j.at("total").get<TokenCount>();
    b.summary_max = j.at("summary_max").get<TokenCount>();
    b.workspace_max = j.at("workspace_max").get<TokenCount>();
}

struct ContextConfig {
    ContextBudgets budgets;
    int workspace_keep = 4;           // K most recent turns kept verbatim
    TokenCount summary_line_max = 64; // per-entry compression cap

    bool operator==(const ContextConfig&) const = default;
};

inline void to_json(json& j, const ContextConfig& c) {
    j = json{{"budgets", c.budgets},
             {"workspace_keep", c.workspace_keep},
             {"summary_line_max", c.summary_line_max}};
}

inline void from_json(const json& j, ContextConfig& c) {
    c.budgets = j.at("budgets").get<ContextBudgets>();
    c.workspace_keep = j.at("workspace_keep").get<int>();
    c.summary_line_max = j.at("summary_line_max").get<TokenCount>();
}

struct ContextWindow {
    std::string anchor;         // DesignSpec.body, verbatim, immutable
    std::string anchor_digest;  // digest(anchor), fixed at init
    std::vector<SummaryEntry> summary;
    std::vector<Turn> workspace;
    ContextConfig config;

    bool operator==(const ContextWindow&) const = default;
};

inline void to_json(json& j, const ContextWindow& c) {
    j = json{{"anchor", c.anchor},
             {"anchor_digest", c.anchor_digest},
             {"summary", c.summary},
             {"workspace", c.workspace},
             {"config", c.config}};
}

inline void from_json(const json& j, ContextWindow& c) {
    c.anchor = j.at("anchor").get<std::string>();
    c.anchor_digest = j.at("anchor_digest").get<std::string>();
    c.summary = j.at("summary").get<std::vector<SummaryEntry>>();
    c.workspace = j.at("workspace").get<std::vector<Turn>>();
    c.config = j.at("config").get<ContextConfig>();
}

// ── Accounting ──────────────────────────────────────────────────

inline TokenCount anchor_tokens(const ContextWindow& ctx) { return estimate_tokens(ctx.anchor); }

inline TokenCount summary_tokens(const ContextWindow& ctx) {
    TokenCount n = 0;
    for (const auto& e : ctx.summary) n += estimate_tokens(e.text);
    return n;
}

inline TokenCount workspace_tokens(const ContextWindow& ctx) {
    TokenCount n = 0;
    for (const auto& t : ctx.workspace) n += estimate_tokens(t.content);
    return n;
}

inline TokenCount context_tokens(const ContextWindow& ctx) {
    return anchor_tokens(ctx) + summary_tokens(ctx) + workspace_tokens(ctx);
}

// ── Compression ─────────────────────────────────────────────────

namespace detail {

// Lines that must survive compression: toolchain diagnostics, runtime
// assertion failures and arbiter verdicts.
inline bool is_salient_line(std::string_view line) {
    if (line.find("error:") != std::string_view::npos) return true;
    if (line.find("ASSERT FAIL:") != std::string_view::npos) return true;
    if (line.find("\"path\"") != std::string_view::npos) return true;
    if (line.find("path=") != std::string_view::npos) return true;
    std::string t = trim(line);
    if (t.starts_with("Error:")) return true;
    return false;
}

inline int count_occurrences(std::string_view text, std::string_view needle) {
    int n = 0;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

inline std::array<int, 4> count_verdicts(std::string_view text) {
    return {count_occurrences(text, to_string(ArbiterPath::syntax_repair)),
            count_occurrences(text, to_string(ArbiterPath::design_refinement)),
            count_occurrences(text, to_string(ArbiterPath::tb_realignment)),
            count_occurrences(text, to_string(ArbiterPath::success))};
}

}  // namespace detail

// Extractive-deterministic compressor: first line plus every salient line,
// truncated to summary_line_max tokens and never longer than the original.
inline SummaryEntry compress_turn(const Turn& turn, TokenCount summary_line_max) {
    const auto lines = detail::split_lines(turn.content);
    std::string text = lines.empty() ? std::string{} : lines.front();
    for (size_t i = 1; i < lines.size(); ++i) {
        if (detail::is_salient_line(lines[i])) {
            text += "; ";
            text += lines[i];
        }
    }
    const size_t cap = std::min<size_t>(summary_line_max * 4, turn.content.size());
    if (text.size() > cap) text.resize(cap);
    SummaryEntry entry;
    entry.turn_begin = turn.index;
    entry.turn_end = turn.index;
    entry.text = std::move(text);
    entry.verdict_counts = detail::count_verdicts(turn.content);
    return entry;
}

inline SummaryEntry merge_entries(const SummaryEntry& a, const SummaryEntry& b) {
    SummaryEntry m;
    m.turn_begin = std::min(a.turn_begin, b.turn_begin);
    m.turn_end = std::max(a.turn_end, b.turn_end);
    for (size_t i = 0; i < m.verdict_counts.size(); ++i)
        m.verdict_counts[i] = a.verdict_counts[i] + b.verdict_counts[i];
    m.text = "rounds " + std::to_string(m.turn_begin) + ".." + std::to_string(m.turn_end) +
             ": syntax_repair=" + std::to_string(m.verdict_counts[0]) +
             " design_refinement=" + std::to_string(m.verdict_counts[1]) +
             " tb_realignment=" + std::to_string(m.verdict_counts[2]) +
             " success=" + std::to_string(m.verdict_counts[3]);
    return m;
}

// ── Operations ──────────────────────────────────────────────────

inline ContextWindow init_context(const DesignSpec& spec, const ContextConfig& config) {
    if (estimate_tokens(spec.body) > config.budgets.total)
        throw Error(ErrorCode::spec_exceeds_budget,
                    "spec needs " + std::to_string(estimate_tokens(spec.body)) +
                        " tokens, budget is " + std::to_string(config.budgets.total));
    ContextWindow ctx;
    ctx.anchor = spec.body;
    ctx.anchor_digest = digest(spec.body);
    ctx.config = config;
    return ctx;
}

// Restores the budget invariant: workspace reduced to the K most recent
// turns, evicted turns compressed into the summary, overflowing summaries
// coarse-merged from the oldest end. The anchor is never touched.
inline ContextWindow compact(ContextWindow ctx) {
    const int keep = std::max(0, ctx.config.workspace_keep);
    while (int(ctx.workspace.size()) > keep) {
        ctx.summary.push_back(compress_turn(ctx.workspace.front(), ctx.config.summary_line_max));
        ctx.workspace.erase(ctx.workspace.begin());
    }
    while (summary_tokens(ctx) > ctx.config.budgets.summary_max && ctx.summary.size() >= 2) {
        ctx.summary[1] = merge_entries(ctx.summary[0], ctx.summary[1]);
        ctx.summary.erase(ctx.summary.begin());
    }
    if (context_tokens(ctx) > ctx.config.budgets.total)
        throw Error(ErrorCode::budget_unsatisfiable,
                    "anchor + minimal summary + " + std::to_string(keep) +
                        " turns exceed total budget");
    return ctx;
}

inline ContextWindow append_turn(ContextWindow ctx, Turn turn) {
    const int expected = ctx.workspace.empty()
                             ? (ctx.summary.empty() ? 0 : ctx.summary.back().turn_end + 1)
                             : ctx.workspace.back().index + 1;
    if (turn.index != expected)
        throw Error(ErrorCode::non_monotonic_turn_index,
                    "expected index " + std::to_string(expected) + ", got " +
                        std::to_string(turn.index));
    ctx.workspace.push_back(std::move(turn));
    if (int(ctx.workspace.size()) > ctx.config.workspace_keep ||
        workspace_tokens(ctx) > ctx.config.budgets.workspace_max ||
        context_tokens(ctx) > ctx.config.budgets.total)
        return compact(std::move(ctx));
    return ctx;
}

inline std::string role_footer(Role role) {
    switch (role) {
        case Role::planner:
            return "## TASK\nDecompose the anchored specification into an execution plan.\n";
        case Role::modeler:
            return "## TASK\nGenerate or repair the reference model for the anchored "
                   "specification.\n";
        case Role::verifier:
            return "## TASK\nGenerate or repair the self-checking testbench for the anchored "
                   "specification.\n";
        case Role::arbiter:
            return "## TASK\nJudge the simulation evidence strictly against the anchored "
                   "specification and route the repair.\n";
        case Role::tool:
            return "";
    }
    return "";
}

inline std::string summary_block(const ContextWindow& ctx) {
    std::string out;
    for (const auto& e : ctx.summary) {
        if (e.turn_begin == e.turn_end)
            out += "r" + std::to_string(e.turn_begin) + ": " + e.text + "\n";
        else
            out += "r" + std::to_string(e.turn_begin) + "-" + std::to_string(e.turn_end) + ": " +
                   e.text + "\n";
    }
    return out;
}

inline std::string workspace_block(const ContextWindow& ctx) {
    std::string out;
    for (const auto& t : ctx.workspace) {
        out += "[r" + std::to_string(t.index) + " " + to_string(t.role) + "]\n";
        out += t.content;
        if (!out.ends_with('\n')) out += '\n';
    }
    return out;
}

// Fixed order: anchor, summary, workspace, role footer. Deterministic.
inline std::string render_prompt(const ContextWindow& ctx, Role audience) {
    std::string out = "## SPECIFICATION (ANCHOR)\n";
    out += ctx.anchor;
    if (!out.ends_with('\n')) out += '\n';
    if (!ctx.summary.empty()) {
        out += "## SUMMARY\n";
        out += summary_block(ctx);
    }
    if (!ctx.workspace.empty()) {
        out += "## WORKSPACE\n";
        out += workspace_block(ctx);
    }
    out += role_footer(audience);
    return out;
}

// Accounting view of a rendered prompt: segment content plus footer.
inline TokenCount rendered_tokens(const ContextWindow& ctx, Role audience) {
    return context_tokens(ctx) + estimate_tokens(role_footer(audience));
}

// Fraction of spec constraints present verbatim in the arbiter's prompt.
// Zero constraints is defined as full recall.
inline double measure_recall(const ContextWindow& ctx, const DesignSpec& spec) {
    if (spec.constraints.empty()) return 1.0;
    const std::string prompt = render_prompt(ctx, Role::arbiter);
    size_t found = 0;
    for (const auto& c : spec.constraints)
        if (prompt.find(c.text) != std::string::npos) ++found;
    return double(found) / double(spec.constraints.size());
}

// ── Unanchored baseline (comparison only) ───────────────────────

// Plain sliding window over the raw history: the spec travels as turn 0 and
// is evicted first once the budget forces older turns out.
inline std::vector<Turn> baseline_window(const std::vector<Turn>& full_history,
                                         TokenCount budget) {
    size_t first = full_history.size();
    TokenCount used = 0;
    while (first > 0) {
        const TokenCount next = estimate_tokens(full_history[first - 1].content);
        if (used + next > budget) break;
        used += next;
        --first;
    }
    return {full_history.begin() + ptrdiff_t(first), full_history.end()};
}

inline std::string baseline_render(const std::vector<Turn>& full_history, TokenCount budget) {
    std::string out;
    for (const auto& t : baseline_window(full_history, budget)) {
        out += t.content;
        if (!out.ends_with('\n')) out += '\n';
    }
    return out;
}

inline double baseline_recall(const std::vector<Turn>& full_history, TokenCount budget,
                              const DesignSpec& spec) {
    if (spec.constraints.empty()) return 1.0;
    const std::string rendered = baseline_render(full_history, budget);
    size_t found = 0;
    for (const auto& c : spec.constraints)
        if (rendered.find(c.text) != std::string::npos) ++found;
    return double(found) / double(spec.constraints.size());
}

}  // namespace refevo
