// Sim-runner data model: toolchain configuration, simulation reports and
// structured error-signature extraction from captured logs. The subprocess
// machinery itself lives in simrunner.hpp.
#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "refevo/core.hpp"

namespace refevo {

inline constexpr const char* kSimBinaryName = "sim_bin";

struct ToolchainConfig {
    std::vector<std::string> compile_cmd;  // argv template: {model} {tb} {out}
    std::vector<std::string> run_cmd;      // argv template: {out}
    std::string workdir;
    int timeout_s = 30;  // per phase
    std::vector<std::string> env_allowlist = {"PATH"};

    bool operator==(const ToolchainConfig&) const = default;
};

inline void to_json(json& j, const ToolchainConfig& c) {
    j = json{{"compile_cmd", c.compile_cmd},
             {"run_cmd", c.run_cmd},
             {"workdir", c.workdir},
             {"timeout_s", c.timeout_s},
             {"env_allowlist", c.env_allowlist}};
}

inline void from_json(const json& j, ToolchainConfig& c) {
    c.compile_cmd = j.at("compile_cmd").get<std::vector<std::string>>();
    c.run_cmd = j.at("run_cmd").get<std::vector<std::string>>();
    c.workdir = j.value("workdir", "");
    c.timeout_s = j.value("timeout_s", 30);
    if (j.contains("env_allowlist"))
        c.env_allowlist = j.at("env_allowlist").get<std::vector<std::string>>();
}

namespace detail {

inline bool argv_contains(const std::vector<std::string>& argv, std::string_view placeholder) {
    for (const auto& arg : argv)
        if (arg.find(placeholder) != std::string::npos) return true;
    return false;
}

}  // namespace detail

inline void validate_toolchain(const ToolchainConfig& cfg) {
    if (cfg.compile_cmd.empty() || cfg.run_cmd.empty())
        throw Error(ErrorCode::toolchain_misconfigured, "empty command template");
    for (const char* placeholder : {"{model}", "{tb}", "{out}"})
        if (!detail::argv_contains(cfg.compile_cmd, placeholder))
            throw Error(ErrorCode::toolchain_misconfigured,
                        std::string("compile_cmd lacks ") + placeholder);
    if (!detail::argv_contains(cfg.run_cmd, "{out}"))
        throw Error(ErrorCode::toolchain_misconfigured, "run_cmd lacks {out}");
    if (cfg.timeout_s < 1)
        throw Error(ErrorCode::toolchain_misconfigured, "timeout_s must be >= 1");
}

struct ErrorSignature {
    std::string file;
    std::optional<int> line;
    SignatureKind kind = SignatureKind::compile_error;
    std::string message;  // verbatim line of the captured log

    bool operator==(const ErrorSignature&) const = default;
};

inline void to_json(json& j, const ErrorSignature& s) {
    j = json{{"file", s.file}, {"line", s.line}, {"kind", to_string(s.kind)},
             {"message", s.message}};
}

inline void from_json(const json& j, ErrorSignature& s) {
    s.file = j.at("file").get<std::string>();
    s.line = j.at("line").get<std::optional<int>>();
    s.kind = signature_kind_from_string(j.at("kind").get<std::string>());
    s.message = j.at("message").get<std::string>();
}

struct SimReport {
    bool compile_ok = false;
    std::string compile_log;
    std::optional<bool> run_ok;       // present iff compile_ok
    std::optional<std::string> run_log;
    std::optional<int> exit_code;
    std::int64_t compile_ms = 0;
    std::int64_t run_ms = 0;
    std::vector<ErrorSignature> signatures;

    bool operator==(const SimReport&) const = default;
};

inline void to_json(json& j, const SimReport& r) {
    j = json{{"compile_ok", r.compile_ok}, {"compile_log", r.compile_log},
             {"run_ok", r.run_ok},         {"run_log", r.run_log},
             {"exit_code", r.exit_code},   {"compile_ms", r.compile_ms},
             {"run_ms", r.run_ms},         {"signatures", r.signatures}};
}

inline void from_json(const json& j, SimReport& r) {
    r.compile_ok = j.at("compile_ok").get<bool>();
    r.compile_log = j.at("compile_log").get<std::string>();
    r.run_ok = j.at("run_ok").get<std::optional<bool>>();
    r.run_log = j.at("run_log").get<std::optional<std::string>>();
    r.exit_code = j.at("exit_code").get<std::optional<int>>();
    r.compile_ms = j.value("compile_ms", 0);
    r.run_ms = j.value("run_ms", 0);
    r.signatures = j.at("signatures").get<std::vector<ErrorSignature>>();
}

// Transcript copy with wall-clock fields zeroed, so mock sessions replay
// bit-identically across machines.
inline json sim_report_record(const SimReport& r) {
    json j = r;
    j["compile_ms"] = 0;
    j["run_ms"] = 0;
    return j;
}

// ── Signature extraction ────────────────────────────────────────

namespace detail {

inline bool is_failure_line(const std::string& line) {
    if (line.find("ASSERT FAIL:") != std::string::npos) return true;
    const std::string t = trim(line);
    return t.starts_with("Error:") || t.starts_with("TIMEOUT:") || t.starts_with("CRASH:");
}

inline std::string first_artifact_in(const std::string& line,
                                     const std::vector<std::string>& artifact_names) {
    size_t best = std::string::npos;
    std::string found;
    for (const auto& name : artifact_names) {
        const size_t pos = line.find(name);
        if (pos != std::string::npos && pos < best) {
            best = pos;
            found = name;
        }
    }
    return found;
}

}  // namespace detail

// Scans for `<file>:<line>: error:` style diagnostics, link failures and
// the assertion/timeout/crash patterns. Deduplicates by (file, line, kind),
// preserves first-occurrence order and caps the list at 10 entries.
inline std::vector<ErrorSignature> extract_signatures(
    const std::string& log, const std::vector<std::string>& artifact_names = {}) {
    static const std::regex diag_re(R"(^([^\s:]+):([0-9]+)(?::[0-9]+)?:\s*(?:fatal\s+)?error:.*$)");
    std::vector<ErrorSignature> out;
    auto push = [&](ErrorSignature sig) {
        if (out.size() >= 10) return;
        for (const auto& existing : out)
            if (existing.file == sig.file && existing.line == sig.line &&
                existing.kind == sig.kind)
                return;
        out.push_back(std::move(sig));
    };
    for (const auto& line : detail::split_lines(log)) {
        if (line.empty()) continue;
        std::smatch m;
        if (std::regex_match(line, m, diag_re)) {
            push({m[1].str(), std::stoi(m[2].str()), SignatureKind::compile_error, line});
            continue;
        }
        if (line.find("undefined reference") != std::string::npos ||
            line.find("ld returned") != std::string::npos) {
            std::string file = detail::first_artifact_in(line, artifact_names);
            push({file.empty() ? "ld" : file, std::nullopt, SignatureKind::link_error, line});
            continue;
        }
        if (line.find("ASSERT FAIL:") != std::string::npos) {
            push({detail::first_artifact_in(line, artifact_names), std::nullopt,
                  SignatureKind::assertion_fail, line});
            continue;
        }
        const std::string t = detail::trim(line);
        if (t.starts_with("Error:")) {
            push({detail::first_artifact_in(line, artifact_names), std::nullopt,
                  SignatureKind::assertion_fail, line});
        } else if (t.starts_with("TIMEOUT:")) {
            push({"", std::nullopt, SignatureKind::timeout, line});
        } else if (t.starts_with("CRASH:")) {
            push({"", std::nullopt, SignatureKind::crash, line});
        }
    }
    return out;
}

}  // namespace refevo
