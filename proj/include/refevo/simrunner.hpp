// Simulation environment: writes the artifact pair into a workdir, runs
// the configured compile and run commands as subprocesses with a scrubbed
// environment, enforces per-phase deadlines and captures merged output.
#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "refevo/core.hpp"
#include "refevo/simrunner_types.hpp"

namespace refevo {

struct ExecResult {
    std::optional<int> exit_code;
    bool timed_out = false;
    bool crashed = false;
    int term_signal = 0;
    std::string output;  // merged stdout+stderr
    std::int64_t duration_ms = 0;
};

namespace detail {

inline bool is_executable_file(const std::string& path) {
    struct stat st{};
    return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
           ::access(path.c_str(), X_OK) == 0;
}

inline std::string resolve_binary(const std::string& name) {
    if (name.find('/') != std::string::npos) {
        if (is_executable_file(name)) return name;
        throw Error(ErrorCode::toolchain_misconfigured, "no executable at " + name);
    }
    const char* path_env = ::getenv("PATH");
    std::string path = path_env ? path_env : "/usr/bin:/bin";
    size_t start = 0;
    while (start <= path.size()) {
        size_t colon = path.find(':', start);
        std::string dir =
            colon == std::string::npos ? path.substr(start) : path.substr(start, colon - start);
        if (!dir.empty()) {
            std::string candidate = dir + "/" + name;
            if (is_executable_file(candidate)) return candidate;
        }
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    throw Error(ErrorCode::toolchain_misconfigured, "binary not found on PATH: " + name);
}

}  // namespace detail

// Runs argv in workdir with only the allowlisted environment variables
// visible to the child. The whole process group is killed on deadline.
inline ExecResult exec_capture(const std::vector<std::string>& argv, const std::string& workdir,
                               const std::vector<std::string>& env_allowlist, int timeout_s) {
    if (argv.empty()) throw Error(ErrorCode::toolchain_misconfigured, "empty argv");
    const std::string binary = detail::resolve_binary(argv[0]);

    int fds[2];
    if (::pipe(fds) != 0) throw Error(ErrorCode::workdir_error, "pipe failed");

    std::vector<std::string> env_strings;
    for (const auto& name : env_allowlist)
        if (const char* value = ::getenv(name.c_str()))
            env_strings.push_back(name + "=" + value);

    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw Error(ErrorCode::workdir_error, "fork failed");
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(fds[1], STDOUT_FILENO);
        ::dup2(fds[1], STDERR_FILENO);
        ::close(fds[0]);
        ::close(fds[1]);
        if (!workdir.empty() && ::chdir(workdir.c_str()) != 0) {
            const char* msg = "CRASH: cannot enter workdir\n";
            ::write(STDERR_FILENO, msg, std::strlen(msg));
            ::_exit(127);
        }
        std::vector<char*> cargv;
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        std::vector<char*> cenv;
        for (const auto& e : env_strings) cenv.push_back(const_cast<char*>(e.c_str()));
        cenv.push_back(nullptr);
        ::execve(binary.c_str(), cargv.data(), cenv.data());
        const char* msg = "CRASH: exec failed\n";
        ::write(STDERR_FILENO, msg, std::strlen(msg));
        ::_exit(127);
    }

    ::close(fds[1]);
    ExecResult result;
    const auto deadline = start + std::chrono::seconds(timeout_s);
    char buffer[4096];
    bool open = true;
    while (open) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            ::killpg(pid, SIGKILL);
            result.timed_out = true;
            break;
        }
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        struct pollfd pfd{fds[0], POLLIN, 0};
        const int rc = ::poll(&pfd, 1, int(std::min<std::int64_t>(remaining, 100)));
        if (rc < 0) break;
        if (rc == 0) continue;
        const ssize_t n = ::read(fds[0], buffer, sizeof(buffer));
        if (n <= 0)
            open = false;
        else
            result.output.append(buffer, size_t(n));
    }
    // drain whatever is left after a kill, without blocking
    ::fcntl(fds[0], F_SETFL, O_NONBLOCK);
    for (;;) {
        const ssize_t n = ::read(fds[0], buffer, sizeof(buffer));
        if (n <= 0) break;
        result.output.append(buffer, size_t(n));
    }
    ::close(fds[0]);

    int status = 0;
    ::waitpid(pid, &status, 0);
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.crashed = !result.timed_out;
        result.term_signal = WTERMSIG(status);
    }
    result.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    return result;
}

namespace detail {

inline std::vector<std::string> substitute_argv(const std::vector<std::string>& argv_template,
                                                const std::string& model_file,
                                                const std::string& tb_file,
                                                const std::string& out_file) {
    std::vector<std::string> argv;
    for (std::string arg : argv_template) {
        auto replace_all = [&arg](std::string_view from, std::string_view to) {
            size_t pos = 0;
            while ((pos = arg.find(from, pos)) != std::string::npos) {
                arg.replace(pos, from.size(), to);
                pos += to.size();
            }
        };
        replace_all("{model}", model_file);
        replace_all("{tb}", tb_file);
        replace_all("{out}", out_file);
        argv.push_back(std::move(arg));
    }
    return argv;
}

}  // namespace detail

// Writes both artifacts into the workdir, compiles them, and returns a
// partial report (run fields unset). compile.log is preserved on disk.
inline SimReport compile_pair(const Artifact& model, const Artifact& tb,
                              const ToolchainConfig& cfg) {
    validate_toolchain(cfg);
    std::error_code ec;
    std::filesystem::create_directories(cfg.workdir, ec);
    if (ec) throw Error(ErrorCode::workdir_error, "cannot create workdir " + cfg.workdir);
    write_text_file(cfg.workdir + "/" + model.filename, model.content);
    write_text_file(cfg.workdir + "/" + tb.filename, tb.content);

    const auto argv =
        detail::substitute_argv(cfg.compile_cmd, model.filename, tb.filename, kSimBinaryName);
    ExecResult exec = exec_capture(argv, cfg.workdir, cfg.env_allowlist, cfg.timeout_s);

    SimReport report;
    report.compile_log = exec.output;
    if (exec.timed_out)
        report.compile_log += "TIMEOUT: compile exceeded " + std::to_string(cfg.timeout_s) + "s\n";
    report.compile_ok = exec.exit_code.has_value() && *exec.exit_code == 0 && !exec.timed_out;
    report.compile_ms = exec.duration_ms;
    if (!report.compile_ok)
        report.signatures = extract_signatures(report.compile_log, {model.filename, tb.filename});
    write_text_file(cfg.workdir + "/compile.log", report.compile_log);
    return report;
}

// Executes the compiled binary and completes the report. run_ok requires a
// clean exit with no assertion/error lines in the log.
inline SimReport run_simulation(SimReport report, const ToolchainConfig& cfg,
                                const std::vector<std::string>& artifact_names = {}) {
    if (!report.compile_ok)
        throw Error(ErrorCode::config_error, "run_simulation requires compile_ok");
    const auto argv = detail::substitute_argv(cfg.run_cmd, "", "", kSimBinaryName);
    ExecResult exec = exec_capture(argv, cfg.workdir, cfg.env_allowlist, cfg.timeout_s);

    std::string log = exec.output;
    if (exec.timed_out)
        log += "TIMEOUT: run exceeded " + std::to_string(cfg.timeout_s) + "s\n";
    if (exec.crashed)
        log += "CRASH: terminated by signal " + std::to_string(exec.term_signal) + "\n";

    bool failure_lines = false;
    for (const auto& line : detail::split_lines(log))
        if (detail::is_failure_line(line)) failure_lines = true;

    report.run_log = log;
    report.exit_code = exec.exit_code;
    report.run_ms = exec.duration_ms;
    report.run_ok = exec.exit_code.has_value() && *exec.exit_code == 0 && !exec.timed_out &&
                    !exec.crashed && !failure_lines;
    if (!*report.run_ok) {
        auto run_signatures = extract_signatures(log, artifact_names);
        for (auto& sig : run_signatures) {
            if (report.signatures.size() >= 10) break;
            report.signatures.push_back(std::move(sig));
        }
    }
    write_text_file(cfg.workdir + "/run.log", log);
    return report;
}

// ── Toolchain profiles ──────────────────────────────────────────

// ${VAR} references in profile arguments are expanded from the environment
// at load time (used by the systemc profile).
inline std::string expand_env_refs(std::string arg) {
    size_t pos = 0;
    while ((pos = arg.find("${", pos)) != std::string::npos) {
        const size_t close = arg.find('}', pos);
        if (close == std::string::npos) break;
        const std::string name = arg.substr(pos + 2, close - pos - 2);
        const char* value = ::getenv(name.c_str());
        arg.replace(pos, close - pos + 1, value ? value : "");
        pos += value ? std::strlen(value) : 0;
    }
    return arg;
}

inline std::map<std::string, ToolchainConfig> load_toolchain_profiles(const std::string& path) {
    const json j = json::parse(read_text_file(path));
    std::map<std::string, ToolchainConfig> profiles;
    for (const auto& [name, value] : j.items()) {
        ToolchainConfig cfg = value.get<ToolchainConfig>();
        for (auto& arg : cfg.compile_cmd) arg = expand_env_refs(arg);
        for (auto& arg : cfg.run_cmd) arg = expand_env_refs(arg);
        profiles[name] = std::move(cfg);
    }
    return profiles;
}

// Embedded copy of data/toolchains.json; a test keeps them in sync.
inline const char* default_toolchains_json() {
    return R"json({
  "cpp": {
    "compile_cmd": ["g++", "-std=c++17", "-O0", "{model}", "{tb}", "-o", "{out}"],
    "run_cmd": ["./{out}"],
    "timeout_s": 30,
    "env_allowlist": ["PATH", "HOME", "TMPDIR"]
  },
  "systemc": {
    "compile_cmd": ["g++", "-std=c++17", "-I${SYSTEMC_HOME}/include", "-L${SYSTEMC_HOME}/lib", "{model}", "{tb}", "-o", "{out}", "-lsystemc", "-lpthread"],
    "run_cmd": ["./{out}"],
    "timeout_s": 120,
    "env_allowlist": ["PATH", "HOME", "TMPDIR", "SYSTEMC_HOME", "LD_LIBRARY_PATH"]
  }
})json";
}

inline ToolchainConfig default_cpp_toolchain() {
    return json::parse(default_toolchains_json()).at("cpp").get<ToolchainConfig>();
}

}  // namespace refevo
