// SPDX-License-Identifier: Apache-2.0
#include "typeforge/executor.hpp"

#include "typeforge/error.hpp"
#include "typeforge/util.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace typeforge {

namespace fs = std::filesystem;

void copy_project(const fs::path& from, const fs::path& to)
{
    fs::create_directories(to);
    for (const auto& entry : fs::directory_iterator(from)) {
        const auto name = entry.path().filename().string();
        if (name == ".git" || name == ".typeforge" || name == "__pycache__" || name == ".pytest_cache" ||
            name == ".hg" || name == ".venv") {
            continue;
        }
        const auto target = to / name;
        if (entry.is_symlink()) {
            fs::copy_symlink(entry.path(), target);
        } else if (entry.is_directory()) {
            copy_project(entry.path(), target);
        } else if (entry.is_regular_file()) {
            fs::copy_file(entry.path(), target, fs::copy_options::overwrite_existing);
        }
    }
}

namespace {

struct ChildOutput {
    std::string out;
    std::string err;
    int exit_code = -1;
    bool timed_out = false;
};

ChildOutput run_child(const std::vector<std::string>& argv, const fs::path& cwd, std::chrono::milliseconds limit,
                      const std::vector<std::pair<std::string, std::string>>& env)
{
    int out_pipe[2];
    int err_pipe[2];
    int exec_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0 || ::pipe2(exec_pipe, O_CLOEXEC) != 0) {
        throw Error(ErrorCode::SandboxUnavailable, std::string("pipe: ") + std::strerror(errno));
    }
    std::vector<char*> args;
    for (const auto& a : argv) {
        args.push_back(const_cast<char*>(a.c_str()));
    }
    args.push_back(nullptr);
    std::vector<std::string> env_storage;
    for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
        const std::string_view entry(*e);
        const bool overridden = std::any_of(env.begin(), env.end(), [&](const auto& kv) {
            return entry.size() > kv.first.size() && entry.substr(0, kv.first.size()) == kv.first &&
                   entry[kv.first.size()] == '=';
        });
        if (!overridden) {
            env_storage.emplace_back(entry);
        }
    }
    for (const auto& [k, v] : env) {
        env_storage.push_back(k + "=" + v);
    }
    std::vector<char*> envp;
    for (auto& e : env_storage) {
        envp.push_back(e.data());
    }
    envp.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        throw Error(ErrorCode::SandboxUnavailable, std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::close(exec_pipe[0]);
        const int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) {
            ::dup2(devnull, STDIN_FILENO);
        }
        if (::chdir(cwd.c_str()) == 0) {
            ::execvpe(args[0], args.data(), envp.data());
        }
        const int e = errno;
        (void)!::write(exec_pipe[1], &e, sizeof e);
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::close(exec_pipe[1]);

    int exec_errno = 0;
    if (::read(exec_pipe[0], &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
        ::close(exec_pipe[0]);
        ::close(out_pipe[0]);
        ::close(err_pipe[0]);
        ::waitpid(pid, nullptr, 0);
        throw Error(ErrorCode::SandboxUnavailable,
                    "cannot start runner " + argv.front() + ": " + std::strerror(exec_errno));
    }
    ::close(exec_pipe[0]);

    ChildOutput result;
    const auto deadline = std::chrono::steady_clock::now() + limit;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buf[8192];
    while (open_fds > 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline -
                                                                                std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            result.timed_out = true;
            break;
        }
        const int rc = ::poll(fds, 2, static_cast<int>(std::min<long long>(left.count(), 1000)));
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) {
                continue;
            }
            const auto n = ::read(fds[i].fd, buf, sizeof buf);
            if (n > 0) {
                (i == 0 ? result.out : result.err).append(buf, static_cast<std::size_t>(n));
            } else {
                ::close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    int status = 0;
    if (result.timed_out) {
        ::kill(-pid, SIGKILL);
        ::waitpid(pid, &status, 0);
    } else {
        while (true) {
            const auto r = ::waitpid(pid, &status, WNOHANG);
            if (r == pid) {
                break;
            }
            if (std::chrono::steady_clock::now() >= deadline) {
                result.timed_out = true;
                ::kill(-pid, SIGKILL);
                ::waitpid(pid, &status, 0);
                break;
            }
            ::usleep(2000);
        }
        ::kill(-pid, SIGKILL);
    }
    for (auto& fd : fds) {
        if (fd.fd >= 0) {
            ::close(fd.fd);
        }
    }
    if (!result.timed_out) {
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    }
    return result;
}

std::string tail(const std::string& s, std::size_t n)
{
    return s.size() <= n ? s : s.substr(s.size() - n);
}

std::string relative_to(const std::string& path, const fs::path& root)
{
    const fs::path p(path);
    if (!p.is_absolute()) {
        return p.lexically_normal().generic_string();
    }
    return p.lexically_relative(root).generic_string();
}

} // namespace

SubprocessExecutor::SubprocessExecutor(SandboxConfig config) : config_(std::move(config))
{
    if (config_.runner_command.empty()) {
        throw Error(ErrorCode::SandboxUnavailable, "no sandbox runner command configured");
    }
}

ExecutionResult SubprocessExecutor::execute(const ExecutionRequest& request)
{
    const auto parent = config_.work_root.empty() ? fs::temp_directory_path() : config_.work_root;
    fs::create_directories(parent);
    std::string tmpl = (parent / "typeforge-run-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
        throw Error(ErrorCode::SandboxUnavailable, "cannot create a sandbox directory under " + parent.string());
    }
    const fs::path workdir(tmpl);
    const auto project = workdir / "project";

    struct Cleanup {
        fs::path dir;
        bool keep;
        ~Cleanup()
        {
            if (!keep) {
                std::error_code ec;
                fs::remove_all(dir, ec);
            }
        }
    } cleanup{workdir, config_.keep_workdirs};

    copy_project(config_.project_root, project);
    const auto test_path = project / request.file_name;
    fs::create_directories(test_path.parent_path());
    write_file_atomic(test_path, request.source);

    auto argv = config_.runner_command;
    const auto timeout_s = std::max<long long>(1, (config_.timeout.count() + 999) / 1000);
    argv.push_back(test_path.string());
    argv.push_back(project.string());
    argv.push_back(std::to_string(timeout_s));

    const auto started = std::chrono::steady_clock::now();
    const auto child = run_child(argv, project, config_.timeout + config_.grace,
                                 {{"TYPEFORGE_TARGET_MODULES", join(request.target_modules, ",")}});
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    ExecutionResult result;
    if (child.timed_out) {
        result.status = ExecStatus::Timeout;
        result.error_report = "test timed out after " + std::to_string(timeout_s) + " s";
        result.duration_s = elapsed;
        result.snapshot_id = config_.snapshot_id;
        return result;
    }
    try {
        result = parse_runner_output(trim(child.out));
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedRunnerOutput, std::string(e.what()) + " (exit code " +
                                                          std::to_string(child.exit_code) +
                                                          ", stderr: " + tail(child.err, 2000) + ")");
    }
    if (result.coverage) {
        std::map<std::string, FileCoverage> rel;
        for (auto& [path, fc] : *result.coverage) {
            rel[relative_to(path, project)] = std::move(fc);
        }
        result.coverage = std::move(rel);
    }
    if (result.duration_s <= 0.0) {
        result.duration_s = elapsed;
    }
    result.snapshot_id = config_.snapshot_id;
    return result;
}

ScriptedExecutor::ScriptedExecutor(std::vector<CannedExecution> entries, std::string snapshot_id)
    : entries_(std::move(entries)), snapshot_id_(std::move(snapshot_id))
{
}

std::unique_ptr<ScriptedExecutor> ScriptedExecutor::load(const fs::path& path, std::string snapshot_id)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, "canned executions " + path.string() + ": " + e.what());
    }
    std::vector<CannedExecution> entries;
    for (const auto& e : j.at("executions")) {
        entries.push_back({e.at("marker").get<std::string>(), execution_from_json(e.at("result"))});
    }
    return std::make_unique<ScriptedExecutor>(std::move(entries), std::move(snapshot_id));
}

ExecutionResult ScriptedExecutor::execute(const ExecutionRequest& request)
{
    ++calls_;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(request);
    }
    for (const auto& e : entries_) {
        if (contains(request.source, e.marker)) {
            auto r = e.result;
            r.snapshot_id = snapshot_id_;
            return r;
        }
    }
    ExecutionResult r;
    r.status = ExecStatus::Error;
    r.error_report = "no canned execution matches test " + request.test_id;
    r.snapshot_id = snapshot_id_;
    return r;
}

std::vector<ExecutionRequest> ScriptedExecutor::requests() const
{
    std::lock_guard lock(mutex_);
    return requests_;
}

} // namespace typeforge
