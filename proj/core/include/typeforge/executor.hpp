// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/coverage.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace typeforge {

struct ExecutionRequest {
    std::string test_id;
    std::string file_name; ///< written at the root of the project copy
    std::string source;
    std::vector<std::string> target_modules;
};

class TestExecutor {
public:
    virtual ~TestExecutor() = default;
    /// Must be safe to call concurrently.
    virtual ExecutionResult execute(const ExecutionRequest& request) = 0;
};

struct SandboxConfig {
    std::filesystem::path project_root;
    /// Runner invocation; the test path, project root and timeout in seconds are appended.
    std::vector<std::string> runner_command;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds grace{2000};
    std::filesystem::path work_root; ///< parent of per-run directories; system temp when empty
    bool keep_workdirs = false;
    std::string snapshot_id;
};

/// Runs each test through the runner in a fresh copy of the project. The process group is
/// killed once `timeout + grace` elapses.
class SubprocessExecutor final : public TestExecutor {
public:
    explicit SubprocessExecutor(SandboxConfig config);
    ExecutionResult execute(const ExecutionRequest& request) override;
    const SandboxConfig& config() const noexcept { return config_; }

private:
    SandboxConfig config_;
};

struct CannedExecution {
    std::string marker; ///< substring of the test source selecting this result
    ExecutionResult result;
};

/// Replays canned results: the first entry whose marker occurs in the test source wins.
class ScriptedExecutor final : public TestExecutor {
public:
    ScriptedExecutor(std::vector<CannedExecution> entries, std::string snapshot_id = {});

    /// {"executions": [{"marker": "...", "result": <runner result object>}]}
    static std::unique_ptr<ScriptedExecutor> load(const std::filesystem::path& path, std::string snapshot_id = {});

    ExecutionResult execute(const ExecutionRequest& request) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    std::vector<ExecutionRequest> requests() const;

private:
    std::vector<CannedExecution> entries_;
    std::string snapshot_id_;
    std::atomic<std::size_t> calls_{0};
    mutable std::mutex mutex_;
    std::vector<ExecutionRequest> requests_;
};

/// Recursive copy that skips VCS metadata, caches and the output directory.
void copy_project(const std::filesystem::path& from, const std::filesystem::path& to);

} // namespace typeforge
