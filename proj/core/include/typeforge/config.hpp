// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace typeforge {

enum class LlmMode { Live, Replay, Record };

std::string_view to_string(LlmMode mode) noexcept;
LlmMode llm_mode_from(std::string_view text);

struct LlmSettings {
    std::string endpoint; ///< chat-completions URL; required in live mode unless a responder is set
    std::string model = "gpt-4o";
    double temperature = 0.0;
    std::size_t budget_tokens = 8000;
    double token_calibration = 1.0;
    int max_retries = 3;
    std::size_t max_in_flight = 4;
    std::size_t requests_per_minute = 0;
    double timeout_s = 120.0;
    /// Scripted responder rules used in place of an HTTP endpoint.
    std::filesystem::path responder;
};

struct RetrievalSettings {
    std::size_t k = 5;
    double lambda = 0.5;
    std::string embedder_endpoint; ///< empty selects the built-in hashed embedder
    std::size_t dimension = 256;
};

struct SandboxSettings {
    double timeout_s = 30.0;
    std::size_t parallelism = 1;
    std::vector<std::string> runner{"python3", "-m", "typeforge_runner"};
    /// Canned execution results; when set, no runner process is started.
    std::filesystem::path executions;
    bool keep_workdirs = false;
};

struct RunConfig {
    std::filesystem::path project_root;
    std::filesystem::path out_dir;   ///< default <project_root>/.typeforge
    std::filesystem::path test_root; ///< default <out_dir>/tests
    int rounds = 3;
    LlmMode mode = LlmMode::Live;
    std::filesystem::path cassette_path; ///< default <out_dir>/cassette.json in record mode
    std::vector<std::string> targets;
    std::size_t summary_words = 120;
    LlmSettings llm;
    RetrievalSettings retrieval;
    SandboxSettings sandbox;

    nlohmann::json to_json() const;
};

/// Reads a TOML (.toml) or JSON (.json) file into the shared key layout.
/// Relative paths are resolved against the file's directory.
nlohmann::json read_config_file(const std::filesystem::path& path);

/// Layers `overrides` over `file` (overrides win), fills defaults and validates.
/// Relative paths in `overrides` are resolved against `cwd`. Throws ConfigError naming the field.
RunConfig resolve_config(const nlohmann::json& file, const nlohmann::json& overrides,
                         const std::filesystem::path& cwd = std::filesystem::current_path());

/// Environment variable holding the API key; the only setting read from the environment.
inline constexpr const char* kApiKeyEnv = "TYPEFORGE_API_KEY";

} // namespace typeforge
