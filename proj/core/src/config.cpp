// SPDX-License-Identifier: Apache-2.0
#include "typeforge/config.hpp"

#include "typeforge/error.hpp"
#include "typeforge/util.hpp"

#define TOML_HEADER_ONLY 1
#include <toml.hpp>

#include <set>
#include <sstream>

namespace typeforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(LlmMode mode) noexcept
{
    switch (mode) {
    case LlmMode::Live: return "live";
    case LlmMode::Replay: return "replay";
    case LlmMode::Record: return "record";
    }
    return "live";
}

LlmMode llm_mode_from(std::string_view text)
{
    if (text == "live") {
        return LlmMode::Live;
    }
    if (text == "replay") {
        return LlmMode::Replay;
    }
    if (text == "record") {
        return LlmMode::Record;
    }
    throw Error(ErrorCode::ConfigError, "mode: expected live, replay or record, got \"" + std::string(text) + "\"");
}

namespace {

const std::set<std::string> kTopKeys = {"project_root", "out_dir",    "test_root", "rounds",    "mode",    "cassette_path",
                                        "targets",      "summary_words", "llm",    "retrieval", "sandbox"};
const std::set<std::string> kLlmKeys = {"endpoint",    "model",         "temperature",         "budget_tokens",
                                        "token_calibration", "max_retries", "max_in_flight", "requests_per_minute",
                                        "timeout_s",   "responder"};
const std::set<std::string> kRetrievalKeys = {"k", "lambda", "embedder_endpoint", "dimension"};
const std::set<std::string> kSandboxKeys = {"timeout_s", "parallelism", "runner", "executions", "keep_workdirs"};

// (section, key) pairs holding filesystem paths.
const std::vector<std::pair<std::string, std::string>> kPathKeys = {
    {"", "project_root"}, {"", "out_dir"},          {"", "test_root"},
    {"", "cassette_path"}, {"llm", "responder"}, {"sandbox", "executions"}};

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& prefix)
{
    if (!obj.is_object()) {
        throw Error(ErrorCode::ConfigError, (prefix.empty() ? "config" : prefix) + ": expected a table/object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (allowed.count(k) == 0) {
            throw Error(ErrorCode::ConfigError, prefix + (prefix.empty() ? "" : ".") + k + ": unknown setting");
        }
    }
}

void validate_layout(const json& doc)
{
    check_keys(doc, kTopKeys, "");
    if (doc.contains("llm")) {
        check_keys(doc["llm"], kLlmKeys, "llm");
    }
    if (doc.contains("retrieval")) {
        check_keys(doc["retrieval"], kRetrievalKeys, "retrieval");
    }
    if (doc.contains("sandbox")) {
        check_keys(doc["sandbox"], kSandboxKeys, "sandbox");
    }
}

json absolutize(json doc, const fs::path& base)
{
    for (const auto& [section, key] : kPathKeys) {
        json* holder = section.empty() ? &doc : (doc.contains(section) ? &doc[section] : nullptr);
        if (holder == nullptr || !holder->contains(key) || !(*holder)[key].is_string()) {
            continue;
        }
        const fs::path p((*holder)[key].get<std::string>());
        if (!p.empty() && p.is_relative()) {
            (*holder)[key] = (base / p).lexically_normal().string();
        }
    }
    return doc;
}

template <typename T>
T field(const json& obj, const std::string& key, const std::string& name, T fallback)
{
    if (!obj.contains(key) || obj[key].is_null()) {
        return fallback;
    }
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ConfigError, name + ": wrong value type (" + obj[key].dump() + ")");
    }
}

} // namespace

json read_config_file(const fs::path& path)
{
    if (!fs::exists(path)) {
        throw Error(ErrorCode::ConfigError, "config file " + path.string() + " does not exist");
    }
    const auto text = read_file(path);
    const auto ext = path.extension().string();
    json doc;
    if (ext == ".toml") {
        try {
            const auto table = toml::parse(text, path.string());
            std::ostringstream out;
            out << toml::json_formatter{table};
            doc = json::parse(out.str());
        } catch (const toml::parse_error& e) {
            std::ostringstream msg;
            msg << "config file " << path.string() << ": " << e.description() << " at line " << e.source().begin.line;
            throw Error(ErrorCode::ConfigError, msg.str());
        }
    } else if (ext == ".json") {
        try {
            doc = json::parse(text);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, "config file " + path.string() + ": " + e.what());
        }
    } else {
        throw Error(ErrorCode::ConfigError,
                    "config file " + path.string() + ": extension must be .toml or .json");
    }
    validate_layout(doc);
    return absolutize(std::move(doc), fs::absolute(path).parent_path());
}

RunConfig resolve_config(const json& file, const json& overrides, const fs::path& cwd)
{
    json merged = file.is_null() ? json::object() : file;
    validate_layout(merged);
    const json over = overrides.is_null() ? json::object() : overrides;
    validate_layout(over);
    merged.merge_patch(absolutize(over, cwd));
    merged = absolutize(std::move(merged), cwd);

    const json empty = json::object();
    const auto& l = merged.contains("llm") ? merged["llm"] : empty;
    const auto& r = merged.contains("retrieval") ? merged["retrieval"] : empty;
    const auto& s = merged.contains("sandbox") ? merged["sandbox"] : empty;

    RunConfig c;
    c.project_root = field<std::string>(merged, "project_root", "project_root", "");
    if (c.project_root.empty()) {
        throw Error(ErrorCode::ConfigError, "project_root: required (config file or --project)");
    }
    if (!fs::is_directory(c.project_root)) {
        throw Error(ErrorCode::ConfigError, "project_root: " + c.project_root.string() + " is not a directory");
    }
    c.out_dir = field<std::string>(merged, "out_dir", "out_dir", "");
    if (c.out_dir.empty()) {
        c.out_dir = c.project_root / ".typeforge";
    }
    c.test_root = field<std::string>(merged, "test_root", "test_root", "");
    if (c.test_root.empty()) {
        c.test_root = c.out_dir / "tests";
    }
    c.rounds = field<int>(merged, "rounds", "rounds", 3);
    if (c.rounds < 1) {
        throw Error(ErrorCode::ConfigError, "rounds: must be at least 1");
    }
    c.mode = llm_mode_from(field<std::string>(merged, "mode", "mode", "live"));
    c.cassette_path = field<std::string>(merged, "cassette_path", "cassette_path", "");
    if (c.mode == LlmMode::Replay) {
        if (c.cassette_path.empty()) {
            throw Error(ErrorCode::ConfigError, "cassette_path: required in replay mode");
        }
        if (!fs::exists(c.cassette_path)) {
            throw Error(ErrorCode::ConfigError, "cassette_path: " + c.cassette_path.string() + " does not exist");
        }
    }
    if (c.mode == LlmMode::Record && c.cassette_path.empty()) {
        c.cassette_path = c.out_dir / "cassette.json";
    }
    c.targets = field<std::vector<std::string>>(merged, "targets", "targets", {});
    c.summary_words = field<std::size_t>(merged, "summary_words", "summary_words", 120);

    c.llm.endpoint = field<std::string>(l, "endpoint", "llm.endpoint", "");
    c.llm.model = field<std::string>(l, "model", "llm.model", c.llm.model);
    c.llm.temperature = field<double>(l, "temperature", "llm.temperature", c.llm.temperature);
    c.llm.budget_tokens = field<std::size_t>(l, "budget_tokens", "llm.budget_tokens", c.llm.budget_tokens);
    c.llm.token_calibration = field<double>(l, "token_calibration", "llm.token_calibration", 1.0);
    c.llm.max_retries = field<int>(l, "max_retries", "llm.max_retries", c.llm.max_retries);
    c.llm.max_in_flight = field<std::size_t>(l, "max_in_flight", "llm.max_in_flight", c.llm.max_in_flight);
    c.llm.requests_per_minute = field<std::size_t>(l, "requests_per_minute", "llm.requests_per_minute", 0);
    c.llm.timeout_s = field<double>(l, "timeout_s", "llm.timeout_s", c.llm.timeout_s);
    c.llm.responder = field<std::string>(l, "responder", "llm.responder", "");
    if (c.llm.budget_tokens == 0) {
        throw Error(ErrorCode::ConfigError, "llm.budget_tokens: must be positive");
    }
    if (c.llm.token_calibration <= 0.0) {
        throw Error(ErrorCode::ConfigError, "llm.token_calibration: must be positive");
    }
    if (c.llm.max_in_flight == 0) {
        throw Error(ErrorCode::ConfigError, "llm.max_in_flight: must be positive");
    }
    if (!c.llm.responder.empty() && !fs::exists(c.llm.responder)) {
        throw Error(ErrorCode::ConfigError, "llm.responder: " + c.llm.responder.string() + " does not exist");
    }

    c.retrieval.k = field<std::size_t>(r, "k", "retrieval.k", c.retrieval.k);
    c.retrieval.lambda = field<double>(r, "lambda", "retrieval.lambda", c.retrieval.lambda);
    c.retrieval.embedder_endpoint = field<std::string>(r, "embedder_endpoint", "retrieval.embedder_endpoint", "");
    c.retrieval.dimension = field<std::size_t>(r, "dimension", "retrieval.dimension", c.retrieval.dimension);
    if (c.retrieval.k == 0) {
        throw Error(ErrorCode::ConfigError, "retrieval.k: must be positive");
    }
    if (c.retrieval.lambda < 0.0 || c.retrieval.lambda > 1.0) {
        throw Error(ErrorCode::ConfigError, "retrieval.lambda: must lie in [0, 1]");
    }
    if (c.retrieval.dimension == 0) {
        throw Error(ErrorCode::ConfigError, "retrieval.dimension: must be positive");
    }

    c.sandbox.timeout_s = field<double>(s, "timeout_s", "sandbox.timeout_s", c.sandbox.timeout_s);
    c.sandbox.parallelism = field<std::size_t>(s, "parallelism", "sandbox.parallelism", c.sandbox.parallelism);
    c.sandbox.runner = field<std::vector<std::string>>(s, "runner", "sandbox.runner", c.sandbox.runner);
    c.sandbox.executions = field<std::string>(s, "executions", "sandbox.executions", "");
    c.sandbox.keep_workdirs = field<bool>(s, "keep_workdirs", "sandbox.keep_workdirs", false);
    if (c.sandbox.timeout_s <= 0.0) {
        throw Error(ErrorCode::ConfigError, "sandbox.timeout_s: must be positive");
    }
    if (c.sandbox.parallelism == 0) {
        throw Error(ErrorCode::ConfigError, "sandbox.parallelism: must be positive");
    }
    if (c.sandbox.executions.empty() && c.sandbox.runner.empty()) {
        throw Error(ErrorCode::ConfigError, "sandbox.runner: must name a command");
    }
    if (!c.sandbox.executions.empty() && !fs::exists(c.sandbox.executions)) {
        throw Error(ErrorCode::ConfigError, "sandbox.executions: " + c.sandbox.executions.string() + " does not exist");
    }
    return c;
}

json RunConfig::to_json() const
{
    const auto opt_path = [](const fs::path& p) { return p.empty() ? json(nullptr) : json(p.string()); };
    return {{"project_root", project_root.string()},
            {"out_dir", out_dir.string()},
            {"test_root", test_root.string()},
            {"rounds", rounds},
            {"mode", std::string(typeforge::to_string(mode))},
            {"cassette_path", opt_path(cassette_path)},
            {"targets", targets},
            {"summary_words", summary_words},
            {"llm",
             {{"endpoint", llm.endpoint},
              {"model", llm.model},
              {"temperature", llm.temperature},
              {"budget_tokens", llm.budget_tokens},
              {"token_calibration", llm.token_calibration},
              {"max_retries", llm.max_retries},
              {"max_in_flight", llm.max_in_flight},
              {"requests_per_minute", llm.requests_per_minute},
              {"timeout_s", llm.timeout_s},
              {"responder", opt_path(llm.responder)}}},
            {"retrieval",
             {{"k", retrieval.k},
              {"lambda", retrieval.lambda},
              {"embedder_endpoint", retrieval.embedder_endpoint},
              {"dimension", retrieval.dimension}}},
            {"sandbox",
             {{"timeout_s", sandbox.timeout_s},
              {"parallelism", sandbox.parallelism},
              {"runner", sandbox.runner},
              {"executions", opt_path(sandbox.executions)},
              {"keep_workdirs", sandbox.keep_workdirs}}}};
}

} // namespace typeforge
