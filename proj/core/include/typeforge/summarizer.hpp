// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/llm.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace typeforge {

struct FunctionSummary {
    std::string name;
    std::string behavior;
    std::string semantics;
    std::string index_summary;
    std::vector<std::string> sources; ///< provenance notes
    bool failed = false;              ///< a fallback replaced at least one LLM digest
};

nlohmann::json to_json(const FunctionSummary& summary);
FunctionSummary summary_from_json(const nlohmann::json& j);

struct SummarizerOptions {
    std::size_t max_words = 120;
    std::size_t max_callers = 3;
    std::size_t parallelism = 1;
};

struct CalleeDigest {
    std::string name;
    std::string text;
    bool signature_only = false; ///< substituted for a broken cycle edge
};

struct CallerMaterial {
    std::string name;
    std::string source;
    std::string semantics;
};

struct DocProxy {
    std::string path; ///< relative to the project root
    std::string text;
};

/// Nearest README* or docs/index* walking from the file's directory up to the root.
std::optional<DocProxy> find_doc_proxy(const std::filesystem::path& root, const std::string& relative_file);

/// Thread-safe digest memo keyed by content hashes; persisted as JSON.
class DigestCache {
public:
    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    std::size_t size() const;
    std::size_t hits() const;

    nlohmann::json to_json() const;
    void merge_json(const nlohmann::json& j);

    static std::string key(std::string_view phase, std::string_view source, const std::vector<std::string>& inputs);

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
    mutable std::size_t hits_ = 0;
};

/// Digest of what `f` does, from its source and its callees' digests. Falls back to the
/// first docstring line or the signature when the LLM fails.
std::string analyze_behavior(llm::LlmClient& llm, const CodeUnit& f, const std::vector<CalleeDigest>& callees,
                             const SummarizerOptions& options = {}, bool* fell_back = nullptr);

/// Purpose of `f` from its callers (or a documentation proxy at roots). Falls back to `behavior`.
std::string infer_semantics(llm::LlmClient& llm, const CodeUnit& f, const std::string& behavior,
                            const std::vector<CallerMaterial>& callers, const std::optional<DocProxy>& doc_proxy,
                            const SummarizerOptions& options = {}, bool* fell_back = nullptr);

struct TraceEntry {
    std::string phase; ///< "behavior" or "semantics"
    std::string name;
    int wave = 0;
};

struct ProjectSummaries {
    std::map<std::string, FunctionSummary> functions;
    std::map<std::string, FunctionSummary> classes;
    std::vector<TraceEntry> trace;

    /// qualified name -> index summary, for functions and classes.
    std::map<std::string, std::string> index_summaries() const;
    nlohmann::json to_json() const;
};

ProjectSummaries summarize_project(llm::LlmClient& llm, const ProjectIndex& index, const CallGraph& cg,
                                   const SummarizerOptions& options = {}, DigestCache* cache = nullptr);

} // namespace typeforge
