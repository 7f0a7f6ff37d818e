// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/code_index.hpp"
#include "typeforge/embedding.hpp"
#include "typeforge/generated_test.hpp"
#include "typeforge/llm.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace typeforge {

enum class DocKind { Function, SubjectClass, TestCase };

std::string_view to_string(DocKind kind) noexcept;

struct SourceCodeEntry {
    std::string module_path;
    std::string name;
    std::string source_code;
    std::string docstring;
    friend bool operator==(const SourceCodeEntry&, const SourceCodeEntry&) = default;
};

struct TestCaseEntry {
    std::string label;
    std::string unit_path;
    std::string unit_name;
    std::string source_code;
    friend bool operator==(const TestCaseEntry&, const TestCaseEntry&) = default;
};

struct KBDocument {
    std::string doc_id;
    std::string summary;
    SourceCodeEntry source_code;
    std::optional<TestCaseEntry> test_cases;
    DocKind doc_kind = DocKind::Function;
    Vector embedding;
    std::string qualified_name; ///< indexed unit, or the focal function of a test case
    bool summary_fallback = false;

    friend bool operator==(const KBDocument&, const KBDocument&) = default;
};

nlohmann::json to_json(const KBDocument& doc);
KBDocument document_from_json(const nlohmann::json& doc);

struct RetrievedDoc {
    std::string doc_id;
    double score = 0.0;     ///< MMR objective at selection time
    double relevance = 0.0; ///< cosine to the query
};

/// Greedy MMR over candidate vectors. The first pick is the most query-similar
/// candidate; each later pick maximizes
///   lambda * sim(q, d) - (1 - lambda) * max_{s in selected} sim(d, s).
/// Candidates must be given in tie-break order (ascending doc id).
std::vector<std::size_t> mmr_select(const Vector& query, const std::vector<const Vector*>& candidates, std::size_t k,
                                    double lambda);

struct ContextBundle {
    std::string query;
    std::vector<std::string> selected;
    std::string consolidated;
    std::map<std::string, std::string> provenance;
};

using DocFilter = std::function<bool(const KBDocument&)>;

inline constexpr std::size_t kDefaultRetrievalK = 5;
inline constexpr double kDefaultLambda = 0.5;

class KnowledgeBase {
public:
    explicit KnowledgeBase(std::shared_ptr<const Embedder> embedder);
    KnowledgeBase(const KnowledgeBase& other);
    KnowledgeBase& operator=(const KnowledgeBase& other);

    const Embedder& embedder() const noexcept { return *embedder_; }
    std::shared_ptr<const Embedder> embedder_ptr() const noexcept { return embedder_; }

    /// Inserts or replaces nothing: returns false when the id already exists.
    bool insert(KBDocument doc);
    std::size_t size() const;
    std::vector<KBDocument> documents() const;
    std::optional<KBDocument> find(const std::string& doc_id) const;

    std::vector<RetrievedDoc> retrieve(const std::string& query, std::size_t k = kDefaultRetrievalK,
                                       double lambda = kDefaultLambda, const DocFilter& filter = {}) const;

    /// Stores a passing test as a test-case document. Throws PreconditionFailed
    /// for any other status; a second insert of the same test is a no-op.
    void add_test_case(const GeneratedTest& test);

    /// `path` is the JSON-lines store; metadata goes to `path` + ".meta.json".
    void save(const std::filesystem::path& path) const;
    static KnowledgeBase load(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder);

    /// Number of retrieve() calls so far.
    std::size_t query_count() const noexcept { return queries_.load(); }

    bool same_documents(const KnowledgeBase& other) const;

private:
    std::shared_ptr<const Embedder> embedder_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, KBDocument> docs_;
    mutable std::atomic<std::size_t> queries_{0};
};

struct BuildReport {
    std::vector<std::string> fallbacks; ///< units indexed under a docstring or signature
};

/// One document per function and subject class. Units without a summary fall back
/// to their docstring, then to their signature (flagged in the document and report).
KnowledgeBase build_kb(const ProjectIndex& index, const std::map<std::string, std::string>& summaries,
                       std::shared_ptr<const Embedder> embedder, BuildReport* report = nullptr);

std::string document_id(DocKind kind, std::string_view key, std::string_view source);

/// Text fed to the embedder for a document: the summary plus the unit name.
std::string embedding_text(const KBDocument& doc);

/// LLM pass that filters, deduplicates and merges retrieved documents for `query`.
ContextBundle consolidate(llm::LlmClient& llm, const std::string& query, const std::vector<KBDocument>& docs,
                          const std::vector<RetrievedDoc>& ranking = {});

} // namespace typeforge
