// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/coverage.hpp"
#include "typeforge/executor.hpp"
#include "typeforge/generated_test.hpp"
#include "typeforge/knowledge_base.hpp"
#include "typeforge/llm.hpp"
#include "typeforge/summarizer.hpp"
#include "typeforge/type_resolver.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace typeforge {

/// Retention priority: lower numbers survive longer. The focal section is never dropped.
enum class SectionKind { Focal = 1, ArgumentPlans = 2, Behavior = 3, Semantics = 4, Examples = 5 };

std::string_view to_string(SectionKind kind) noexcept;

struct PromptSection {
    SectionKind kind;
    std::string text;
};

struct Prompt {
    std::string system;
    std::vector<PromptSection> sections; ///< retained sections in priority order
    std::vector<SectionKind> dropped;    ///< in drop order
    std::size_t token_estimate = 0;
    std::size_t budget = 0;

    std::string user_text() const;
    bool has(SectionKind kind) const noexcept;
};

inline constexpr std::size_t kDefaultBudget = 8000;

/// Drops whole sections, lowest priority first, until system + user text fit `budget`.
/// Throws BudgetTooSmall when the system text and the focal section alone exceed it.
Prompt fit_to_budget(std::string system, std::vector<PromptSection> sections, std::size_t budget,
                     const llm::TokenCounter& counter);

struct PromptInputs {
    std::string focal_name;
    std::string focal_source; ///< possibly carrying uncovered-line markers
    std::string import_statement;
    std::vector<ArgumentPlan> plans;
    std::string behavior;
    std::string semantics;
    std::vector<std::string> examples;
};

Prompt assemble_prompt(const PromptInputs& inputs, std::size_t budget = kDefaultBudget,
                       const llm::TokenCounter& counter = llm::TokenCounter{});

/// Body of the first fenced python block (or of the first fenced block of any language).
std::optional<std::string> extract_code(std::string_view reply);

std::string test_id_for(const std::string& focal, int round);
std::string test_file_name(const std::string& focal, int round);

/// Asks for a test; re-asks once when the reply has no code block. Throws NoCodeInResponse.
GeneratedTest generate_test(llm::LlmClient& llm, const Prompt& prompt, const CodeUnit& focal, int round);

bool is_assertion_failure(const ExecutionResult& result) noexcept;

struct RepairOutcome {
    GeneratedTest test;
    ExecutionResult last;
    std::string query; ///< stage-2 retrieval query, empty when stage 2 did not run
};

/// Stage 1 re-prompts with the error report only. An assertion failure after stage 1 is
/// discarded; any other failure goes to stage 2 (cause analysis, retrieval, one more attempt).
RepairOutcome repair_test(llm::LlmClient& llm, const KnowledgeBase& kb, TestExecutor& executor, GeneratedTest test,
                          const ExecutionResult& failure, std::size_t retrieval_k = kDefaultRetrievalK,
                          double lambda = kDefaultLambda);

struct GenerationOptions {
    std::size_t budget = kDefaultBudget;
    int max_rounds = 3;
    std::size_t parallelism = 1;
    std::size_t example_count = 2;
    double token_calibration = 1.0;
    ResolverOptions resolver;
    /// Qualified names or module paths; empty means every non-test callable.
    std::vector<std::string> targets;
};

struct ModuleCoverage {
    std::string module_path;
    std::string file;
    FileCoverage coverage;
};

struct IterationReport {
    int round = 0;
    std::map<std::string, ModuleCoverage> per_module;
    std::size_t tests_added = 0;
    std::size_t tests_discarded = 0;
    std::map<std::string, std::set<int>> newly_covered_lines;
    std::vector<std::string> skipped;               ///< focal functions already fully covered
    std::map<std::string, std::string> failures;    ///< focal -> stage and message
    std::map<std::string, std::string> prompts;     ///< focal -> user text of the generation prompt

    nlohmann::json to_json() const;
};

struct ManifestEntry {
    std::string test_id;
    std::string focal;
    int round = 0;
    TestStatus status = TestStatus::Fresh;
    std::optional<std::string> file;
};

class TestGenerator {
public:
    TestGenerator(const ProjectIndex& index, const CallGraph& cg, KnowledgeBase& kb, llm::LlmClient& llm,
                  TestExecutor& executor, const ProjectSummaries& summaries, GenerationOptions options = {});

    /// Focal functions in scope, sorted by qualified name.
    std::vector<std::string> focal_functions() const;

    IterationReport run_iteration();
    /// Runs rounds until `max_rounds` or until nothing is left to cover.
    std::vector<IterationReport> run();

    int round() const noexcept { return round_; }
    const CoverageReport& cumulative() const noexcept { return cumulative_; }
    const std::vector<GeneratedTest>& suite() const noexcept { return suite_; }
    const std::vector<ManifestEntry>& manifest() const noexcept { return manifest_; }
    const std::vector<IterationReport>& reports() const noexcept { return reports_; }

    nlohmann::json manifest_json() const;
    /// Writes passing tests under `test_root` and the manifest next to them.
    void write_suite(const std::filesystem::path& test_root) const;

private:
    struct Outcome;
    Outcome process(const std::string& focal);
    const std::vector<ArgumentPlan>& plans_for(const CodeUnit& unit);

    const ProjectIndex& index_;
    const CallGraph& cg_;
    KnowledgeBase& kb_;
    llm::LlmClient& llm_;
    TestExecutor& executor_;
    const ProjectSummaries& summaries_;
    GenerationOptions options_;
    llm::TokenCounter counter_;

    int round_ = 0;
    CoverageReport cumulative_;
    std::set<std::string> attempted_;
    std::vector<GeneratedTest> suite_;
    std::vector<ManifestEntry> manifest_;
    std::vector<IterationReport> reports_;
    std::mutex plans_mutex_;
    std::map<std::string, std::vector<ArgumentPlan>> plans_;
};

} // namespace typeforge
