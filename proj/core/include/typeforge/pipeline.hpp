// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/config.hpp"
#include "typeforge/embedding.hpp"
#include "typeforge/executor.hpp"
#include "typeforge/knowledge_base.hpp"
#include "typeforge/llm.hpp"
#include "typeforge/summarizer.hpp"
#include "typeforge/test_generator.hpp"
#include "typeforge/type_resolver.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace typeforge {

/// An Error annotated with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, ErrorCode code, const std::string& message)
        : Error(code, "stage " + stage + ": " + message), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct GenerateResult {
    std::vector<IterationReport> rounds;
    CoverageReport coverage;
    nlohmann::json report;
    nlohmann::json manifest;
};

/// One pipeline run over a resolved configuration. Stages are computed lazily and cached;
/// artifacts go under `config.out_dir`.
class Session {
public:
    /// `backend` and `executor` replace the ones derived from the configuration when given.
    explicit Session(RunConfig config, std::shared_ptr<llm::ChatBackend> backend = nullptr,
                     std::shared_ptr<TestExecutor> executor = nullptr);
    ~Session();

    const RunConfig& config() const noexcept { return config_; }

    const ProjectIndex& index();
    const CallGraph& graph();
    const ProjectSummaries& summaries();
    KnowledgeBase& kb();
    llm::LlmClient& llm();
    TestExecutor& executor();

    std::vector<ArgumentPlan> resolve(const std::string& function);

    /// Full loop: index, graph, summaries, knowledge base, generation rounds, report.
    GenerateResult generate();

    /// Persists the cassette in record mode.
    void flush();

private:
    template <typename F>
    auto stage(const std::string& name, F&& fn) -> decltype(fn());

    RunConfig config_;
    std::shared_ptr<llm::ChatBackend> backend_;
    std::shared_ptr<llm::RecordingBackend> recorder_;
    std::unique_ptr<llm::LlmClient> llm_;
    std::shared_ptr<TestExecutor> executor_;
    std::shared_ptr<const Embedder> embedder_;
    std::optional<ProjectIndex> index_;
    std::optional<CallGraph> graph_;
    std::optional<ProjectSummaries> summaries_;
    std::optional<KnowledgeBase> kb_;
};

/// Final report: per focal module statement/branch percentages and kept/discarded counts.
nlohmann::json build_report(const ProjectIndex& index, const TestGenerator& generator);

/// Fixed-width table of a report produced by build_report.
std::string report_table(const nlohmann::json& report);

/// Chat backend for a configuration: replay, scripted responder, HTTP, or recording around one of those.
std::shared_ptr<llm::ChatBackend> make_backend(const RunConfig& config);

} // namespace typeforge
