// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/call_graph.hpp"
#include "typeforge/code_index.hpp"
#include "typeforge/knowledge_base.hpp"
#include "typeforge/llm.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace typeforge {

/// Duck-test feature of one parameter: bare-use operation tags plus accessed members.
struct ParamFeature {
    std::string param;
    std::set<std::string> operations; ///< arithmetic, string-concat, subscript, iteration, comparison, boolean-context, callable
    std::set<std::string> field_accesses;
    std::set<std::string> method_invocations;

    bool empty() const noexcept
    {
        return operations.empty() && field_accesses.empty() && method_invocations.empty();
    }
    friend bool operator==(const ParamFeature&, const ParamFeature&) = default;
};

enum class HypothesisKind { Primitive, Annotated, UserDefined, Unknown };
enum class Confidence { InstanceBacked, AnnotationBacked, FeatureBacked, Guessed };
enum class PlanSource { CallInstance, Annotation, FeatureRetrieval, Primitive };

std::string_view to_string(HypothesisKind kind) noexcept;
std::string_view to_string(Confidence confidence) noexcept;
std::string_view to_string(PlanSource source) noexcept;

struct TypeHypothesis {
    HypothesisKind kind = HypothesisKind::Unknown;
    std::string name;
    Confidence confidence = Confidence::Guessed;
    std::vector<std::string> evidence;
};

struct ArgumentPlan {
    std::string param;
    TypeHypothesis hypothesis;
    std::string construction_context;
    PlanSource source = PlanSource::Primitive;
    std::string query;                    ///< duck-test query, feature path only
    std::vector<std::string> diagnostics; ///< non-fatal failures met while resolving
};

nlohmann::json to_json(const ParamFeature& feature);
nlohmann::json to_json(const ArgumentPlan& plan);

/// Prompt-ready text for one plan.
std::string render_plan(const ArgumentPlan& plan);

struct ResolverOptions {
    std::size_t retrieval_k = kDefaultRetrievalK;
    double lambda = kDefaultLambda;
    std::size_t instance_cap = kDefaultInstanceCap;
    int max_constructor_depth = 3;
};

bool is_primitive_type(std::string_view name) noexcept;

/// Throws UnknownParameter when `param` is not a non-receiver parameter of `f`.
ParamFeature extract_features(const ProjectIndex& index, const std::string& f, const std::string& param);

/// Subject classes whose fields and methods include the accessed ones; smallest surface first, then by name.
std::vector<std::string> candidate_classes(const ProjectIndex& index, const ParamFeature& feature);

/// "What is the type of X, which has a M method and attributes A and B?"
std::string feature_query(const ParamFeature& feature);

/// Value of the first `TAG:` line in an LLM reply.
std::optional<std::string> tagged_line(std::string_view text, std::string_view tag);

TypeHypothesis infer_type(llm::LlmClient& llm, const ProjectIndex& index, const CodeUnit& f, const std::string& param,
                          const std::vector<CallInstance>& instances);

/// Import statement and constructor source of `cls`, followed by the constructors of
/// classes its constructor needs, up to `max_depth` levels.
std::string constructor_context(const ProjectIndex& index, const std::string& cls, int max_depth = 3);

/// Throws NoCandidates when retrieval yields no class document.
ArgumentPlan retrieve_by_feature(llm::LlmClient& llm, const KnowledgeBase& kb, const ProjectIndex& index,
                                 const CodeUnit& f, const std::string& param, const ParamFeature& feature,
                                 const ResolverOptions& options = {});

std::vector<ArgumentPlan> resolve_parameters(llm::LlmClient& llm, const KnowledgeBase& kb, const ProjectIndex& index,
                                             const CallGraph& cg, const std::string& f,
                                             const ResolverOptions& options = {});

} // namespace typeforge
