// SPDX-License-Identifier: Apache-2.0
#include "typeforge/pipeline.hpp"

#include "typeforge/coverage.hpp"
#include "typeforge/util.hpp"

#include <cstdio>
#include <cstdlib>

namespace typeforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::chrono::milliseconds seconds(double s)
{
    return std::chrono::milliseconds(static_cast<long long>(s * 1000.0 + 0.5));
}

std::string api_key()
{
    const char* key = std::getenv(kApiKeyEnv);
    return key == nullptr ? std::string() : std::string(key);
}

std::shared_ptr<llm::ChatBackend> live_backend(const RunConfig& c)
{
    if (!c.llm.responder.empty()) {
        return std::make_shared<llm::ScriptedBackend>(llm::ScriptedBackend::load(c.llm.responder));
    }
    if (c.llm.endpoint.empty()) {
        throw Error(ErrorCode::ConfigError,
                    "llm.endpoint: required in " + std::string(to_string(c.mode)) + " mode (or set llm.responder)");
    }
    return std::make_shared<llm::HttpChatBackend>(
        llm::HttpEndpoint{c.llm.endpoint, api_key(), seconds(c.llm.timeout_s)}, llm::make_default_transport());
}

} // namespace

std::shared_ptr<llm::ChatBackend> make_backend(const RunConfig& c)
{
    switch (c.mode) {
    case LlmMode::Replay: return std::make_shared<llm::ReplayBackend>(llm::Cassette::load(c.cassette_path));
    case LlmMode::Record:
        return std::make_shared<llm::RecordingBackend>(live_backend(c), c.cassette_path, c.llm.model);
    case LlmMode::Live: break;
    }
    return live_backend(c);
}

template <typename F>
auto Session::stage(const std::string& name, F&& fn) -> decltype(fn())
{
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.code(), std::string(e.message()));
    } catch (const std::exception& e) {
        throw StageError(name, ErrorCode::IoError, e.what());
    }
}

Session::Session(RunConfig config, std::shared_ptr<llm::ChatBackend> backend, std::shared_ptr<TestExecutor> executor)
    : config_(std::move(config)), backend_(std::move(backend)), executor_(std::move(executor))
{
    stage("setup", [&] {
        if (config_.retrieval.embedder_endpoint.empty()) {
            embedder_ = std::make_shared<HashedEmbedder>(config_.retrieval.dimension);
        } else {
            embedder_ = std::make_shared<HttpEmbedder>(
                llm::HttpEndpoint{config_.retrieval.embedder_endpoint, api_key(), seconds(config_.llm.timeout_s)},
                llm::make_default_transport(), config_.retrieval.dimension);
        }
        fs::create_directories(config_.out_dir);
        return 0;
    });
}

Session::~Session()
{
    try {
        flush();
    } catch (...) {
    }
}

void Session::flush()
{
    if (recorder_) {
        recorder_->flush();
    }
}

llm::LlmClient& Session::llm()
{
    if (!llm_) {
        stage("llm", [&] {
            if (!backend_) {
                backend_ = make_backend(config_);
            }
            recorder_ = std::dynamic_pointer_cast<llm::RecordingBackend>(backend_);
            llm::GatewayOptions opts;
            opts.model = config_.llm.model;
            opts.temperature = config_.llm.temperature;
            opts.max_retries = config_.llm.max_retries;
            opts.max_in_flight = config_.llm.max_in_flight;
            opts.requests_per_minute = config_.llm.requests_per_minute;
            llm_ = std::make_unique<llm::LlmClient>(backend_, opts);
            return 0;
        });
    }
    return *llm_;
}

const ProjectIndex& Session::index()
{
    if (!index_) {
        index_ = stage("index", [&] {
            auto idx = index_project(config_.project_root);
            write_file_atomic(config_.out_dir / "index.json", idx.to_json().dump(2) + "\n");
            return idx;
        });
    }
    return *index_;
}

const CallGraph& Session::graph()
{
    if (!graph_) {
        const auto& idx = index();
        graph_ = stage("graph", [&] {
            auto cg = build_call_graph(idx);
            write_file_atomic(config_.out_dir / "graph.json", cg.to_json().dump(2) + "\n");
            return cg;
        });
    }
    return *graph_;
}

const ProjectSummaries& Session::summaries()
{
    if (!summaries_) {
        const auto& idx = index();
        const auto& cg = graph();
        auto& client = llm();
        summaries_ = stage("summarize", [&] {
            DigestCache cache;
            const auto cache_path = config_.out_dir / "digests.json";
            if (fs::exists(cache_path)) {
                cache.merge_json(json::parse(read_file(cache_path)));
            }
            SummarizerOptions opts;
            opts.max_words = config_.summary_words;
            opts.parallelism = config_.sandbox.parallelism;
            auto s = summarize_project(client, idx, cg, opts, &cache);
            write_file_atomic(cache_path, cache.to_json().dump(2) + "\n");
            write_file_atomic(config_.out_dir / "summaries.json", s.to_json().dump(2) + "\n");
            return s;
        });
    }
    return *summaries_;
}

KnowledgeBase& Session::kb()
{
    if (!kb_) {
        const auto& idx = index();
        const auto& s = summaries();
        kb_.emplace(stage("knowledge-base", [&] {
            BuildReport report;
            auto kb = build_kb(idx, s.index_summaries(), embedder_, &report);
            kb.save(config_.out_dir / "kb.jsonl");
            return kb;
        }));
    }
    return *kb_;
}

TestExecutor& Session::executor()
{
    if (!executor_) {
        const auto snap = snapshot_id(index());
        executor_ = stage("sandbox", [&]() -> std::shared_ptr<TestExecutor> {
            if (!config_.sandbox.executions.empty()) {
                return ScriptedExecutor::load(config_.sandbox.executions, snap);
            }
            SandboxConfig sc;
            sc.project_root = config_.project_root;
            sc.runner_command = config_.sandbox.runner;
            sc.timeout = seconds(config_.sandbox.timeout_s);
            sc.keep_workdirs = config_.sandbox.keep_workdirs;
            sc.snapshot_id = snap;
            return std::make_shared<SubprocessExecutor>(sc);
        });
    }
    return *executor_;
}

std::vector<ArgumentPlan> Session::resolve(const std::string& function)
{
    auto& store = kb();
    const auto& idx = index();
    const auto& cg = graph();
    auto& client = llm();
    return stage("resolve", [&] {
        ResolverOptions opts;
        opts.retrieval_k = config_.retrieval.k;
        opts.lambda = config_.retrieval.lambda;
        return resolve_parameters(client, store, idx, cg, idx.at(function).qualified_name, opts);
    });
}

json build_report(const ProjectIndex& index, const TestGenerator& generator)
{
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& e : generator.manifest()) {
        const auto* unit = index.find(e.focal);
        if (unit == nullptr) {
            continue;
        }
        auto& c = counts[unit->module_path];
        (e.status == TestStatus::Passing ? c.first : c.second) += 1;
    }
    std::set<std::string> modules;
    for (const auto& f : generator.focal_functions()) {
        modules.insert(index.at(f).module_path);
    }
    json per_module = json::object();
    std::set<std::string> files;
    for (const auto& m : modules) {
        const auto* file = index.file_for_module(m);
        if (file == nullptr) {
            continue;
        }
        files.insert(file->path);
        FileCoverage fc;
        bool measured = false;
        if (const auto it = generator.cumulative().per_file.find(file->path);
            it != generator.cumulative().per_file.end()) {
            fc = it->second;
            measured = true;
        }
        per_module[m] = {{"file", file->path},
                         {"measured", measured},
                         {"statement_pct", measured ? fc.statement_pct() : 0.0},
                         {"branch_pct", measured ? fc.branch_pct() : 0.0},
                         {"covered_lines", fc.covered_lines},
                         {"missing_lines", fc.missing_lines},
                         {"tests_kept", counts[m].first},
                         {"tests_discarded", counts[m].second}};
    }
    const auto focal_cov = restrict_to(generator.cumulative(), files);
    auto rounds = json::array();
    for (const auto& r : generator.reports()) {
        auto j = r.to_json();
        j.erase("per_module");
        json pct = json::object();
        std::size_t covered = 0;
        std::size_t total = 0;
        for (const auto& [m, mc] : r.per_module) {
            pct[m] = mc.coverage.statement_pct();
            covered += mc.coverage.covered_lines.size();
            total += mc.coverage.covered_lines.size() + mc.coverage.missing_lines.size();
        }
        j["statement_pct"] = pct;
        j["cumulative_statement_pct"] =
            total == 0 ? 0.0 : 100.0 * static_cast<double>(covered) / static_cast<double>(total);
        rounds.push_back(std::move(j));
    }
    return {{"snapshot_id", generator.cumulative().snapshot_id},
            {"rounds_run", generator.round()},
            {"modules", per_module},
            {"statement_pct", focal_cov.per_file.empty() ? 0.0 : focal_cov.statement_pct()},
            {"branch_pct", focal_cov.per_file.empty() ? 0.0 : focal_cov.branch_pct()},
            {"rounds", rounds}};
}

std::string report_table(const json& report)
{
    std::string out;
    char line[512];
    std::size_t width = 6;
    for (const auto& [m, v] : report.at("modules").items()) {
        width = std::max(width, m.size());
    }
    std::snprintf(line, sizeof line, "%-*s  %7s  %7s  %5s  %9s\n", static_cast<int>(width), "module", "stmt %",
                  "branch %", "kept", "discarded");
    out += line;
    out += std::string(width + 39, '-') + "\n";
    for (const auto& [m, v] : report.at("modules").items()) {
        std::snprintf(line, sizeof line, "%-*s  %7.1f  %7.1f  %5zu  %9zu\n", static_cast<int>(width), m.c_str(),
                      v.at("statement_pct").get<double>(), v.at("branch_pct").get<double>(),
                      v.at("tests_kept").get<std::size_t>(), v.at("tests_discarded").get<std::size_t>());
        out += line;
    }
    std::snprintf(line, sizeof line, "%-*s  %7.1f  %7.1f\n", static_cast<int>(width), "total",
                  report.at("statement_pct").get<double>(), report.at("branch_pct").get<double>());
    out += line;
    return out;
}

GenerateResult Session::generate()
{
    const auto& idx = index();
    const auto& cg = graph();
    const auto& sums = summaries();
    auto& store = kb();
    auto& exec = executor();
    auto& client = llm();
    return stage("generate", [&] {
        GenerationOptions opts;
        opts.budget = config_.llm.budget_tokens;
        opts.max_rounds = config_.rounds;
        opts.parallelism = config_.sandbox.parallelism;
        opts.token_calibration = config_.llm.token_calibration;
        opts.resolver.retrieval_k = config_.retrieval.k;
        opts.resolver.lambda = config_.retrieval.lambda;
        opts.targets = config_.targets;
        TestGenerator gen(idx, cg, store, client, exec, sums, opts);
        if (gen.focal_functions().empty()) {
            throw Error(ErrorCode::PreconditionFailed, "no focal functions in scope");
        }
        GenerateResult result;
        result.rounds = gen.run();
        const auto rounds_dir = config_.out_dir / "rounds";
        fs::create_directories(rounds_dir);
        for (const auto& r : result.rounds) {
            auto j = r.to_json();
            j["prompts"] = r.prompts;
            write_file_atomic(rounds_dir / ("round-" + std::to_string(r.round) + ".json"), j.dump(2) + "\n");
        }
        gen.write_suite(config_.test_root);
        store.save(config_.out_dir / "kb.jsonl");
        result.coverage = gen.cumulative();
        result.manifest = gen.manifest_json();
        result.report = build_report(idx, gen);
        write_file_atomic(config_.out_dir / "coverage.json", result.coverage.to_json().dump(2) + "\n");
        write_file_atomic(config_.out_dir / "report.json", result.report.dump(2) + "\n");
        flush();
        return result;
    });
}

} // namespace typeforge
