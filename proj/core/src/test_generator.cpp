// SPDX-License-Identifier: Apache-2.0
#include "typeforge/test_generator.hpp"

#include "typeforge/error.hpp"
#include "typeforge/prompts.hpp"
#include "typeforge/util.hpp"

#include <algorithm>
#include <cctype>

namespace typeforge {

std::string_view to_string(SectionKind kind) noexcept
{
    switch (kind) {
    case SectionKind::Focal: return "focal";
    case SectionKind::ArgumentPlans: return "argument_plans";
    case SectionKind::Behavior: return "behavior";
    case SectionKind::Semantics: return "semantics";
    case SectionKind::Examples: return "examples";
    }
    return "focal";
}

std::string Prompt::user_text() const
{
    std::vector<std::string> parts;
    for (const auto& s : sections) {
        parts.push_back(s.text);
    }
    return render_template(prompts::get("generate_test").user, {{"sections", join(parts, "\n\n")}});
}

bool Prompt::has(SectionKind kind) const noexcept
{
    return std::any_of(sections.begin(), sections.end(), [&](const PromptSection& s) { return s.kind == kind; });
}

Prompt fit_to_budget(std::string system, std::vector<PromptSection> sections, std::size_t budget,
                     const llm::TokenCounter& counter)
{
    std::stable_sort(sections.begin(), sections.end(), [](const PromptSection& a, const PromptSection& b) {
        return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    });
    Prompt p;
    p.system = std::move(system);
    p.budget = budget;
    p.sections = std::move(sections);
    auto estimate = [&] { return counter.count(p.system) + counter.count(p.user_text()); };
    p.token_estimate = estimate();
    while (p.token_estimate > budget && !p.sections.empty() && p.sections.back().kind != SectionKind::Focal) {
        p.dropped.push_back(p.sections.back().kind);
        p.sections.pop_back();
        p.token_estimate = estimate();
    }
    if (p.token_estimate > budget) {
        throw Error(ErrorCode::BudgetTooSmall, "prompt needs " + std::to_string(p.token_estimate) +
                                                   " tokens for the system text and focal source; budget is " +
                                                   std::to_string(budget));
    }
    return p;
}

Prompt assemble_prompt(const PromptInputs& in, std::size_t budget, const llm::TokenCounter& counter)
{
    std::vector<PromptSection> sections;
    sections.push_back({SectionKind::Focal, "Focal function " + in.focal_name + ":\n```python\n" + in.focal_source +
                                                "\n```\nImport it with:\n```python\n" + in.import_statement +
                                                "\n```"});
    if (!in.plans.empty()) {
        std::vector<std::string> rendered;
        for (const auto& p : in.plans) {
            rendered.push_back(render_plan(p));
        }
        sections.push_back({SectionKind::ArgumentPlans, "Argument construction:\n" + join(rendered, "\n\n")});
    }
    if (!trim(in.behavior).empty()) {
        sections.push_back({SectionKind::Behavior, "Behavior of the focal function:\n" + in.behavior});
    }
    if (!trim(in.semantics).empty()) {
        sections.push_back({SectionKind::Semantics, "Purpose in the project:\n" + in.semantics});
    }
    if (!in.examples.empty()) {
        std::string text = "Passing tests from this project:";
        for (const auto& e : in.examples) {
            text += "\n```python\n" + trim(e) + "\n```";
        }
        sections.push_back({SectionKind::Examples, text});
    }
    const auto& tmpl = prompts::get("generate_test");
    return fit_to_budget(tmpl.system, std::move(sections), budget, counter);
}

std::optional<std::string> extract_code(std::string_view reply)
{
    std::optional<std::string> any;
    std::size_t pos = 0;
    while ((pos = reply.find("```", pos)) != std::string_view::npos) {
        const auto eol = reply.find('\n', pos);
        if (eol == std::string_view::npos) {
            break;
        }
        const auto lang = trim(reply.substr(pos + 3, eol - pos - 3));
        const auto close = reply.find("```", eol + 1);
        if (close == std::string_view::npos) {
            break;
        }
        auto body = std::string(reply.substr(eol + 1, close - eol - 1));
        while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) {
            body.pop_back();
        }
        if (!trim(body).empty()) {
            if (lang == "python" || lang == "py" || lang == "python3") {
                return body;
            }
            if (!any) {
                any = body;
            }
        }
        pos = close + 3;
    }
    return any;
}

namespace {

std::string sanitize(const std::string& name)
{
    std::string out;
    for (const char c : name) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

std::string header(const std::string& focal, int round)
{
    return "# Generated test for " + focal + " (round " + std::to_string(round) + ")\n";
}

std::string with_header(const std::string& focal, int round, const std::string& code)
{
    auto body = code;
    const auto h = header(focal, round);
    if (starts_with(body, h)) {
        body = body.substr(h.size());
    }
    return h + body + "\n";
}

std::optional<std::string> ask_for_code(llm::LlmClient& llm, const std::string& system, const std::string& user,
                                        const std::string& focal)
{
    const auto reply = llm.chat(system, user);
    if (auto code = extract_code(reply)) {
        return code;
    }
    const auto reask = prompts::render("reask_code", {{"focal", focal}, {"previous", trim(reply)}});
    return extract_code(llm.chat(reask.system, reask.user));
}

bool llm_recoverable(ErrorCode code)
{
    return code == ErrorCode::LlmFailure || code == ErrorCode::RateLimited || code == ErrorCode::Timeout ||
           code == ErrorCode::MalformedResponse;
}

std::string first_nonblank(std::string_view text)
{
    for (const auto& l : split_lines(text)) {
        auto t = trim(l);
        if (!t.empty()) {
            return t;
        }
    }
    return {};
}

} // namespace

std::string test_id_for(const std::string& focal, int round)
{
    return sanitize(focal) + "_r" + std::to_string(round);
}

std::string test_file_name(const std::string& focal, int round)
{
    return "test_" + test_id_for(focal, round) + ".py";
}

GeneratedTest generate_test(llm::LlmClient& llm, const Prompt& prompt, const CodeUnit& focal, int round)
{
    const auto code = ask_for_code(llm, prompt.system, prompt.user_text(), focal.qualified_name);
    if (!code) {
        throw Error(ErrorCode::NoCodeInResponse, "no python code block in the reply for " + focal.qualified_name);
    }
    GeneratedTest t;
    t.test_id = test_id_for(focal.qualified_name, round);
    t.focal = focal.qualified_name;
    t.module_path = focal.module_path;
    t.round = round;
    t.status = TestStatus::Fresh;
    t.file_name = test_file_name(focal.qualified_name, round);
    t.source = with_header(focal.qualified_name, round, *code);
    return t;
}

bool is_assertion_failure(const ExecutionResult& result) noexcept
{
    return result.status == ExecStatus::Fail && contains(result.error_report, "AssertionError");
}

RepairOutcome repair_test(llm::LlmClient& llm, const KnowledgeBase& kb, TestExecutor& executor, GeneratedTest test,
                          const ExecutionResult& failure, std::size_t retrieval_k, double lambda)
{
    RepairOutcome out;
    test.status = TestStatus::Repairing;
    auto run = [&](const std::string& source) {
        return executor.execute({test.test_id, test.file_name, source, {test.module_path}});
    };

    const auto stage1 = prompts::render("repair_error",
                                        {{"focal", test.focal}, {"test", test.source}, {"error", failure.error_report}});
    test.history.push_back({1, "error-report", failure.error_report});
    std::string candidate = test.source;
    if (auto code = ask_for_code(llm, stage1.system, stage1.user, test.focal)) {
        candidate = with_header(test.focal, test.round, *code);
    }
    auto result = run(candidate);
    test.source = candidate;
    if (result.status == ExecStatus::Pass) {
        test.status = TestStatus::Passing;
        out.test = std::move(test);
        out.last = std::move(result);
        return out;
    }
    if (is_assertion_failure(result)) {
        test.status = TestStatus::Discarded;
        out.test = std::move(test);
        out.last = std::move(result);
        return out;
    }

    const auto analysis_prompt = prompts::render(
        "repair_analysis", {{"focal", test.focal}, {"test", test.source}, {"error", result.error_report}});
    const auto analysis = trim(llm.chat(analysis_prompt.system, analysis_prompt.user));
    out.query = tagged_line(analysis, "QUERY").value_or(first_nonblank(result.error_report));
    if (out.query.empty()) {
        out.query = test.focal;
    }

    std::string context;
    const auto ranking = kb.retrieve(out.query, retrieval_k, lambda);
    if (!ranking.empty()) {
        std::vector<KBDocument> docs;
        for (const auto& r : ranking) {
            docs.push_back(*kb.find(r.doc_id));
        }
        ContextBundle bundle;
        try {
            bundle = consolidate(llm, out.query, docs, ranking);
        } catch (const Error& e) {
            if (!llm_recoverable(e.code())) {
                throw;
            }
            for (const auto& d : docs) {
                bundle.selected.push_back(d.doc_id);
            }
        }
        std::vector<std::string> facts;
        for (const auto& d : docs) {
            if (std::find(bundle.selected.begin(), bundle.selected.end(), d.doc_id) == bundle.selected.end() ||
                d.doc_kind == DocKind::TestCase) {
                continue;
            }
            const auto top = d.source_code.name.substr(0, d.source_code.name.find('.'));
            facts.push_back(d.source_code.name + ": module path " + d.source_code.module_path + "; import with `from " +
                            d.source_code.module_path + " import " + top + "`");
        }
        context = join(facts, "\n");
        if (!bundle.consolidated.empty()) {
            context += (context.empty() ? "" : "\n\n") + bundle.consolidated;
        }
    }
    if (context.empty()) {
        context = "(no matching project documents)";
    }

    const auto stage2 = prompts::render("repair_retrieval", {{"focal", test.focal},
                                                             {"test", test.source},
                                                             {"error", result.error_report},
                                                             {"analysis", analysis},
                                                             {"context", context}});
    test.history.push_back({2, "retrieval", result.error_report});
    if (auto code = ask_for_code(llm, stage2.system, stage2.user, test.focal)) {
        candidate = with_header(test.focal, test.round, *code);
    }
    result = run(candidate);
    test.source = candidate;
    test.status = result.status == ExecStatus::Pass ? TestStatus::Passing : TestStatus::Discarded;
    out.test = std::move(test);
    out.last = std::move(result);
    return out;
}

nlohmann::json IterationReport::to_json() const
{
    nlohmann::json modules = nlohmann::json::object();
    for (const auto& [m, mc] : per_module) {
        modules[m] = {{"file", mc.file},
                      {"statement_pct", mc.coverage.statement_pct()},
                      {"branch_pct", mc.coverage.branch_pct()},
                      {"covered_lines", mc.coverage.covered_lines},
                      {"missing_lines", mc.coverage.missing_lines}};
    }
    nlohmann::json newly = nlohmann::json::object();
    for (const auto& [m, lines] : newly_covered_lines) {
        newly[m] = lines;
    }
    return {{"round", round},
            {"per_module", modules},
            {"tests_added", tests_added},
            {"tests_discarded", tests_discarded},
            {"newly_covered_lines", newly},
            {"skipped", skipped},
            {"failures", failures}};
}

struct TestGenerator::Outcome {
    std::string focal;
    std::optional<GeneratedTest> test;
    ExecutionResult execution;
    std::string prompt;
    std::string failure;
};

TestGenerator::TestGenerator(const ProjectIndex& index, const CallGraph& cg, KnowledgeBase& kb, llm::LlmClient& llm,
                             TestExecutor& executor, const ProjectSummaries& summaries, GenerationOptions options)
    : index_(index),
      cg_(cg),
      kb_(kb),
      llm_(llm),
      executor_(executor),
      summaries_(summaries),
      options_(std::move(options)),
      counter_(options_.token_calibration)
{
    if (options_.max_rounds < 1) {
        throw Error(ErrorCode::ConfigError, "rounds must be at least 1");
    }
}

std::vector<std::string> TestGenerator::focal_functions() const
{
    std::vector<std::string> out;
    for (const auto* u : index_.callables()) {
        if (is_test_file(u->file)) {
            continue;
        }
        bool nested = false;
        for (auto parent = u->parent; !parent.empty();) {
            const auto* p = index_.find(parent);
            if (p == nullptr || p->kind != UnitKind::SubjectClass) {
                nested = true;
                break;
            }
            parent = p->parent;
        }
        if (nested) {
            continue;
        }
        if (!options_.targets.empty()) {
            const auto& q = u->qualified_name;
            const bool wanted = std::any_of(options_.targets.begin(), options_.targets.end(), [&](const auto& t) {
                return q == t || u->module_path == t || starts_with(q, t + ".");
            });
            if (!wanted) {
                continue;
            }
        }
        out.push_back(u->qualified_name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

const std::vector<ArgumentPlan>& TestGenerator::plans_for(const CodeUnit& unit)
{
    {
        std::lock_guard lock(plans_mutex_);
        const auto it = plans_.find(unit.qualified_name);
        if (it != plans_.end()) {
            return it->second;
        }
    }
    auto plans = resolve_parameters(llm_, kb_, index_, cg_, unit.qualified_name, options_.resolver);
    std::lock_guard lock(plans_mutex_);
    return plans_.emplace(unit.qualified_name, std::move(plans)).first->second;
}

TestGenerator::Outcome TestGenerator::process(const std::string& focal)
{
    Outcome o;
    o.focal = focal;
    std::string stage = "resolve";
    try {
        const auto& unit = index_.at(focal);
        const auto& plans = plans_for(unit);

        stage = "prompt";
        PromptInputs in;
        in.focal_name = focal;
        in.focal_source = round_ > 1 ? annotate_uncovered(unit, cumulative_) : unit.source;
        in.import_statement = resolve_module_path(unit, index_);
        in.plans = plans;
        if (const auto it = summaries_.functions.find(focal); it != summaries_.functions.end()) {
            in.behavior = it->second.behavior;
            in.semantics = it->second.semantics == it->second.behavior ? std::string() : it->second.semantics;
        }
        if (options_.example_count > 0) {
            const auto query = "Tests for " + unit.local_name + ". " + in.behavior;
            for (const auto& r : kb_.retrieve(query, options_.example_count, options_.resolver.lambda,
                                              [](const KBDocument& d) { return d.doc_kind == DocKind::TestCase; })) {
                const auto doc = kb_.find(r.doc_id);
                if (doc && doc->test_cases) {
                    in.examples.push_back(doc->test_cases->source_code);
                }
            }
        }
        const auto prompt = assemble_prompt(in, options_.budget, counter_);
        o.prompt = prompt.user_text();

        stage = "generate";
        auto test = generate_test(llm_, prompt, unit, round_);

        stage = "execute";
        auto result = executor_.execute({test.test_id, test.file_name, test.source, {unit.module_path}});
        if (result.status == ExecStatus::Pass) {
            test.status = TestStatus::Passing;
        } else {
            stage = "repair";
            test.status = TestStatus::Failing;
            auto repaired = repair_test(llm_, kb_, executor_, std::move(test), result, options_.resolver.retrieval_k,
                                        options_.resolver.lambda);
            test = std::move(repaired.test);
            result = std::move(repaired.last);
        }
        o.test = std::move(test);
        o.execution = std::move(result);
    } catch (const Error& e) {
        o.failure = stage + ": " + e.what();
    }
    return o;
}

IterationReport TestGenerator::run_iteration()
{
    if (round_ >= options_.max_rounds) {
        throw Error(ErrorCode::PreconditionFailed, "all " + std::to_string(options_.max_rounds) + " rounds are done");
    }
    ++round_;
    IterationReport report;
    report.round = round_;

    std::vector<std::string> todo;
    for (const auto& f : focal_functions()) {
        const auto& unit = index_.at(f);
        if (round_ > 1 && cumulative_.per_file.count(unit.file) != 0 && uncovered_lines(unit, cumulative_).empty()) {
            report.skipped.push_back(f);
            continue;
        }
        todo.push_back(f);
    }

    std::vector<Outcome> outcomes(todo.size());
    parallel_for(todo.size(), options_.parallelism, [&](std::size_t i) { outcomes[i] = process(todo[i]); });

    const auto previous = cumulative_;
    std::vector<CoverageReport> fresh{cumulative_};
    for (auto& o : outcomes) {
        if (!o.prompt.empty()) {
            report.prompts[o.focal] = o.prompt;
        }
        if (!o.failure.empty()) {
            report.failures[o.focal] = o.failure;
        }
        if (!o.test) {
            continue;
        }
        auto& t = *o.test;
        if (t.status == TestStatus::Passing) {
            kb_.add_test_case(t);
            fresh.push_back(report_from(o.execution));
            manifest_.push_back({t.test_id, t.focal, t.round, t.status, t.file_name});
            suite_.push_back(t);
            ++report.tests_added;
        } else {
            t.status = TestStatus::Discarded;
            manifest_.push_back({t.test_id, t.focal, t.round, t.status, std::nullopt});
            ++report.tests_discarded;
        }
    }
    cumulative_ = merge_coverage(fresh);

    std::set<std::string> modules;
    for (const auto& f : focal_functions()) {
        modules.insert(index_.at(f).module_path);
    }
    for (const auto& m : modules) {
        const auto* file = index_.file_for_module(m);
        if (file == nullptr) {
            continue;
        }
        ModuleCoverage mc{m, file->path, {}};
        if (const auto it = cumulative_.per_file.find(file->path); it != cumulative_.per_file.end()) {
            mc.coverage = it->second;
        }
        std::set<int> before;
        if (const auto it = previous.per_file.find(file->path); it != previous.per_file.end()) {
            before = it->second.covered_lines;
        }
        std::set<int> gained;
        std::set_difference(mc.coverage.covered_lines.begin(), mc.coverage.covered_lines.end(), before.begin(),
                            before.end(), std::inserter(gained, gained.end()));
        report.newly_covered_lines[m] = std::move(gained);
        report.per_module[m] = std::move(mc);
    }
    reports_.push_back(report);
    return report;
}

std::vector<IterationReport> TestGenerator::run()
{
    std::vector<IterationReport> out;
    while (round_ < options_.max_rounds) {
        out.push_back(run_iteration());
        bool remaining = false;
        for (const auto& f : focal_functions()) {
            const auto& unit = index_.at(f);
            if (cumulative_.per_file.count(unit.file) == 0 || !uncovered_lines(unit, cumulative_).empty()) {
                remaining = true;
                break;
            }
        }
        if (!remaining) {
            break;
        }
    }
    return out;
}

nlohmann::json TestGenerator::manifest_json() const
{
    auto entries = manifest_;
    std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        return std::tie(a.round, a.focal, a.test_id) < std::tie(b.round, b.focal, b.test_id);
    });
    auto tests = nlohmann::json::array();
    for (const auto& e : entries) {
        tests.push_back({{"test_id", e.test_id},
                         {"focal", e.focal},
                         {"round", e.round},
                         {"status", std::string(to_string(e.status))},
                         {"file", e.file ? nlohmann::json(*e.file) : nlohmann::json(nullptr)}});
    }
    return {{"tests", tests}};
}

void TestGenerator::write_suite(const std::filesystem::path& test_root) const
{
    std::filesystem::create_directories(test_root);
    for (const auto& t : suite_) {
        write_file_atomic(test_root / t.file_name, t.source);
    }
    write_file_atomic(test_root / "manifest.json", manifest_json().dump(2) + "\n");
}

} // namespace typeforge
