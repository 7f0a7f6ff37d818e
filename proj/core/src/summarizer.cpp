// SPDX-License-Identifier: Apache-2.0
#include "typeforge/summarizer.hpp"

#include "typeforge/error.hpp"
#include "typeforge/prompts.hpp"
#include "typeforge/util.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

namespace typeforge {

nlohmann::json to_json(const FunctionSummary& s)
{
    return {{"name", s.name},
            {"behavior", s.behavior},
            {"semantics", s.semantics},
            {"index_summary", s.index_summary},
            {"sources", s.sources},
            {"failed", s.failed}};
}

FunctionSummary summary_from_json(const nlohmann::json& j)
{
    FunctionSummary s;
    s.name = j.at("name").get<std::string>();
    s.behavior = j.at("behavior").get<std::string>();
    s.semantics = j.at("semantics").get<std::string>();
    s.index_summary = j.at("index_summary").get<std::string>();
    s.sources = j.value("sources", std::vector<std::string>{});
    s.failed = j.value("failed", false);
    return s;
}

namespace {

std::string lower(std::string s)
{
    for (auto& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

std::optional<DocProxy> proxy_in(const std::filesystem::path& root, const std::filesystem::path& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        return std::nullopt;
    }
    auto first_match = [&](const fs::path& where, std::string_view prefix) -> std::optional<fs::path> {
        std::vector<fs::path> hits;
        std::error_code it_ec;
        for (fs::directory_iterator it(where, it_ec), end; !it_ec && it != end; it.increment(it_ec)) {
            if (it->is_regular_file(it_ec) && starts_with(lower(it->path().filename().string()), prefix)) {
                hits.push_back(it->path());
            }
        }
        if (hits.empty()) {
            return std::nullopt;
        }
        std::sort(hits.begin(), hits.end());
        return hits.front();
    };
    auto found = first_match(dir, "readme");
    if (!found && fs::is_directory(dir / "docs", ec)) {
        found = first_match(dir / "docs", "index");
    }
    if (!found) {
        return std::nullopt;
    }
    return DocProxy{fs::relative(*found, root).generic_string(), read_file(*found)};
}

std::string first_line(std::string_view text)
{
    for (const auto& l : split_lines(text)) {
        const auto t = trim(l);
        if (!t.empty()) {
            return t;
        }
    }
    return {};
}

bool recoverable(ErrorCode code)
{
    return code == ErrorCode::LlmFailure || code == ErrorCode::RateLimited || code == ErrorCode::Timeout ||
           code == ErrorCode::MalformedResponse || code == ErrorCode::CassetteMiss;
}

std::string fallback_digest(const CodeUnit& f)
{
    if (f.docstring) {
        const auto line = first_line(*f.docstring);
        if (!line.empty()) {
            return line;
        }
    }
    return f.signature();
}

/// Groups nodes into waves: a node's wave is one past the largest wave among `deps(node)`.
std::vector<std::vector<std::string>> waves(const std::vector<std::string>& order,
                                            const std::function<std::vector<std::string>(const std::string&)>& deps,
                                            const std::set<std::string>& members)
{
    std::map<std::string, int> level;
    int top = -1;
    for (const auto& n : order) {
        if (members.count(n) == 0) {
            continue;
        }
        int l = 0;
        for (const auto& d : deps(n)) {
            const auto it = level.find(d);
            if (it != level.end()) {
                l = std::max(l, it->second + 1);
            }
        }
        level[n] = l;
        top = std::max(top, l);
    }
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(top + 1));
    for (const auto& [n, l] : level) {
        out[static_cast<std::size_t>(l)].push_back(n);
    }
    return out;
}

} // namespace

std::optional<DocProxy> find_doc_proxy(const std::filesystem::path& root, const std::string& relative_file)
{
    namespace fs = std::filesystem;
    if (root.empty()) {
        return std::nullopt;
    }
    auto dir = (root / relative_file).parent_path();
    const auto stop = fs::weakly_canonical(root);
    for (int guard = 0; guard < 64; ++guard) {
        if (auto p = proxy_in(root, dir)) {
            return p;
        }
        if (fs::weakly_canonical(dir) == stop || !dir.has_parent_path() || dir.parent_path() == dir) {
            break;
        }
        dir = dir.parent_path();
    }
    return std::nullopt;
}

std::optional<std::string> DigestCache::get(const std::string& key) const
{
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    ++hits_;
    return it->second;
}

void DigestCache::put(const std::string& key, const std::string& value)
{
    std::lock_guard lock(mutex_);
    entries_[key] = value;
}

std::size_t DigestCache::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::size_t DigestCache::hits() const
{
    std::lock_guard lock(mutex_);
    return hits_;
}

nlohmann::json DigestCache::to_json() const
{
    std::lock_guard lock(mutex_);
    return entries_;
}

void DigestCache::merge_json(const nlohmann::json& j)
{
    auto loaded = j.get<std::map<std::string, std::string>>();
    std::lock_guard lock(mutex_);
    entries_.merge(loaded);
}

std::string DigestCache::key(std::string_view phase, std::string_view source, const std::vector<std::string>& inputs)
{
    std::string material(phase);
    material += "\n" + sha256_hex(source);
    for (const auto& in : inputs) {
        material += "\n" + sha256_hex(in);
    }
    return sha256_hex(material);
}

std::string analyze_behavior(llm::LlmClient& llm, const CodeUnit& f, const std::vector<CalleeDigest>& callees,
                             const SummarizerOptions& options, bool* fell_back)
{
    std::string listing;
    for (const auto& c : callees) {
        listing += "- " + c.name + ": " + c.text + "\n";
    }
    const auto prompt = prompts::render(f.kind == UnitKind::SubjectClass ? "summarize_class" : "summarize_behavior",
                                        {{"name", f.qualified_name},
                                         {"source", f.source},
                                         {"callees", listing.empty() ? std::string("(none)") : trim(listing)},
                                         {"max_words", std::to_string(options.max_words)}});
    try {
        const auto reply = truncate_words(trim(llm.chat(prompt.system, prompt.user)), options.max_words);
        if (!reply.empty()) {
            return reply;
        }
    } catch (const Error& e) {
        if (!recoverable(e.code())) {
            throw;
        }
    }
    if (fell_back != nullptr) {
        *fell_back = true;
    }
    return truncate_words(fallback_digest(f), options.max_words);
}

std::string infer_semantics(llm::LlmClient& llm, const CodeUnit& f, const std::string& behavior,
                            const std::vector<CallerMaterial>& callers, const std::optional<DocProxy>& doc_proxy,
                            const SummarizerOptions& options, bool* fell_back)
{
    std::string context;
    if (!callers.empty()) {
        for (const auto& c : callers) {
            context += "Caller " + c.name + ":\n```python\n" + c.source + "\n```\n";
            if (!c.semantics.empty()) {
                context += "Caller purpose: " + c.semantics + "\n";
            }
            context += "\n";
        }
    } else if (doc_proxy) {
        context = "Project documentation (" + doc_proxy->path + "):\n" + truncate_words(doc_proxy->text, 400);
    } else {
        return behavior;
    }
    const auto prompt = prompts::render("summarize_semantics", {{"name", f.qualified_name},
                                                                {"behavior", behavior},
                                                                {"context", trim(context)},
                                                                {"max_words", std::to_string(options.max_words)}});
    try {
        const auto reply = truncate_words(trim(llm.chat(prompt.system, prompt.user)), options.max_words);
        if (!reply.empty()) {
            return reply;
        }
    } catch (const Error& e) {
        if (!recoverable(e.code())) {
            throw;
        }
    }
    if (fell_back != nullptr) {
        *fell_back = true;
    }
    return behavior;
}

std::map<std::string, std::string> ProjectSummaries::index_summaries() const
{
    std::map<std::string, std::string> out;
    for (const auto& [n, s] : functions) {
        out[n] = s.index_summary;
    }
    for (const auto& [n, s] : classes) {
        out[n] = s.index_summary;
    }
    return out;
}

nlohmann::json ProjectSummaries::to_json() const
{
    nlohmann::json fns = nlohmann::json::object();
    for (const auto& [n, s] : functions) {
        fns[n] = typeforge::to_json(s);
    }
    nlohmann::json cls = nlohmann::json::object();
    for (const auto& [n, s] : classes) {
        cls[n] = typeforge::to_json(s);
    }
    return {{"functions", fns}, {"classes", cls}};
}

ProjectSummaries summarize_project(llm::LlmClient& llm, const ProjectIndex& index, const CallGraph& cg,
                                   const SummarizerOptions& options, DigestCache* cache)
{
    ProjectSummaries out;
    std::set<std::string> members;
    for (const auto& n : cg.nodes()) {
        const auto* u = index.find(n);
        if (u != nullptr && u->qualified_name == n && u->is_callable() && !is_test_file(u->file)) {
            members.insert(n);
            out.functions[n].name = n;
        }
    }
    std::mutex mutex;
    auto cached = [&](const std::string& key, const std::function<std::string(bool&)>& compute, bool& failed) {
        if (cache != nullptr) {
            if (auto hit = cache->get(key)) {
                return *hit;
            }
        }
        bool fell_back = false;
        auto text = compute(fell_back);
        if (fell_back) {
            failed = true;
        } else if (cache != nullptr) {
            cache->put(key, text);
        }
        return text;
    };

    const auto behavior_waves =
        waves(behavior_order(cg), [&](const std::string& n) { return cg.callees(n); }, members);
    for (std::size_t w = 0; w < behavior_waves.size(); ++w) {
        const auto& wave = behavior_waves[w];
        for (const auto& n : wave) {
            out.trace.push_back({"behavior", n, static_cast<int>(w)});
        }
        parallel_for(wave.size(), options.parallelism, [&](std::size_t i) {
            const auto& name = wave[i];
            const auto& unit = index.at(name);
            std::vector<CalleeDigest> callees;
            std::vector<std::string> notes;
            {
                std::lock_guard lock(mutex);
                for (const auto& c : cg.callees(name)) {
                    const auto it = out.functions.find(c);
                    if (it != out.functions.end()) {
                        callees.push_back({c, it->second.behavior, false});
                        notes.push_back("callee digest: " + c);
                    }
                }
            }
            for (const auto& c : cg.broken_callees(name)) {
                if (const auto* cu = index.find(c)) {
                    callees.push_back({c, cu->signature(), true});
                    notes.push_back("callee signature (broken edge): " + c);
                }
            }
            std::vector<std::string> inputs;
            for (const auto& c : callees) {
                inputs.push_back(c.name + "\n" + c.text);
            }
            bool failed = false;
            auto behavior = cached(
                DigestCache::key("behavior", unit.source, inputs),
                [&](bool& fb) { return analyze_behavior(llm, unit, callees, options, &fb); }, failed);
            std::lock_guard lock(mutex);
            auto& s = out.functions[name];
            s.behavior = std::move(behavior);
            s.sources.insert(s.sources.end(), notes.begin(), notes.end());
            if (failed) {
                s.failed = true;
                s.sources.push_back("behavior: fallback");
            }
        });
    }

    std::vector<const CodeUnit*> classes;
    for (const auto* c : index.subject_classes()) {
        if (!is_test_file(c->file)) {
            classes.push_back(c);
        }
    }
    parallel_for(classes.size(), options.parallelism, [&](std::size_t i) {
        const auto& unit = *classes[i];
        bool failed = false;
        auto text = cached(
            DigestCache::key("class", unit.source, {}),
            [&](bool& fb) { return analyze_behavior(llm, unit, {}, options, &fb); }, failed);
        FunctionSummary s;
        s.name = unit.qualified_name;
        s.behavior = text;
        s.semantics = text;
        s.index_summary = text;
        s.failed = failed;
        if (failed) {
            s.sources.push_back("class summary: fallback");
        }
        std::lock_guard lock(mutex);
        out.classes[unit.qualified_name] = std::move(s);
    });

    const auto semantics_waves =
        waves(semantics_order(cg), [&](const std::string& n) { return cg.callers(n); }, members);
    for (std::size_t w = 0; w < semantics_waves.size(); ++w) {
        const auto& wave = semantics_waves[w];
        for (const auto& n : wave) {
            out.trace.push_back({"semantics", n, static_cast<int>(w)});
        }
        parallel_for(wave.size(), options.parallelism, [&](std::size_t i) {
            const auto& name = wave[i];
            const auto& unit = index.at(name);
            std::vector<CallerMaterial> callers;
            std::string behavior;
            {
                std::lock_guard lock(mutex);
                behavior = out.functions[name].behavior;
                for (const auto& c : cg.callers(name)) {
                    const auto* cu = index.find(c);
                    if (cu == nullptr) {
                        continue;
                    }
                    const auto it = out.functions.find(c);
                    callers.push_back({c, cu->source, it != out.functions.end() ? it->second.semantics : ""});
                }
            }
            std::stable_sort(callers.begin(), callers.end(), [](const CallerMaterial& a, const CallerMaterial& b) {
                const auto la = utf8_length(a.source);
                const auto lb = utf8_length(b.source);
                return la != lb ? la < lb : a.name < b.name;
            });
            if (callers.size() > options.max_callers) {
                callers.resize(options.max_callers);
            }
            std::vector<std::string> notes;
            std::optional<DocProxy> proxy;
            std::vector<std::string> inputs{behavior};
            if (callers.empty()) {
                proxy = find_doc_proxy(index.root(), unit.file);
                notes.push_back(proxy ? "doc proxy: " + proxy->path : std::string("doc proxy: none found"));
                if (proxy) {
                    inputs.push_back(proxy->text);
                }
            } else {
                for (const auto& c : callers) {
                    notes.push_back("caller: " + c.name);
                    inputs.push_back(c.source + "\n" + c.semantics);
                }
            }
            bool failed = false;
            std::string semantics;
            if (callers.empty() && !proxy) {
                semantics = behavior;
            } else {
                semantics = cached(
                    DigestCache::key("semantics", unit.source, inputs),
                    [&](bool& fb) { return infer_semantics(llm, unit, behavior, callers, proxy, options, &fb); },
                    failed);
            }
            std::lock_guard lock(mutex);
            auto& s = out.functions[name];
            s.semantics = std::move(semantics);
            s.sources.insert(s.sources.end(), notes.begin(), notes.end());
            if (failed) {
                s.failed = true;
                s.sources.push_back("semantics: fallback");
            }
            s.index_summary = s.semantics == s.behavior ? s.behavior : s.behavior + "\n" + s.semantics;
        });
    }
    return out;
}

} // namespace typeforge
