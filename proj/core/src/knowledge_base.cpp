// SPDX-License-Identifier: Apache-2.0
#include "typeforge/knowledge_base.hpp"

#include "typeforge/error.hpp"
#include "typeforge/prompts.hpp"
#include "typeforge/util.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>

namespace typeforge {

std::string_view to_string(DocKind kind) noexcept
{
    switch (kind) {
    case DocKind::Function: return "function";
    case DocKind::SubjectClass: return "subject_class";
    case DocKind::TestCase: return "test_case";
    }
    return "function";
}

namespace {

DocKind doc_kind_from(const std::string& s)
{
    if (s == "function") {
        return DocKind::Function;
    }
    if (s == "subject_class") {
        return DocKind::SubjectClass;
    }
    if (s == "test_case") {
        return DocKind::TestCase;
    }
    throw Error(ErrorCode::MalformedResponse, "unknown document kind: " + s);
}

bool is_ident_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool mentions(std::string_view text, std::string_view word)
{
    if (word.empty()) {
        return false;
    }
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        const bool left = pos == 0 || !is_ident_char(text[pos - 1]);
        const auto end = pos + word.size();
        const bool right = end >= text.size() || !is_ident_char(text[end]);
        if (left && right) {
            return true;
        }
        ++pos;
    }
    return false;
}

std::string short_name(std::string_view local)
{
    const auto dot = local.rfind('.');
    return std::string(dot == std::string_view::npos ? local : local.substr(dot + 1));
}

std::string format_score(double v)
{
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << v;
    return os.str();
}

} // namespace

nlohmann::json to_json(const KBDocument& doc)
{
    nlohmann::json j;
    j["doc_id"] = doc.doc_id;
    j["doc_kind"] = std::string(to_string(doc.doc_kind));
    j["qualified_name"] = doc.qualified_name;
    j["summary"] = doc.summary;
    j["summary_fallback"] = doc.summary_fallback;
    j["source_code"] = {{"module_path", doc.source_code.module_path},
                        {"name", doc.source_code.name},
                        {"source_code", doc.source_code.source_code},
                        {"docstring", doc.source_code.docstring}};
    if (doc.test_cases) {
        j["test_cases"] = {{"label", doc.test_cases->label},
                           {"unit_path", doc.test_cases->unit_path},
                           {"unit_name", doc.test_cases->unit_name},
                           {"source_code", doc.test_cases->source_code}};
    } else {
        j["test_cases"] = nullptr;
    }
    j["embedding"] = doc.embedding;
    return j;
}

KBDocument document_from_json(const nlohmann::json& j)
{
    try {
        KBDocument d;
        d.doc_id = j.at("doc_id").get<std::string>();
        d.doc_kind = doc_kind_from(j.at("doc_kind").get<std::string>());
        d.qualified_name = j.at("qualified_name").get<std::string>();
        d.summary = j.at("summary").get<std::string>();
        d.summary_fallback = j.value("summary_fallback", false);
        const auto& sc = j.at("source_code");
        d.source_code = {sc.at("module_path").get<std::string>(), sc.at("name").get<std::string>(),
                         sc.at("source_code").get<std::string>(), sc.value("docstring", std::string())};
        if (j.contains("test_cases") && !j.at("test_cases").is_null()) {
            const auto& tc = j.at("test_cases");
            d.test_cases = TestCaseEntry{tc.at("label").get<std::string>(), tc.at("unit_path").get<std::string>(),
                                         tc.at("unit_name").get<std::string>(),
                                         tc.at("source_code").get<std::string>()};
        }
        d.embedding = j.at("embedding").get<Vector>();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedResponse, std::string("knowledge base document: ") + e.what());
    }
}

namespace {
constexpr double kTieTolerance = 1e-12;
}

std::vector<std::size_t> mmr_select(const Vector& query, const std::vector<const Vector*>& candidates, std::size_t k,
                                    double lambda)
{
    const auto n = candidates.size();
    k = std::min(k, n);
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = norm(*candidates[i]);
    }
    auto sim = [&](const Vector& a, double na, const Vector& b, double nb) {
        if (na == 0.0 || nb == 0.0) {
            return 0.0;
        }
        double dot = 0.0;
        for (std::size_t d = 0, m = std::min(a.size(), b.size()); d < m; ++d) {
            dot += a[d] * b[d];
        }
        return dot / (na * nb);
    };
    const double qn = norm(query);
    std::vector<double> relevance(n);
    for (std::size_t i = 0; i < n; ++i) {
        relevance[i] = sim(query, qn, *candidates[i], norms[i]);
    }
    std::vector<std::size_t> picked;
    std::vector<bool> used(n, false);
    std::vector<double> max_sim(n, -std::numeric_limits<double>::infinity());
    while (picked.size() < k) {
        std::size_t best = n;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) {
                continue;
            }
            const double s = picked.empty() ? relevance[i] : lambda * relevance[i] - (1.0 - lambda) * max_sim[i];
            if (best == n || s > best_score + kTieTolerance) {
                best = i;
                best_score = s;
            }
        }
        used[best] = true;
        picked.push_back(best);
        if (picked.size() == k) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!used[i]) {
                max_sim[i] = std::max(max_sim[i], sim(*candidates[i], norms[i], *candidates[best], norms[best]));
            }
        }
    }
    return picked;
}

std::string document_id(DocKind kind, std::string_view key, std::string_view source)
{
    std::string material(to_string(kind));
    material.push_back('\n');
    material.append(key);
    material.push_back('\n');
    material.append(source);
    return sha256_hex(material).substr(0, 16);
}

std::string embedding_text(const KBDocument& doc)
{
    return doc.summary + "\n" + doc.source_code.name;
}

KnowledgeBase::KnowledgeBase(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder))
{
    if (!embedder_) {
        throw Error(ErrorCode::PreconditionFailed, "knowledge base needs an embedder");
    }
}

KnowledgeBase::KnowledgeBase(const KnowledgeBase& other) : embedder_(other.embedder_)
{
    std::shared_lock lock(other.mutex_);
    docs_ = other.docs_;
}

KnowledgeBase& KnowledgeBase::operator=(const KnowledgeBase& other)
{
    if (this != &other) {
        std::scoped_lock lock(mutex_, other.mutex_);
        embedder_ = other.embedder_;
        docs_ = other.docs_;
    }
    return *this;
}

bool KnowledgeBase::insert(KBDocument doc)
{
    if (doc.embedding.empty()) {
        doc.embedding = embedder_->embed(embedding_text(doc));
    }
    if (doc.embedding.size() != embedder_->dimension()) {
        throw Error(ErrorCode::PreconditionFailed, "embedding dimension mismatch for " + doc.doc_id);
    }
    std::unique_lock lock(mutex_);
    auto id = doc.doc_id;
    return docs_.emplace(std::move(id), std::move(doc)).second;
}

std::size_t KnowledgeBase::size() const
{
    std::shared_lock lock(mutex_);
    return docs_.size();
}

std::vector<KBDocument> KnowledgeBase::documents() const
{
    std::shared_lock lock(mutex_);
    std::vector<KBDocument> out;
    out.reserve(docs_.size());
    for (const auto& [id, d] : docs_) {
        out.push_back(d);
    }
    return out;
}

std::optional<KBDocument> KnowledgeBase::find(const std::string& doc_id) const
{
    std::shared_lock lock(mutex_);
    const auto it = docs_.find(doc_id);
    if (it == docs_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<RetrievedDoc> KnowledgeBase::retrieve(const std::string& query, std::size_t k, double lambda,
                                                  const DocFilter& filter) const
{
    ++queries_;
    const auto q = embedder_->embed(query);
    std::shared_lock lock(mutex_);
    std::vector<const KBDocument*> pool;
    std::vector<const Vector*> vectors;
    for (const auto& [id, d] : docs_) {
        if (!filter || filter(d)) {
            pool.push_back(&d);
            vectors.push_back(&d.embedding);
        }
    }
    const auto order = mmr_select(q, vectors, k, lambda);
    std::vector<RetrievedDoc> out;
    std::vector<const Vector*> selected;
    for (const auto i : order) {
        const double rel = cosine(q, *vectors[i]);
        double score = rel;
        if (!selected.empty()) {
            double worst = -std::numeric_limits<double>::infinity();
            for (const auto* s : selected) {
                worst = std::max(worst, cosine(*vectors[i], *s));
            }
            score = lambda * rel - (1.0 - lambda) * worst;
        }
        selected.push_back(vectors[i]);
        out.push_back({pool[i]->doc_id, score, rel});
    }
    return out;
}

void KnowledgeBase::add_test_case(const GeneratedTest& test)
{
    if (test.status != TestStatus::Passing) {
        throw Error(ErrorCode::PreconditionFailed,
                    "only passing tests enter the knowledge base: " + test.test_id + " is " +
                        std::string(to_string(test.status)));
    }
    KBDocument d;
    d.doc_kind = DocKind::TestCase;
    d.doc_id = document_id(DocKind::TestCase, test.test_id, test.source);
    {
        std::shared_lock lock(mutex_);
        if (docs_.count(d.doc_id) != 0) {
            return;
        }
    }
    const auto focal_local = test.focal.size() > test.module_path.size() + 1 &&
                                     starts_with(test.focal, test.module_path + ".")
                                 ? test.focal.substr(test.module_path.size() + 1)
                                 : test.focal;
    d.qualified_name = test.focal;
    d.summary = "Passing unit test for " + focal_local + " in module " + test.module_path + ".";
    d.source_code = {test.module_path, test.test_id, test.source, ""};
    d.test_cases = TestCaseEntry{test.test_id, test.module_path, focal_local, test.source};
    insert(std::move(d));
}

void KnowledgeBase::save(const std::filesystem::path& path) const
{
    std::string lines;
    {
        std::shared_lock lock(mutex_);
        for (const auto& [id, d] : docs_) {
            lines += to_json(d).dump();
            lines.push_back('\n');
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const nlohmann::json meta = {{"dimension", embedder_->dimension()}, {"embedder", embedder_->id()}};
    write_file_atomic(path, lines);
    write_file_atomic(path.string() + ".meta.json", meta.dump(2) + "\n");
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path, std::shared_ptr<const Embedder> embedder)
{
    KnowledgeBase kb(std::move(embedder));
    const auto meta_path = std::filesystem::path(path.string() + ".meta.json");
    if (std::filesystem::exists(meta_path)) {
        nlohmann::json meta;
        try {
            meta = nlohmann::json::parse(read_file(meta_path));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedResponse, std::string("knowledge base metadata: ") + e.what());
        }
        if (meta.value("dimension", std::size_t{0}) != kb.embedder_->dimension() ||
            meta.value("embedder", std::string()) != kb.embedder_->id()) {
            throw Error(ErrorCode::PreconditionFailed, "knowledge base at " + path.string() +
                                                           " was built with a different embedder");
        }
    }
    const auto text = read_file(path);
    for (const auto& line : split_lines(text)) {
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedResponse, std::string("knowledge base line: ") + e.what());
        }
        auto d = document_from_json(j);
        const auto id = d.doc_id;
        if (!kb.insert(std::move(d))) {
            throw Error(ErrorCode::DuplicateDocId, "duplicate document id " + id + " in " + path.string());
        }
    }
    return kb;
}

bool KnowledgeBase::same_documents(const KnowledgeBase& other) const
{
    std::shared_lock a(mutex_, std::defer_lock);
    std::shared_lock b(other.mutex_, std::defer_lock);
    if (this == &other) {
        return true;
    }
    std::lock(a, b);
    return docs_ == other.docs_;
}

KnowledgeBase build_kb(const ProjectIndex& index, const std::map<std::string, std::string>& summaries,
                       std::shared_ptr<const Embedder> embedder, BuildReport* report)
{
    KnowledgeBase kb(std::move(embedder));
    for (const auto& [qn, unit] : index.units()) {
        if (is_test_file(unit.file)) {
            continue;
        }
        KBDocument d;
        d.doc_kind = unit.kind == UnitKind::SubjectClass ? DocKind::SubjectClass : DocKind::Function;
        d.qualified_name = qn;
        d.doc_id = document_id(d.doc_kind, qn, unit.source);
        d.source_code = {unit.module_path, unit.local_name, unit.source, unit.docstring.value_or("")};
        const auto it = summaries.find(qn);
        if (it != summaries.end() && !trim(it->second).empty()) {
            d.summary = it->second;
        } else {
            d.summary_fallback = true;
            d.summary = unit.docstring && !trim(*unit.docstring).empty() ? *unit.docstring : unit.signature();
            if (report != nullptr) {
                report->fallbacks.push_back(qn);
            }
        }
        if (!kb.insert(std::move(d))) {
            throw Error(ErrorCode::DuplicateDocId, "duplicate document for " + qn);
        }
    }
    return kb;
}

ContextBundle consolidate(llm::LlmClient& llm, const std::string& query, const std::vector<KBDocument>& docs,
                          const std::vector<RetrievedDoc>& ranking)
{
    ContextBundle bundle;
    bundle.query = query;
    if (docs.empty()) {
        return bundle;
    }
    std::string listing;
    for (const auto& d : docs) {
        listing += "[" + d.doc_id + "] " + d.source_code.name + " (" + std::string(to_string(d.doc_kind)) +
                   ", module " + d.source_code.module_path + ")\n";
        listing += "Summary: " + d.summary + "\n";
        listing += "```python\n" + d.source_code.source_code + "\n```\n\n";
    }
    const auto prompt = prompts::render("consolidate", {{"query", query}, {"documents", trim(listing)}});
    bundle.consolidated = trim(llm.chat(prompt.system, prompt.user));

    for (const auto& d : docs) {
        if (mentions(bundle.consolidated, d.doc_id) || mentions(bundle.consolidated, d.source_code.name) ||
            mentions(bundle.consolidated, short_name(d.source_code.name))) {
            bundle.selected.push_back(d.doc_id);
        }
    }
    if (bundle.selected.empty()) {
        for (const auto& d : docs) {
            bundle.selected.push_back(d.doc_id);
        }
    }
    for (const auto& id : bundle.selected) {
        std::string note = "retrieved";
        for (std::size_t r = 0; r < ranking.size(); ++r) {
            if (ranking[r].doc_id == id) {
                note = "rank " + std::to_string(r + 1) + " score " + format_score(ranking[r].score) +
                       " relevance " + format_score(ranking[r].relevance);
                break;
            }
        }
        bundle.provenance[id] = note;
    }
    return bundle;
}

} // namespace typeforge
