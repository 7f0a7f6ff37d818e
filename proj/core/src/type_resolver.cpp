// SPDX-License-Identifier: Apache-2.0
#include "typeforge/type_resolver.hpp"

#include "typeforge/error.hpp"
#include "typeforge/prompts.hpp"
#include "typeforge/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace typeforge {

using python::Module;
using python::Statement;
using python::Token;
using python::TokenKind;

std::string_view to_string(HypothesisKind kind) noexcept
{
    switch (kind) {
    case HypothesisKind::Primitive: return "primitive";
    case HypothesisKind::Annotated: return "annotated";
    case HypothesisKind::UserDefined: return "user_defined";
    case HypothesisKind::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Confidence confidence) noexcept
{
    switch (confidence) {
    case Confidence::InstanceBacked: return "instance_backed";
    case Confidence::AnnotationBacked: return "annotation_backed";
    case Confidence::FeatureBacked: return "feature_backed";
    case Confidence::Guessed: return "guessed";
    }
    return "guessed";
}

std::string_view to_string(PlanSource source) noexcept
{
    switch (source) {
    case PlanSource::CallInstance: return "call_instance";
    case PlanSource::Annotation: return "annotation";
    case PlanSource::FeatureRetrieval: return "feature_retrieval";
    case PlanSource::Primitive: return "primitive";
    }
    return "primitive";
}

nlohmann::json to_json(const ParamFeature& feature)
{
    return {{"param", feature.param},
            {"operations", feature.operations},
            {"field_accesses", feature.field_accesses},
            {"method_invocations", feature.method_invocations}};
}

nlohmann::json to_json(const ArgumentPlan& plan)
{
    return {{"param", plan.param},
            {"hypothesis",
             {{"kind", std::string(to_string(plan.hypothesis.kind))},
              {"name", plan.hypothesis.name},
              {"confidence", std::string(to_string(plan.hypothesis.confidence))},
              {"evidence", plan.hypothesis.evidence}}},
            {"construction_context", plan.construction_context},
            {"source", std::string(to_string(plan.source))},
            {"query", plan.query},
            {"diagnostics", plan.diagnostics}};
}

std::string render_plan(const ArgumentPlan& plan)
{
    std::string out = "Parameter `" + plan.param + "`: ";
    out += plan.hypothesis.name.empty() ? std::string("unknown type") : plan.hypothesis.name;
    out += " (" + std::string(to_string(plan.source)) + ", " + std::string(to_string(plan.hypothesis.confidence)) + ")";
    if (!plan.construction_context.empty()) {
        out += "\n" + plan.construction_context;
    }
    return out;
}

namespace {

/// Annotation text with string forward-reference quotes removed.
std::string unquoted(std::string_view annotation)
{
    auto s = trim(annotation);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

std::string base_type_name(std::string_view name)
{
    auto s = trim(name);
    while (!s.empty() && (s.back() == '.' || s.back() == '`' || s.back() == '"' || s.back() == '\'')) {
        s.pop_back();
    }
    while (!s.empty() && (s.front() == '`' || s.front() == '"' || s.front() == '\'')) {
        s.erase(s.begin());
    }
    if (const auto br = s.find('['); br != std::string::npos) {
        s = s.substr(0, br);
    }
    if (starts_with(s, "typing.")) {
        s = s.substr(7);
    }
    static const std::array<std::pair<std::string_view, std::string_view>, 5> aliases{
        {{"List", "list"}, {"Dict", "dict"}, {"Set", "set"}, {"Tuple", "tuple"}, {"NoneType", "None"}}};
    for (const auto& [from, to] : aliases) {
        if (s == from) {
            return std::string(to);
        }
    }
    return trim(s);
}

const CodeUnit* find_class(const ProjectIndex& index, std::string_view name)
{
    const auto base = base_type_name(name);
    if (base.empty()) {
        return nullptr;
    }
    if (const auto* u = index.find(base); u != nullptr && u->kind == UnitKind::SubjectClass) {
        return u;
    }
    const CodeUnit* match = nullptr;
    for (const auto* c : index.subject_classes()) {
        const auto& local = c->local_name;
        const auto short_name = local.substr(local.rfind('.') + 1);
        if (short_name == base || local == base) {
            if (match != nullptr) {
                return nullptr;
            }
            match = c;
        }
    }
    return match;
}

bool is_op_in(const Token& t, std::initializer_list<std::string_view> ops)
{
    if (t.kind != TokenKind::Op) {
        return false;
    }
    return std::any_of(ops.begin(), ops.end(), [&](std::string_view op) { return t.text == op; });
}

bool is_name_in(const Token& t, std::initializer_list<std::string_view> names)
{
    if (t.kind != TokenKind::Name) {
        return false;
    }
    return std::any_of(names.begin(), names.end(), [&](std::string_view n) { return t.text == n; });
}

const std::initializer_list<std::string_view> kArithmetic = {
    "+", "-", "*", "/", "//", "%", "**", "@", "<<", ">>", "&", "|", "^", "~",
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", "@=", "<<=", ">>=", "&=", "|=", "^="};
const std::initializer_list<std::string_view> kComparison = {"<", ">", "<=", ">=", "==", "!="};
const std::initializer_list<std::string_view> kIterating = {"iter", "list", "tuple", "set", "sorted", "enumerate",
                                                            "zip", "len", "sum", "min", "max", "any", "all",
                                                            "map", "filter", "reversed", "frozenset"};

class FeatureScanner {
public:
    FeatureScanner(const Module& m, std::string param, ParamFeature& out) : m_(m), param_(std::move(param)), out_(out)
    {
    }

    void scan_body(const std::vector<Statement>& body)
    {
        for (const auto& s : body) {
            if (python::is_definition(s, m_)) {
                if (defines_function(s) && shadows(s)) {
                    continue;
                }
                scan_range(s.first, s.last);
                scan_body(s.body);
            } else if (s.compound) {
                scan_range(s.first, s.last);
                scan_body(s.body);
            } else {
                scan_range(s.first, s.last);
            }
        }
    }

private:
    const Token& tok(std::size_t i) const { return m_.token(i); }

    bool defines_function(const Statement& s) const
    {
        std::size_t i = s.first;
        if (tok(i).is_name("async")) {
            ++i;
        }
        return tok(i).is_name("def");
    }

    bool shadows(const Statement& s) const
    {
        std::size_t i = s.first;
        if (tok(i).is_name("async")) {
            ++i;
        }
        const auto open = i + 2;
        if (open >= s.last || !tok(open).is_op("(")) {
            return false;
        }
        const auto close = m_.matching_close(open);
        for (auto [b, e] : python::split_top_level(m_.tokens(), open + 1, close)) {
            while (b < e && is_op_in(tok(b), {"*", "**"})) {
                ++b;
            }
            if (b < e && tok(b).kind == TokenKind::Name && tok(b).text == param_) {
                return true;
            }
        }
        return false;
    }

    std::size_t lambda_end(std::size_t colon, std::size_t last) const
    {
        int depth = 0;
        for (std::size_t j = colon + 1; j < last; ++j) {
            const auto& t = tok(j);
            if (is_op_in(t, {"(", "[", "{"})) {
                ++depth;
            } else if (is_op_in(t, {")", "]", "}"})) {
                if (depth == 0) {
                    return j;
                }
                --depth;
            } else if (depth == 0 && t.is_op(",")) {
                return j;
            }
        }
        return last;
    }

    void scan_range(std::size_t first, std::size_t last)
    {
        for (std::size_t i = first; i < last; ++i) {
            const auto& t = tok(i);
            if (t.is_name("lambda")) {
                std::size_t j = i + 1;
                bool shadowed = false;
                while (j < last && !tok(j).is_op(":")) {
                    if (tok(j).kind == TokenKind::Name && tok(j).text == param_ &&
                        (j == i + 1 || is_op_in(tok(j - 1), {",", "*", "**"}))) {
                        shadowed = true;
                    }
                    ++j;
                }
                if (shadowed) {
                    i = lambda_end(j, last);
                    if (i >= last) {
                        return;
                    }
                }
                continue;
            }
            if (t.kind != TokenKind::Name || t.text != param_) {
                continue;
            }
            classify(i, first, last);
        }
    }

    void classify(std::size_t i, std::size_t first, std::size_t last)
    {
        const Token* prev = i > first ? &tok(i - 1) : nullptr;
        const Token* prev2 = i > first + 1 ? &tok(i - 2) : nullptr;
        const Token* next = i + 1 < last ? &tok(i + 1) : nullptr;
        const Token* next2 = i + 2 < last ? &tok(i + 2) : nullptr;

        if (prev != nullptr && prev->is_op(".")) {
            return;
        }
        if (next != nullptr && next->is_op("=") &&
            (prev == nullptr || prev->is_op("(") || prev->is_op(","))) {
            return;
        }
        if (prev != nullptr && prev->is_name("for")) {
            return;
        }
        if (next != nullptr && next->is_op(".")) {
            if (next2 != nullptr && next2->kind == TokenKind::Name) {
                if (i + 3 < last && tok(i + 3).is_op("(")) {
                    out_.method_invocations.insert(next2->text);
                } else {
                    out_.field_accesses.insert(next2->text);
                }
            }
            return;
        }
        if (next != nullptr && next->is_op("(")) {
            out_.operations.insert("callable");
            return;
        }
        if (next != nullptr && next->is_op("[")) {
            out_.operations.insert("subscript");
            return;
        }

        auto arithmetic = [&](const Token& op, const Token* other) {
            if ((op.text == "+" || op.text == "+=") && other != nullptr && other->kind == TokenKind::String) {
                out_.operations.insert("string-concat");
            } else {
                out_.operations.insert("arithmetic");
            }
        };
        if (next != nullptr && is_op_in(*next, kArithmetic)) {
            arithmetic(*next, next2);
        }
        if (prev != nullptr && is_op_in(*prev, kArithmetic)) {
            arithmetic(*prev, prev2);
        }
        if ((next != nullptr && is_op_in(*next, kComparison)) || (prev != nullptr && is_op_in(*prev, kComparison))) {
            out_.operations.insert("comparison");
        }
        if ((next != nullptr && next->is_name("is")) || (prev != nullptr && prev->is_name("is")) ||
            (prev != nullptr && prev->is_name("not") && prev2 != nullptr && prev2->is_name("is"))) {
            out_.operations.insert("comparison");
        }
        if ((next != nullptr && next->is_name("in")) ||
            (next != nullptr && next->is_name("not") && next2 != nullptr && next2->is_name("in"))) {
            out_.operations.insert("comparison");
        }
        if (prev != nullptr && prev->is_name("in")) {
            out_.operations.insert("iteration");
        }
        if (prev != nullptr && prev->is_name("from") && prev2 != nullptr && prev2->is_name("yield")) {
            out_.operations.insert("iteration");
        }
        if (prev != nullptr && prev->is_op("(") && prev2 != nullptr && is_name_in(*prev2, kIterating) &&
            next != nullptr && next->is_op(")")) {
            out_.operations.insert("iteration");
        }
        if (prev != nullptr && prev->is_op("*") &&
            (prev2 == nullptr || is_op_in(*prev2, {"(", ",", "["}))) {
            out_.operations.insert("iteration");
        }
        if (prev != nullptr && is_name_in(*prev, {"if", "elif", "while", "and", "or", "assert"})) {
            out_.operations.insert("boolean-context");
        }
        if (prev != nullptr && prev->is_name("not") && !(prev2 != nullptr && prev2->is_name("is"))) {
            out_.operations.insert("boolean-context");
        }
        if (next != nullptr && is_name_in(*next, {"and", "or"})) {
            out_.operations.insert("boolean-context");
        }
    }

    const Module& m_;
    std::string param_;
    ParamFeature& out_;
};

std::string member_list(const std::set<std::string>& names)
{
    std::vector<std::string> v(names.begin(), names.end());
    if (v.size() <= 1) {
        return v.empty() ? std::string() : v.front();
    }
    const auto tail = v.back();
    v.pop_back();
    return join(v, ", ") + " and " + tail;
}

std::string instance_text(const std::vector<CallInstance>& instances)
{
    std::string out;
    for (const auto& inst : instances) {
        if (!out.empty()) {
            out += "\n\n";
        }
        out += "In " + inst.caller + ":\n```python\n" + inst.context + "\n```";
    }
    return out;
}

bool llm_recoverable(ErrorCode code)
{
    return code == ErrorCode::LlmFailure || code == ErrorCode::RateLimited || code == ErrorCode::Timeout ||
           code == ErrorCode::MalformedResponse;
}

std::string describe_members(const ParamFeature& feature)
{
    std::vector<std::string> parts;
    if (!feature.method_invocations.empty()) {
        parts.push_back("methods " + join({feature.method_invocations.begin(), feature.method_invocations.end()}, ", "));
    }
    if (!feature.field_accesses.empty()) {
        parts.push_back("attributes " + join({feature.field_accesses.begin(), feature.field_accesses.end()}, ", "));
    }
    if (!feature.operations.empty()) {
        parts.push_back("operations " + join({feature.operations.begin(), feature.operations.end()}, ", "));
    }
    return parts.empty() ? std::string("none") : join(parts, "; ");
}

ArgumentPlan mock_plan(const std::string& param, const ParamFeature* feature, const std::string& reason)
{
    ArgumentPlan plan;
    plan.param = param;
    plan.hypothesis = {HypothesisKind::Unknown, "", Confidence::Guessed, {reason}};
    plan.source = PlanSource::FeatureRetrieval;
    std::string members = feature != nullptr ? describe_members(*feature) : std::string("none");
    plan.construction_context = "Low confidence: no project class was matched for `" + param +
                                "`. Build a minimal stand-in object providing exactly the members used (" + members +
                                ").";
    plan.diagnostics.push_back(reason);
    return plan;
}

} // namespace

bool is_primitive_type(std::string_view name) noexcept
{
    static constexpr std::array<std::string_view, 10> kPrimitives{"int",  "float", "bool", "str",   "bytes",
                                                                  "list", "dict",  "set",  "tuple", "None"};
    return std::find(kPrimitives.begin(), kPrimitives.end(), name) != kPrimitives.end();
}

ParamFeature extract_features(const ProjectIndex& index, const std::string& f, const std::string& param)
{
    const auto& unit = index.at(f);
    const auto* spec = unit.find_parameter(param);
    if (!unit.is_callable() || spec == nullptr || spec->receiver) {
        throw Error(ErrorCode::UnknownParameter, param + " is not a non-receiver parameter of " + unit.qualified_name);
    }
    ParamFeature feature;
    feature.param = param;
    const auto* module = index.module_for_file(unit.file);
    if (module == nullptr) {
        return feature;
    }
    const auto* def = python::find_definition(module->statements(), *module, unit.span.start_line);
    if (def == nullptr) {
        return feature;
    }
    FeatureScanner scanner(*module, param, feature);
    scanner.scan_body(def->body);
    return feature;
}

std::vector<std::string> candidate_classes(const ProjectIndex& index, const ParamFeature& feature)
{
    std::vector<const CodeUnit*> hits;
    for (const auto* c : index.subject_classes()) {
        if (std::includes(c->defined_fields.begin(), c->defined_fields.end(), feature.field_accesses.begin(),
                          feature.field_accesses.end()) &&
            std::includes(c->defined_methods.begin(), c->defined_methods.end(),
                          feature.method_invocations.begin(), feature.method_invocations.end())) {
            hits.push_back(c);
        }
    }
    std::sort(hits.begin(), hits.end(), [](const CodeUnit* a, const CodeUnit* b) {
        const auto sa = a->defined_fields.size() + a->defined_methods.size();
        const auto sb = b->defined_fields.size() + b->defined_methods.size();
        if (sa != sb) {
            return sa < sb;
        }
        return a->qualified_name < b->qualified_name;
    });
    std::vector<std::string> out;
    out.reserve(hits.size());
    for (const auto* c : hits) {
        out.push_back(c->qualified_name);
    }
    return out;
}

std::string feature_query(const ParamFeature& feature)
{
    std::vector<std::string> clauses;
    const auto& methods = feature.method_invocations;
    if (methods.size() == 1) {
        clauses.push_back("a " + *methods.begin() + " method");
    } else if (!methods.empty()) {
        clauses.push_back("methods " + member_list(methods));
    }
    const auto& fields = feature.field_accesses;
    if (fields.size() == 1) {
        clauses.push_back("an attribute " + *fields.begin());
    } else if (!fields.empty()) {
        clauses.push_back("attributes " + member_list(fields));
    }
    std::string q = "What is the type of " + feature.param;
    if (!clauses.empty()) {
        q += ", which has " + join(clauses, " and ");
    }
    if (!feature.operations.empty()) {
        q += clauses.empty() ? ", which supports " : ", and supports ";
        q += member_list(feature.operations) + " operations";
    }
    return q + "?";
}

std::optional<std::string> tagged_line(std::string_view text, std::string_view tag)
{
    for (const auto& raw : split_lines(text)) {
        auto line = trim(raw);
        while (!line.empty() && (line.front() == '*' || line.front() == '-' || line.front() == '#')) {
            line = trim(line.substr(1));
        }
        if (line.size() <= tag.size() || line[tag.size()] != ':') {
            continue;
        }
        bool same = true;
        for (std::size_t i = 0; i < tag.size(); ++i) {
            if (std::toupper(static_cast<unsigned char>(line[i])) != std::toupper(static_cast<unsigned char>(tag[i]))) {
                same = false;
                break;
            }
        }
        if (same) {
            return trim(line.substr(tag.size() + 1));
        }
    }
    return std::nullopt;
}

TypeHypothesis infer_type(llm::LlmClient& llm, const ProjectIndex& index, const CodeUnit& f, const std::string& param,
                          const std::vector<CallInstance>& instances)
{
    const auto* spec = f.find_parameter(param);
    if (spec == nullptr) {
        throw Error(ErrorCode::UnknownParameter, param + " is not a parameter of " + f.qualified_name);
    }
    TypeHypothesis h;
    if (instances.empty()) {
        if (spec->annotation) {
            const auto name = base_type_name(*spec->annotation);
            h.kind = is_primitive_type(name) ? HypothesisKind::Primitive : HypothesisKind::Annotated;
            h.name = is_primitive_type(name) ? name : unquoted(*spec->annotation);
            h.confidence = Confidence::AnnotationBacked;
            h.evidence.push_back("annotation: " + *spec->annotation);
        }
        return h;
    }
    const auto prompt = prompts::render("infer_type", {{"focal", f.qualified_name},
                                                       {"parameter", param},
                                                       {"signature", f.signature()},
                                                       {"call_sites", instance_text(instances)}});
    std::string reply;
    try {
        reply = llm.chat(prompt.system, prompt.user);
    } catch (const Error& e) {
        if (!llm_recoverable(e.code())) {
            throw;
        }
        h.evidence.push_back(std::string("type inference failed: ") + e.what());
        return h;
    }
    const auto answer = tagged_line(reply, "TYPE");
    const auto name = base_type_name(answer ? *answer : (split_lines(reply).empty() ? "" : split_lines(reply)[0]));
    for (const auto& inst : instances) {
        h.evidence.push_back(inst.context);
    }
    if (name.empty() || name == "unknown" || name == "Any") {
        return h;
    }
    h.confidence = Confidence::InstanceBacked;
    h.name = name;
    if (is_primitive_type(name)) {
        h.kind = HypothesisKind::Primitive;
    } else if (const auto* cls = find_class(index, name)) {
        h.kind = HypothesisKind::UserDefined;
        h.name = cls->local_name.substr(cls->local_name.rfind('.') + 1);
        h.evidence.insert(h.evidence.begin(), "class " + cls->qualified_name);
    }
    return h;
}

namespace {

const CodeUnit* find_constructor(const ProjectIndex& index, const CodeUnit& cls, int depth = 0)
{
    if (const auto* init = index.find(cls.qualified_name + ".__init__")) {
        return init;
    }
    if (depth > 8) {
        return nullptr;
    }
    for (const auto& base : cls.bases) {
        if (const auto* b = find_class(index, base)) {
            if (const auto* init = find_constructor(index, *b, depth + 1)) {
                return init;
            }
        }
    }
    return nullptr;
}

void append_constructor(const ProjectIndex& index, const CodeUnit& cls, int depth, std::set<std::string>& seen,
                        std::vector<std::string>& sections)
{
    if (!seen.insert(cls.qualified_name).second) {
        return;
    }
    std::string import_line;
    try {
        import_line = resolve_module_path(cls, index);
    } catch (const Error& e) {
        import_line = std::string("# ") + e.what();
    }
    const auto* init = find_constructor(index, cls);
    std::string text = import_line + "\n\n" + cls.signature() + ":\n";
    if (init != nullptr) {
        text += init->source;
    } else {
        text += "    # no explicit constructor: " + cls.local_name.substr(cls.local_name.rfind('.') + 1) +
                "() takes no arguments";
    }
    sections.push_back(std::move(text));
    if (depth <= 1 || init == nullptr) {
        return;
    }
    for (const auto& p : init->parameters) {
        if (p.receiver || p.variadic || p.default_value) {
            continue;
        }
        const CodeUnit* next = nullptr;
        if (p.annotation) {
            next = find_class(index, *p.annotation);
        } else {
            const auto feature = extract_features(index, init->qualified_name, p.name);
            if (!feature.field_accesses.empty() || !feature.method_invocations.empty()) {
                const auto candidates = candidate_classes(index, feature);
                if (candidates.size() == 1) {
                    next = &index.at(candidates.front());
                }
            }
        }
        if (next != nullptr) {
            append_constructor(index, *next, depth - 1, seen, sections);
        }
    }
}

} // namespace

std::string constructor_context(const ProjectIndex& index, const std::string& cls, int max_depth)
{
    const auto& unit = index.at(cls);
    if (unit.kind != UnitKind::SubjectClass) {
        throw Error(ErrorCode::PreconditionFailed, cls + " is not a class");
    }
    std::set<std::string> seen;
    std::vector<std::string> sections;
    append_constructor(index, unit, std::max(1, max_depth), seen, sections);
    return join(sections, "\n\n");
}

ArgumentPlan retrieve_by_feature(llm::LlmClient& llm, const KnowledgeBase& kb, const ProjectIndex& index,
                                 const CodeUnit& f, const std::string& param, const ParamFeature& feature,
                                 const ResolverOptions& options)
{
    ArgumentPlan plan;
    plan.param = param;

    std::string behavior;
    const auto describe = prompts::render("describe_parameter", {{"focal", f.qualified_name},
                                                                 {"parameter", param},
                                                                 {"source", f.source},
                                                                 {"members", describe_members(feature)}});
    try {
        const auto reply = llm.chat(describe.system, describe.user);
        behavior = tagged_line(reply, "BEHAVIOR").value_or(trim(reply));
        const auto type = base_type_name(tagged_line(reply, "TYPE").value_or(""));
        if (is_primitive_type(type) && feature.field_accesses.empty() && feature.method_invocations.empty()) {
            plan.hypothesis = {HypothesisKind::Primitive, type, Confidence::FeatureBacked, {behavior}};
            plan.source = PlanSource::Primitive;
            plan.construction_context = "Pass a " + type + " value for `" + param + "`.";
            return plan;
        }
    } catch (const Error& e) {
        if (!llm_recoverable(e.code())) {
            throw;
        }
        plan.diagnostics.push_back(std::string("parameter description failed: ") + e.what());
    }

    plan.query = feature_query(feature);
    const auto candidates = candidate_classes(index, feature);
    const std::set<std::string> allowed(candidates.begin(), candidates.end());
    const auto ranking = kb.retrieve(plan.query, options.retrieval_k, options.lambda, [&](const KBDocument& d) {
        return d.doc_kind == DocKind::SubjectClass && (allowed.empty() || allowed.count(d.qualified_name) != 0);
    });
    if (ranking.empty()) {
        throw Error(ErrorCode::NoCandidates, "no class document matches " + param + " in " + f.qualified_name);
    }
    std::vector<KBDocument> docs;
    for (const auto& r : ranking) {
        docs.push_back(*kb.find(r.doc_id));
    }
    ContextBundle bundle;
    try {
        bundle = consolidate(llm, plan.query, docs, ranking);
    } catch (const Error& e) {
        if (!llm_recoverable(e.code())) {
            throw;
        }
        plan.diagnostics.push_back(std::string("consolidation failed: ") + e.what());
        for (const auto& r : ranking) {
            bundle.selected.push_back(r.doc_id);
        }
    }
    const KBDocument* winner = &docs.front();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (std::find(bundle.selected.begin(), bundle.selected.end(), ranking[i].doc_id) != bundle.selected.end()) {
            winner = &docs[i];
            break;
        }
    }

    const auto& cls = index.at(winner->qualified_name);
    plan.hypothesis.kind = HypothesisKind::UserDefined;
    plan.hypothesis.name = cls.local_name.substr(cls.local_name.rfind('.') + 1);
    plan.hypothesis.confidence = allowed.empty() ? Confidence::Guessed : Confidence::FeatureBacked;
    plan.hypothesis.evidence.push_back("class " + cls.qualified_name + " retrieved for: " + plan.query);
    if (!behavior.empty()) {
        plan.hypothesis.evidence.push_back("behavior: " + behavior);
    }
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        if (docs[i].doc_id != winner->doc_id && std::find(bundle.selected.begin(), bundle.selected.end(),
                                                          ranking[i].doc_id) != bundle.selected.end()) {
            plan.hypothesis.evidence.push_back("also matched: " + docs[i].qualified_name + " (" +
                                               bundle.provenance[ranking[i].doc_id] + ")");
        }
    }
    plan.source = PlanSource::FeatureRetrieval;
    plan.construction_context = constructor_context(index, cls.qualified_name, options.max_constructor_depth);
    if (!bundle.consolidated.empty()) {
        plan.construction_context += "\n\nRetrieved information:\n" + bundle.consolidated;
    }
    return plan;
}

std::vector<ArgumentPlan> resolve_parameters(llm::LlmClient& llm, const KnowledgeBase& kb, const ProjectIndex& index,
                                             const CallGraph& cg, const std::string& f,
                                             const ResolverOptions& options)
{
    const auto& unit = index.at(f);
    std::vector<ArgumentPlan> plans;
    std::optional<std::vector<CallInstance>> instances;

    for (const auto& p : unit.parameters) {
        if (p.receiver) {
            continue;
        }
        ArgumentPlan plan;
        plan.param = p.name;
        try {
            if (p.annotation && is_primitive_type(base_type_name(*p.annotation))) {
                const auto name = base_type_name(*p.annotation);
                plan.hypothesis = {HypothesisKind::Primitive, name, Confidence::AnnotationBacked,
                                   {"annotation: " + *p.annotation}};
                plan.source = PlanSource::Annotation;
                plan.construction_context = "`" + p.name + "` is annotated as " + *p.annotation + ".";
                plans.push_back(std::move(plan));
                continue;
            }
            if (!instances) {
                instances = pre_existing_instances(cg, index, unit.qualified_name, options.instance_cap);
            }
            if (!instances->empty()) {
                auto h = infer_type(llm, index, unit, p.name, *instances);
                if (h.confidence == Confidence::InstanceBacked) {
                    const auto observed = "Observed calls:\n" + instance_text(*instances);
                    plan.source = PlanSource::CallInstance;
                    if (h.kind == HypothesisKind::Primitive) {
                        plan.construction_context = "Pass a " + h.name + " value for `" + p.name + "`.\n" + observed;
                    } else if (h.kind == HypothesisKind::UserDefined) {
                        const auto* cls = find_class(index, h.name);
                        plan.construction_context =
                            constructor_context(index, cls->qualified_name, options.max_constructor_depth) + "\n\n" +
                            observed;
                    } else {
                        plan.construction_context = "Inferred type: " + h.name + "\n" + observed;
                    }
                    plan.hypothesis = std::move(h);
                    plans.push_back(std::move(plan));
                    continue;
                }
                plan.diagnostics.insert(plan.diagnostics.end(), h.evidence.begin(), h.evidence.end());
            }
            if (p.annotation) {
                plan.source = PlanSource::Annotation;
                plan.hypothesis = {HypothesisKind::Annotated, unquoted(*p.annotation), Confidence::AnnotationBacked,
                                   {"annotation: " + *p.annotation}};
                if (const auto* cls = find_class(index, *p.annotation)) {
                    plan.construction_context =
                        constructor_context(index, cls->qualified_name, options.max_constructor_depth);
                    plan.hypothesis.evidence.push_back("class " + cls->qualified_name);
                } else {
                    plan.construction_context = "`" + p.name + "` is annotated as " + *p.annotation + ".";
                }
                plans.push_back(std::move(plan));
                continue;
            }
            const auto feature = extract_features(index, unit.qualified_name, p.name);
            try {
                auto retrieved = retrieve_by_feature(llm, kb, index, unit, p.name, feature, options);
                retrieved.diagnostics.insert(retrieved.diagnostics.begin(), plan.diagnostics.begin(),
                                             plan.diagnostics.end());
                plans.push_back(std::move(retrieved));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoCandidates) {
                    throw;
                }
                auto mock = mock_plan(p.name, &feature, e.what());
                mock.query = feature_query(feature);
                plans.push_back(std::move(mock));
            }
        } catch (const Error& e) {
            auto fallback = mock_plan(p.name, nullptr, std::string(to_string(e.code())) + ": " + e.what());
            plans.push_back(std::move(fallback));
        }
    }
    return plans;
}

} // namespace typeforge
