// SPDX-License-Identifier: Apache-2.0
#include "typeforge/code_index.hpp"

#include "typeforge/error.hpp"
#include "typeforge/util.hpp"

#include <algorithm>
#include <atomic>
#include <future>
#include <system_error>
#include <thread>

namespace typeforge {

namespace fs = std::filesystem;
using python::Module;
using python::Statement;
using python::Token;
using python::TokenKind;

std::string_view to_string(UnitKind kind) noexcept
{
    switch (kind) {
    case UnitKind::Function: return "function";
    case UnitKind::Method: return "method";
    case UnitKind::Constructor: return "constructor";
    case UnitKind::SubjectClass: return "subject_class";
    }
    return "function";
}

std::string CodeUnit::signature() const
{
    if (kind == UnitKind::SubjectClass) {
        std::string sig = "class " + local_name.substr(local_name.rfind('.') + 1);
        if (!bases.empty()) {
            sig += "(" + join(bases, ", ") + ")";
        }
        return sig;
    }
    std::vector<std::string> params;
    for (const auto& p : parameters) {
        std::string s = p.name;
        if (p.annotation) {
            s += ": " + *p.annotation;
        }
        if (p.default_value) {
            s += " = " + *p.default_value;
        }
        params.push_back(std::move(s));
    }
    const auto short_name = local_name.substr(local_name.rfind('.') + 1);
    return std::string(is_async ? "async def " : "def ") + short_name + "(" + join(params, ", ") + ")";
}

const ParameterSpec* CodeUnit::find_parameter(std::string_view name) const
{
    for (const auto& p : parameters) {
        if (p.name == name) {
            return &p;
        }
    }
    return nullptr;
}

std::string module_path_for(const std::string& relative_file)
{
    std::string path = relative_file;
    if (path.size() > 3 && path.substr(path.size() - 3) == ".py") {
        path.resize(path.size() - 3);
    }
    std::replace(path.begin(), path.end(), '/', '.');
    static const std::string kInit = "__init__";
    if (path == kInit) {
        return {};
    }
    if (path.size() > kInit.size() + 1 && path.substr(path.size() - kInit.size() - 1) == "." + kInit) {
        path.resize(path.size() - kInit.size() - 1);
    }
    return path;
}

bool is_test_file(const std::string& relative_file)
{
    const auto slash = relative_file.rfind('/');
    const auto base = slash == std::string::npos ? relative_file : relative_file.substr(slash + 1);
    if (starts_with(base, "test_") || base == "conftest.py" ||
        (base.size() > 8 && base.substr(base.size() - 8) == "_test.py")) {
        return true;
    }
    return starts_with(relative_file, "tests/") || starts_with(relative_file, "test/") ||
           contains(relative_file, "/tests/") || contains(relative_file, "/test/");
}

namespace {

struct FileAnalysis {
    std::vector<CodeUnit> units;
    std::vector<ImportBinding> imports;
    std::vector<Diagnostic> diagnostics;
};

class FileAnalyzer {
public:
    FileAnalyzer(const Module& module, std::string file, std::string module_path)
        : m_(module), file_(std::move(file)), module_path_(std::move(module_path))
    {
    }

    FileAnalysis run()
    {
        walk(m_.statements(), "", "", Scope::Module);
        collect_imports(m_.statements());
        return std::move(out_);
    }

private:
    enum class Scope { Module, Class, Function };

    const Token& tok(std::size_t i) const { return m_.token(i); }

    std::string qualify(const std::string& local) const
    {
        return module_path_.empty() ? local : module_path_ + "." + local;
    }

    void walk(const std::vector<Statement>& stmts, const std::string& prefix, const std::string& parent_qual,
              Scope scope)
    {
        std::vector<std::string> decorators;
        for (const auto& s : stmts) {
            const auto& head = tok(s.first);
            if (head.is_op("@")) {
                decorators.push_back(m_.text(s.first + 1, s.last));
                continue;
            }
            if (!s.compound) {
                decorators.clear();
                continue;
            }
            std::size_t i = s.first;
            bool is_async = false;
            if (tok(i).is_name("async")) {
                is_async = true;
                ++i;
            }
            if (tok(i).is_name("def")) {
                add_function(s, i, is_async, prefix, parent_qual, scope, decorators);
            } else if (tok(i).is_name("class")) {
                add_class(s, i, prefix, parent_qual, decorators);
            } else {
                walk(s.body, prefix, parent_qual, scope);
            }
            decorators.clear();
        }
    }

    std::optional<std::string> docstring_of(const Statement& s) const
    {
        if (s.body.empty()) {
            return std::nullopt;
        }
        const auto& first = s.body.front();
        if (first.compound) {
            return std::nullopt;
        }
        std::string raw;
        for (std::size_t i = first.first; i < first.last; ++i) {
            if (tok(i).kind != TokenKind::String) {
                return std::nullopt;
            }
            raw += python::string_literal_body(tok(i).text);
        }
        return python::clean_docstring(raw);
    }

    void add_function(const Statement& s, std::size_t def_tok, bool is_async, const std::string& prefix,
                      const std::string& parent_qual, Scope scope, const std::vector<std::string>& decorators)
    {
        CodeUnit u;
        const auto name = tok(def_tok + 1).text;
        u.local_name = prefix.empty() ? name : prefix + "." + name;
        u.qualified_name = qualify(u.local_name);
        u.module_path = module_path_;
        u.file = file_;
        u.is_async = is_async;
        u.decorators = decorators;
        u.parent = parent_qual;
        if (scope == Scope::Class) {
            u.kind = name == "__init__" ? UnitKind::Constructor : UnitKind::Method;
        }
        u.span = {s.start_line, s.end_line};
        u.source = m_.lines(s.start_line, s.end_line);
        u.docstring = docstring_of(s);
        const auto open = def_tok + 2;
        const auto close = m_.matching_close(open);
        parse_parameters(u, open + 1, close);
        if (scope == Scope::Class && !u.parameters.empty()) {
            const bool is_static = std::find(decorators.begin(), decorators.end(), "staticmethod") != decorators.end();
            if (!is_static && !u.parameters.front().variadic) {
                u.parameters.front().receiver = true;
            }
        }
        out_.units.push_back(u);
        walk(s.body, u.local_name, u.qualified_name, Scope::Function);
    }

    void parse_parameters(CodeUnit& u, std::size_t first, std::size_t last) const
    {
        int position = 0;
        const auto& tokens = m_.tokens();
        for (auto [b, e] : python::split_top_level(tokens, first, last)) {
            if (b == e) {
                continue;
            }
            if (tok(b).is_op("/") || (tok(b).is_op("*") && e == b + 1)) {
                continue;
            }
            ParameterSpec p;
            std::size_t i = b;
            if (tok(i).is_op("*") || tok(i).is_op("**")) {
                p.variadic = true;
                ++i;
            }
            if (i >= e || tok(i).kind != TokenKind::Name) {
                continue;
            }
            p.name = tok(i).text;
            ++i;
            std::size_t eq = e;
            int depth = 0;
            for (std::size_t k = i; k < e; ++k) {
                const auto& t = tok(k);
                if (t.is_op("(") || t.is_op("[") || t.is_op("{")) {
                    ++depth;
                } else if (t.is_op(")") || t.is_op("]") || t.is_op("}")) {
                    --depth;
                } else if (depth == 0 && t.is_op("=")) {
                    eq = k;
                    break;
                }
            }
            if (i < eq && tok(i).is_op(":")) {
                p.annotation = m_.text(i + 1, eq);
            }
            if (eq < e) {
                p.default_value = m_.text(eq + 1, e);
            }
            p.position = position++;
            u.parameters.push_back(std::move(p));
        }
    }

    void add_class(const Statement& s, std::size_t class_tok, const std::string& prefix, const std::string& parent_qual,
                   const std::vector<std::string>& decorators)
    {
        CodeUnit u;
        const auto name = tok(class_tok + 1).text;
        u.local_name = prefix.empty() ? name : prefix + "." + name;
        u.qualified_name = qualify(u.local_name);
        u.module_path = module_path_;
        u.file = file_;
        u.kind = UnitKind::SubjectClass;
        u.decorators = decorators;
        u.parent = parent_qual;
        u.span = {s.start_line, s.end_line};
        u.source = m_.lines(s.start_line, s.end_line);
        u.docstring = docstring_of(s);
        if (tok(class_tok + 2).is_op("(")) {
            const auto close = m_.matching_close(class_tok + 2);
            for (auto [b, e] : python::split_top_level(m_.tokens(), class_tok + 3, close)) {
                if (b < e) {
                    u.bases.push_back(m_.text(b, e));
                }
            }
        }
        collect_members(s.body, u);
        out_.units.push_back(u);
        walk(s.body, u.local_name, u.qualified_name, Scope::Class);
    }

    // Methods are the defs directly in the class body (possibly under if/try);
    // fields are receiver-attribute assignment targets anywhere inside those methods.
    void collect_members(const std::vector<Statement>& body, CodeUnit& cls) const
    {
        std::vector<std::string> decorators;
        for (const auto& s : body) {
            if (tok(s.first).is_op("@")) {
                decorators.push_back(m_.text(s.first + 1, s.last));
                continue;
            }
            if (!s.compound) {
                decorators.clear();
                continue;
            }
            std::size_t i = s.first;
            if (tok(i).is_name("async")) {
                ++i;
            }
            if (tok(i).is_name("def")) {
                cls.defined_methods.insert(tok(i + 1).text);
                const bool is_static =
                    std::find(decorators.begin(), decorators.end(), "staticmethod") != decorators.end();
                const auto open = i + 2;
                const auto close = m_.matching_close(open);
                if (!is_static && close > open + 1 && tok(open + 1).kind == TokenKind::Name) {
                    collect_receiver_fields(s.body, tok(open + 1).text, cls.defined_fields);
                }
            } else if (!tok(i).is_name("class")) {
                collect_members(s.body, cls);
            }
            decorators.clear();
        }
    }

    void collect_receiver_fields(const std::vector<Statement>& stmts, const std::string& receiver,
                                 std::set<std::string>& fields) const
    {
        for (const auto& s : stmts) {
            if (s.compound) {
                std::size_t i = s.first;
                if (tok(i).is_name("async")) {
                    ++i;
                }
                if (tok(i).is_name("class")) {
                    continue;
                }
                if (tok(i).is_name("for") || tok(i).is_name("with")) {
                    scan_targets(s.first, s.last, receiver, fields, /*header=*/true);
                }
                collect_receiver_fields(s.body, receiver, fields);
                continue;
            }
            scan_targets(s.first, s.last, receiver, fields, /*header=*/false);
        }
    }

    void record_receiver_attrs(std::size_t first, std::size_t last, const std::string& receiver,
                               std::set<std::string>& fields) const
    {
        for (std::size_t k = first; k + 2 < last; ++k) {
            if (!tok(k).is_name(receiver) || !tok(k + 1).is_op(".") || tok(k + 2).kind != TokenKind::Name) {
                continue;
            }
            if (k > first && tok(k - 1).is_op(".")) {
                continue;
            }
            if (k + 3 < last) {
                const auto& after = tok(k + 3);
                if (after.is_op(".") || after.is_op("(") || after.is_op("[")) {
                    continue;
                }
            }
            fields.insert(tok(k + 2).text);
        }
    }

    void scan_targets(std::size_t first, std::size_t last, const std::string& receiver, std::set<std::string>& fields,
                      bool header) const
    {
        if (header) {
            // for <targets> in ... / with ... as <target>
            const auto& head = tok(first).is_name("async") ? tok(first + 1) : tok(first);
            const std::size_t start = tok(first).is_name("async") ? first + 2 : first + 1;
            if (head.is_name("for")) {
                std::size_t in = start;
                while (in < last && !tok(in).is_name("in")) {
                    ++in;
                }
                record_receiver_attrs(start, in, receiver, fields);
            } else {
                for (std::size_t k = start; k < last; ++k) {
                    if (tok(k).is_name("as")) {
                        std::size_t e = k + 1;
                        while (e < last && !tok(e).is_op(",") && !tok(e).is_op(":")) {
                            ++e;
                        }
                        record_receiver_attrs(k + 1, e, receiver, fields);
                    }
                }
            }
            return;
        }
        int depth = 0;
        std::size_t segment = first;
        bool annotated_seen = false;
        for (std::size_t k = first; k < last; ++k) {
            const auto& t = tok(k);
            if (t.kind != TokenKind::Op) {
                continue;
            }
            if (t.text == "(" || t.text == "[" || t.text == "{") {
                ++depth;
            } else if (t.text == ")" || t.text == "]" || t.text == "}") {
                --depth;
            } else if (depth == 0 && (t.text == "=" || (t.text.size() >= 2 && t.text.back() == '=' &&
                                                         t.text != "==" && t.text != "<=" && t.text != ">=" &&
                                                         t.text != "!=" && t.text != ":="))) {
                if (!annotated_seen) {
                    record_receiver_attrs(segment, k, receiver, fields);
                }
                annotated_seen = false;
                segment = k + 1;
            } else if (depth == 0 && t.text == ":" && k == segment + 3) {
                // annotated assignment: self.x: T [= v]
                record_receiver_attrs(segment, k, receiver, fields);
                annotated_seen = true;
            }
        }
    }

    std::string resolve_relative(int level, const std::string& name) const
    {
        std::vector<std::string> parts;
        std::string current;
        for (char c : module_path_) {
            if (c == '.') {
                parts.push_back(current);
                current.clear();
            } else {
                current.push_back(c);
            }
        }
        if (!current.empty()) {
            parts.push_back(current);
        }
        const bool is_package = file_ == "__init__.py" ||
                                (file_.size() >= 12 && file_.substr(file_.size() - 12) == "/__init__.py");
        if (!is_package && !parts.empty()) {
            parts.pop_back();
        }
        for (int l = 1; l < level && !parts.empty(); ++l) {
            parts.pop_back();
        }
        if (!name.empty()) {
            parts.push_back(name);
        }
        return join(parts, ".");
    }

    std::string dotted(std::size_t& i, std::size_t last) const
    {
        std::string out;
        while (i < last && tok(i).kind == TokenKind::Name && !tok(i).is_name("import") && !tok(i).is_name("as")) {
            out += tok(i).text;
            ++i;
            if (i < last && tok(i).is_op(".")) {
                out += ".";
                ++i;
            } else {
                break;
            }
        }
        return out;
    }

    void collect_imports(const std::vector<Statement>& stmts)
    {
        for (const auto& s : stmts) {
            if (s.compound) {
                collect_imports(s.body);
                continue;
            }
            const auto& head = tok(s.first);
            if (head.is_name("import")) {
                for (auto [b, e] : python::split_top_level(m_.tokens(), s.first + 1, s.last)) {
                    std::size_t i = b;
                    const auto mod = dotted(i, e);
                    if (mod.empty()) {
                        continue;
                    }
                    if (i + 1 < e && tok(i).is_name("as")) {
                        out_.imports.push_back({tok(i + 1).text, mod, ""});
                    } else {
                        out_.imports.push_back({mod, mod, ""});
                    }
                }
            } else if (head.is_name("from")) {
                std::size_t i = s.first + 1;
                int level = 0;
                while (i < s.last && (tok(i).is_op(".") || tok(i).is_op("..."))) {
                    level += static_cast<int>(tok(i).text.size());
                    ++i;
                }
                auto mod = dotted(i, s.last);
                if (level > 0) {
                    mod = resolve_relative(level, mod);
                }
                while (i < s.last && !tok(i).is_name("import")) {
                    ++i;
                }
                ++i;
                std::size_t e = s.last;
                if (i < e && tok(i).is_op("(")) {
                    ++i;
                    if (tok(e - 1).is_op(")")) {
                        --e;
                    }
                }
                for (auto [b, pe] : python::split_top_level(m_.tokens(), i, e)) {
                    if (b >= pe) {
                        continue;
                    }
                    const auto& sym = tok(b);
                    if (sym.is_op("*")) {
                        out_.imports.push_back({"*", mod, "*"});
                        continue;
                    }
                    if (sym.kind != TokenKind::Name) {
                        continue;
                    }
                    std::string local = sym.text;
                    if (b + 2 < pe && tok(b + 1).is_name("as")) {
                        local = tok(b + 2).text;
                    }
                    out_.imports.push_back({local, mod, sym.text});
                }
            }
        }
    }

    const Module& m_;
    std::string file_;
    std::string module_path_;
    FileAnalysis out_;
};

struct FileResult {
    std::string rel;
    std::string content;
    bool utf8_replaced = false;
    bool oversized = false;
    bool unreadable = false;
};

} // namespace

const CodeUnit* ProjectIndex::find(std::string_view name) const
{
    if (auto it = units_.find(std::string(name)); it != units_.end()) {
        return &it->second;
    }
    const CodeUnit* match = nullptr;
    for (const auto& [q, u] : units_) {
        if (u.local_name == name) {
            if (match != nullptr) {
                return nullptr;
            }
            match = &u;
        }
    }
    return match;
}

const CodeUnit& ProjectIndex::at(std::string_view name) const
{
    if (const auto* u = find(name)) {
        return *u;
    }
    throw Error(ErrorCode::UnknownUnit, "no unique unit named '" + std::string(name) + "'");
}

std::vector<const CodeUnit*> ProjectIndex::subject_classes() const
{
    std::vector<const CodeUnit*> out;
    for (const auto& [q, u] : units_) {
        if (u.kind == UnitKind::SubjectClass) {
            out.push_back(&u);
        }
    }
    return out;
}

std::vector<const CodeUnit*> ProjectIndex::callables() const
{
    std::vector<const CodeUnit*> out;
    for (const auto& [q, u] : units_) {
        if (u.is_callable()) {
            out.push_back(&u);
        }
    }
    return out;
}

const std::vector<ImportBinding>& ProjectIndex::imports(const std::string& module_path) const
{
    static const std::vector<ImportBinding> kEmpty;
    const auto it = imports_.find(module_path);
    return it == imports_.end() ? kEmpty : it->second;
}

const python::Module* ProjectIndex::module_for_file(const std::string& file) const
{
    const auto it = parsed_.find(file);
    return it == parsed_.end() ? nullptr : it->second.get();
}

const SourceFile* ProjectIndex::file_for_module(const std::string& module_path) const
{
    for (const auto& f : files_) {
        if (f.module_path == module_path && parsed_.count(f.path) != 0) {
            return &f;
        }
    }
    return nullptr;
}

bool ProjectIndex::operator==(const ProjectIndex& other) const
{
    return root_ == other.root_ && units_ == other.units_ && files_ == other.files_ &&
           diagnostics_ == other.diagnostics_ && modules_ == other.modules_ && imports_ == other.imports_;
}

void ProjectIndex::add_file(const std::string& rel, const std::string& content)
{
    SourceFile sf;
    sf.path = rel;
    sf.module_path = module_path_for(rel);
    sf.content_hash = sha256_hex(content);
    sf.is_test = is_test_file(rel);
    files_.push_back(sf);
    modules_[sf.module_path].push_back(rel);
    std::shared_ptr<const Module> module;
    try {
        module = std::make_shared<const Module>(content);
    } catch (const python::SyntaxError& e) {
        diagnostics_.push_back({rel, e.line(), std::string("skipped: syntax error: ") + e.what()});
        return;
    }
    auto analysis = FileAnalyzer(*module, rel, sf.module_path).run();
    for (auto& u : analysis.units) {
        auto q = u.qualified_name;
        if (units_.count(q) != 0) {
            diagnostics_.push_back({rel, u.span.start_line, "redefinition of " + q + " replaces the earlier one"});
        }
        units_[q] = std::move(u);
    }
    auto& imports = imports_[sf.module_path];
    imports.insert(imports.end(), analysis.imports.begin(), analysis.imports.end());
    parsed_[rel] = std::move(module);
}

namespace {

bool skipped_dir(const std::string& name)
{
    return name.empty() || name[0] == '.' || name == "__pycache__" || name == "venv" || name == "node_modules" ||
           name == "build" || name == "dist" || name == "site-packages";
}

std::string relative_slash(const fs::path& p, const fs::path& root)
{
    return fs::relative(p, root).generic_string();
}

} // namespace

ProjectIndex index_project(const fs::path& root, const IndexOptions& options)
{
    std::error_code ec;
    if (!fs::exists(root, ec) || !fs::is_directory(root, ec)) {
        throw Error(ErrorCode::RootNotFound, root.string());
    }
    const auto canonical_root = fs::canonical(root, ec);
    if (ec) {
        throw Error(ErrorCode::PermissionDenied, root.string() + ": " + ec.message());
    }
    std::vector<fs::path> paths;
    fs::recursive_directory_iterator it(canonical_root, fs::directory_options::none, ec);
    if (ec) {
        throw Error(ErrorCode::PermissionDenied, root.string() + ": " + ec.message());
    }
    ProjectIndex index;
    index.root_ = canonical_root;
    for (const fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
        if (ec) {
            index.diagnostics_.push_back({"", 0, "skipped: " + ec.message()});
            ec.clear();
            continue;
        }
        const auto& entry = *it;
        const auto name = entry.path().filename().string();
        if (entry.is_directory(ec)) {
            if (skipped_dir(name)) {
                it.disable_recursion_pending();
            }
            continue;
        }
        if (entry.is_regular_file(ec) && entry.path().extension() == ".py") {
            paths.push_back(entry.path());
        }
    }
    std::sort(paths.begin(), paths.end());

    auto load = [&](const fs::path& p) {
        FileResult r;
        r.rel = relative_slash(p, canonical_root);
        std::error_code size_ec;
        const auto size = fs::file_size(p, size_ec);
        if (size_ec) {
            r.unreadable = true;
            return r;
        }
        if (size > options.max_file_bytes) {
            r.oversized = true;
            return r;
        }
        try {
            r.content = sanitize_utf8(read_file(p), r.utf8_replaced);
        } catch (const Error&) {
            r.unreadable = true;
        }
        return r;
    };

    std::size_t workers = options.parallelism != 0 ? options.parallelism : std::thread::hardware_concurrency();
    workers = std::max<std::size_t>(1, std::min<std::size_t>(workers, 8));
    std::vector<FileResult> results(paths.size());
    std::vector<std::future<void>> jobs;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next++; i < paths.size(); i = next++) {
                results[i] = load(paths[i]);
            }
        }));
    }
    for (auto& j : jobs) {
        j.get();
    }

    for (auto& r : results) {
        if (r.oversized) {
            index.diagnostics_.push_back({r.rel, 0, "skipped: file exceeds the size cap"});
            continue;
        }
        if (r.unreadable) {
            index.diagnostics_.push_back({r.rel, 0, "skipped: unreadable"});
            continue;
        }
        if (r.utf8_replaced) {
            index.diagnostics_.push_back({r.rel, 0, "invalid UTF-8 sequences replaced"});
        }
        index.add_file(r.rel, r.content);
    }
    return index;
}

ProjectIndex index_sources(const std::map<std::string, std::string>& files)
{
    ProjectIndex index;
    for (const auto& [rel, content] : files) {
        bool replaced = false;
        auto clean = sanitize_utf8(content, replaced);
        if (replaced) {
            index.diagnostics_.push_back({rel, 0, "invalid UTF-8 sequences replaced"});
        }
        index.add_file(rel, clean);
    }
    return index;
}

std::string resolve_module_path(const CodeUnit& unit, const ProjectIndex& index)
{
    const auto it = index.modules().find(unit.module_path);
    if (it != index.modules().end() && it->second.size() > 1) {
        throw Error(ErrorCode::AmbiguousModule,
                    unit.module_path + " maps to " + join(it->second, " and "));
    }
    const auto top = unit.local_name.substr(0, unit.local_name.find('.'));
    if (unit.module_path.empty()) {
        return "import " + top;
    }
    return "from " + unit.module_path + " import " + top;
}

nlohmann::json ProjectIndex::to_json() const
{
    using nlohmann::json;
    json units = json::object();
    for (const auto& [q, u] : units_) {
        json params = json::array();
        for (const auto& p : u.parameters) {
            params.push_back({{"name", p.name},
                              {"position", p.position},
                              {"annotation", p.annotation ? json(*p.annotation) : json(nullptr)},
                              {"default", p.default_value ? json(*p.default_value) : json(nullptr)},
                              {"receiver", p.receiver},
                              {"variadic", p.variadic}});
        }
        units[q] = {{"qualified_name", u.qualified_name},
                    {"kind", std::string(to_string(u.kind))},
                    {"module_path", u.module_path},
                    {"file", u.file},
                    {"source", u.source},
                    {"docstring", u.docstring ? json(*u.docstring) : json(nullptr)},
                    {"span", {u.span.start_line, u.span.end_line}},
                    {"parameters", params},
                    {"defined_fields", u.defined_fields},
                    {"defined_methods", u.defined_methods},
                    {"decorators", u.decorators}};
    }
    json files = json::array();
    for (const auto& f : files_) {
        files.push_back({{"path", f.path}, {"content_hash", f.content_hash}});
    }
    json diags = json::array();
    for (const auto& d : diagnostics_) {
        diags.push_back({{"file", d.file}, {"line", d.line}, {"message", d.message}});
    }
    return {{"root", root_.generic_string()}, {"units", units}, {"files", files}, {"diagnostics", diags}};
}

} // namespace typeforge
