// SPDX-License-Identifier: Apache-2.0
#include "typeforge/call_graph.hpp"

#include "typeforge/util.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <sstream>

namespace typeforge {

using python::Module;
using python::Statement;
using python::Token;
using python::TokenKind;
using python::find_definition;
using python::is_definition;

void CallGraph::add_edge(CallEdge edge)
{
    nodes_.insert(edge.caller);
    nodes_.insert(edge.callee);
    edges_.push_back(std::move(edge));
}

CallGraph CallGraph::from_pairs(const std::set<std::string>& nodes, const std::vector<EdgeKey>& pairs)
{
    CallGraph cg;
    for (const auto& n : nodes) {
        cg.add_node(n);
    }
    for (const auto& [a, b] : pairs) {
        cg.add_edge({a, b, {}});
    }
    cg.break_cycles();
    return cg;
}

std::set<EdgeKey> CallGraph::all_pairs() const
{
    std::set<EdgeKey> out;
    for (const auto& e : edges_) {
        out.emplace(e.caller, e.callee);
    }
    return out;
}

std::set<EdgeKey> CallGraph::retained_pairs() const
{
    auto out = all_pairs();
    for (const auto& b : broken_) {
        out.erase(b);
    }
    return out;
}

namespace {

using Adjacency = std::map<std::string, std::vector<std::string>>;

Adjacency adjacency(const std::set<std::string>& nodes, const std::set<EdgeKey>& pairs, bool reversed)
{
    Adjacency adj;
    for (const auto& n : nodes) {
        adj[n];
    }
    for (const auto& [a, b] : pairs) {
        if (reversed) {
            adj[b].push_back(a);
        } else {
            adj[a].push_back(b);
        }
    }
    for (auto& [n, list] : adj) {
        std::sort(list.begin(), list.end());
    }
    return adj;
}

// Returns the edges of one directed cycle, or an empty vector when acyclic.
std::vector<EdgeKey> find_cycle(const Adjacency& adj)
{
    enum class Color { White, Gray, Black };
    std::map<std::string, Color> color;
    for (const auto& [n, _] : adj) {
        color[n] = Color::White;
    }
    for (const auto& [start, _] : adj) {
        if (color[start] != Color::White) {
            continue;
        }
        // (node, next child index)
        std::vector<std::pair<std::string, std::size_t>> stack{{start, 0}};
        color[start] = Color::Gray;
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            const auto& children = adj.at(node);
            if (idx >= children.size()) {
                color[node] = Color::Black;
                stack.pop_back();
                continue;
            }
            const auto child = children[idx++];
            if (color[child] == Color::Gray) {
                std::vector<EdgeKey> cycle;
                auto it = std::find_if(stack.begin(), stack.end(), [&](const auto& fr) { return fr.first == child; });
                for (; it != stack.end(); ++it) {
                    const auto next = std::next(it) == stack.end() ? child : std::next(it)->first;
                    cycle.emplace_back(it->first, next);
                }
                return cycle;
            }
            if (color[child] == Color::White) {
                color[child] = Color::Gray;
                stack.emplace_back(child, 0);
            }
        }
    }
    return {};
}

std::vector<std::string> kahn(const std::set<std::string>& nodes, const std::set<EdgeKey>& pairs, bool callees_first)
{
    // A node becomes ready once all its prerequisites are emitted. For the behavior
    // pass the prerequisites of a caller are its callees; for semantics, its callers.
    std::map<std::string, std::size_t> pending;
    std::map<std::string, std::vector<std::string>> unlocks;
    for (const auto& n : nodes) {
        pending[n] = 0;
    }
    for (const auto& [caller, callee] : pairs) {
        if (callees_first) {
            ++pending[caller];
            unlocks[callee].push_back(caller);
        } else {
            ++pending[callee];
            unlocks[caller].push_back(callee);
        }
    }
    std::set<std::string> ready;
    for (const auto& [n, c] : pending) {
        if (c == 0) {
            ready.insert(n);
        }
    }
    std::vector<std::string> order;
    order.reserve(nodes.size());
    while (!ready.empty()) {
        const auto n = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(n);
        for (const auto& m : unlocks[n]) {
            if (--pending[m] == 0) {
                ready.insert(m);
            }
        }
    }
    return order;
}

} // namespace

void CallGraph::break_cycles()
{
    std::sort(edges_.begin(), edges_.end());
    broken_.clear();
    while (true) {
        const auto cycle = find_cycle(adjacency(nodes_, retained_pairs(), false));
        if (cycle.empty()) {
            break;
        }
        broken_.insert(*std::max_element(cycle.begin(), cycle.end()));
    }
}

std::vector<std::string> CallGraph::callees(const std::string& f) const
{
    std::set<std::string> out;
    for (const auto& [a, b] : retained_pairs()) {
        if (a == f) {
            out.insert(b);
        }
    }
    return {out.begin(), out.end()};
}

std::vector<std::string> CallGraph::callers(const std::string& f) const
{
    std::set<std::string> out;
    for (const auto& [a, b] : retained_pairs()) {
        if (b == f) {
            out.insert(a);
        }
    }
    return {out.begin(), out.end()};
}

std::vector<std::string> CallGraph::broken_callees(const std::string& f) const
{
    std::vector<std::string> out;
    for (const auto& [a, b] : broken_) {
        if (a == f) {
            out.push_back(b);
        }
    }
    return out;
}

std::vector<std::string> CallGraph::broken_callers(const std::string& f) const
{
    std::vector<std::string> out;
    for (const auto& [a, b] : broken_) {
        if (b == f) {
            out.push_back(a);
        }
    }
    return out;
}

bool CallGraph::is_root(const std::string& f) const
{
    for (const auto& [a, b] : retained_pairs()) {
        if (b == f) {
            return false;
        }
    }
    return true;
}

nlohmann::json CallGraph::to_json() const
{
    using nlohmann::json;
    json edges = json::array();
    for (const auto& e : edges_) {
        edges.push_back({{"caller", e.caller},
                         {"callee", e.callee},
                         {"call_site", {{"file", e.call_site.file}, {"line", e.call_site.line}}},
                         {"argument_texts", e.call_site.argument_texts}});
    }
    json broken = json::array();
    for (const auto& [a, b] : broken_) {
        broken.push_back({{"caller", a}, {"callee", b}});
    }
    return {{"nodes", nodes_}, {"edges", edges}, {"broken_edges", broken}, {"diagnostics", diagnostics}};
}

std::string CallGraph::to_dot() const
{
    std::ostringstream out;
    out << "digraph calls {\n";
    for (const auto& n : nodes_) {
        out << "  \"" << n << "\";\n";
    }
    for (const auto& [a, b] : all_pairs()) {
        out << "  \"" << a << "\" -> \"" << b << "\"";
        if (broken_.count({a, b}) != 0) {
            out << " [style=dashed]";
        }
        out << ";\n";
    }
    out << "}\n";
    return out.str();
}

namespace {

struct Range {
    std::size_t first;
    std::size_t last;
    int statement_end;
};

void own_ranges(const std::vector<Statement>& body, const Module& m, std::vector<Range>& out)
{
    for (const auto& s : body) {
        if (is_definition(s, m)) {
            continue;
        }
        if (s.compound) {
            out.push_back({s.first, s.last, s.header_end_line});
            own_ranges(s.body, m, out);
        } else {
            out.push_back({s.first, s.last, s.end_line});
        }
    }
}

class Resolver {
public:
    explicit Resolver(const ProjectIndex& index) : index_(index) {}

    struct Target {
        enum class Kind { Unit, Module } kind;
        std::string name;
    };

    std::optional<std::string> resolve_call(const CodeUnit& caller, const std::vector<std::string>& chain) const
    {
        if (chain.empty()) {
            return std::nullopt;
        }
        // self.method(...) / cls.method(...)
        if (chain.size() == 2) {
            if (const auto cls = receiver_class(caller, chain[0])) {
                if (auto m = find_method(*cls, chain[1], 0)) {
                    return m;
                }
                return std::nullopt;
            }
        }
        std::optional<Target> target;
        std::size_t consumed = 1;
        // longest `import a.b.c` binding that prefixes the chain
        for (std::size_t len = chain.size() - 1; len >= 2 && !target; --len) {
            std::vector<std::string> prefix(chain.begin(), chain.begin() + static_cast<std::ptrdiff_t>(len));
            const auto dotted = join(prefix, ".");
            for (const auto& b : index_.imports(caller.module_path)) {
                if (b.symbol.empty() && b.local == dotted) {
                    target = Target{Target::Kind::Module, b.module};
                    consumed = len;
                    break;
                }
            }
        }
        if (!target) {
            target = resolve_name(caller, chain[0]);
        }
        if (!target) {
            return std::nullopt;
        }
        for (std::size_t i = consumed; i < chain.size() && target; ++i) {
            target = member(*target, chain[i], 0);
        }
        if (!target || target->kind != Target::Kind::Unit) {
            return std::nullopt;
        }
        return callable(target->name);
    }

private:
    std::optional<std::string> callable(const std::string& name) const
    {
        const auto it = index_.units().find(name);
        if (it == index_.units().end()) {
            return std::nullopt;
        }
        if (it->second.is_callable()) {
            return name;
        }
        if (auto ctor = find_method(name, "__init__", 0)) {
            return ctor;
        }
        return std::nullopt;
    }

    std::optional<std::string> receiver_class(const CodeUnit& caller, const std::string& name) const
    {
        const CodeUnit* u = &caller;
        while (u != nullptr) {
            if ((u->kind == UnitKind::Method || u->kind == UnitKind::Constructor) && !u->parameters.empty() &&
                u->parameters.front().receiver) {
                if (u->parameters.front().name == name) {
                    return u->parent;
                }
                return std::nullopt;
            }
            if (u->parent.empty()) {
                break;
            }
            const auto it = index_.units().find(u->parent);
            u = it == index_.units().end() ? nullptr : &it->second;
        }
        return std::nullopt;
    }

    std::optional<std::string> find_method(const std::string& cls, const std::string& name, int depth) const
    {
        const auto candidate = cls + "." + name;
        if (const auto it = index_.units().find(candidate); it != index_.units().end() && it->second.is_callable()) {
            return candidate;
        }
        if (depth > 4) {
            return std::nullopt;
        }
        const auto it = index_.units().find(cls);
        if (it == index_.units().end()) {
            return std::nullopt;
        }
        for (const auto& base : it->second.bases) {
            std::vector<std::string> parts;
            std::stringstream ss(base);
            std::string p;
            while (std::getline(ss, p, '.')) {
                parts.push_back(trim(p));
            }
            if (parts.empty()) {
                continue;
            }
            std::optional<Target> t = resolve_name(it->second, parts[0]);
            for (std::size_t i = 1; i < parts.size() && t; ++i) {
                t = member(*t, parts[i], 0);
            }
            if (t && t->kind == Target::Kind::Unit) {
                if (auto m = find_method(t->name, name, depth + 1)) {
                    return m;
                }
            }
        }
        return std::nullopt;
    }

    std::optional<Target> resolve_name(const CodeUnit& from, const std::string& name) const
    {
        // enclosing function scopes (class scopes are not visible to nested functions)
        const CodeUnit* u = &from;
        while (u != nullptr) {
            if (u->is_callable() || u == &from) {
                const auto candidate = u->qualified_name + "." + name;
                if (index_.units().count(candidate) != 0) {
                    return Target{Target::Kind::Unit, candidate};
                }
            }
            if (u->parent.empty()) {
                break;
            }
            const auto it = index_.units().find(u->parent);
            u = it == index_.units().end() ? nullptr : &it->second;
        }
        return resolve_global(from.module_path, name, 0);
    }

    std::optional<Target> resolve_global(const std::string& module, const std::string& name, int depth) const
    {
        const auto candidate = module.empty() ? name : module + "." + name;
        if (index_.units().count(candidate) != 0) {
            return Target{Target::Kind::Unit, candidate};
        }
        if (depth > 3) {
            return std::nullopt;
        }
        for (const auto& b : index_.imports(module)) {
            if (b.local == name && b.symbol != "*") {
                if (b.symbol.empty()) {
                    return Target{Target::Kind::Module, b.module};
                }
                return member(Target{Target::Kind::Module, b.module}, b.symbol, depth + 1);
            }
        }
        for (const auto& b : index_.imports(module)) {
            if (b.symbol == "*") {
                if (auto t = resolve_global(b.module, name, depth + 1)) {
                    return t;
                }
            }
        }
        return std::nullopt;
    }

    std::optional<Target> member(const Target& t, const std::string& name, int depth) const
    {
        if (t.kind == Target::Kind::Module) {
            const auto sub = t.name.empty() ? name : t.name + "." + name;
            if (index_.units().count(sub) != 0) {
                return Target{Target::Kind::Unit, sub};
            }
            if (index_.modules().count(sub) != 0) {
                return Target{Target::Kind::Module, sub};
            }
            return resolve_global(t.name, name, depth + 1);
        }
        const auto it = index_.units().find(t.name);
        if (it != index_.units().end() && it->second.kind == UnitKind::SubjectClass) {
            if (auto m = find_method(t.name, name, 0)) {
                return Target{Target::Kind::Unit, *m};
            }
            const auto nested = t.name + "." + name;
            if (index_.units().count(nested) != 0) {
                return Target{Target::Kind::Unit, nested};
            }
        }
        return std::nullopt;
    }

    const ProjectIndex& index_;
};

} // namespace

CallGraph build_call_graph(const ProjectIndex& index)
{
    CallGraph cg;
    Resolver resolver(index);
    for (const auto* unit : index.callables()) {
        cg.add_node(unit->qualified_name);
    }
    for (const auto* unit : index.callables()) {
        const auto* module = index.module_for_file(unit->file);
        if (module == nullptr) {
            continue;
        }
        const auto* def = find_definition(module->statements(), *module, unit->span.start_line);
        if (def == nullptr) {
            continue;
        }
        std::vector<Range> ranges;
        own_ranges(def->body, *module, ranges);
        const auto& toks = module->tokens();
        for (const auto& r : ranges) {
            for (std::size_t i = r.first; i < r.last; ++i) {
                if (!toks[i].is_op("(") || i == r.first) {
                    continue;
                }
                // walk back over NAME ('.' NAME)*
                std::size_t k = i - 1;
                if (toks[k].kind != TokenKind::Name) {
                    continue;
                }
                std::vector<std::string> chain{toks[k].text};
                while (k >= r.first + 2 && toks[k - 1].is_op(".") && toks[k - 2].kind == TokenKind::Name) {
                    k -= 2;
                    chain.insert(chain.begin(), toks[k].text);
                }
                if (k > r.first) {
                    const auto& before = toks[k - 1];
                    if (before.is_op(".") || before.is_name("def") || before.is_name("class")) {
                        continue;
                    }
                }
                if (python::is_keyword(chain.front())) {
                    continue;
                }
                const auto callee = resolver.resolve_call(*unit, chain);
                if (!callee) {
                    continue;
                }
                const auto close = module->matching_close(i);
                CallSite site;
                site.file = unit->file;
                site.line = toks[k].line;
                site.statement_end = r.statement_end;
                for (auto [b, e] : python::split_top_level(toks, i + 1, std::min(close, r.last))) {
                    if (b < e) {
                        site.argument_texts.push_back(module->text(b, e));
                    }
                }
                cg.add_edge({unit->qualified_name, *callee, std::move(site)});
            }
        }
    }
    cg.break_cycles();
    return cg;
}

std::vector<CallInstance> pre_existing_instances(const CallGraph& cg, const ProjectIndex& index, const std::string& f,
                                                 std::size_t cap)
{
    std::vector<CallInstance> out;
    for (const auto& e : cg.edges()) {
        if (e.callee != f) {
            continue;
        }
        const auto* caller = index.find(e.caller);
        if (caller == nullptr) {
            continue;
        }
        const auto* module = index.module_for_file(caller->file);
        if (module == nullptr) {
            continue;
        }
        CallInstance ci;
        ci.callee = f;
        ci.caller = e.caller;
        ci.context = module->lines(caller->span.start_line, e.call_site.statement_end);
        ci.argument_texts = e.call_site.argument_texts;
        ci.context_length = utf8_length(ci.context);
        ci.call_line = e.call_site.line;
        out.push_back(std::move(ci));
    }
    std::stable_sort(out.begin(), out.end(), [](const CallInstance& a, const CallInstance& b) {
        return std::tie(a.context_length, a.caller, a.call_line) < std::tie(b.context_length, b.caller, b.call_line);
    });
    if (out.size() > cap) {
        out.resize(cap);
    }
    return out;
}

std::vector<std::string> behavior_order(const CallGraph& cg)
{
    return kahn(cg.nodes(), cg.retained_pairs(), /*callees_first=*/true);
}

std::vector<std::string> semantics_order(const CallGraph& cg)
{
    return kahn(cg.nodes(), cg.retained_pairs(), /*callees_first=*/false);
}

} // namespace typeforge
