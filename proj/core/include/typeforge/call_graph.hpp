// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "typeforge/code_index.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace typeforge {

struct CallSite {
    std::string file;
    int line = 0;           ///< line of the callee expression
    int statement_end = 0;  ///< last line of the statement (or compound header) holding the call
    std::vector<std::string> argument_texts;

    friend auto operator<=>(const CallSite&, const CallSite&) = default;
};

struct CallEdge {
    std::string caller;
    std::string callee;
    CallSite call_site;

    friend auto operator<=>(const CallEdge&, const CallEdge&) = default;
};

using EdgeKey = std::pair<std::string, std::string>; // (caller, callee)

class CallGraph {
public:
    CallGraph() = default;

    /// Graph over explicit nodes and (caller, callee) pairs; cycles are broken immediately.
    static CallGraph from_pairs(const std::set<std::string>& nodes, const std::vector<EdgeKey>& pairs);

    void add_node(const std::string& name) { nodes_.insert(name); }
    void add_edge(CallEdge edge);

    /// Sorts the edges, then marks edges broken until the retained graph is acyclic. Among the edges of each
    /// detected cycle the lexicographically greatest (caller, callee) pair goes.
    void break_cycles();

    const std::set<std::string>& nodes() const noexcept { return nodes_; }
    const std::vector<CallEdge>& edges() const noexcept { return edges_; }
    const std::set<EdgeKey>& broken_edges() const noexcept { return broken_; }

    /// Distinct (caller, callee) pairs, excluding broken ones.
    std::set<EdgeKey> retained_pairs() const;
    std::set<EdgeKey> all_pairs() const;

    /// Called(f): callees over retained edges.
    std::vector<std::string> callees(const std::string& f) const;
    /// Call(f): callers over retained edges.
    std::vector<std::string> callers(const std::string& f) const;
    /// Callees reached only through broken edges.
    std::vector<std::string> broken_callees(const std::string& f) const;
    std::vector<std::string> broken_callers(const std::string& f) const;

    /// Zero in-degree over the retained edges.
    bool is_root(const std::string& f) const;

    nlohmann::json to_json() const;
    std::string to_dot() const;

    std::vector<std::string> diagnostics;

private:
    std::set<std::string> nodes_;
    std::vector<CallEdge> edges_;
    std::set<EdgeKey> broken_;
};

struct CallInstance {
    std::string callee;
    std::string caller;
    std::string context; ///< caller source cut right after the statement holding the call
    std::vector<std::string> argument_texts;
    std::size_t context_length = 0; ///< code points in `context`
    int call_line = 0;
};

inline constexpr std::size_t kDefaultInstanceCap = 3;

CallGraph build_call_graph(const ProjectIndex& index);

std::vector<CallInstance> pre_existing_instances(const CallGraph& cg, const ProjectIndex& index,
                                                 const std::string& f, std::size_t cap = kDefaultInstanceCap);

/// Callees before callers; ties by qualified name.
std::vector<std::string> behavior_order(const CallGraph& cg);

/// Callers before callees; ties by qualified name.
std::vector<std::string> semantics_order(const CallGraph& cg);

} // namespace typeforge
