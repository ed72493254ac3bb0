#pragma once

#include <algorithm>
#include <compare>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace amrqe {

// Relation edge between two variables, stored in normalized direction: an
// ":arg0-of" surface edge is stored as arg0 with `inverted` set, so triple
// extraction and serialization agree on one graph.
struct AmrEdge {
    std::string source;
    std::string relation;
    std::string target;
    bool inverted = false;

    std::string surface_parent() const { return inverted ? target : source; }
    std::string surface_child() const { return inverted ? source : target; }
    std::string surface_label() const { return inverted ? relation + "-of" : relation; }
};

// Constant-valued attachment (:polarity -, :wiki "Q76", :quant 3). The value
// keeps its surface form, quotes included.
struct AmrAttr {
    std::string source;
    std::string relation;
    std::string value;
};

struct Triple {
    enum class Kind : int { Instance = 0, Attribute = 1, Relation = 2 };
    Kind kind = Kind::Instance;
    std::string source;
    std::string relation;
    std::string target;

    friend bool operator==(const Triple& a, const Triple& b) = default;
    friend std::strong_ordering operator<=>(const Triple& a, const Triple& b) {
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        if (auto c = a.source <=> b.source; c != 0) return c;
        if (auto c = a.relation <=> b.relation; c != 0) return c;
        return a.target <=> b.target;
    }
};

inline constexpr const char* kTopRelation = "top";

class AmrGraph {
  public:
    std::string root;
    std::vector<std::pair<std::string, std::string>> nodes;  // (variable, concept), first-mention order
    std::vector<AmrEdge> edges;                              // surface order
    std::vector<AmrAttr> attributes;                         // surface order

    bool has_node(const std::string& var) const { return index_.count(var) != 0; }

    const std::string& concept_of(const std::string& var) const {
        auto it = index_.find(var);
        if (it == index_.end()) throw std::invalid_argument("unknown variable: " + var);
        return nodes[it->second].second;
    }

    // Takes by value: arguments may reference strings inside this graph,
    // which emplace_back would otherwise invalidate before use.
    void add_node(std::string var, std::string concept_name) {
        if (has_node(var)) throw std::invalid_argument("duplicate variable: " + var);
        index_[var] = nodes.size();
        nodes.emplace_back(std::move(var), std::move(concept_name));
        if (root.empty()) root = nodes.back().first;
    }

    void set_concept(const std::string& var, const std::string& concept_name) {
        auto it = index_.find(var);
        if (it == index_.end()) throw std::invalid_argument("unknown variable: " + var);
        nodes[it->second].second = concept_name;
    }

    // Adds a surface edge `parent :label child`; labels ending in "-of" are
    // normalized here.
    void add_edge(const std::string& parent, const std::string& label, const std::string& child) {
        AmrEdge e;
        if (label.size() > 3 && label.ends_with("-of")) {
            e.relation = label.substr(0, label.size() - 3);
            e.source = child;
            e.target = parent;
            e.inverted = true;
        } else {
            e.relation = label;
            e.source = parent;
            e.target = child;
            e.inverted = false;
        }
        edges.push_back(std::move(e));
    }

    void add_attr(const std::string& var, const std::string& relation, const std::string& value) {
        attributes.push_back({var, relation, value});
    }

    void rebuild_index() {
        index_.clear();
        for (size_t i = 0; i < nodes.size(); ++i) index_[nodes[i].first] = i;
    }

  private:
    std::unordered_map<std::string, size_t> index_;
};

// True when every node is reachable from the root by following surface
// parent-to-child edges. This is the property serialization depends on: a
// node that never appears as a surface child of a reachable node has no
// place to be printed.
inline bool surface_connected(const AmrGraph& g) {
    if (!g.has_node(g.root)) return false;
    std::unordered_map<std::string, std::vector<std::string>> children;
    for (const auto& e : g.edges) children[e.surface_parent()].push_back(e.surface_child());
    std::unordered_set<std::string> reach{g.root};
    std::vector<std::string> stack{g.root};
    while (!stack.empty()) {
        std::string v = stack.back();
        stack.pop_back();
        for (const auto& n : children[v])
            if (reach.insert(n).second) stack.push_back(n);
    }
    return reach.size() == g.nodes.size();
}

// A graph is usable when the root exists, every edge and attribute touches a
// known variable, concepts are non-empty, and every node is surface-reachable
// from the root.
inline void validate(const AmrGraph& g) {
    if (g.nodes.empty()) throw std::invalid_argument("graph has no nodes");
    if (!g.has_node(g.root)) throw std::invalid_argument("root is not a node: " + g.root);
    std::unordered_set<std::string> seen;
    for (const auto& [var, concept_name] : g.nodes) {
        if (var.empty()) throw std::invalid_argument("empty variable name");
        if (concept_name.empty()) throw std::invalid_argument("empty concept on variable " + var);
        if (!seen.insert(var).second) throw std::invalid_argument("duplicate variable: " + var);
    }
    for (const auto& e : g.edges) {
        if (!g.has_node(e.source) || !g.has_node(e.target))
            throw std::invalid_argument("edge endpoint is not a node: " + e.source + " " +
                                        e.relation + " " + e.target);
    }
    for (const auto& a : g.attributes) {
        if (!g.has_node(a.source))
            throw std::invalid_argument("attribute source is not a node: " + a.source);
    }
    if (!surface_connected(g))
        throw std::invalid_argument("graph is not connected from the root");
}

// The root is encoded as one extra attribute triple so that variable mapping
// scores it like any other triple.
inline std::vector<Triple> to_triples(const AmrGraph& g) {
    std::vector<Triple> out;
    out.reserve(g.nodes.size() + g.edges.size() + g.attributes.size() + 1);
    for (const auto& [var, concept_name] : g.nodes)
        out.push_back({Triple::Kind::Instance, var, "instance", concept_name});
    for (const auto& e : g.edges)
        out.push_back({Triple::Kind::Relation, e.source, e.relation, e.target});
    for (const auto& a : g.attributes)
        out.push_back({Triple::Kind::Attribute, a.source, a.relation, a.value});
    out.push_back({Triple::Kind::Attribute, g.root, kTopRelation, g.concept_of(g.root)});
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace detail {

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

// Walks the graph in surface order (attributes first, then edges, both in
// stored order), expanding each node at its first visit and emitting a bare
// variable token on re-entry.
template <class NodeOpen, class NodeClose, class AttrFn, class EdgeFn, class ReentFn>
void surface_walk(const AmrGraph& g, const std::string& var,
                  std::unordered_set<std::string>& visited, NodeOpen open, NodeClose close,
                  AttrFn attr_fn, EdgeFn edge_fn, ReentFn reent_fn) {
    visited.insert(var);
    open(var);
    for (const auto& a : g.attributes)
        if (a.source == var) attr_fn(a);
    for (const auto& e : g.edges) {
        if (e.surface_parent() != var) continue;
        const std::string child = e.surface_child();
        if (visited.count(child)) {
            reent_fn(e, child);
        } else {
            edge_fn(e);
            surface_walk(g, child, visited, open, close, attr_fn, edge_fn, reent_fn);
        }
    }
    close(var);
}

}  // namespace detail

// Depth-first token sequence: brackets, concepts, ":"-prefixed relation
// labels, attribute values without quotes, and bare variables at reentrant
// mentions.
inline std::vector<std::string> linearize_dfs(const AmrGraph& g) {
    validate(g);
    std::vector<std::string> out;
    std::unordered_set<std::string> visited;
    detail::surface_walk(
        g, g.root, visited,
        [&](const std::string& v) {
            out.push_back("(");
            out.push_back(g.concept_of(v));
        },
        [&](const std::string&) { out.push_back(")"); },
        [&](const AmrAttr& a) {
            out.push_back(":" + a.relation);
            out.push_back(detail::unquote(a.value));
        },
        [&](const AmrEdge& e) { out.push_back(":" + e.surface_label()); },
        [&](const AmrEdge& e, const std::string& child) {
            out.push_back(":" + e.surface_label());
            out.push_back(child);
        });
    return out;
}

inline void rename_variables(AmrGraph& g, const std::function<std::string(const std::string&)>& fn) {
    for (auto& [var, concept_name] : g.nodes) var = fn(var);
    for (auto& e : g.edges) {
        e.source = fn(e.source);
        e.target = fn(e.target);
    }
    for (auto& a : g.attributes) a.source = fn(a.source);
    g.root = fn(g.root);
    g.rebuild_index();
}

}  // namespace amrqe
