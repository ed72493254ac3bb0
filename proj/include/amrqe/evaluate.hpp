#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "amrqe/graph.hpp"
#include "amrqe/rng.hpp"
#include "amrqe/score.hpp"
#include "amrqe/smatch.hpp"

namespace amrqe {

// "produce-01" -> "produce"; anything not ending in "-dd" is returned as is.
inline std::string strip_sense_suffix(const std::string& concept_name) {
    size_t n = concept_name.size();
    if (n >= 4 && concept_name[n - 3] == '-' && std::isdigit(static_cast<unsigned char>(concept_name[n - 2])) &&
        std::isdigit(static_cast<unsigned char>(concept_name[n - 1])))
        return concept_name.substr(0, n - 3);
    return concept_name;
}

inline bool has_sense_suffix(const std::string& concept_name) {
    return strip_sense_suffix(concept_name).size() != concept_name.size();
}

namespace detail {

inline Prf set_f1(std::vector<std::string> cand, std::vector<std::string> gold) {
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    std::vector<std::string> both;
    std::set_intersection(cand.begin(), cand.end(), gold.begin(), gold.end(),
                          std::back_inserter(both));
    return prf_from_counts(static_cast<long long>(both.size()), static_cast<long long>(cand.size()),
                           static_cast<long long>(gold.size()));
}

inline bool is_arg_relation(const std::string& rel) {
    return rel.size() == 4 && rel.starts_with("ARG") &&
           std::isdigit(static_cast<unsigned char>(rel[3]));
}

inline bool is_op_relation(const std::string& rel, int& num) {
    if (rel.size() < 3 || !rel.starts_with("op")) return false;
    for (size_t i = 2; i < rel.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(rel[i]))) return false;
    num = std::stoi(rel.substr(2));
    return true;
}

struct TaskItems {
    std::vector<std::string> concepts;
    std::vector<std::string> named;
    std::vector<std::string> negations;
    std::vector<std::string> wiki;
    std::vector<std::string> frames;
    std::vector<std::string> ns_frames;
    std::vector<std::string> ignore_vars;
};

inline TaskItems collect_items(const AmrGraph& g, const std::vector<Triple>& triples) {
    TaskItems items;
    for (const auto& [var, concept_name] : g.nodes) {
        items.concepts.push_back(concept_name);
        if (has_sense_suffix(concept_name)) {
            items.frames.push_back(concept_name);
            items.ns_frames.push_back(strip_sense_suffix(concept_name));
        }
    }
    // Named entities: entity concept plus the name node's :op string.
    for (const auto& e : g.edges) {
        if (e.relation != "name") continue;
        std::vector<std::pair<int, std::string>> ops;
        for (const auto& a : g.attributes) {
            int num = 0;
            if (a.source == e.target && is_op_relation(a.relation, num))
                ops.emplace_back(num, unquote(a.value));
        }
        std::sort(ops.begin(), ops.end());
        std::string joined;
        for (const auto& [num, w] : ops) {
            if (!joined.empty()) joined += ' ';
            joined += w;
        }
        items.named.push_back(g.concept_of(e.source) + "\t" + joined);
    }
    for (const auto& a : g.attributes) {
        if (a.relation == "polarity" && a.value == "-")
            items.negations.push_back(g.concept_of(a.source));
        if (a.relation == "wiki") items.wiki.push_back(g.concept_of(a.source) + "\t" + a.value);
    }
    // Variable-free view: every non-instance triple with variables replaced
    // by their concepts.
    for (const auto& t : triples) {
        if (t.kind == Triple::Kind::Instance) continue;
        std::string src = g.concept_of(t.source);
        std::string tgt = t.kind == Triple::Kind::Relation ? g.concept_of(t.target) : t.target;
        items.ignore_vars.push_back(t.relation + "\t" + src + "\t" + tgt);
    }
    return items;
}

// Relation triples whose label is unlabeled (all mapped to "rel").
inline std::vector<Triple> unlabel(const std::vector<Triple>& triples) {
    std::vector<Triple> out = triples;
    for (auto& t : out)
        if (t.kind == Triple::Kind::Relation) t.relation = "rel";
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Sense suffixes removed from instance concepts and the top marker.
inline std::vector<Triple> strip_senses_from_triples(const std::vector<Triple>& triples) {
    std::vector<Triple> out = triples;
    for (auto& t : out) {
        if (t.kind == Triple::Kind::Instance) t.target = strip_sense_suffix(t.target);
        if (t.kind == Triple::Kind::Attribute && t.relation == kTopRelation)
            t.target = strip_sense_suffix(t.target);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Subgraph of relation triples selected by `keep`, plus the instance triples
// of every variable they touch.
template <class Keep>
std::vector<Triple> relation_subgraph(const std::vector<Triple>& triples, Keep&& keep) {
    std::vector<Triple> out;
    std::unordered_set<std::string> vars;
    for (const auto& t : triples) {
        if (t.kind != Triple::Kind::Relation || !keep(t)) continue;
        out.push_back(t);
        vars.insert(t.source);
        vars.insert(t.target);
    }
    for (const auto& t : triples)
        if (t.kind == Triple::Kind::Instance && vars.count(t.source)) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<Triple> reentrancy_subgraph(const std::vector<Triple>& triples) {
    std::unordered_map<std::string, int> in_degree;
    for (const auto& t : triples)
        if (t.kind == Triple::Kind::Relation) ++in_degree[t.target];
    return relation_subgraph(triples, [&](const Triple& t) { return in_degree[t.target] > 1; });
}

inline std::vector<Triple> srl_subgraph(const std::vector<Triple>& triples) {
    return relation_subgraph(triples, [](const Triple& t) { return is_arg_relation(t.relation); });
}

}  // namespace detail

// The full per-sentence evaluation: Smatch plus eleven task-focused variants,
// each reported as precision/recall/F1. Search-based tasks share the restart
// budget; per-task seeds are derived from `seed` so results are reproducible.
inline ScoreVector evaluate_all(const AmrGraph& cand, const AmrGraph& gold,
                                int restarts = kDefaultRestarts, uint64_t seed = 0) {
    ScoreVector sv;
    const auto ct = to_triples(cand);
    const auto gt = to_triples(gold);
    auto task_seed = [&](Task t) { return Rng::mix(seed, static_cast<uint64_t>(t)); };

    sv[Task::Smatch] = smatch_triples(ct, gt, restarts, task_seed(Task::Smatch));
    sv[Task::Unlabeled] = smatch_triples(detail::unlabel(ct), detail::unlabel(gt), restarts,
                                         task_seed(Task::Unlabeled));
    sv[Task::NoWsd] =
        smatch_triples(detail::strip_senses_from_triples(ct), detail::strip_senses_from_triples(gt),
                       restarts, task_seed(Task::NoWsd));
    sv[Task::Reentrancies] =
        smatch_triples(detail::reentrancy_subgraph(ct), detail::reentrancy_subgraph(gt), restarts,
                       task_seed(Task::Reentrancies));
    sv[Task::Srl] = smatch_triples(detail::srl_subgraph(ct), detail::srl_subgraph(gt), restarts,
                                   task_seed(Task::Srl));

    const auto ci = detail::collect_items(cand, ct);
    const auto gi = detail::collect_items(gold, gt);
    sv[Task::Concepts] = detail::set_f1(ci.concepts, gi.concepts);
    sv[Task::NamedEntities] = detail::set_f1(ci.named, gi.named);
    sv[Task::Negations] = detail::set_f1(ci.negations, gi.negations);
    sv[Task::Wikification] = detail::set_f1(ci.wiki, gi.wiki);
    sv[Task::Frames] = detail::set_f1(ci.frames, gi.frames);
    sv[Task::NonSenseFrames] = detail::set_f1(ci.ns_frames, gi.ns_frames);
    sv[Task::IgnoreVars] = detail::set_f1(ci.ignore_vars, gi.ignore_vars);
    return sv;
}

// Row emitted for a candidate that failed to parse.
inline ScoreVector zero_scores() { return ScoreVector{}; }

}  // namespace amrqe
