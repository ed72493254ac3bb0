#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "amrqe/dep.hpp"
#include "amrqe/evaluate.hpp"
#include "amrqe/graph.hpp"
#include "amrqe/preprocess.hpp"
#include "amrqe/rng.hpp"
#include "amrqe/score.hpp"

namespace amrqe {

enum class CorruptionOp : int {
    DeleteEdge = 0,
    RelabelEdge,
    SubstituteConcept,
    FlipSense,
    DropNegation,
    DeleteSubtree,
    SwapWiki,
    BreakReentrancy,
};

inline const std::vector<std::pair<std::string, CorruptionOp>>& corruption_op_names() {
    static const std::vector<std::pair<std::string, CorruptionOp>> names = {
        {"delete-edge", CorruptionOp::DeleteEdge},
        {"relabel-edge", CorruptionOp::RelabelEdge},
        {"substitute-concept", CorruptionOp::SubstituteConcept},
        {"flip-sense", CorruptionOp::FlipSense},
        {"drop-negation", CorruptionOp::DropNegation},
        {"delete-subtree", CorruptionOp::DeleteSubtree},
        {"swap-wiki", CorruptionOp::SwapWiki},
        {"break-reentrancy", CorruptionOp::BreakReentrancy},
    };
    return names;
}

inline std::vector<CorruptionOp> all_corruption_ops() {
    std::vector<CorruptionOp> ops;
    for (const auto& [name, op] : corruption_op_names()) ops.push_back(op);
    return ops;
}

// `severity` ops are applied, each drawn uniformly from the multiset `ops`;
// an op with no applicable site is skipped and counted.
struct CorruptionSpec {
    std::vector<CorruptionOp> ops = all_corruption_ops();
    int severity = 1;
    uint64_t seed = 0;
};

// Deterministic pool of pronounceable pseudo-lemmas plus the relation
// inventory the generator draws from.
struct GenPools {
    std::vector<std::string> lemmas;
    std::vector<double> lemma_cdf;  // Zipf-weighted
    std::vector<std::string> arg_relations;
    std::vector<std::string> other_relations;
    std::vector<std::string> fillers;
    std::vector<std::string> dep_labels;
};

inline GenPools make_gen_pools(int n_lemmas = 300) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m",
                                   "n", "p", "r", "s", "t", "v", "z"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    GenPools p;
    for (int i = 0; i < n_lemmas; ++i) {
        // (i % 14, (i/14) % 5, (i/70) % 14) is unique for i < 980
        std::string w = std::string(onsets[i % 14]) + vowels[(i / 14) % 5] +
                        onsets[(i / 70) % 14] + vowels[(i * 7 + 3) % 5];
        p.lemmas.push_back(std::move(w));
    }
    double acc = 0.0;
    for (int i = 0; i < n_lemmas; ++i) acc += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
    double norm = acc;
    acc = 0.0;
    for (int i = 0; i < n_lemmas; ++i) {
        acc += 1.0 / std::pow(static_cast<double>(i + 1), 1.1);
        p.lemma_cdf.push_back(acc / norm);
    }
    p.arg_relations = {"ARG0", "ARG1", "ARG2", "ARG3"};
    p.other_relations = {"mod",    "time",   "location", "manner",  "degree",
                         "topic",  "domain", "purpose",  "poss",    "part",
                         "extent", "source", "beneficiary"};
    p.fillers = {"the", "a", "of", "to", "in", "on", "and", "is", "was", "with"};
    p.dep_labels = {"nsubj", "obj", "nmod", "det", "case", "advmod", "amod", "conj", "obl"};
    return p;
}

namespace detail {

inline const std::string& sample_lemma(const GenPools& p, Rng& rng) {
    double u = rng.real01();
    size_t lo = 0, hi = p.lemma_cdf.size();
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (p.lemma_cdf[mid] < u)
            lo = mid + 1;
        else
            hi = mid;
    }
    return p.lemmas[std::min(lo, p.lemmas.size() - 1)];
}

inline std::string fresh_var(const AmrGraph& g, const std::string& concept_name) {
    std::string base(1, concept_name.empty() ? 'x' : concept_name[0]);
    if (!g.has_node(base)) return base;
    for (int i = 2;; ++i) {
        std::string v = base + std::to_string(i);
        if (!g.has_node(v)) return v;
    }
}

inline std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    return w;
}

}  // namespace detail

struct GoldSentence {
    AmrGraph graph;
    std::vector<std::string> tokens;
};

// Random gold graph plus a sentence whose words cover the graph's lemmas, so
// pointer alignment has something to find. Graphs get senses, reentrancies,
// polarity, wiki links, names and quantities with fixed probabilities.
inline GoldSentence gen_gold(const GenPools& pools, Rng& rng, int n_nodes) {
    if (n_nodes < 1) throw std::invalid_argument("gen_gold: need at least one node");
    AmrGraph g;
    auto make_concept = [&] {
        std::string c = detail::sample_lemma(pools, rng);
        if (rng.chance(0.2)) c += "-0" + std::to_string(1 + rng.index(3));
        return c;
    };
    auto pick_relation = [&] {
        if (rng.chance(0.4)) return pools.arg_relations[rng.index(pools.arg_relations.size())];
        return pools.other_relations[rng.index(pools.other_relations.size())];
    };
    {
        std::string c = make_concept();
        g.add_node(detail::fresh_var(g, c), c);
    }
    for (int i = 1; i < n_nodes; ++i) {
        const std::string parent = g.nodes[rng.index(g.nodes.size())].first;
        std::string c = make_concept();
        std::string var = detail::fresh_var(g, c);
        g.add_node(var, c);
        std::string label = pick_relation();
        if (rng.chance(0.15)) label += "-of";
        g.add_edge(parent, label, var);
    }
    // Extra incoming edges create reentrancies; targets are already placed,
    // so these surface as bare variable mentions.
    if (n_nodes > 2) {
        int extra = static_cast<int>(std::lround(rng.uniform(0.1, 0.3) * (n_nodes - 1)));
        for (int e = 0; e < extra; ++e) {
            for (int attempt = 0; attempt < 8; ++attempt) {
                const std::string& src = g.nodes[rng.index(g.nodes.size())].first;
                const std::string& tgt = g.nodes[rng.index(g.nodes.size())].first;
                if (src == tgt) continue;
                std::string rel = pick_relation();
                bool dup = false;
                for (const auto& ed : g.edges)
                    if (ed.source == src && ed.target == tgt && ed.relation == rel) dup = true;
                if (dup) continue;
                g.add_edge(src, rel, tgt);
                break;
            }
        }
    }
    if (rng.chance(0.25)) g.add_attr(g.nodes[rng.index(g.nodes.size())].first, "polarity", "-");
    if (rng.chance(0.2)) {
        const std::string& v = g.nodes[rng.index(g.nodes.size())].first;
        g.add_attr(v, "wiki", "\"Q" + std::to_string(1 + rng.below(99999)) + "\"");
    }
    if (rng.chance(0.25)) {
        const std::string host = g.nodes[rng.index(g.nodes.size())].first;
        std::string nv = detail::fresh_var(g, "name");
        g.add_node(nv, "name");
        g.add_edge(host, "name", nv);
        const int n_ops = 1 + static_cast<int>(rng.chance(0.3));
        for (int i = 0; i < n_ops; ++i) {
            g.add_attr(nv, "op" + std::to_string(i + 1),
                       "\"" + detail::capitalize(detail::sample_lemma(pools, rng)) + "\"");
        }
    }
    if (rng.chance(0.15))
        g.add_attr(g.nodes[rng.index(g.nodes.size())].first, "quant",
                   std::to_string(1 + rng.below(9999)));

    GoldSentence out;
    out.graph = g;
    std::unordered_set<std::string> visited;
    std::function<void(const std::string&)> walk = [&](const std::string& v) {
        visited.insert(v);
        std::vector<std::string> words;
        const std::string& concept_name = g.concept_of(v);
        bool negated = false;
        for (const auto& a : g.attributes) {
            if (a.source != v) continue;
            if (a.relation == "polarity" && a.value == "-") negated = true;
        }
        if (negated) words.push_back("not");
        if (concept_name != "name") words.push_back(strip_sense_suffix(concept_name));
        for (const auto& a : g.attributes) {
            if (a.source != v) continue;
            int opn = 0;
            if (detail::is_op_relation(a.relation, opn)) words.push_back(detail::unquote(a.value));
            if (a.relation == "quant") words.push_back(a.value);
        }
        for (const auto& w : words) {
            if (rng.chance(0.2)) out.tokens.push_back(pools.fillers[rng.index(pools.fillers.size())]);
            out.tokens.push_back(w);
        }
        for (const auto& e : g.edges) {
            if (e.surface_parent() != v) continue;
            const std::string child = e.surface_child();
            if (!visited.count(child)) walk(child);
        }
    };
    walk(g.root);
    if (!out.tokens.empty()) out.tokens.back() += ".";
    return out;
}

// Random dependency tree over the sentence tokens: each token attaches to an
// earlier one.
inline DepTree gen_dep_tree(const GenPools& pools, Rng& rng,
                            const std::vector<std::string>& sentence_tokens) {
    std::vector<std::string> forms = tokenize_sentence(
        [&] {
            std::string s;
            for (const auto& t : sentence_tokens) {
                if (!s.empty()) s += ' ';
                s += t;
            }
            return s;
        }());
    DepTree t;
    t.forms = forms;
    t.lemmas.resize(forms.size());
    for (size_t i = 0; i < forms.size(); ++i) t.lemmas[i] = fallback_lemma(forms[i]);
    t.heads.resize(forms.size());
    t.labels.resize(forms.size());
    for (size_t i = 0; i < forms.size(); ++i) {
        if (i == 0) {
            t.heads[i] = -1;
            t.labels[i] = "root";
        } else {
            t.heads[i] = static_cast<int>(rng.index(i));
            t.labels[i] = forms[i] == "." ? "punct"
                                          : pools.dep_labels[rng.index(pools.dep_labels.size())];
        }
    }
    return t;
}

struct CorruptResult {
    AmrGraph graph;
    int applied = 0;
    int skipped = 0;
};

namespace detail {

inline bool delete_edge_keeps_graph(AmrGraph g, size_t edge_idx) {
    g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(edge_idx));
    return surface_connected(g);
}

// Removes `var` and everything that only hangs off it, keeping the graph
// surface-connected.
inline void remove_subtree(AmrGraph& g, const std::string& var) {
    std::vector<AmrEdge> kept_edges;
    for (const auto& e : g.edges)
        if (e.source != var && e.target != var) kept_edges.push_back(e);
    g.edges = std::move(kept_edges);
    // Nodes that lost their surface attachment go too, transitively.
    for (;;) {
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
        reach.erase(var);
        std::vector<std::pair<std::string, std::string>> kept_nodes;
        for (const auto& n : g.nodes)
            if (reach.count(n.first)) kept_nodes.push_back(n);
        if (kept_nodes.size() == g.nodes.size()) break;
        g.nodes = std::move(kept_nodes);
        g.rebuild_index();
        std::vector<AmrEdge> edges2;
        for (const auto& e : g.edges)
            if (g.has_node(e.source) && g.has_node(e.target)) edges2.push_back(e);
        g.edges = std::move(edges2);
    }
    std::vector<AmrAttr> kept_attrs;
    for (const auto& a : g.attributes)
        if (g.has_node(a.source)) kept_attrs.push_back(a);
    g.attributes = std::move(kept_attrs);
}

}  // namespace detail

// Applies spec.severity random corruption ops to a copy of the graph. Every
// produced graph stays valid (parseable and surface-connected).
inline CorruptResult corrupt(const AmrGraph& gold, const CorruptionSpec& spec,
                             const GenPools& pools) {
    CorruptResult res;
    res.graph = gold;
    AmrGraph& g = res.graph;
    Rng rng(spec.seed);
    if (spec.severity > 0 && spec.ops.empty())
        throw std::invalid_argument("corrupt: empty op multiset with positive severity");
    for (int step = 0; step < spec.severity; ++step) {
        const CorruptionOp op = spec.ops[rng.index(spec.ops.size())];
        bool done = false;
        switch (op) {
            case CorruptionOp::DeleteEdge: {
                std::vector<size_t> cands;
                for (size_t i = 0; i < g.edges.size(); ++i)
                    if (detail::delete_edge_keeps_graph(g, i)) cands.push_back(i);
                if (!cands.empty()) {
                    size_t idx = cands[rng.index(cands.size())];
                    g.edges.erase(g.edges.begin() + static_cast<std::ptrdiff_t>(idx));
                    done = true;
                }
                break;
            }
            case CorruptionOp::RelabelEdge: {
                if (!g.edges.empty()) {
                    AmrEdge& e = g.edges[rng.index(g.edges.size())];
                    for (int attempt = 0; attempt < 16; ++attempt) {
                        std::string rel =
                            rng.chance(0.4)
                                ? pools.arg_relations[rng.index(pools.arg_relations.size())]
                                : pools.other_relations[rng.index(pools.other_relations.size())];
                        if (rel != e.relation) {
                            e.relation = rel;
                            done = true;
                            break;
                        }
                    }
                }
                break;
            }
            case CorruptionOp::SubstituteConcept: {
                const auto& [var, concept_name] = g.nodes[rng.index(g.nodes.size())];
                for (int attempt = 0; attempt < 16; ++attempt) {
                    const std::string& lemma = detail::sample_lemma(pools, rng);
                    if (lemma != concept_name) {
                        g.set_concept(var, lemma);
                        done = true;
                        break;
                    }
                }
                break;
            }
            case CorruptionOp::FlipSense: {
                std::vector<size_t> cands;
                for (size_t i = 0; i < g.nodes.size(); ++i)
                    if (has_sense_suffix(g.nodes[i].second)) cands.push_back(i);
                if (!cands.empty()) {
                    auto& [var, concept_name] = g.nodes[cands[rng.index(cands.size())]];
                    std::string old = concept_name.substr(concept_name.size() - 2);
                    std::string fresh;
                    do {
                        fresh = "0" + std::to_string(1 + rng.index(9));
                    } while (fresh == old);
                    g.set_concept(var, concept_name.substr(0, concept_name.size() - 2) + fresh);
                    done = true;
                }
                break;
            }
            case CorruptionOp::DropNegation: {
                std::vector<size_t> cands;
                for (size_t i = 0; i < g.attributes.size(); ++i)
                    if (g.attributes[i].relation == "polarity" && g.attributes[i].value == "-")
                        cands.push_back(i);
                if (!cands.empty()) {
                    size_t idx = cands[rng.index(cands.size())];
                    g.attributes.erase(g.attributes.begin() + static_cast<std::ptrdiff_t>(idx));
                    done = true;
                }
                break;
            }
            case CorruptionOp::DeleteSubtree: {
                if (g.nodes.size() > 1) {
                    std::string var;
                    do {
                        var = g.nodes[rng.index(g.nodes.size())].first;
                    } while (var == g.root);
                    detail::remove_subtree(g, var);
                    done = true;
                }
                break;
            }
            case CorruptionOp::SwapWiki: {
                std::vector<size_t> cands;
                for (size_t i = 0; i < g.attributes.size(); ++i)
                    if (g.attributes[i].relation == "wiki") cands.push_back(i);
                if (!cands.empty()) {
                    AmrAttr& a = g.attributes[cands[rng.index(cands.size())]];
                    std::string fresh;
                    do {
                        fresh = "\"Q" + std::to_string(1 + rng.below(99999)) + "\"";
                    } while (fresh == a.value);
                    a.value = fresh;
                    done = true;
                }
                break;
            }
            case CorruptionOp::BreakReentrancy: {
                std::unordered_map<std::string, int> in_degree;
                for (const auto& e : g.edges) ++in_degree[e.target];
                std::vector<size_t> cands;
                for (size_t i = 0; i < g.edges.size(); ++i)
                    if (in_degree[g.edges[i].target] > 1) cands.push_back(i);
                rng.shuffle(cands);
                for (size_t idx : cands) {
                    AmrGraph trial = g;
                    const std::string old_target = trial.edges[idx].target;
                    std::string fresh = detail::fresh_var(trial, trial.concept_of(old_target));
                    trial.add_node(fresh, trial.concept_of(old_target));
                    trial.edges[idx].target = fresh;
                    if (surface_connected(trial)) {
                        g = std::move(trial);
                        done = true;
                        break;
                    }
                }
                break;
            }
        }
        if (done)
            ++res.applied;
        else
            ++res.skipped;
    }
    validate(g);
    return res;
}

// ---- corpus generation ----

struct SystemSpec {
    std::string name;
    CorruptionSpec corruption;  // seed field is re-derived per instance
};

struct GenOptions {
    int sentences = 500;
    int nodes_min = 3;
    int nodes_max = 10;
    uint64_t seed = 7;
    int restarts = kDefaultRestarts;
    std::vector<SystemSpec> systems;
};

struct GeneratedCorpus {
    std::vector<std::string> ids;
    std::vector<std::string> sentences;  // space-joined tokens
    std::vector<AmrGraph> gold;
    std::vector<DepTree> deps;
    std::vector<std::string> system_names;
    std::vector<std::vector<AmrGraph>> parses;     // [system][sentence]
    std::vector<std::vector<ScoreVector>> scores;  // [system][sentence], true scores
    std::vector<int> applied, skipped;             // per system
};

inline GeneratedCorpus gen_training_corpus(const GenOptions& opt, const GenPools& pools) {
    if (opt.systems.empty()) throw std::invalid_argument("gen_training_corpus: no systems");
    if (opt.nodes_min < 1 || opt.nodes_max < opt.nodes_min)
        throw std::invalid_argument("gen_training_corpus: bad node range");
    GeneratedCorpus out;
    const size_t n_sys = opt.systems.size();
    out.system_names.reserve(n_sys);
    for (const auto& s : opt.systems) out.system_names.push_back(s.name);
    out.parses.assign(n_sys, {});
    out.scores.assign(n_sys, {});
    out.applied.assign(n_sys, 0);
    out.skipped.assign(n_sys, 0);
    for (int i = 0; i < opt.sentences; ++i) {
        Rng rng(Rng::mix(opt.seed, static_cast<uint64_t>(i)));
        const int n_nodes =
            opt.nodes_min + static_cast<int>(rng.index(opt.nodes_max - opt.nodes_min + 1));
        GoldSentence gs = gen_gold(pools, rng, n_nodes);
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "s%05d", i);
        out.ids.emplace_back(idbuf);
        std::string snt;
        for (const auto& t : gs.tokens) {
            if (!snt.empty()) snt += ' ';
            snt += t;
        }
        out.sentences.push_back(std::move(snt));
        out.deps.push_back(gen_dep_tree(pools, rng, gs.tokens));
        for (size_t s = 0; s < n_sys; ++s) {
            CorruptionSpec spec = opt.systems[s].corruption;
            spec.seed = Rng::mix(Rng::mix(opt.seed, static_cast<uint64_t>(i)),
                                 static_cast<uint64_t>(s) + 1);
            CorruptResult cr = corrupt(gs.graph, spec, pools);
            out.applied[s] += cr.applied;
            out.skipped[s] += cr.skipped;
            const uint64_t eval_seed =
                Rng::mix(opt.seed, static_cast<uint64_t>(i) * n_sys + s + 0x5eedull);
            out.scores[s].push_back(evaluate_all(cr.graph, gs.graph, opt.restarts, eval_seed));
            out.parses[s].push_back(std::move(cr.graph));
        }
        out.gold.push_back(std::move(gs.graph));
    }
    return out;
}

}  // namespace amrqe
