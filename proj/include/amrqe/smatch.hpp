#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "amrqe/graph.hpp"
#include "amrqe/rng.hpp"
#include "amrqe/score.hpp"

namespace amrqe {

namespace detail {

// Triple matching problem with interned symbols. A candidate-to-gold variable
// mapping is scored by counting candidate triples whose image is a gold
// triple; instances and attributes need the source mapped, relations need
// both endpoints mapped.
class MatchProblem {
  public:
    MatchProblem(const std::vector<Triple>& cand, const std::vector<Triple>& gold) {
        for (const auto& t : cand) scan_vars(t, cand_var_ids_, cand_vars_);
        for (const auto& t : gold) scan_vars(t, gold_var_ids_, gold_vars_);
        if (cand_vars_.size() >= kVarLimit || gold_vars_.size() >= kVarLimit)
            throw std::length_error("too many variables to match");
        for (const auto& t : gold) {
            if (t.kind == Triple::Kind::Instance) {
                gold_keys_.insert(inst_key(gold_var_ids_[t.source], intern(t.target)));
                gold_concepts_[intern(t.target)].push_back(gold_var_ids_[t.source]);
            } else if (t.kind == Triple::Kind::Attribute) {
                gold_keys_.insert(attr_key(gold_var_ids_[t.source], intern(t.relation), intern(t.target)));
            } else {
                gold_keys_.insert(
                    rel_key(gold_var_ids_[t.source], intern(t.relation), gold_var_ids_[t.target]));
            }
        }
        for (auto& [c, vars] : gold_concepts_) std::sort(vars.begin(), vars.end());
        for (const auto& t : cand) {
            if (t.kind == Triple::Kind::Instance) {
                cand_inst_.push_back({cand_var_ids_[t.source], intern(t.target)});
            } else if (t.kind == Triple::Kind::Attribute) {
                cand_attr_.push_back({cand_var_ids_[t.source], intern(t.relation), intern(t.target)});
            } else {
                cand_rel_.push_back(
                    {cand_var_ids_[t.source], intern(t.relation), cand_var_ids_[t.target]});
            }
        }
    }

    int num_cand_vars() const { return static_cast<int>(cand_vars_.size()); }
    int num_gold_vars() const { return static_cast<int>(gold_vars_.size()); }

    int count_matches(const std::vector<int>& m) const {
        int n = 0;
        for (const auto& t : cand_inst_)
            if (m[t.v] >= 0 && gold_keys_.count(inst_key(m[t.v], t.concept_id))) ++n;
        for (const auto& t : cand_attr_)
            if (m[t.v] >= 0 && gold_keys_.count(attr_key(m[t.v], t.rel, t.val))) ++n;
        for (const auto& t : cand_rel_)
            if (m[t.s] >= 0 && m[t.t] >= 0 && gold_keys_.count(rel_key(m[t.s], t.rel, m[t.t]))) ++n;
        return n;
    }

    // Concept-overlap seed: each candidate variable takes the first unused
    // gold variable sharing its concept, in index order.
    std::vector<int> seed_mapping() const {
        std::vector<int> m(cand_vars_.size(), -1);
        std::vector<char> used(gold_vars_.size(), 0);
        for (const auto& t : cand_inst_) {
            if (m[t.v] >= 0) continue;
            auto it = gold_concepts_.find(t.concept_id);
            if (it == gold_concepts_.end()) continue;
            for (int gv : it->second) {
                if (!used[gv]) {
                    m[t.v] = gv;
                    used[gv] = 1;
                    break;
                }
            }
        }
        return m;
    }

    std::vector<int> random_mapping(Rng& rng) const {
        std::vector<int> gold_idx(gold_vars_.size());
        for (size_t i = 0; i < gold_idx.size(); ++i) gold_idx[i] = static_cast<int>(i);
        rng.shuffle(gold_idx);
        std::vector<int> order(cand_vars_.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        rng.shuffle(order);
        std::vector<int> m(cand_vars_.size(), -1);
        for (size_t i = 0; i < order.size() && i < gold_idx.size(); ++i) m[order[i]] = gold_idx[i];
        return m;
    }

    // Steepest-ascent over single moves: remap one candidate variable to a
    // free gold variable, unmap it, or swap assignments with another. Ties
    // break toward the lowest candidate-variable index (then lowest target).
    int hill_climb(std::vector<int>& m) const {
        const int P = num_cand_vars();
        const int G = num_gold_vars();
        std::vector<int> inv(G, -1);
        for (int i = 0; i < P; ++i)
            if (m[i] >= 0) inv[m[i]] = i;
        int score = count_matches(m);
        for (;;) {
            int best_delta = 0;
            int best_i = -1, best_j = -2;
            for (int i = 0; i < P; ++i) {
                for (int j = -1; j < G; ++j) {
                    if (j == m[i]) continue;
                    int old_i = m[i];
                    int other = j >= 0 ? inv[j] : -1;
                    m[i] = j;
                    if (other >= 0) m[other] = old_i;
                    int s = count_matches(m);
                    m[i] = old_i;
                    if (other >= 0) m[other] = j;
                    if (s - score > best_delta) {
                        best_delta = s - score;
                        best_i = i;
                        best_j = j;
                    }
                }
            }
            if (best_delta <= 0) break;
            int old_i = m[best_i];
            int other = best_j >= 0 ? inv[best_j] : -1;
            m[best_i] = best_j;
            if (old_i >= 0) inv[old_i] = -1;
            if (best_j >= 0) inv[best_j] = best_i;
            if (other >= 0) {
                m[other] = old_i;
                if (old_i >= 0) inv[old_i] = other;
            }
            score += best_delta;
        }
        return score;
    }

  private:
    static constexpr uint64_t kVarLimit = 1 << 15;

    struct CandInst {
        int v, concept_id;
    };
    struct CandAttr {
        int v, rel, val;
    };
    struct CandRel {
        int s, rel, t;
    };

    void scan_vars(const Triple& t, std::unordered_map<std::string, int>& ids,
                   std::vector<std::string>& names) {
        auto add = [&](const std::string& v) {
            if (ids.emplace(v, static_cast<int>(names.size())).second) names.push_back(v);
        };
        add(t.source);
        if (t.kind == Triple::Kind::Relation) add(t.target);
    }

    int intern(const std::string& s) {
        auto [it, fresh] = symbols_.emplace(s, static_cast<int>(symbols_.size()));
        (void)fresh;
        if (static_cast<uint64_t>(it->second) >= kSymLimit)
            throw std::length_error("too many distinct symbols to match");
        return it->second;
    }

    static constexpr uint64_t kSymLimit = 1 << 21;

    // Exact packing: kind(2) | var(15) | sym(21) | sym-or-var(21) fits 64 bits.
    static uint64_t inst_key(int v, int concept_id) {
        return (1ull << 60) | (static_cast<uint64_t>(v) << 42) | static_cast<uint64_t>(concept_id);
    }
    static uint64_t attr_key(int v, int rel, int val) {
        return (2ull << 60) | (static_cast<uint64_t>(v) << 42) |
               (static_cast<uint64_t>(rel) << 21) | static_cast<uint64_t>(val);
    }
    static uint64_t rel_key(int s, int rel, int t) {
        return (3ull << 60) | (static_cast<uint64_t>(s) << 42) |
               (static_cast<uint64_t>(rel) << 21) | static_cast<uint64_t>(t);
    }

    std::unordered_map<std::string, int> symbols_;
    std::unordered_map<std::string, int> cand_var_ids_, gold_var_ids_;
    std::vector<std::string> cand_vars_, gold_vars_;
    std::unordered_set<uint64_t> gold_keys_;
    std::unordered_map<int, std::vector<int>> gold_concepts_;
    std::vector<CandInst> cand_inst_;
    std::vector<CandAttr> cand_attr_;
    std::vector<CandRel> cand_rel_;
};

}  // namespace detail

inline constexpr int kDefaultRestarts = 4;

// Best match count under hill climbing from a concept-overlap seed plus
// `restarts` random starts.
inline int match_count(const std::vector<Triple>& cand, const std::vector<Triple>& gold,
                       int restarts = kDefaultRestarts, uint64_t seed = 0) {
    if (cand.empty() || gold.empty()) return 0;
    detail::MatchProblem problem(cand, gold);
    std::vector<int> m = problem.seed_mapping();
    int best = problem.hill_climb(m);
    Rng rng(seed);
    for (int r = 0; r < restarts; ++r) {
        std::vector<int> m2 = problem.random_mapping(rng);
        best = std::max(best, problem.hill_climb(m2));
    }
    return best;
}

// Smatch over two triple sets: precision/recall of the best injective
// variable mapping the search finds.
inline Prf smatch_triples(const std::vector<Triple>& cand, const std::vector<Triple>& gold,
                          int restarts = kDefaultRestarts, uint64_t seed = 0) {
    if (cand.empty() && gold.empty()) return {1.0, 1.0, 1.0};
    if (cand.empty() || gold.empty()) return {0.0, 0.0, 0.0};
    int best = match_count(cand, gold, restarts, seed);
    return prf_from_counts(best, static_cast<long long>(cand.size()),
                           static_cast<long long>(gold.size()));
}

inline Prf smatch(const AmrGraph& cand, const AmrGraph& gold, int restarts = kDefaultRestarts,
                  uint64_t seed = 0) {
    return smatch_triples(to_triples(cand), to_triples(gold), restarts, seed);
}

namespace detail {

// Enumerates every injective map of the smaller variable side into the other.
// Leaving a small-side variable unmapped can never help, so full maps suffice.
template <class Fn>
void enumerate_injections(int small, int big, std::vector<int>& m, std::vector<char>& used, int i,
                          Fn&& visit) {
    if (i == small) {
        visit(m);
        return;
    }
    for (int j = 0; j < big; ++j) {
        if (used[j]) continue;
        used[j] = 1;
        m[i] = j;
        enumerate_injections(small, big, m, used, i + 1, visit);
        used[j] = 0;
    }
}

inline double falling_factorial(int n, int k) {
    double out = 1.0;
    for (int i = 0; i < k; ++i) out *= n - i;
    return out;
}

}  // namespace detail

inline constexpr int kExhaustiveVarLimit = 8;
inline constexpr double kExhaustiveMappingLimit = 2e7;

// Exact Smatch by exhaustive enumeration. Refuses problems whose smaller
// variable side exceeds kExhaustiveVarLimit or whose mapping count exceeds
// kExhaustiveMappingLimit.
inline Prf smatch_exhaustive_triples(const std::vector<Triple>& cand,
                                     const std::vector<Triple>& gold) {
    if (cand.empty() && gold.empty()) return {1.0, 1.0, 1.0};
    if (cand.empty() || gold.empty()) return {0.0, 0.0, 0.0};
    detail::MatchProblem problem(cand, gold);
    const int P = problem.num_cand_vars();
    const int G = problem.num_gold_vars();
    const int small = std::min(P, G);
    const int big = std::max(P, G);
    if (small > kExhaustiveVarLimit)
        throw std::length_error("exhaustive matching limited to " +
                                std::to_string(kExhaustiveVarLimit) + " variables on one side");
    if (detail::falling_factorial(big, small) > kExhaustiveMappingLimit)
        throw std::length_error("exhaustive matching: too many injective mappings");
    int best = 0;
    std::vector<int> m(small, -1);
    std::vector<char> used(big, 0);
    if (P <= G) {
        detail::enumerate_injections(small, big, m, used, 0, [&](const std::vector<int>& mm) {
            best = std::max(best, problem.count_matches(mm));
        });
    } else {
        std::vector<int> inv(P, -1);
        detail::enumerate_injections(small, big, m, used, 0, [&](const std::vector<int>& mm) {
            std::fill(inv.begin(), inv.end(), -1);
            for (int g = 0; g < small; ++g) inv[mm[g]] = g;
            best = std::max(best, problem.count_matches(inv));
        });
    }
    return prf_from_counts(best, static_cast<long long>(cand.size()),
                           static_cast<long long>(gold.size()));
}

inline Prf smatch_exhaustive(const AmrGraph& cand, const AmrGraph& gold) {
    return smatch_exhaustive_triples(to_triples(cand), to_triples(gold));
}

}  // namespace amrqe
