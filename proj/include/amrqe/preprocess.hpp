#pragma once

#include <optional>
#include <string>
#include <vector>

#include "amrqe/dep.hpp"
#include "amrqe/evaluate.hpp"
#include "amrqe/graph.hpp"
#include "amrqe/util.hpp"

namespace amrqe {

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kOovToken = "<oov>";
inline constexpr const char* kNegToken = "<neg>";
inline constexpr const char* kNumToken = "<num>";

inline bool is_structural_token(const std::string& tok) {
    return tok == "(" || tok == ")" || (!tok.empty() && tok[0] == ':');
}

// Plain digits with optional sign, thousands commas and decimal part.
inline bool is_number_token(const std::string& tok) {
    size_t i = 0;
    if (i < tok.size() && (tok[i] == '+' || tok[i] == '-')) ++i;
    if (i >= tok.size()) return false;
    size_t digits = 0;
    bool seen_dot = false, prev_comma = false;
    for (; i < tok.size(); ++i) {
        char c = tok[i];
        if (c >= '0' && c <= '9') {
            ++digits;
            prev_comma = false;
        } else if (c == ',' && !seen_dot && digits > 0 && !prev_comma) {
            prev_comma = true;
        } else if (c == '.' && !seen_dot && !prev_comma) {
            seen_dot = true;
        } else {
            return false;
        }
    }
    return digits > 0 && !prev_comma && !(seen_dot && tok.back() == '.');
}

// Negation markers and numerals collapse onto placeholder tokens; structural
// tokens pass through.
inline std::vector<std::string> apply_special_tokens(std::vector<std::string> tokens) {
    for (auto& t : tokens) {
        if (is_structural_token(t)) continue;
        if (t == "-")
            t = kNegToken;
        else if (is_number_token(t))
            t = kNumToken;
    }
    return tokens;
}

// Splits sense suffixes off non-structural tokens into a parallel stream;
// empty string marks "no sense".
struct SenseSplit {
    std::vector<std::string> tokens;
    std::vector<std::string> senses;
};

inline SenseSplit strip_senses(const std::vector<std::string>& tokens) {
    SenseSplit out;
    out.tokens.reserve(tokens.size());
    out.senses.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (!is_structural_token(t) && has_sense_suffix(t)) {
            out.tokens.push_back(strip_sense_suffix(t));
            out.senses.push_back(t.substr(t.size() - 2));
        } else {
            out.tokens.push_back(t);
            out.senses.push_back("");
        }
    }
    return out;
}

// Whitespace tokenization with trailing sentence punctuation split off as its
// own token.
inline std::vector<std::string> tokenize_sentence(const std::string& snt) {
    static const std::string punct = ".,!?;:)\"'";
    std::vector<std::string> out;
    for (auto& w : split_ws(snt)) {
        std::vector<std::string> tail;
        while (w.size() > 1 && punct.find(w.back()) != std::string::npos) {
            tail.insert(tail.begin(), std::string(1, w.back()));
            w.pop_back();
        }
        out.push_back(w);
        for (auto& p : tail) out.push_back(std::move(p));
    }
    return out;
}

// Crude suffix-stripping lemma for when no dependency parse provides one.
inline std::string fallback_lemma(const std::string& form) {
    std::string w = lower(form);
    static const std::vector<std::string> suffixes = {"ing", "ed", "es", "s"};
    for (const auto& suf : suffixes) {
        if (w.size() > suf.size() + 1 && w.ends_with(suf))
            return w.substr(0, w.size() - suf.size());
    }
    return w;
}

// Each non-structural token claims the first unconsumed sentence position
// whose form or lemma matches case-insensitively; everything else gets -1.
inline std::vector<int> align_pointers(const std::vector<std::string>& seq,
                                       const std::vector<std::string>& forms,
                                       const std::vector<std::string>& lemmas) {
    std::vector<std::string> lforms(forms.size()), llemmas(lemmas.size());
    for (size_t i = 0; i < forms.size(); ++i) lforms[i] = lower(forms[i]);
    for (size_t i = 0; i < lemmas.size(); ++i) llemmas[i] = lower(lemmas[i]);
    std::vector<char> consumed(forms.size(), 0);
    std::vector<int> out(seq.size(), -1);
    for (size_t i = 0; i < seq.size(); ++i) {
        const auto& tok = seq[i];
        if (is_structural_token(tok) || tok == kNegToken || tok == kNumToken || tok == kPadToken)
            continue;
        std::string t = lower(tok);
        for (size_t j = 0; j < forms.size(); ++j) {
            if (consumed[j]) continue;
            if (lforms[j] == t || (j < llemmas.size() && llemmas[j] == t)) {
                out[i] = static_cast<int>(j);
                consumed[j] = 1;
                break;
            }
        }
    }
    return out;
}

// Everything the encoder consumes for one sentence, still in string form:
// the linearized graph stream with senses split off and pointers aligned,
// the dependency stream, and the raw word stream (used when training without
// a dependency encoder).
struct LinearizedInput {
    std::vector<std::string> amr_tokens;
    std::vector<std::string> amr_senses;  // "" where no sense
    std::vector<int> amr_pointers;
    std::vector<std::string> dep_tokens;
    std::vector<int> dep_pointers;
    std::vector<std::string> snt_tokens;
    std::vector<int> snt_pointers;
};

inline LinearizedInput build_input(const AmrGraph& g, const std::string& snt,
                                   const DepTree* dep = nullptr) {
    LinearizedInput in;
    DepTree tree;
    if (dep != nullptr) {
        tree = *dep;
    } else {
        auto forms = tokenize_sentence(snt);
        std::vector<std::string> lemmas(forms.size());
        for (size_t i = 0; i < forms.size(); ++i) lemmas[i] = fallback_lemma(forms[i]);
        tree = flat_dep_tree(forms, lemmas);
    }

    auto split = strip_senses(linearize_dfs(g));
    in.amr_tokens = apply_special_tokens(std::move(split.tokens));
    in.amr_senses = std::move(split.senses);
    in.amr_pointers = align_pointers(in.amr_tokens, tree.forms, tree.lemmas);

    auto dl = linearize_dep(tree);
    in.dep_tokens = apply_special_tokens(std::move(dl.tokens));
    in.dep_pointers = std::move(dl.pointers);

    in.snt_tokens = apply_special_tokens(tree.forms);
    in.snt_pointers.resize(in.snt_tokens.size());
    for (size_t i = 0; i < in.snt_pointers.size(); ++i)
        in.snt_pointers[i] = static_cast<int>(i);
    return in;
}

}  // namespace amrqe
