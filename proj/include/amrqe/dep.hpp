#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrqe/util.hpp"

namespace amrqe {

class DepFormatError : public std::runtime_error {
  public:
    explicit DepFormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// One dependency tree; heads are 0-based token indices, -1 for the root.
struct DepTree {
    std::vector<std::string> forms;
    std::vector<std::string> lemmas;
    std::vector<int> heads;
    std::vector<std::string> labels;

    size_t size() const { return forms.size(); }
};

// Reads blank-line separated blocks of "index form lemma head deprel" rows
// (1-based index, head 0 marks the root). Rejects out-of-range heads and
// cycles.
inline std::vector<DepTree> read_dep_tsv(std::istream& in) {
    std::vector<DepTree> out;
    DepTree cur;
    int block = 1;
    auto flush = [&] {
        if (cur.size() == 0) return;
        const int n = static_cast<int>(cur.size());
        for (int h : cur.heads)
            if (h >= n)
                throw DepFormatError("dependency block " + std::to_string(block) +
                                     ": head out of range");
        if (std::find(cur.heads.begin(), cur.heads.end(), -1) == cur.heads.end())
            throw DepFormatError("dependency block " + std::to_string(block) + ": no root");
        for (int i = 0; i < n; ++i) {
            int steps = 0;
            for (int v = i; v != -1; v = cur.heads[v]) {
                if (++steps > n)
                    throw DepFormatError("dependency block " + std::to_string(block) +
                                         ": cycle through token " + std::to_string(i + 1));
            }
        }
        out.push_back(std::move(cur));
        cur = {};
        ++block;
    };
    std::string line;
    size_t expect_index = 1;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            flush();
            expect_index = 1;
            continue;
        }
        auto cols = split(line, '\t');
        if (cols.size() == 1) cols = split_ws(line);
        if (cols.size() < 5)
            throw DepFormatError("dependency block " + std::to_string(block) +
                                 ": expected 5 columns, got " + std::to_string(cols.size()));
        size_t index = 0;
        int head = 0;
        try {
            index = std::stoul(cols[0]);
            head = std::stoi(cols[3]);
        } catch (const std::exception&) {
            throw DepFormatError("dependency block " + std::to_string(block) +
                                 ": non-numeric index or head");
        }
        if (index != expect_index)
            throw DepFormatError("dependency block " + std::to_string(block) +
                                 ": expected token index " + std::to_string(expect_index));
        ++expect_index;
        cur.forms.push_back(cols[1]);
        cur.lemmas.push_back(cols[2]);
        cur.heads.push_back(head - 1);
        cur.labels.push_back(cols[4]);
        if (head < 0)
            throw DepFormatError("dependency block " + std::to_string(block) + ": negative head");
    }
    flush();
    return out;
}

inline std::vector<DepTree> read_dep_tsv_text(const std::string& text) {
    std::istringstream in(text);
    return read_dep_tsv(in);
}

// Fallback when no parse is available: token 0 is the root, everything else
// attaches to it.
inline DepTree flat_dep_tree(const std::vector<std::string>& forms,
                             const std::vector<std::string>& lemmas) {
    if (forms.size() != lemmas.size())
        throw std::invalid_argument("flat_dep_tree: forms/lemmas length mismatch");
    DepTree t;
    t.forms = forms;
    t.lemmas = lemmas;
    t.heads.assign(forms.size(), 0);
    t.labels.assign(forms.size(), "dep");
    if (!forms.empty()) {
        t.heads[0] = -1;
        t.labels[0] = "root";
    }
    return t;
}

// Bracketed depth-first rendering of a dependency tree, with a parallel
// pointer stream: word tokens point at their sentence position, structural
// tokens (brackets and labels) carry -1.
struct DepLinearization {
    std::vector<std::string> tokens;
    std::vector<int> pointers;
};

inline DepLinearization linearize_dep(const DepTree& t) {
    DepLinearization out;
    if (t.size() == 0) return out;
    const int n = static_cast<int>(t.size());
    std::vector<std::vector<int>> children(n);
    std::vector<int> roots;
    for (int i = 0; i < n; ++i) {
        if (t.heads[i] == -1)
            roots.push_back(i);
        else
            children[t.heads[i]].push_back(i);
    }
    if (roots.empty()) throw DepFormatError("dependency tree has no root");
    // Multi-root blocks are tolerated: extra roots hang off the first.
    for (size_t r = 1; r < roots.size(); ++r) children[roots[0]].push_back(roots[r]);
    for (auto& c : children) std::sort(c.begin(), c.end());
    auto emit = [&](const std::string& tok, int ptr) {
        out.tokens.push_back(tok);
        out.pointers.push_back(ptr);
    };
    std::function<void(int)> walk = [&](int v) {
        emit("(", -1);
        emit(t.labels[v], -1);
        emit(t.forms[v], v);
        for (int c : children[v]) walk(c);
        emit(")", -1);
    };
    walk(roots[0]);
    return out;
}

}  // namespace amrqe
