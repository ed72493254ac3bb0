#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrqe/graph.hpp"
#include "amrqe/util.hpp"

namespace amrqe {

class ParseError : public std::runtime_error {
  public:
    int line;
    int col;
    ParseError(const std::string& msg, int line_, int col_)
        : std::runtime_error(msg + " (line " + std::to_string(line_) + ", col " +
                             std::to_string(col_) + ")"),
          line(line_),
          col(col_) {}
};

namespace detail {

struct PenmanToken {
    enum Type { LParen, RParen, Slash, Label, Atom, Str, End } type = End;
    std::string text;
    int line = 1;
    int col = 1;
};

class PenmanLexer {
  public:
    explicit PenmanLexer(std::string_view text) : text_(text) {}

    PenmanToken next() {
        skip_space_and_comments();
        PenmanToken tok;
        tok.line = line_;
        tok.col = col_;
        if (pos_ >= text_.size()) return tok;
        char c = text_[pos_];
        if (c == '(') {
            tok.type = PenmanToken::LParen;
            advance();
        } else if (c == ')') {
            tok.type = PenmanToken::RParen;
            advance();
        } else if (c == '/') {
            tok.type = PenmanToken::Slash;
            advance();
        } else if (c == '"') {
            tok.type = PenmanToken::Str;
            tok.text = read_string();
        } else {
            tok.type = c == ':' ? PenmanToken::Label : PenmanToken::Atom;
            while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
                   text_[pos_] != '(' && text_[pos_] != ')' && text_[pos_] != '/') {
                tok.text += text_[pos_];
                advance();
            }
        }
        return tok;
    }

  private:
    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space_and_comments() {
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '#' && col_ == 1 && depth_hint_ == 0) {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else {
                if (c == '(') ++depth_hint_;
                return;
            }
        }
    }

    std::string read_string() {
        std::string out = "\"";
        int start_line = line_, start_col = col_;
        advance();  // opening quote
        while (pos_ < text_.size() && text_[pos_] != '"') {
            out += text_[pos_];
            advance();
        }
        if (pos_ >= text_.size()) throw ParseError("unterminated string", start_line, start_col);
        out += '"';
        advance();  // closing quote
        return out;
    }

    std::string_view text_;
    size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    int depth_hint_ = 0;
};

struct PendingRef {
    std::string parent;
    std::string label;
    std::string text;
    int line, col;
};

class PenmanParser {
  public:
    explicit PenmanParser(std::string_view text) : lexer_(text) { tok_ = lexer_.next(); }

    AmrGraph parse() {
        expect(PenmanToken::LParen, "expected '('");
        parse_node();
        if (tok_.type != PenmanToken::End)
            throw ParseError("trailing content after graph", tok_.line, tok_.col);
        // A bare token is an edge to an already defined variable, otherwise a
        // constant. Resolution has to wait until every definition is seen.
        for (const auto& ref : pending_) {
            if (graph_.has_node(ref.text))
                graph_.add_edge(ref.parent, ref.label, ref.text);
            else
                graph_.add_attr(ref.parent, ref.label, ref.text);
        }
        return std::move(graph_);
    }

  private:
    void expect(PenmanToken::Type t, const char* msg) {
        if (tok_.type != t) throw ParseError(msg, tok_.line, tok_.col);
        tok_ = lexer_.next();
    }

    // tok_ is just past '('.
    std::string parse_node() {
        if (tok_.type != PenmanToken::Atom)
            throw ParseError("expected a variable after '('", tok_.line, tok_.col);
        std::string var = tok_.text;
        if (graph_.has_node(var))
            throw ParseError("duplicate definition of variable '" + var + "'", tok_.line, tok_.col);
        tok_ = lexer_.next();
        if (tok_.type != PenmanToken::Slash)
            throw ParseError("expected '/' and a concept after variable '" + var + "'", tok_.line,
                             tok_.col);
        tok_ = lexer_.next();
        if (tok_.type != PenmanToken::Atom && tok_.type != PenmanToken::Str)
            throw ParseError("expected a concept after '/'", tok_.line, tok_.col);
        graph_.add_node(var, tok_.text);
        tok_ = lexer_.next();
        while (tok_.type == PenmanToken::Label) {
            std::string label = tok_.text.substr(1);
            if (label.empty()) throw ParseError("empty relation label", tok_.line, tok_.col);
            tok_ = lexer_.next();
            if (tok_.type == PenmanToken::LParen) {
                tok_ = lexer_.next();
                std::string child = parse_node();
                graph_.add_edge(var, label, child);
            } else if (tok_.type == PenmanToken::Atom) {
                pending_.push_back({var, label, tok_.text, tok_.line, tok_.col});
                tok_ = lexer_.next();
            } else if (tok_.type == PenmanToken::Str) {
                graph_.add_attr(var, label, tok_.text);
                tok_ = lexer_.next();
            } else {
                throw ParseError("missing value after relation ':" + label + "'", tok_.line,
                                 tok_.col);
            }
        }
        expect(PenmanToken::RParen, "expected ')'");
        return var;
    }

    PenmanLexer lexer_;
    PenmanToken tok_;
    AmrGraph graph_;
    std::vector<PendingRef> pending_;
};

}  // namespace detail

// Parses one PENMAN expression. "# ::"-style comment lines before and between
// top-level tokens are skipped. Throws ParseError with position on malformed
// input.
inline AmrGraph parse_penman(std::string_view text) {
    detail::PenmanParser parser(text);
    AmrGraph g = parser.parse();
    validate(g);
    return g;
}

// Single-line canonical form. Attributes print before edges at each node;
// reentrant mentions print as the bare variable. parse(serialize(g)) has the
// same triples as g.
inline std::string serialize_penman(const AmrGraph& g) {
    validate(g);
    std::string out;
    std::unordered_set<std::string> visited;
    bool first = true;
    auto sep = [&] {
        if (!first) out += ' ';
        first = false;
    };
    detail::surface_walk(
        g, g.root, visited,
        [&](const std::string& v) {
            sep();
            out += "(" + v + " / " + g.concept_of(v);
            first = false;
        },
        [&](const std::string&) { out += ")"; },
        [&](const AmrAttr& a) { out += " :" + a.relation + " " + a.value; },
        [&](const AmrEdge& e) { out += " :" + e.surface_label(); },
        [&](const AmrEdge& e, const std::string& child) {
            out += " :" + e.surface_label() + " " + child;
        });
    if (visited.size() != g.nodes.size())
        throw std::invalid_argument("graph is not connected from the root");
    return out;
}

// One block of a corpus file: optional "# ::key value" metadata lines followed
// by a PENMAN expression, blocks separated by blank lines.
struct CorpusEntry {
    std::string id;
    std::string snt;
    std::string penman;
};

inline std::vector<CorpusEntry> read_corpus(std::istream& in) {
    std::vector<CorpusEntry> out;
    CorpusEntry cur;
    bool any = false;
    auto flush = [&] {
        if (any && !trim(cur.penman).empty()) out.push_back(cur);
        cur = {};
        any = false;
    };
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            flush();
            continue;
        }
        any = true;
        if (line.starts_with("#")) {
            auto grab = [&](std::string_view key) -> std::string {
                size_t at = line.find(key);
                return trim(line.substr(at + key.size()));
            };
            if (line.find("::id ") != std::string::npos) {
                auto parts = split_ws(grab("::id "));
                if (!parts.empty()) cur.id = parts[0];
            } else if (line.find("::snt ") != std::string::npos) {
                cur.snt = grab("::snt ");
            }
            continue;
        }
        cur.penman += line;
        cur.penman += '\n';
    }
    flush();
    return out;
}

inline std::vector<CorpusEntry> read_corpus_text(const std::string& text) {
    std::istringstream in(text);
    return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<CorpusEntry>& entries) {
    for (const auto& e : entries) {
        if (!e.id.empty()) out << "# ::id " << e.id << "\n";
        if (!e.snt.empty()) out << "# ::snt " << e.snt << "\n";
        out << e.penman;
        if (!e.penman.ends_with('\n')) out << "\n";
        out << "\n";
    }
}

}  // namespace amrqe
