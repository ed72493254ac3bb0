#pragma once

#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "amrqe/preprocess.hpp"
#include "amrqe/score.hpp"
#include "amrqe/vocab.hpp"

namespace amrqe {

// One model-ready instance: id-encoded streams (truncated to max_len, not
// padded; padding happens at batch assembly) plus optional regression targets.
struct EncodedInstance {
    std::string id;
    std::vector<int> amr_tok, amr_ptr, amr_sense;
    std::vector<int> dep_tok, dep_ptr;
    std::vector<int> snt_tok, snt_ptr;
    std::array<double, kNumScores> targets{};
    bool has_targets = false;
    bool parse_ok = true;
};

namespace detail {

inline void encode_stream(const Vocab& v, const std::vector<std::string>& toks,
                          const std::vector<int>& ptrs, std::vector<int>& tok_out,
                          std::vector<int>& ptr_out) {
    const size_t n = std::min(toks.size(), static_cast<size_t>(v.max_len()));
    tok_out.reserve(n);
    ptr_out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        tok_out.push_back(v.token_id(toks[i]));
        ptr_out.push_back(v.pointer_id(ptrs[i]));
    }
}

}  // namespace detail

// Sequences longer than max_len are truncated from the right.
inline EncodedInstance encode(const LinearizedInput& in, const Vocab& v) {
    EncodedInstance e;
    detail::encode_stream(v, in.amr_tokens, in.amr_pointers, e.amr_tok, e.amr_ptr);
    const size_t n = e.amr_tok.size();
    e.amr_sense.reserve(n);
    for (size_t i = 0; i < n; ++i) e.amr_sense.push_back(v.sense_id(in.amr_senses[i]));
    detail::encode_stream(v, in.dep_tokens, in.dep_pointers, e.dep_tok, e.dep_ptr);
    detail::encode_stream(v, in.snt_tokens, in.snt_pointers, e.snt_tok, e.snt_ptr);
    return e;
}

// JSONL serialization, one instance per line; field order is fixed so output
// is reproducible byte for byte.
inline void write_jsonl(std::ostream& out, const std::vector<EncodedInstance>& data) {
    for (const auto& e : data) {
        nlohmann::ordered_json j;
        j["id"] = e.id;
        j["parse_ok"] = e.parse_ok;
        j["amr_tok"] = e.amr_tok;
        j["amr_ptr"] = e.amr_ptr;
        j["amr_sense"] = e.amr_sense;
        j["dep_tok"] = e.dep_tok;
        j["dep_ptr"] = e.dep_ptr;
        j["snt_tok"] = e.snt_tok;
        j["snt_ptr"] = e.snt_ptr;
        if (e.has_targets) j["targets"] = e.targets;
        out << j.dump() << "\n";
    }
}

inline std::vector<EncodedInstance> read_jsonl(std::istream& in) {
    std::vector<EncodedInstance> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& ex) {
            throw std::runtime_error("dataset line " + std::to_string(lineno) + ": " + ex.what());
        }
        EncodedInstance e;
        e.id = j.value("id", "");
        e.parse_ok = j.value("parse_ok", true);
        auto fill = [&](const char* key, std::vector<int>& dst) {
            if (j.contains(key)) dst = j[key].get<std::vector<int>>();
        };
        fill("amr_tok", e.amr_tok);
        fill("amr_ptr", e.amr_ptr);
        fill("amr_sense", e.amr_sense);
        fill("dep_tok", e.dep_tok);
        fill("dep_ptr", e.dep_ptr);
        fill("snt_tok", e.snt_tok);
        fill("snt_ptr", e.snt_ptr);
        if (j.contains("targets")) {
            auto t = j["targets"].get<std::vector<double>>();
            if (t.size() != kNumScores)
                throw std::runtime_error("dataset line " + std::to_string(lineno) +
                                         ": expected " + std::to_string(kNumScores) + " targets");
            std::copy(t.begin(), t.end(), e.targets.begin());
            e.has_targets = true;
        }
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<EncodedInstance> read_jsonl_text(const std::string& text) {
    std::istringstream in(text);
    return read_jsonl(in);
}

}  // namespace amrqe
