#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "amrqe/preprocess.hpp"
#include "amrqe/util.hpp"

namespace amrqe {

inline constexpr int kDefaultMinFreq = 5;
inline constexpr int kDefaultMaxLen = 256;

// Token and sense tables shared by the graph and dependency streams. Pointer
// ids are positional and need no table: 0 is padding, 1 is the "no pointer"
// value, position p maps to p+2, and max_len+2 catches out-of-range.
class Vocab {
  public:
    static constexpr int kPadId = 0;
    static constexpr int kOovId = 1;
    static constexpr int kNegId = 2;
    static constexpr int kNumId = 3;
    static constexpr int kSenseNoneId = 0;

    Vocab() = default;
    explicit Vocab(int max_len) : max_len_(max_len) { init_reserved(); }

    int max_len() const { return max_len_; }
    int token_count() const { return static_cast<int>(tokens_.size()); }
    int sense_count() const { return static_cast<int>(senses_.size()) + 2; }  // none + OOV
    int sense_oov_id() const { return static_cast<int>(senses_.size()) + 1; }
    int pointer_count() const { return max_len_ + 3; }
    int pointer_none_id() const { return 1; }
    int pointer_oov_id() const { return max_len_ + 2; }

    int token_id(const std::string& tok) const {
        auto it = token_ids_.find(tok);
        return it == token_ids_.end() ? kOovId : it->second;
    }

    const std::string& token_at(int id) const { return tokens_.at(id); }

    int sense_id(const std::string& sense) const {
        if (sense.empty()) return kSenseNoneId;
        auto it = sense_ids_.find(sense);
        return it == sense_ids_.end() ? sense_oov_id() : it->second;
    }

    int pointer_id(int pointer) const {
        if (pointer < 0) return pointer_none_id();
        if (pointer >= max_len_) return pointer_oov_id();
        return pointer + 2;
    }

    void add_token(const std::string& tok) {
        if (token_ids_.emplace(tok, token_count()).second) tokens_.push_back(tok);
    }

    void add_sense(const std::string& sense) {
        if (sense.empty()) return;
        if (sense_ids_.emplace(sense, static_cast<int>(senses_.size()) + 1).second)
            senses_.push_back(sense);
    }

    void save(std::ostream& out) const {
        out << "amrqe-vocab 1\n";
        out << "max_len " << max_len_ << "\n";
        out << "tokens " << tokens_.size() << "\n";
        for (size_t i = 0; i < tokens_.size(); ++i) out << i << " " << escape_token(tokens_[i]) << "\n";
        out << "senses " << senses_.size() << "\n";
        for (size_t i = 0; i < senses_.size(); ++i) out << (i + 1) << " " << senses_[i] << "\n";
    }

    static Vocab load(std::istream& in) {
        std::string word;
        int version = 0;
        in >> word >> version;
        if (word != "amrqe-vocab" || version != 1)
            throw std::runtime_error("not a vocab file (bad header)");
        Vocab v;
        size_t n = 0;
        in >> word >> v.max_len_;
        if (word != "max_len") throw std::runtime_error("vocab file: expected max_len");
        in >> word >> n;
        if (word != "tokens") throw std::runtime_error("vocab file: expected tokens");
        in.ignore();
        for (size_t i = 0; i < n; ++i) {
            std::string line;
            if (!std::getline(in, line)) throw std::runtime_error("vocab file: truncated tokens");
            size_t sp = line.find(' ');
            v.tokens_.push_back(unescape_token(line.substr(sp + 1)));
            v.token_ids_[v.tokens_.back()] = static_cast<int>(i);
        }
        in >> word >> n;
        if (word != "senses") throw std::runtime_error("vocab file: expected senses");
        in.ignore();
        for (size_t i = 0; i < n; ++i) {
            std::string line;
            if (!std::getline(in, line)) throw std::runtime_error("vocab file: truncated senses");
            size_t sp = line.find(' ');
            v.senses_.push_back(line.substr(sp + 1));
            v.sense_ids_[v.senses_.back()] = static_cast<int>(i) + 1;
        }
        v.check_reserved();
        return v;
    }

  private:
    void init_reserved() {
        add_token(kPadToken);
        add_token(kOovToken);
        add_token(kNegToken);
        add_token(kNumToken);
    }

    void check_reserved() const {
        if (token_count() < 4 || tokens_[0] != kPadToken || tokens_[1] != kOovToken ||
            tokens_[2] != kNegToken || tokens_[3] != kNumToken)
            throw std::runtime_error("vocab file: reserved tokens missing");
    }

    int max_len_ = kDefaultMaxLen;
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> token_ids_;
    std::vector<std::string> senses_;  // ids 1..n; 0 is "no sense"
    std::unordered_map<std::string, int> sense_ids_;
};

// Frequency-thresholded vocabulary over the graph and dependency streams of a
// corpus. Ties in count order resolve alphabetically so ids are stable.
inline Vocab build_vocab(const std::vector<LinearizedInput>& corpus,
                         int min_freq = kDefaultMinFreq, int max_len = kDefaultMaxLen) {
    std::map<std::string, long long> counts;
    std::map<std::string, long long> sense_counts;
    for (const auto& in : corpus) {
        for (const auto& t : in.amr_tokens) ++counts[t];
        for (const auto& t : in.dep_tokens) ++counts[t];
        for (const auto& s : in.amr_senses)
            if (!s.empty()) ++sense_counts[s];
    }
    counts.erase(kPadToken);
    counts.erase(kOovToken);
    counts.erase(kNegToken);
    counts.erase(kNumToken);
    std::vector<std::pair<long long, std::string>> ranked;
    for (const auto& [tok, c] : counts)
        if (c >= min_freq) ranked.emplace_back(-c, tok);
    std::sort(ranked.begin(), ranked.end());
    Vocab v(max_len);
    for (const auto& [negc, tok] : ranked) v.add_token(tok);
    for (const auto& [sense, c] : sense_counts) v.add_sense(sense);  // map order = ascending
    return v;
}

}  // namespace amrqe
