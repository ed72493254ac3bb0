#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrqe/score.hpp"
#include "amrqe/stats.hpp"

namespace amrqe {

// One system's parse of a sentence: predicted scores, and true scores when a
// gold graph was available.
struct Candidate {
    std::string system;
    std::array<double, kNumScores> predicted{};
    std::optional<std::array<double, kNumScores>> gold;
};

struct CandidateSet {
    std::string sentence_id;
    std::vector<Candidate> candidates;
};

using SystemPrior = std::map<std::string, double>;

inline double predicted_f1(const Candidate& c) { return c.predicted[2]; }
inline double gold_f1(const Candidate& c) { return c.gold ? (*c.gold)[2] : 0.0; }

// Picks the candidate with the highest predicted main F1 plus an optional
// per-system prior; ties go to the lexicographically smallest system name.
inline const Candidate& select_parse(const CandidateSet& cs, const SystemPrior* prior = nullptr) {
    if (cs.candidates.empty())
        throw std::invalid_argument("select_parse: no candidates for sentence " + cs.sentence_id);
    const Candidate* best = nullptr;
    double best_score = 0.0;
    for (const auto& c : cs.candidates) {
        double score = predicted_f1(c);
        if (prior != nullptr) {
            auto it = prior->find(c.system);
            if (it != prior->end()) score += it->second;
        }
        if (best == nullptr || score > best_score ||
            (score == best_score && c.system < best->system)) {
            best = &c;
            best_score = score;
        }
    }
    return *best;
}

// Corpus-level summary of selection quality against the oracle bounds. All
// averages are over the true (gold) Smatch P/R/F1 of the chosen parses.
struct RankingReport {
    Prf selected{};   // parse picked by predicted score (+prior)
    Prf random{};     // expectation over a uniform random pick
    Prf lower{};      // worst candidate per sentence (by true F1)
    Prf upper{};      // best candidate per sentence (by true F1)
    double mean_rho = 0.0;   // sentence-level correlation, averaged where defined
    double pos_fraction = 0.0;  // share of scored sentences with rho > 0
    int sentences = 0;
    int rho_scored = 0;
    int rho_skipped = 0;  // fewer than two candidates or zero variance
};

inline RankingReport ranking_report(const std::vector<CandidateSet>& corpus,
                                    const SystemPrior* prior = nullptr) {
    RankingReport rep;
    Prf sums[4] = {};
    double rho_sum = 0.0;
    int pos = 0;
    for (const auto& cs : corpus) {
        if (cs.candidates.empty()) continue;
        for (const auto& c : cs.candidates)
            if (!c.gold)
                throw std::invalid_argument("ranking_report: candidate without gold scores in " +
                                            cs.sentence_id);
        ++rep.sentences;
        const Candidate& chosen = select_parse(cs, prior);
        auto true_prf = [](const Candidate& c) {
            return Prf{(*c.gold)[0], (*c.gold)[1], (*c.gold)[2]};
        };
        auto add = [](Prf& acc, const Prf& v) {
            acc.p += v.p;
            acc.r += v.r;
            acc.f1 += v.f1;
        };
        add(sums[0], true_prf(chosen));
        Prf mean{};
        const Candidate* worst = &cs.candidates.front();
        const Candidate* best = &cs.candidates.front();
        for (const auto& c : cs.candidates) {
            add(mean, true_prf(c));
            if (gold_f1(c) < gold_f1(*worst) ||
                (gold_f1(c) == gold_f1(*worst) && c.system < worst->system))
                worst = &c;
            if (gold_f1(c) > gold_f1(*best) ||
                (gold_f1(c) == gold_f1(*best) && c.system < best->system))
                best = &c;
        }
        const double n = static_cast<double>(cs.candidates.size());
        add(sums[1], Prf{mean.p / n, mean.r / n, mean.f1 / n});
        add(sums[2], true_prf(*worst));
        add(sums[3], true_prf(*best));
        if (cs.candidates.size() < 2) {
            ++rep.rho_skipped;
        } else {
            std::vector<double> xs, ys;
            for (const auto& c : cs.candidates) {
                xs.push_back(predicted_f1(c));
                ys.push_back(gold_f1(c));
            }
            try {
                double rho = pearson(xs, ys);
                rho_sum += rho;
                if (rho > 0.0) ++pos;
                ++rep.rho_scored;
            } catch (const UndefinedCorrelation&) {
                ++rep.rho_skipped;
            }
        }
    }
    if (rep.sentences > 0) {
        const double n = static_cast<double>(rep.sentences);
        auto scale = [&](const Prf& s) { return Prf{s.p / n, s.r / n, s.f1 / n}; };
        rep.selected = scale(sums[0]);
        rep.random = scale(sums[1]);
        rep.lower = scale(sums[2]);
        rep.upper = scale(sums[3]);
    }
    if (rep.rho_scored > 0) {
        rep.mean_rho = rho_sum / static_cast<double>(rep.rho_scored);
        rep.pos_fraction = static_cast<double>(pos) / static_cast<double>(rep.rho_scored);
    }
    return rep;
}

// Systems ordered by corpus-average predicted main F1, descending; ties
// resolve by name. Rank 1 is best.
struct SystemRank {
    std::string system;
    double avg_predicted_f1 = 0.0;
    int rank = 0;
};

inline std::vector<SystemRank> rank_systems(
    const std::map<std::string, std::vector<double>>& per_system_f1) {
    std::vector<SystemRank> out;
    for (const auto& [name, scores] : per_system_f1) {
        if (scores.empty())
            throw std::invalid_argument("rank_systems: no scores for system " + name);
        SystemRank sr;
        sr.system = name;
        sr.avg_predicted_f1 = mean(scores);
        out.push_back(std::move(sr));
    }
    std::sort(out.begin(), out.end(), [](const SystemRank& a, const SystemRank& b) {
        if (a.avg_predicted_f1 != b.avg_predicted_f1)
            return a.avg_predicted_f1 > b.avg_predicted_f1;
        return a.system < b.system;
    });
    for (size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

// Ranks (1 = best) induced by descending value; ties get by-name order, same
// convention as rank_systems.
inline std::vector<double> ranks_from_values(const std::vector<std::pair<std::string, double>>& v) {
    std::vector<std::pair<std::string, double>> sorted = v;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::map<std::string, double> rank_of;
    for (size_t i = 0; i < sorted.size(); ++i) rank_of[sorted[i].first] = static_cast<double>(i + 1);
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& [name, val] : v) out.push_back(rank_of.at(name));
    return out;
}

}  // namespace amrqe
