#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "amrqe/ranking.hpp"

using namespace amrqe;
using Catch::Approx;

namespace {

Candidate cand(const std::string& system, double pred_f1, double gold_p, double gold_r,
               double gold_f1_val) {
    Candidate c;
    c.system = system;
    c.predicted.fill(0.0);
    c.predicted[2] = pred_f1;
    std::array<double, kNumScores> g{};
    g[0] = gold_p;
    g[1] = gold_r;
    g[2] = gold_f1_val;
    c.gold = g;
    return c;
}

}  // namespace

TEST_CASE("select_parse picks the best predicted candidate") {
    CandidateSet cs;
    cs.sentence_id = "s1";
    cs.candidates = {cand("alpha", 0.9, 0.8, 0.6, 0.7), cand("beta", 0.5, 0.5, 0.5, 0.5),
                     cand("gamma", 0.7, 0.9, 0.9, 0.9)};

    REQUIRE(select_parse(cs).system == "alpha");

    SECTION("a prior can flip the choice") {
        SystemPrior prior = {{"gamma", 0.25}};
        REQUIRE(select_parse(cs, &prior).system == "gamma");
        // A prior below the gap does not.
        SystemPrior weak = {{"gamma", 0.1}};
        REQUIRE(select_parse(cs, &weak).system == "alpha");
    }

    SECTION("ties go to the smallest system name") {
        CandidateSet tie;
        tie.sentence_id = "s2";
        tie.candidates = {cand("zeta", 0.6, 0, 0, 0.4), cand("beta", 0.6, 0, 0, 0.8),
                          cand("eta", 0.6, 0, 0, 0.6)};
        REQUIRE(select_parse(tie).system == "beta");
    }

    SECTION("empty set throws") {
        CandidateSet empty;
        empty.sentence_id = "s3";
        REQUIRE_THROWS_AS(select_parse(empty), std::invalid_argument);
    }
}

TEST_CASE("ranking_report matches a hand-computed corpus") {
    std::vector<CandidateSet> corpus(4);

    corpus[0].sentence_id = "s1";
    corpus[0].candidates = {cand("alpha", 0.9, 0.8, 0.6, 0.7), cand("beta", 0.5, 0.5, 0.5, 0.5),
                            cand("gamma", 0.7, 0.9, 0.9, 0.9)};

    corpus[1].sentence_id = "s2";
    corpus[1].candidates = {cand("alpha", 0.4, 0.2, 0.2, 0.2), cand("beta", 0.6, 0.8, 0.8, 0.8),
                            cand("gamma", 0.6, 0.6, 0.6, 0.6)};

    // Single candidate: counted in the averages, skipped for correlation.
    corpus[2].sentence_id = "s3";
    corpus[2].candidates = {cand("alpha", 0.5, 0.4, 0.4, 0.4)};

    // Zero predicted variance: correlation undefined, selection falls back to
    // the name tie-break.
    corpus[3].sentence_id = "s4";
    corpus[3].candidates = {cand("alpha", 0.5, 0.3, 0.3, 0.3), cand("beta", 0.5, 0.7, 0.7, 0.7)};

    RankingReport rep = ranking_report(corpus);

    REQUIRE(rep.sentences == 4);
    // Selected: alpha 0.7, beta 0.8, alpha 0.4, alpha 0.3.
    REQUIRE(rep.selected.f1 == Approx((0.7 + 0.8 + 0.4 + 0.3) / 4.0).margin(1e-12));
    // Random pick expectation per sentence, then averaged.
    REQUIRE(rep.random.f1 ==
            Approx((0.7 + (0.2 + 0.8 + 0.6) / 3.0 + 0.4 + 0.5) / 4.0).margin(1e-12));
    REQUIRE(rep.lower.f1 == Approx((0.5 + 0.2 + 0.4 + 0.3) / 4.0).margin(1e-12));
    REQUIRE(rep.upper.f1 == Approx((0.9 + 0.8 + 0.4 + 0.7) / 4.0).margin(1e-12));
    // Precision column follows the same bookkeeping.
    REQUIRE(rep.selected.p == Approx((0.8 + 0.8 + 0.4 + 0.3) / 4.0).margin(1e-12));
    REQUIRE(rep.lower.f1 <= rep.random.f1);
    REQUIRE(rep.random.f1 <= rep.selected.f1);
    REQUIRE(rep.selected.f1 <= rep.upper.f1);

    REQUIRE(rep.rho_scored == 2);
    REQUIRE(rep.rho_skipped == 2);
    double rho1 = pearson({0.9, 0.5, 0.7}, {0.7, 0.5, 0.9});
    double rho2 = pearson({0.4, 0.6, 0.6}, {0.2, 0.8, 0.6});
    REQUIRE(rho1 == Approx(0.5).margin(1e-12));
    REQUIRE(rep.mean_rho == Approx((rho1 + rho2) / 2.0).margin(1e-12));
    REQUIRE(rep.pos_fraction == Approx(1.0));

    SECTION("missing gold scores are an error") {
        corpus[1].candidates[0].gold.reset();
        REQUIRE_THROWS_AS(ranking_report(corpus), std::invalid_argument);
    }

    SECTION("empty sentences are ignored") {
        corpus.push_back(CandidateSet{"s5", {}});
        RankingReport rep2 = ranking_report(corpus);
        REQUIRE(rep2.sentences == 4);
    }

    SECTION("empty corpus yields zeros") {
        RankingReport rep0 = ranking_report({});
        REQUIRE(rep0.sentences == 0);
        REQUIRE(rep0.selected.f1 == 0.0);
        REQUIRE(rep0.mean_rho == 0.0);
    }
}

TEST_CASE("rank_systems orders by average predicted score") {
    std::map<std::string, std::vector<double>> scores = {
        {"mid", {0.5, 0.7}},           // avg 0.6
        {"top", {0.9, 0.8, 0.85}},     // avg 0.85
        {"low", {0.2}},                // avg 0.2
    };
    auto ranks = rank_systems(scores);
    REQUIRE(ranks.size() == 3);
    REQUIRE(ranks[0].system == "top");
    REQUIRE(ranks[0].rank == 1);
    REQUIRE(ranks[0].avg_predicted_f1 == Approx(0.85));
    REQUIRE(ranks[1].system == "mid");
    REQUIRE(ranks[1].rank == 2);
    REQUIRE(ranks[2].system == "low");
    REQUIRE(ranks[2].rank == 3);

    SECTION("ties resolve by name") {
        std::map<std::string, std::vector<double>> tied = {
            {"b", {0.5}}, {"a", {0.5}}, {"c", {0.5}}};
        auto r = rank_systems(tied);
        REQUIRE(r[0].system == "a");
        REQUIRE(r[1].system == "b");
        REQUIRE(r[2].system == "c");
        REQUIRE(r[2].rank == 3);
    }

    SECTION("a system without scores is an error") {
        std::map<std::string, std::vector<double>> bad = {{"x", {}}};
        REQUIRE_THROWS_AS(rank_systems(bad), std::invalid_argument);
    }
}

TEST_CASE("ranks_from_values keeps input order") {
    std::vector<std::pair<std::string, double>> v = {
        {"x", 0.5}, {"y", 0.9}, {"z", 0.5}};
    auto r = ranks_from_values(v);
    REQUIRE(r == std::vector<double>{2.0, 1.0, 3.0});

    // Agreement with rank_systems on the same data.
    std::map<std::string, std::vector<double>> m;
    for (const auto& [name, val] : v) m[name] = {val};
    auto sys = rank_systems(m);
    for (const auto& sr : sys) {
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i].first == sr.system) REQUIRE(r[i] == static_cast<double>(sr.rank));
    }
}
