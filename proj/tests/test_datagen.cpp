#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amrqe/datagen.hpp"
#include "amrqe/evaluate.hpp"
#include "amrqe/penman.hpp"
#include "amrqe/preprocess.hpp"

using namespace amrqe;
using Catch::Approx;

TEST_CASE("lemma pool is unique and zipf-distributed") {
    GenPools pools = make_gen_pools();
    std::set<std::string> uniq(pools.lemmas.begin(), pools.lemmas.end());
    REQUIRE(pools.lemmas.size() == 300);
    REQUIRE(uniq.size() == pools.lemmas.size());
    REQUIRE(pools.lemma_cdf.size() == pools.lemmas.size());
    for (size_t i = 1; i < pools.lemma_cdf.size(); ++i)
        REQUIRE(pools.lemma_cdf[i] > pools.lemma_cdf[i - 1]);
    REQUIRE(pools.lemma_cdf.back() == Approx(1.0).margin(1e-12));

    // Early lemmas are drawn far more often than late ones.
    Rng rng(3);
    int head = 0, tail = 0;
    for (int i = 0; i < 5000; ++i) {
        const std::string& l = detail::sample_lemma(pools, rng);
        size_t idx = std::find(pools.lemmas.begin(), pools.lemmas.end(), l) -
                     pools.lemmas.begin();
        if (idx < 30) ++head;
        if (idx >= 270) ++tail;
    }
    REQUIRE(head > 10 * std::max(tail, 1));
}

TEST_CASE("generated gold graphs are valid") {
    GenPools pools = make_gen_pools();
    for (uint64_t seed = 1; seed <= 40; ++seed) {
        Rng rng(seed);
        int n = 1 + static_cast<int>(rng.index(12));
        GoldSentence gs = gen_gold(pools, rng, n);
        INFO("seed " << seed << " n " << n << " graph " << serialize_penman(gs.graph));
        REQUIRE_NOTHROW(validate(gs.graph));
        REQUIRE(gs.graph.nodes.size() >= static_cast<size_t>(n));
        REQUIRE_FALSE(gs.tokens.empty());
        // Sentence ends with a period stuck to the last token.
        REQUIRE(gs.tokens.back().back() == '.');

        // Serialization round trips.
        AmrGraph re = parse_penman(serialize_penman(gs.graph));
        REQUIRE(to_triples(re) == to_triples(gs.graph));

        // Self-evaluation is perfect, so the gold really is well-formed for
        // the metric stack too.
        ScoreVector sv = evaluate_all(gs.graph, gs.graph, 2, seed);
        REQUIRE(sv[Task::Smatch].f1 == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("generated dependency trees are valid") {
    GenPools pools = make_gen_pools();
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        Rng rng(seed);
        GoldSentence gs = gen_gold(pools, rng, 2 + static_cast<int>(rng.index(8)));
        DepTree tree = gen_dep_tree(pools, rng, gs.tokens);
        // The tree tokenizes the sentence text, which detaches the final
        // period into its own token.
        std::string joined;
        for (const auto& t : gs.tokens) {
            if (!joined.empty()) joined += ' ';
            joined += t;
        }
        REQUIRE(tree.forms == tokenize_sentence(joined));
        REQUIRE(tree.size() >= gs.tokens.size());
        int roots = 0;
        for (size_t i = 0; i < tree.size(); ++i) {
            if (tree.heads[i] == -1) {
                ++roots;
            } else {
                REQUIRE(tree.heads[i] >= 0);
                REQUIRE(tree.heads[i] < static_cast<int>(i));  // attach to an earlier token
            }
            REQUIRE_FALSE(tree.forms[i].empty());
            REQUIRE_FALSE(tree.labels[i].empty());
        }
        REQUIRE(roots == 1);

        // The TSV writer/reader accepts it unchanged.
        std::ostringstream os;
        for (size_t i = 0; i < tree.size(); ++i)
            os << (i + 1) << '\t' << tree.forms[i] << '\t' << tree.lemmas[i] << '\t'
               << (tree.heads[i] + 1) << '\t' << tree.labels[i] << '\n';
        std::istringstream is(os.str());
        auto back = read_dep_tsv(is);
        REQUIRE(back.size() == 1);
        REQUIRE(back[0].heads == tree.heads);
        REQUIRE(back[0].forms == tree.forms);
    }
}

TEST_CASE("corruption preserves validity and is seed-deterministic") {
    GenPools pools = make_gen_pools();

    SECTION("each operator alone") {
        for (const auto op : all_corruption_ops()) {
            for (uint64_t seed = 1; seed <= 12; ++seed) {
                Rng rng(Rng::mix(900, seed));
                GoldSentence gs = gen_gold(pools, rng, 3 + static_cast<int>(rng.index(6)));
                CorruptionSpec spec;
                spec.ops = {op};
                spec.severity = 3;
                spec.seed = seed;
                CorruptResult cr = corrupt(gs.graph, spec, pools);
                INFO("op " << static_cast<int>(op) << " seed " << seed);
                REQUIRE_NOTHROW(validate(cr.graph));
                REQUIRE(cr.applied + cr.skipped == spec.severity);
            }
        }
    }

    SECTION("same spec reproduces the same graph") {
        Rng rng(41);
        GoldSentence gs = gen_gold(pools, rng, 8);
        CorruptionSpec spec;
        spec.ops = all_corruption_ops();
        spec.severity = 5;
        spec.seed = 77;
        CorruptResult a = corrupt(gs.graph, spec, pools);
        CorruptResult b = corrupt(gs.graph, spec, pools);
        REQUIRE(serialize_penman(a.graph) == serialize_penman(b.graph));
        REQUIRE(a.applied == b.applied);

        spec.seed = 78;
        CorruptResult c = corrupt(gs.graph, spec, pools);
        // A different seed usually picks different edits; at minimum the
        // result stays valid.
        REQUIRE_NOTHROW(validate(c.graph));
    }

    SECTION("zero severity is the identity") {
        Rng rng(43);
        GoldSentence gs = gen_gold(pools, rng, 6);
        CorruptionSpec spec;
        spec.ops = all_corruption_ops();
        spec.severity = 0;
        spec.seed = 5;
        CorruptResult cr = corrupt(gs.graph, spec, pools);
        REQUIRE(to_triples(cr.graph) == to_triples(gs.graph));
        REQUIRE(cr.applied == 0);
    }
}

TEST_CASE("higher severity lowers true scores on average") {
    GenPools pools = make_gen_pools();
    GenOptions opt;
    opt.sentences = 25;
    opt.nodes_min = 4;
    opt.nodes_max = 9;
    opt.seed = 11;
    opt.restarts = 1;
    opt.systems = {{"light", {all_corruption_ops(), 1, 0}},
                   {"heavy", {all_corruption_ops(), 6, 0}}};
    GeneratedCorpus corpus = gen_training_corpus(opt, pools);

    double light = 0.0, heavy = 0.0;
    for (int i = 0; i < opt.sentences; ++i) {
        light += corpus.scores[0][i][Task::Smatch].f1;
        heavy += corpus.scores[1][i][Task::Smatch].f1;
    }
    light /= opt.sentences;
    heavy /= opt.sentences;
    INFO("light " << light << " heavy " << heavy);
    REQUIRE(light > heavy + 0.05);
    REQUIRE(light < 1.0);   // severity 1 does corrupt something
    REQUIRE(heavy > 0.05);  // and severity 6 does not destroy everything
}

TEST_CASE("generated corpora have consistent shapes and reproduce") {
    GenPools pools = make_gen_pools();
    GenOptions opt;
    opt.sentences = 8;
    opt.nodes_min = 3;
    opt.nodes_max = 7;
    opt.seed = 21;
    opt.restarts = 1;
    opt.systems = {{"a", {all_corruption_ops(), 1, 0}}, {"b", {all_corruption_ops(), 4, 0}}};

    GeneratedCorpus c1 = gen_training_corpus(opt, pools);
    REQUIRE(c1.ids.size() == 8);
    REQUIRE(c1.sentences.size() == 8);
    REQUIRE(c1.gold.size() == 8);
    REQUIRE(c1.deps.size() == 8);
    REQUIRE(c1.system_names == std::vector<std::string>{"a", "b"});
    REQUIRE(c1.parses.size() == 2);
    REQUIRE(c1.scores.size() == 2);
    REQUIRE(c1.parses[0].size() == 8);
    REQUIRE(c1.scores[1].size() == 8);
    REQUIRE(c1.ids[0] == "s00000");
    REQUIRE(c1.ids[7] == "s00007");

    // True scores stored in the corpus match a fresh evaluation with the
    // same seeds.
    for (int i = 0; i < 3; ++i) {
        const uint64_t eval_seed = Rng::mix(opt.seed, static_cast<uint64_t>(i) * 2 + 0 + 0x5eedull);
        ScoreVector again = evaluate_all(c1.parses[0][i], c1.gold[i], opt.restarts, eval_seed);
        REQUIRE(again.flatten() == c1.scores[0][i].flatten());
    }

    GeneratedCorpus c2 = gen_training_corpus(opt, pools);
    for (int i = 0; i < 8; ++i) {
        REQUIRE(serialize_penman(c1.gold[i]) == serialize_penman(c2.gold[i]));
        REQUIRE(c1.sentences[i] == c2.sentences[i]);
        REQUIRE(serialize_penman(c1.parses[1][i]) == serialize_penman(c2.parses[1][i]));
        REQUIRE(c1.scores[1][i].flatten() == c2.scores[1][i].flatten());
    }

    GenOptions other = opt;
    other.seed = 22;
    GeneratedCorpus c3 = gen_training_corpus(other, pools);
    bool any_diff = false;
    for (int i = 0; i < 8 && !any_diff; ++i)
        any_diff = serialize_penman(c1.gold[i]) != serialize_penman(c3.gold[i]);
    REQUIRE(any_diff);

    SECTION("bad options throw") {
        GenOptions bad = opt;
        bad.systems.clear();
        REQUIRE_THROWS_AS(gen_training_corpus(bad, pools), std::invalid_argument);
        bad = opt;
        bad.nodes_min = 5;
        bad.nodes_max = 4;
        REQUIRE_THROWS_AS(gen_training_corpus(bad, pools), std::invalid_argument);
    }
}

TEST_CASE("corruption op names cover every op") {
    auto names = corruption_op_names();
    REQUIRE(names.size() == all_corruption_ops().size());
    std::set<std::string> uniq;
    for (const auto& [name, op] : names) {
        REQUIRE_FALSE(name.empty());
        uniq.insert(name);
    }
    REQUIRE(uniq.size() == names.size());
}
