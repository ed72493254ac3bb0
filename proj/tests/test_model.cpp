#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "amrqe/datagen.hpp"
#include "amrqe/dataset.hpp"
#include "amrqe/model.hpp"
#include "amrqe/preprocess.hpp"
#include "amrqe/vocab.hpp"

using namespace amrqe;

namespace {

struct SmallData {
    Vocab vocab;
    std::vector<EncodedInstance> train;
    std::vector<EncodedInstance> dev;
};

// Generates a miniature corpus through the same pipeline the CLI uses:
// synthetic gold + corrupted parses, linearized and encoded with targets.
SmallData make_small_data(int sentences, uint64_t seed, int max_len = 64) {
    GenPools pools = make_gen_pools();
    GenOptions opt;
    opt.sentences = sentences;
    opt.nodes_min = 3;
    opt.nodes_max = 7;
    opt.seed = seed;
    opt.restarts = 1;
    opt.systems = {{"mild", {all_corruption_ops(), 1, 0}},
                   {"harsh", {all_corruption_ops(), 5, 0}}};
    GeneratedCorpus corpus = gen_training_corpus(opt, pools);

    std::vector<LinearizedInput> inputs;
    std::vector<std::array<double, kNumScores>> targets;
    for (size_t s = 0; s < corpus.parses.size(); ++s) {
        for (size_t i = 0; i < corpus.parses[s].size(); ++i) {
            inputs.push_back(
                build_input(corpus.parses[s][i], corpus.sentences[i], &corpus.deps[i]));
            targets.push_back(corpus.scores[s][i].flatten());
        }
    }

    SmallData out;
    out.vocab = build_vocab(inputs, 1, max_len);
    for (size_t i = 0; i < inputs.size(); ++i) {
        EncodedInstance inst = encode(inputs[i], out.vocab);
        inst.id = "i" + std::to_string(i);
        inst.targets = targets[i];
        inst.has_targets = true;
        if (i % 4 == 3)
            out.dev.push_back(std::move(inst));
        else
            out.train.push_back(std::move(inst));
    }
    return out;
}

ModelConfig small_config(const Vocab& v, int embed = 10, int hidden = 8, int layers = 1) {
    ModelConfig cfg;
    cfg.embed_dim = embed;
    cfg.hidden_dim = hidden;
    cfg.lstm_layers = layers;
    cfg.token_vocab = v.token_count();
    cfg.pointer_vocab = v.pointer_count();
    cfg.sense_vocab = v.sense_count();
    cfg.max_len = v.max_len();
    return cfg;
}

std::string model_bytes(const Model& m) {
    std::ostringstream os(std::ios::binary);
    save_model(os, m);
    return os.str();
}

}  // namespace

TEST_CASE("masked lstm ignores padding steps") {
    Rng rng(21);
    LstmCell cell = LstmCell::zeros(3, 4);
    cell.init(rng);

    const int B = 2;
    std::vector<Mat> xs3(3), xs5(5);
    Rng xr(22);
    for (auto& x : xs3) {
        x = Mat(3, B);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < B; ++c) x(r, c) = xr.uniform(-1.0, 1.0);
    }
    for (int t = 0; t < 5; ++t) xs5[t] = t < 3 ? xs3[t] : Mat::Zero(3, B);

    Mat mask3 = Mat::Ones(3, B);
    Mat mask5 = Mat::Zero(5, B);
    mask5.topRows(3).setOnes();

    for (bool reverse : {false, true}) {
        LstmDirTrace t3, t5;
        lstm_forward(cell, xs3, mask3, reverse, t3);
        lstm_forward(cell, xs5, mask5, reverse, t5);
        Mat short_final = lstm_final(t3, reverse);
        // The padded scan carries state through masked steps, so its final
        // state (position 4 forward, position 0 reversed) matches exactly.
        Mat long_final = lstm_final(t5, reverse);
        REQUIRE((short_final - long_final).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("batch padding does not change predictions") {
    SmallData data = make_small_data(8, 31);
    Model m = init_model(small_config(data.vocab), 41);

    // Pick the shortest and longest instances so batching them together
    // forces real padding on one column.
    int shortest = 0, longest = 0;
    for (size_t i = 0; i < data.train.size(); ++i) {
        if (data.train[i].amr_tok.size() < data.train[shortest].amr_tok.size())
            shortest = static_cast<int>(i);
        if (data.train[i].amr_tok.size() > data.train[longest].amr_tok.size())
            longest = static_cast<int>(i);
    }
    REQUIRE(data.train[shortest].amr_tok.size() < data.train[longest].amr_tok.size());

    Mat alone = forward(m, make_batch(m.cfg, data.train, {shortest}));
    Mat padded = forward(m, make_batch(m.cfg, data.train, {shortest, longest}));
    REQUIRE(alone.rows() == kNumScores);
    REQUIRE((alone.col(0) - padded.col(0)).cwiseAbs().maxCoeff() < 1e-12);

    // predict() uses its own batching; single-instance and full-batch calls
    // agree for every row.
    auto one_by_one = predict(m, data.train, 1);
    auto batched = predict(m, data.train, static_cast<int>(data.train.size()));
    for (size_t i = 0; i < data.train.size(); ++i)
        for (int r = 0; r < kNumScores; ++r)
            REQUIRE(std::abs(one_by_one[i][r] - batched[i][r]) < 1e-12);
}

TEST_CASE("loss functions match a scalar reference") {
    Rng rng(55);
    const int B = 5;
    Mat preds(kNumScores, B), targets(kNumScores, B);
    for (int r = 0; r < kNumScores; ++r)
        for (int c = 0; c < B; ++c) {
            preds(r, c) = rng.uniform(0.0, 1.0);
            targets(r, c) = rng.uniform(0.0, 1.0);
        }

    SECTION("flat mse") {
        LossGrad lg = loss_flat(preds, targets);
        double want = 0.0;
        const double n = static_cast<double>(kNumScores) * B;
        for (int r = 0; r < kNumScores; ++r)
            for (int c = 0; c < B; ++c) {
                double d = preds(r, c) - targets(r, c);
                want += d * d / n;
                REQUIRE(std::abs(lg.dpreds(r, c) - 2.0 * d / n) < 1e-12);
            }
        REQUIRE(std::abs(lg.loss - want) < 1e-12);
    }

    SECTION("hierarchical weighting") {
        const double l1 = 0.2, l2 = 1.0;
        LossGrad lg = loss_hier(preds, targets, l1, l2);
        const int k = kNumMainScores;
        double main_sum = 0.0, sub_sum = 0.0;
        for (int r = 0; r < kNumScores; ++r)
            for (int c = 0; c < B; ++c) {
                double d = preds(r, c) - targets(r, c);
                (r < k ? main_sum : sub_sum) += d * d;
            }
        double want = l2 / (k * static_cast<double>(B)) * main_sum +
                      l1 / ((kNumScores - k) * static_cast<double>(B)) * sub_sum;
        REQUIRE(std::abs(lg.loss - want) < 1e-12);
        REQUIRE(std::abs(lg.dpreds(0, 0) -
                         2.0 * l2 / (k * B) * (preds(0, 0) - targets(0, 0))) < 1e-12);
        REQUIRE(std::abs(lg.dpreds(k, 1) -
                         2.0 * l1 / ((kNumScores - k) * B) * (preds(k, 1) - targets(k, 1))) <
                1e-12);
    }

    SECTION("zero subtask weight reduces to the main-only loss") {
        LossGrad hier = loss_hier(preds, targets, 0.0, 1.0);
        LossGrad main_only = loss_main_only(preds, targets);
        REQUIRE(std::abs(hier.loss - main_only.loss) < 1e-12);
        REQUIRE((hier.dpreds - main_only.dpreds).cwiseAbs().maxCoeff() < 1e-12);
    }

    SECTION("dispatch follows the config flags") {
        ModelConfig cfg;
        cfg.token_vocab = 8;
        cfg.pointer_vocab = 8;
        cfg.sense_vocab = 2;

        cfg.hierarchical = true;
        cfg.multitask = true;
        REQUIRE(std::abs(loss_for_config(cfg, preds, targets).loss -
                         loss_hier(preds, targets, cfg.lambda1, cfg.lambda2).loss) < 1e-15);

        cfg.hierarchical = false;
        REQUIRE(std::abs(loss_for_config(cfg, preds, targets).loss -
                         loss_flat(preds, targets).loss) < 1e-15);

        cfg.multitask = false;
        REQUIRE(std::abs(loss_for_config(cfg, preds, targets).loss -
                         loss_main_only(preds, targets).loss) < 1e-15);
    }
}

TEST_CASE("analytic gradients agree with finite differences") {
    SmallData data = make_small_data(6, 71);
    std::vector<EncodedInstance> subset(data.train.begin(),
                                        data.train.begin() + std::min<size_t>(6, data.train.size()));

    SECTION("default hierarchical config") {
        Model m = init_model(small_config(data.vocab, 8, 6), 91);
        GradCheckResult r = grad_check(m, subset, 1e-4, 200, 13);
        INFO("checked " << r.checked << " coords, max rel err " << r.max_rel_err);
        REQUIRE(r.checked > 100);
        REQUIRE(r.max_rel_err < 1e-4);
    }

    SECTION("flat multitask head") {
        ModelConfig cfg = small_config(data.vocab, 8, 6);
        cfg.hierarchical = false;
        Model m = init_model(cfg, 92);
        GradCheckResult r = grad_check(m, subset, 1e-4, 160, 14);
        REQUIRE(r.max_rel_err < 1e-4);
    }

    SECTION("main-only loss") {
        ModelConfig cfg = small_config(data.vocab, 8, 6);
        cfg.multitask = false;
        Model m = init_model(cfg, 93);
        GradCheckResult r = grad_check(m, subset, 1e-4, 160, 15);
        REQUIRE(r.max_rel_err < 1e-4);
    }

    SECTION("shared encoder, no pointers, word stream") {
        ModelConfig cfg = small_config(data.vocab, 8, 6);
        cfg.shared_encoder = true;
        cfg.use_pointers = false;
        cfg.use_dep = false;
        Model m = init_model(cfg, 94);
        REQUIRE(m.dep_cells.empty());
        GradCheckResult r = grad_check(m, subset, 1e-4, 160, 16);
        REQUIRE(r.max_rel_err < 1e-4);
    }

    SECTION("two stacked layers") {
        Model m = init_model(small_config(data.vocab, 6, 5, 2), 95);
        GradCheckResult r = grad_check(m, subset, 1e-4, 160, 17);
        REQUIRE(r.max_rel_err < 1e-4);
    }
}

TEST_CASE("training reduces loss and is reproducible") {
    SmallData data = make_small_data(20, 111);
    ModelConfig cfg = small_config(data.vocab, 12, 10);
    TrainOptions opt;
    opt.lr = 0.005;
    opt.epochs = 5;
    opt.batch_size = 8;
    opt.seed = 3;

    Model m1 = init_model(cfg, 7);
    TrainResult r1 = train(m1, data.train, data.dev, opt);
    REQUIRE(r1.history.size() == 5);
    REQUIRE(r1.history.back().train_loss < r1.history.front().train_loss);
    REQUIRE(r1.best_epoch >= 1);
    REQUIRE(r1.best_epoch <= 5);

    // best_epoch points at the history row with the highest dev correlation,
    // earliest wins on ties.
    double best = r1.history[r1.best_epoch - 1].dev_rho;
    for (const EpochStats& es : r1.history) {
        if (!es.dev_rho_defined) continue;
        REQUIRE(es.dev_rho <= best + 1e-15);
    }

    Model m2 = init_model(cfg, 7);
    TrainResult r2 = train(m2, data.train, data.dev, opt);
    REQUIRE(r2.history.size() == r1.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i) {
        REQUIRE(r1.history[i].train_loss == r2.history[i].train_loss);
        REQUIRE(r1.history[i].dev_rho == r2.history[i].dev_rho);
    }
    REQUIRE(model_bytes(m1) == model_bytes(m2));
}

TEST_CASE("padding id embeddings stay frozen through training") {
    SmallData data = make_small_data(10, 131);
    Model m = init_model(small_config(data.vocab), 19);
    REQUIRE(m.tok_emb.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.ptr_emb.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.sense_emb.col(0).cwiseAbs().maxCoeff() == 0.0);

    TrainOptions opt;
    opt.lr = 0.01;
    opt.epochs = 3;
    opt.batch_size = 8;
    opt.seed = 5;
    train(m, data.train, data.dev, opt);

    REQUIRE(m.tok_emb.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.ptr_emb.col(0).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(m.sense_emb.col(0).cwiseAbs().maxCoeff() == 0.0);
    // Trained columns did move.
    REQUIRE(m.tok_emb.rightCols(m.tok_emb.cols() - 1).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ablation flags change the wiring") {
    SmallData data = make_small_data(8, 151);

    SECTION("pointer-free config ignores pointer ids") {
        ModelConfig cfg = small_config(data.vocab);
        cfg.use_pointers = false;
        Model m = init_model(cfg, 23);
        EncodedInstance a = data.train[0];
        EncodedInstance b = a;
        for (auto& p : b.amr_ptr) p = (p + 1) % m.cfg.pointer_vocab;
        for (auto& p : b.dep_ptr) p = (p + 2) % m.cfg.pointer_vocab;
        std::vector<EncodedInstance> pair = {a, b};
        Mat preds = forward(m, make_batch(m.cfg, pair, {0, 1}));
        REQUIRE((preds.col(0) - preds.col(1)).cwiseAbs().maxCoeff() < 1e-12);
    }

    SECTION("word-stream config ignores the dependency stream") {
        ModelConfig cfg = small_config(data.vocab);
        cfg.use_dep = false;
        Model m = init_model(cfg, 29);
        EncodedInstance a = data.train[0];
        EncodedInstance b = a;
        b.dep_tok.assign(b.dep_tok.size(), 1);
        b.dep_ptr.assign(b.dep_ptr.size(), 1);
        std::vector<EncodedInstance> pair = {a, b};
        Mat preds = forward(m, make_batch(m.cfg, pair, {0, 1}));
        REQUIRE((preds.col(0) - preds.col(1)).cwiseAbs().maxCoeff() < 1e-12);

        // The dependency config does react to the same change.
        ModelConfig cfg2 = small_config(data.vocab);
        Model m2 = init_model(cfg2, 29);
        Mat preds2 = forward(m2, make_batch(m2.cfg, pair, {0, 1}));
        REQUIRE((preds2.col(0) - preds2.col(1)).cwiseAbs().maxCoeff() > 1e-9);
    }

    SECTION("shared encoder has no second stack") {
        ModelConfig cfg = small_config(data.vocab);
        cfg.shared_encoder = true;
        Model m = init_model(cfg, 31);
        REQUIRE(m.dep_cells.empty());
        Mat preds = forward(m, make_batch(m.cfg, data.train, {0, 1}));
        REQUIRE(preds.allFinite());
    }

    SECTION("single-task config rejects the hierarchical flag") {
        ModelConfig cfg = small_config(data.vocab);
        cfg.multitask = false;
        cfg.hierarchical = true;
        normalize_config(cfg);
        REQUIRE_FALSE(cfg.hierarchical);
    }

    SECTION("empty streams still produce one masked step") {
        EncodedInstance empty;
        empty.id = "empty";
        std::vector<EncodedInstance> one = {empty};
        Model m = init_model(small_config(data.vocab), 37);
        Mat preds = forward(m, make_batch(m.cfg, one, {0}));
        REQUIRE(preds.allFinite());
    }
}

TEST_CASE("instance validation catches out-of-range ids") {
    SmallData data = make_small_data(4, 171);
    ModelConfig cfg = small_config(data.vocab);
    normalize_config(cfg);
    check_instances(cfg, data.train);

    std::vector<EncodedInstance> bad = {data.train[0]};
    bad[0].amr_tok[0] = cfg.token_vocab;
    REQUIRE_THROWS_AS(check_instances(cfg, bad), std::invalid_argument);

    bad = {data.train[0]};
    bad[0].amr_sense[0] = cfg.sense_vocab;
    REQUIRE_THROWS_AS(check_instances(cfg, bad), std::invalid_argument);

    bad = {data.train[0]};
    bad[0].snt_ptr[0] = -1;
    REQUIRE_THROWS_AS(check_instances(cfg, bad), std::invalid_argument);
}

TEST_CASE("model serialization round trips") {
    SmallData data = make_small_data(6, 191);
    Model m = init_model(small_config(data.vocab, 9, 7, 2), 43);

    std::string first = model_bytes(m);
    std::istringstream in1(first);
    Model loaded = load_model(in1);
    REQUIRE(loaded.cfg.embed_dim == m.cfg.embed_dim);
    REQUIRE(loaded.cfg.hidden_dim == m.cfg.hidden_dim);
    REQUIRE(loaded.cfg.lstm_layers == m.cfg.lstm_layers);
    REQUIRE(loaded.cfg.token_vocab == m.cfg.token_vocab);
    REQUIRE(loaded.cfg.hierarchical == m.cfg.hierarchical);

    // Weights travel as float32, so the second save reproduces the first
    // byte for byte.
    std::string second = model_bytes(loaded);
    REQUIRE(second == first);

    // Predictions from the reloaded model match a fresh save/load cycle.
    auto before = predict(loaded, data.train);
    std::istringstream in2(second);
    Model again = load_model(in2);
    auto after = predict(again, data.train);
    for (size_t i = 0; i < before.size(); ++i)
        for (int r = 0; r < kNumScores; ++r) REQUIRE(before[i][r] == after[i][r]);

    SECTION("truncated file is rejected") {
        std::istringstream trunc(first.substr(0, first.size() / 2));
        REQUIRE_THROWS(load_model(trunc));
    }

    SECTION("bad magic is rejected") {
        std::string garbled = first;
        garbled[0] = 'X';
        std::istringstream in(garbled);
        REQUIRE_THROWS(load_model(in));
    }
}

TEST_CASE("adam minimizes a quadratic") {
    Mat x(2, 1);
    x << 5.0, -3.0;
    Adam adam(0.1);
    for (int i = 0; i < 400; ++i) {
        Mat g = 2.0 * x;
        adam.step({&x}, {&g});
    }
    REQUIRE(x.cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("stream batches encode shape rules") {
    SmallData data = make_small_data(4, 211);
    ModelConfig cfg = small_config(data.vocab);
    normalize_config(cfg);

    std::vector<int> idx;
    for (size_t i = 0; i < data.train.size(); ++i) idx.push_back(static_cast<int>(i));
    ModelBatch batch = make_batch(cfg, data.train, idx);

    size_t longest = 0;
    for (const auto& inst : data.train) longest = std::max(longest, inst.amr_tok.size());
    REQUIRE(batch.amr.tok.rows() == static_cast<int>(longest));
    REQUIRE(batch.amr.tok.cols() == static_cast<int>(idx.size()));
    REQUIRE(batch.amr.mask.rows() == batch.amr.tok.rows());

    // Masked slots hold the padding id and a zero mask.
    for (size_t b = 0; b < idx.size(); ++b) {
        const auto& inst = data.train[idx[b]];
        for (int t = 0; t < batch.amr.tok.rows(); ++t) {
            if (t < static_cast<int>(inst.amr_tok.size())) {
                REQUIRE(batch.amr.tok(t, static_cast<int>(b)) == inst.amr_tok[t]);
                REQUIRE(batch.amr.mask(t, static_cast<int>(b)) == 1.0);
            } else {
                REQUIRE(batch.amr.tok(t, static_cast<int>(b)) == 0);
                REQUIRE(batch.amr.mask(t, static_cast<int>(b)) == 0.0);
            }
        }
    }

    SECTION("pointer-free batches keep pointer ids at zero") {
        ModelConfig np = cfg;
        np.use_pointers = false;
        ModelBatch b2 = make_batch(np, data.train, idx);
        REQUIRE(b2.amr.ptr.cwiseAbs().maxCoeff() == 0);
    }

    SECTION("word-stream context") {
        ModelConfig nd = cfg;
        nd.use_dep = false;
        ModelBatch b3 = make_batch(nd, data.train, {0});
        REQUIRE(b3.ctx.tok.rows() == static_cast<int>(data.train[0].snt_tok.size()));
        REQUIRE(b3.ctx.tok(0, 0) == data.train[0].snt_tok[0]);
    }
}
