// Command line front end: evaluation, synthetic corpus generation, data
// preparation, model training, prediction, ranking and report generation.

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "amrqe/dataset.hpp"
#include "amrqe/datagen.hpp"
#include "amrqe/dep.hpp"
#include "amrqe/evaluate.hpp"
#include "amrqe/model.hpp"
#include "amrqe/penman.hpp"
#include "amrqe/preprocess.hpp"
#include "amrqe/ranking.hpp"
#include "amrqe/stats.hpp"
#include "amrqe/util.hpp"
#include "amrqe/vocab.hpp"

namespace fs = std::filesystem;
using namespace amrqe;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void die(const std::string& msg) { throw std::runtime_error(msg); }

// Relative input paths that do not exist are also tried under AMRQE_DATA_DIR.
std::string resolve_input(const std::string& path) {
    if (path.empty() || fs::exists(path)) return path;
    const char* base = std::getenv("AMRQE_DATA_DIR");
    if (base != nullptr && *base != '\0' && fs::path(path).is_relative()) {
        fs::path joined = fs::path(base) / path;
        if (fs::exists(joined)) return joined.string();
    }
    return path;
}

std::ifstream open_in(const std::string& path) {
    std::string p = resolve_input(path);
    std::ifstream in(p, std::ios::binary);
    if (!in) die("cannot open " + p);
    return in;
}

std::ofstream open_out(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) die("cannot write " + path);
    return out;
}

std::string strip_candidate_suffix(const std::string& id) {
    size_t at = id.find('|');
    return at == std::string::npos ? id : id.substr(0, at);
}

std::string candidate_system(const std::string& id) {
    size_t at = id.find('|');
    return at == std::string::npos ? std::string() : id.substr(at + 1);
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        die("cannot parse number '" + s + "' in " + what);
    }
}

void write_score_header(std::ostream& out) {
    out << "id";
    for (const auto& c : score_column_names()) out << '\t' << c;
    out << '\n';
}

void write_score_row(std::ostream& out, const std::string& id,
                     const std::array<double, kNumScores>& row) {
    out << id;
    for (double v : row) out << '\t' << fmt_fixed(v);
    out << '\n';
}

struct ScoreTable {
    std::vector<std::string> ids;
    std::vector<std::array<double, kNumScores>> rows;
    std::unordered_map<std::string, size_t> index;

    const std::array<double, kNumScores>* find(const std::string& id) const {
        auto it = index.find(id);
        return it == index.end() ? nullptr : &rows[it->second];
    }
};

ScoreTable read_score_table(const std::string& path) {
    auto in = open_in(path);
    ScoreTable t;
    std::string line;
    bool first = true;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(line, '\t');
        if (first) {
            first = false;
            if (!cols.empty() && cols[0] == "id") continue;
        }
        if (cols.size() != 1 + kNumScores)
            die(path + ":" + std::to_string(lineno) + ": expected " +
                std::to_string(1 + kNumScores) + " columns, got " + std::to_string(cols.size()));
        std::array<double, kNumScores> row{};
        for (int i = 0; i < kNumScores; ++i)
            row[i] = parse_double(cols[i + 1], path + ":" + std::to_string(lineno));
        if (t.index.count(cols[0])) die(path + ": duplicate id " + cols[0]);
        t.index[cols[0]] = t.rows.size();
        t.ids.push_back(cols[0]);
        t.rows.push_back(row);
    }
    return t;
}

// Two-column "key<TAB>value" table; a non-numeric first value row is treated
// as a header and skipped.
std::vector<std::pair<std::string, double>> read_pair_table(const std::string& path) {
    auto in = open_in(path);
    std::vector<std::pair<std::string, double>> out;
    std::string line;
    bool first = true;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(line, '\t');
        if (cols.size() == 1) cols = split_ws(line);
        if (cols.size() < 2)
            die(path + ":" + std::to_string(lineno) + ": expected 2 columns");
        if (first) {
            first = false;
            try {
                size_t used = 0;
                std::stod(cols[1], &used);
                if (used != cols[1].size()) continue;
            } catch (const std::exception&) {
                continue;
            }
        }
        out.emplace_back(cols[0], parse_double(cols[1], path + ":" + std::to_string(lineno)));
    }
    return out;
}

void write_dep_blocks(std::ostream& out, const std::vector<const DepTree*>& trees) {
    for (const DepTree* t : trees) {
        for (size_t i = 0; i < t->size(); ++i) {
            out << (i + 1) << '\t' << t->forms[i] << '\t' << t->lemmas[i] << '\t'
                << (t->heads[i] + 1) << '\t' << t->labels[i] << '\n';
        }
        out << '\n';
    }
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(csv, ','))
        if (!trim(part).empty()) out.push_back(parse_double(trim(part), what));
    if (out.empty()) die(what + ": empty list");
    return out;
}

// ---- eval ----

struct EvalArgs {
    std::string pred, gold, out, summary;
    int restarts = kDefaultRestarts;
    uint64_t seed = 0;
    int jobs = 1;
};

int run_eval(const EvalArgs& a) {
    auto pred_in = open_in(a.pred);
    auto gold_in = open_in(a.gold);
    auto preds = read_corpus(pred_in);
    auto golds = read_corpus(gold_in);
    if (golds.empty()) die("gold corpus is empty");
    if (preds.empty()) die("candidate corpus is empty");

    std::vector<AmrGraph> gold_graphs(golds.size());
    std::unordered_map<std::string, size_t> gold_index;
    bool ids_ok = true;
    for (size_t i = 0; i < golds.size(); ++i) {
        try {
            gold_graphs[i] = parse_penman(golds[i].penman);
        } catch (const std::exception& ex) {
            die("gold entry " + (golds[i].id.empty() ? std::to_string(i + 1) : golds[i].id) +
                ": " + ex.what());
        }
        if (golds[i].id.empty())
            ids_ok = false;
        else if (!gold_index.emplace(golds[i].id, i).second)
            die("gold corpus: duplicate id " + golds[i].id);
    }
    for (const auto& p : preds)
        if (p.id.empty()) ids_ok = false;
    std::vector<size_t> join(preds.size());
    if (ids_ok) {
        for (size_t i = 0; i < preds.size(); ++i) {
            auto it = gold_index.find(strip_candidate_suffix(preds[i].id));
            if (it == gold_index.end()) die("no gold entry for candidate id " + preds[i].id);
            join[i] = it->second;
        }
    } else {
        if (preds.size() != golds.size())
            die("corpora lack ids and differ in size (" + std::to_string(preds.size()) + " vs " +
                std::to_string(golds.size()) + "); cannot join positionally");
        for (size_t i = 0; i < preds.size(); ++i) join[i] = i;
    }

    std::vector<std::array<double, kNumScores>> rows(preds.size());
    std::vector<std::string> warnings(preds.size());
    auto work = [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            AmrGraph cand;
            try {
                cand = parse_penman(preds[i].penman);
            } catch (const std::exception& ex) {
                rows[i] = zero_scores().flatten();
                warnings[i] = std::string("parse failed: ") + ex.what();
                continue;
            }
            rows[i] = evaluate_all(cand, gold_graphs[join[i]], a.restarts,
                                   Rng::mix(a.seed, static_cast<uint64_t>(i)))
                          .flatten();
        }
    };
    const int jobs = std::max(1, a.jobs);
    if (jobs == 1 || preds.size() < 2) {
        work(0, preds.size());
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (preds.size() + jobs - 1) / jobs;
        for (size_t lo = 0; lo < preds.size(); lo += chunk)
            pool.emplace_back(work, lo, std::min(lo + chunk, preds.size()));
        for (auto& t : pool) t.join();
    }

    auto out = open_out(a.out);
    write_score_header(out);
    std::array<double, kNumScores> sums{};
    for (size_t i = 0; i < preds.size(); ++i) {
        const std::string id = preds[i].id.empty() ? std::to_string(i + 1) : preds[i].id;
        if (!warnings[i].empty())
            std::cerr << "warning: " << id << ": " << warnings[i] << "\n";
        write_score_row(out, id, rows[i]);
        for (int k = 0; k < kNumScores; ++k) sums[k] += rows[i][k];
    }
    for (auto& s : sums) s /= static_cast<double>(preds.size());
    if (!a.summary.empty()) {
        auto sout = open_out(a.summary);
        write_score_header(sout);
        write_score_row(sout, "__avg__", sums);
    }
    std::cout << "evaluated " << preds.size() << " candidates against " << golds.size()
              << " gold graphs; avg smatch f1 " << fmt_fixed(sums[2]) << "\n";
    return 0;
}

// ---- gen ----

struct GenArgs {
    std::string out_dir;
    int sentences = 200;
    std::string systems = "alpha:1,beta:2,gamma:4,delta:7";
    uint64_t seed = 7;
    int nodes_min = 3, nodes_max = 10;
    int restarts = kDefaultRestarts;
};

int run_gen(const GenArgs& a) {
    GenOptions opt;
    opt.sentences = a.sentences;
    opt.nodes_min = a.nodes_min;
    opt.nodes_max = a.nodes_max;
    opt.seed = a.seed;
    opt.restarts = a.restarts;
    std::set<std::string> seen;
    for (const auto& part : split(a.systems, ',')) {
        const std::string spec = trim(part);
        if (spec.empty()) continue;
        size_t at = spec.rfind(':');
        if (at == std::string::npos || at == 0 || at + 1 == spec.size())
            die("bad system spec '" + spec + "', expected name:severity");
        SystemSpec s;
        s.name = spec.substr(0, at);
        s.corruption.severity =
            static_cast<int>(parse_double(spec.substr(at + 1), "--systems"));
        if (s.corruption.severity < 0) die("negative severity for system " + s.name);
        if (!seen.insert(s.name).second) die("duplicate system name " + s.name);
        opt.systems.push_back(std::move(s));
    }
    if (opt.systems.empty()) die("no systems given");

    const GenPools pools = make_gen_pools();
    GeneratedCorpus c = gen_training_corpus(opt, pools);
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);

    auto entry_of = [&](size_t i, const AmrGraph& g, const std::string& id) {
        CorpusEntry e;
        e.id = id;
        e.snt = c.sentences[i];
        e.penman = serialize_penman(g) + "\n";
        return e;
    };
    {
        std::vector<CorpusEntry> entries;
        for (size_t i = 0; i < c.gold.size(); ++i)
            entries.push_back(entry_of(i, c.gold[i], c.ids[i]));
        auto out = open_out((dir / "gold.amr").string());
        write_corpus(out, entries);
        std::vector<const DepTree*> blocks;
        for (const auto& t : c.deps) blocks.push_back(&t);
        auto dout = open_out((dir / "gold_dep.tsv").string());
        write_dep_blocks(dout, blocks);
    }
    for (size_t s = 0; s < c.system_names.size(); ++s) {
        std::vector<CorpusEntry> entries;
        for (size_t i = 0; i < c.gold.size(); ++i)
            entries.push_back(entry_of(i, c.parses[s][i], c.ids[i]));
        auto out = open_out((dir / (c.system_names[s] + ".amr")).string());
        write_corpus(out, entries);
    }
    {
        std::vector<CorpusEntry> entries;
        std::vector<const DepTree*> blocks;
        auto mout = open_out((dir / "manifest.tsv").string());
        mout << "id\tsentence\tsystem\n";
        auto sout = open_out((dir / "scores.tsv").string());
        write_score_header(sout);
        for (size_t i = 0; i < c.gold.size(); ++i) {
            for (size_t s = 0; s < c.system_names.size(); ++s) {
                const std::string id = c.ids[i] + "|" + c.system_names[s];
                entries.push_back(entry_of(i, c.parses[s][i], id));
                blocks.push_back(&c.deps[i]);
                mout << id << '\t' << c.ids[i] << '\t' << c.system_names[s] << '\n';
                write_score_row(sout, id, c.scores[s][i].flatten());
            }
        }
        auto out = open_out((dir / "candidates.amr").string());
        write_corpus(out, entries);
        auto dout = open_out((dir / "candidates_dep.tsv").string());
        write_dep_blocks(dout, blocks);
    }
    {
        auto tout = open_out((dir / "truth.tsv").string());
        tout << "system\tavg_smatch_f1\n";
        std::cout << "wrote " << a.out_dir << ": " << c.gold.size() << " sentences, "
                  << c.system_names.size() << " systems\n";
        for (size_t s = 0; s < c.system_names.size(); ++s) {
            double avg = 0.0;
            for (const auto& sv : c.scores[s]) avg += sv.flatten()[2];
            avg /= static_cast<double>(c.scores[s].size());
            tout << c.system_names[s] << '\t' << fmt_fixed(avg) << '\n';
            std::cout << "  " << c.system_names[s] << ": severity "
                      << opt.systems[s].corruption.severity << ", ops applied " << c.applied[s]
                      << ", skipped " << c.skipped[s] << ", avg smatch f1 " << fmt_fixed(avg)
                      << "\n";
        }
    }
    return 0;
}

// ---- prep ----

struct PrepArgs {
    std::string corpus, dep, gold, scores, vocab_in, vocab_out, out;
    int max_len = kDefaultMaxLen;
    int min_freq = kDefaultMinFreq;
    int restarts = kDefaultRestarts;
    uint64_t seed = 0;
};

int run_prep(const PrepArgs& a) {
    if (a.vocab_in.empty() == a.vocab_out.empty())
        die("pass exactly one of --vocab and --vocab-out");
    auto cin_ = open_in(a.corpus);
    auto entries = read_corpus(cin_);
    if (entries.empty()) die("corpus is empty");
    std::vector<DepTree> deps;
    if (!a.dep.empty()) {
        auto din = open_in(a.dep);
        deps = read_dep_tsv(din);
        if (deps.size() != entries.size())
            die("dependency file has " + std::to_string(deps.size()) + " blocks for " +
                std::to_string(entries.size()) + " corpus entries");
    }

    std::unordered_map<std::string, AmrGraph> gold_graphs;
    ScoreTable score_table;
    if (!a.gold.empty()) {
        auto gin = open_in(a.gold);
        for (const auto& e : read_corpus(gin)) {
            if (e.id.empty()) die("gold corpus entries need ::id for target lookup");
            try {
                gold_graphs[e.id] = parse_penman(e.penman);
            } catch (const std::exception& ex) {
                die("gold entry " + e.id + ": " + ex.what());
            }
        }
    } else if (!a.scores.empty()) {
        score_table = read_score_table(a.scores);
    }

    std::vector<LinearizedInput> inputs;
    std::vector<AmrGraph> graphs(entries.size());
    std::vector<char> ok(entries.size(), 1);
    size_t failures = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        try {
            graphs[i] = parse_penman(entries[i].penman);
        } catch (const std::exception& ex) {
            ok[i] = 0;
            ++failures;
            const std::string id = entries[i].id.empty() ? std::to_string(i + 1) : entries[i].id;
            std::cerr << "warning: " << id << ": parse failed: " << ex.what() << "\n";
            graphs[i] = AmrGraph();
            graphs[i].add_node("x", kOovToken);
            graphs[i].root = "x";
        }
        inputs.push_back(
            build_input(graphs[i], entries[i].snt, deps.empty() ? nullptr : &deps[i]));
    }

    Vocab vocab;
    if (!a.vocab_in.empty()) {
        auto vin = open_in(a.vocab_in);
        vocab = Vocab::load(vin);
    } else {
        vocab = build_vocab(inputs, a.min_freq, a.max_len);
        auto vout = open_out(a.vocab_out);
        vocab.save(vout);
    }

    std::vector<EncodedInstance> data;
    for (size_t i = 0; i < entries.size(); ++i) {
        EncodedInstance e = encode(inputs[i], vocab);
        e.id = entries[i].id.empty() ? std::to_string(i + 1) : entries[i].id;
        e.parse_ok = ok[i] != 0;
        if (!a.gold.empty()) {
            auto it = gold_graphs.find(strip_candidate_suffix(e.id));
            if (it == gold_graphs.end()) die("no gold entry for candidate id " + e.id);
            e.targets = e.parse_ok
                            ? evaluate_all(graphs[i], it->second, a.restarts,
                                           Rng::mix(a.seed, static_cast<uint64_t>(i)))
                                  .flatten()
                            : zero_scores().flatten();
            e.has_targets = true;
        } else if (!a.scores.empty()) {
            const auto* row = score_table.find(e.id);
            if (row == nullptr) die("no score row for candidate id " + e.id);
            e.targets = *row;
            e.has_targets = true;
        }
        data.push_back(std::move(e));
    }
    auto out = open_out(a.out);
    write_jsonl(out, data);
    std::cout << "encoded " << data.size() << " instances (" << failures
              << " parse failures) to " << a.out << "\n";
    if (!a.vocab_out.empty())
        std::cout << "vocabulary: " << vocab.token_count() << " tokens, "
                  << vocab.sense_count() << " senses, max length " << vocab.max_len() << "\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string train, dev, vocab, model_out, history;
    double lr = 0.001;
    int epochs = 20;
    int batch = 16;
    uint64_t seed = 0;
    int embed_dim = -1, hidden_dim = -1, layers = -1;
    double lambda1 = -1.0, lambda2 = -1.0;
    bool one_lstm = false, no_dep = false, no_pointers = false, no_hl = false, no_hmtl = false;
};

int run_train(const TrainArgs& a) {
    auto vin = open_in(a.vocab);
    Vocab vocab = Vocab::load(vin);
    auto tin = open_in(a.train);
    auto train_data = read_jsonl(tin);
    auto din = open_in(a.dev);
    auto dev_data = read_jsonl(din);
    if (train_data.empty() || dev_data.empty()) die("training and dev sets must be non-empty");
    for (const auto& e : train_data)
        if (!e.has_targets) die("training instance " + e.id + " has no targets");
    for (const auto& e : dev_data)
        if (!e.has_targets) die("dev instance " + e.id + " has no targets");

    ModelConfig cfg;
    if (a.embed_dim > 0) cfg.embed_dim = a.embed_dim;
    if (a.hidden_dim > 0) cfg.hidden_dim = a.hidden_dim;
    if (a.layers > 0) cfg.lstm_layers = a.layers;
    if (a.lambda1 >= 0.0) cfg.lambda1 = a.lambda1;
    if (a.lambda2 >= 0.0) cfg.lambda2 = a.lambda2;
    cfg.shared_encoder = a.one_lstm;
    cfg.use_dep = !a.no_dep;
    cfg.use_pointers = !a.no_pointers;
    if (a.no_hl) cfg.hierarchical = false;
    if (a.no_hmtl) cfg.multitask = false;
    cfg.token_vocab = vocab.token_count();
    cfg.pointer_vocab = vocab.pointer_count();
    cfg.sense_vocab = vocab.sense_count();
    cfg.max_len = vocab.max_len();
    normalize_config(cfg);
    check_instances(cfg, train_data);
    check_instances(cfg, dev_data);

    Model m = init_model(cfg, a.seed);
    TrainOptions topt;
    topt.lr = a.lr;
    topt.epochs = a.epochs;
    topt.batch_size = a.batch;
    topt.seed = a.seed;
    TrainResult res = train(m, train_data, dev_data, topt);

    for (const auto& ep : res.history) {
        std::cout << "epoch " << ep.epoch << ": train loss " << fmt_fixed(ep.train_loss)
                  << ", dev rho "
                  << (ep.dev_rho_defined ? fmt_fixed(ep.dev_rho) : std::string("undefined"))
                  << (ep.epoch == res.best_epoch ? " *" : "") << "\n";
    }
    if (res.best_epoch == 0) die("no epoch produced a defined dev correlation");
    std::cout << "best epoch " << res.best_epoch << " (dev rho " << fmt_fixed(res.best_rho)
              << ")\n";
    if (!a.history.empty()) {
        auto hout = open_out(a.history);
        hout << "epoch\ttrain_loss\tdev_rho\tbest\n";
        for (const auto& ep : res.history) {
            hout << ep.epoch << '\t' << fmt_fixed(ep.train_loss) << '\t'
                 << (ep.dev_rho_defined ? fmt_fixed(ep.dev_rho) : std::string("nan")) << '\t'
                 << (ep.epoch == res.best_epoch ? 1 : 0) << '\n';
        }
    }
    auto mout = open_out(a.model_out);
    save_model(mout, m);
    std::cout << "saved model to " << a.model_out << "\n";
    return 0;
}

// ---- predict ----

struct PredictArgs {
    std::string model, data, out;
    int batch = 16;
};

int run_predict(const PredictArgs& a) {
    auto min_ = open_in(a.model);
    Model m = load_model(min_);
    auto din = open_in(a.data);
    auto data = read_jsonl(din);
    check_instances(m.cfg, data);
    auto preds = predict(m, data, a.batch);
    auto out = open_out(a.out);
    write_score_header(out);
    size_t zeroed = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        if (!data[i].parse_ok) {
            preds[i] = zero_scores().flatten();
            ++zeroed;
        }
        write_score_row(out, data[i].id, preds[i]);
    }
    std::cout << "predicted scores for " << data.size() << " instances";
    if (zeroed > 0) std::cout << " (" << zeroed << " unparsed, scored zero)";
    std::cout << "\n";
    return 0;
}

// ---- rank ----

struct RankArgs {
    std::string manifest, predictions, prior, gold_scores, out, report;
    std::string format = "tsv";
};

ojson prf_json(const Prf& p) {
    return ojson{{"p", p.p}, {"r", p.r}, {"f1", p.f1}};
}

int run_rank(const RankArgs& a) {
    ScoreTable preds = read_score_table(a.predictions);
    ScoreTable gold;
    if (!a.gold_scores.empty()) gold = read_score_table(a.gold_scores);
    SystemPrior prior;
    bool use_prior = false;
    if (!a.prior.empty()) {
        for (const auto& [sys, w] : read_pair_table(a.prior)) prior[sys] = w;
        use_prior = true;
    }

    auto min_ = open_in(a.manifest);
    std::vector<CandidateSet> corpus;
    std::unordered_map<std::string, size_t> set_index;
    std::vector<std::vector<std::string>> set_cand_ids;  // parallel to corpus
    std::string line;
    bool first = true;
    size_t lineno = 0;
    while (std::getline(min_, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cols = split(line, '\t');
        if (first) {
            first = false;
            if (cols.size() >= 3 && cols[0] == "id") continue;
        }
        if (cols.size() < 3)
            die(a.manifest + ":" + std::to_string(lineno) + ": expected id, sentence, system");
        const std::string& id = cols[0];
        const std::string& sent = cols[1];
        const std::string& sys = cols[2];
        const auto* p = preds.find(id);
        if (p == nullptr) die("no prediction row for candidate " + id);
        Candidate c;
        c.system = sys;
        c.predicted = *p;
        if (!a.gold_scores.empty()) {
            const auto* g = gold.find(id);
            if (g == nullptr) die("no gold score row for candidate " + id);
            c.gold = *g;
        }
        auto [it, fresh] = set_index.try_emplace(sent, corpus.size());
        if (fresh) {
            corpus.push_back({});
            corpus.back().sentence_id = sent;
            set_cand_ids.push_back({});
        }
        corpus[it->second].candidates.push_back(std::move(c));
        set_cand_ids[it->second].push_back(id);
    }
    if (corpus.empty()) die("manifest is empty");

    auto out = open_out(a.out);
    out << "sentence\tsystem\tid\tpredicted_f1";
    if (!a.gold_scores.empty()) out << "\tgold_f1";
    out << '\n';
    for (size_t si = 0; si < corpus.size(); ++si) {
        const CandidateSet& cs = corpus[si];
        const Candidate& sel = select_parse(cs, use_prior ? &prior : nullptr);
        const size_t ci = static_cast<size_t>(&sel - cs.candidates.data());
        out << cs.sentence_id << '\t' << sel.system << '\t' << set_cand_ids[si][ci] << '\t'
            << fmt_fixed(predicted_f1(sel));
        if (sel.gold.has_value()) out << '\t' << fmt_fixed((*sel.gold)[2]);
        out << '\n';
    }
    std::cout << "selected parses for " << corpus.size() << " sentences to " << a.out << "\n";

    if (!a.report.empty()) {
        if (a.gold_scores.empty()) die("--report needs --gold-scores");
        RankingReport rep = ranking_report(corpus, use_prior ? &prior : nullptr);
        auto rout = open_out(a.report);
        if (a.format == "json") {
            ojson j;
            j["selected"] = prf_json(rep.selected);
            j["random"] = prf_json(rep.random);
            j["lower"] = prf_json(rep.lower);
            j["upper"] = prf_json(rep.upper);
            j["mean_rho"] = rep.mean_rho;
            j["pos_fraction"] = rep.pos_fraction;
            j["sentences"] = rep.sentences;
            j["rho_scored"] = rep.rho_scored;
            j["rho_skipped"] = rep.rho_skipped;
            rout << j.dump(2) << '\n';
        } else {
            auto prf_rows = [&](const char* name, const Prf& p) {
                rout << name << "_p\t" << fmt_fixed(p.p) << '\n';
                rout << name << "_r\t" << fmt_fixed(p.r) << '\n';
                rout << name << "_f1\t" << fmt_fixed(p.f1) << '\n';
            };
            rout << "metric\tvalue\n";
            prf_rows("selected", rep.selected);
            prf_rows("random", rep.random);
            prf_rows("lower", rep.lower);
            prf_rows("upper", rep.upper);
            rout << "mean_rho\t" << fmt_fixed(rep.mean_rho) << '\n';
            rout << "pos_fraction\t" << fmt_fixed(rep.pos_fraction) << '\n';
            rout << "sentences\t" << rep.sentences << '\n';
            rout << "rho_scored\t" << rep.rho_scored << '\n';
            rout << "rho_skipped\t" << rep.rho_skipped << '\n';
        }
        std::cout << "ranking report: selected f1 " << fmt_fixed(rep.selected.f1) << ", random "
                  << fmt_fixed(rep.random.f1) << ", range [" << fmt_fixed(rep.lower.f1) << ", "
                  << fmt_fixed(rep.upper.f1) << "]\n";
    }
    return 0;
}

// ---- rank-systems ----

struct RankSystemsArgs {
    std::string predictions, truth, rank_pairs, out;
    std::string format = "tsv";
    long long trials = 1000000;
    uint64_t seed = 0;
};

int run_rank_systems(const RankSystemsArgs& a) {
    std::vector<double> pred_ranks, true_ranks;
    ojson table = ojson::array();
    std::ostringstream table_tsv;

    if (!a.rank_pairs.empty()) {
        auto in = open_in(a.rank_pairs);
        std::string line;
        size_t lineno = 0;
        bool first = true;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            auto cols = split(line, '\t');
            if (cols.size() == 1) cols = split_ws(line);
            if (cols.size() < 2) die(a.rank_pairs + ":" + std::to_string(lineno) +
                                     ": expected [name] predicted_rank true_rank");
            size_t base = cols.size() >= 3 ? cols.size() - 2 : 0;
            if (first) {
                first = false;
                try {
                    std::stod(cols[base]);
                } catch (const std::exception&) {
                    continue;
                }
            }
            const std::string where = a.rank_pairs + ":" + std::to_string(lineno);
            pred_ranks.push_back(parse_double(cols[base], where));
            true_ranks.push_back(parse_double(cols[base + 1], where));
        }
    } else {
        if (a.predictions.empty() || a.truth.empty())
            die("pass --predictions and --true, or --rank-pairs");
        ScoreTable preds = read_score_table(a.predictions);
        std::map<std::string, std::vector<double>> by_system;
        for (size_t i = 0; i < preds.ids.size(); ++i) {
            const std::string sys = candidate_system(preds.ids[i]);
            if (sys.empty())
                die("prediction id '" + preds.ids[i] + "' has no |system suffix");
            by_system[sys].push_back(preds.rows[i][2]);
        }
        std::map<std::string, double> truth;
        for (const auto& [sys, v] : read_pair_table(a.truth)) truth[sys] = v;
        if (truth.size() != by_system.size())
            die("system sets differ between predictions and --true");
        std::vector<std::pair<std::string, double>> pred_avg, true_val;
        for (const auto& [sys, xs] : by_system) {
            auto it = truth.find(sys);
            if (it == truth.end()) die("system " + sys + " missing from --true");
            double avg = 0.0;
            for (double x : xs) avg += x;
            avg /= static_cast<double>(xs.size());
            pred_avg.emplace_back(sys, avg);
            true_val.emplace_back(sys, it->second);
        }
        pred_ranks = ranks_from_values(pred_avg);
        true_ranks = ranks_from_values(true_val);
        table_tsv << "system\tavg_predicted_f1\tpredicted_rank\ttrue_value\ttrue_rank\n";
        for (size_t i = 0; i < pred_avg.size(); ++i) {
            table_tsv << pred_avg[i].first << '\t' << fmt_fixed(pred_avg[i].second) << '\t'
                      << fmt_fixed(pred_ranks[i]) << '\t' << fmt_fixed(true_val[i].second)
                      << '\t' << fmt_fixed(true_ranks[i]) << '\n';
            table.push_back(ojson{{"system", pred_avg[i].first},
                                  {"avg_predicted_f1", pred_avg[i].second},
                                  {"predicted_rank", pred_ranks[i]},
                                  {"true_value", true_val[i].second},
                                  {"true_rank", true_ranks[i]}});
        }
    }

    RankSignificance sig =
        rank_significance(pred_ranks, true_ranks, static_cast<size_t>(a.trials), a.seed);
    std::cout << "spearman rho " << fmt_fixed(sig.rho) << ", p1 " << fmt_fixed(sig.p1)
              << ", p2 " << fmt_fixed(sig.p2) << " (" << pred_ranks.size() << " systems, "
              << a.trials << " permutation trials)\n";
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        if (a.format == "json") {
            ojson j;
            if (!table.empty()) j["systems"] = table;
            j["rho"] = sig.rho;
            j["p1"] = sig.p1;
            j["p2"] = sig.p2;
            j["trials"] = a.trials;
            out << j.dump(2) << '\n';
        } else {
            const std::string t = table_tsv.str();
            if (!t.empty()) out << t << '\n';
            out << "metric\tvalue\n";
            out << "rho\t" << fmt_fixed(sig.rho) << '\n';
            out << "p1\t" << fmt_fixed(sig.p1) << '\n';
            out << "p2\t" << fmt_fixed(sig.p2) << '\n';
            out << "trials\t" << a.trials << '\n';
        }
    }
    return 0;
}

// ---- report ----

struct ReportArgs {
    std::string predictions, gold_scores, out_dir;
    std::string qs = "5,10,25,50,75,90,95";
    std::string format = "tsv";
    int grid_points = 101;
    int bins = 20;
};

int run_report(const ReportArgs& a) {
    ScoreTable preds = read_score_table(a.predictions);
    if (preds.rows.empty()) die("prediction table is empty");
    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    const bool as_json = a.format == "json";
    const char* ext = as_json ? ".json" : ".tsv";
    const auto cols = score_column_names();
    const std::vector<double> qs = parse_double_list(a.qs, "--qs");
    for (double q : qs)
        if (q < 0.0 || q > 100.0) die("--qs values must lie in [0, 100]");

    auto column = [&](const ScoreTable& t, int k) {
        std::vector<double> xs;
        xs.reserve(t.rows.size());
        for (const auto& r : t.rows) xs.push_back(r[k]);
        return xs;
    };
    auto table_out = [&](const char* name) {
        return open_out((dir / (name + std::string(ext))).string());
    };

    {
        std::vector<std::string> qlabels;
        for (double q : qs) {
            std::ostringstream label;
            label << "q" << q;
            qlabels.push_back(label.str());
        }
        auto out = table_out("percentiles");
        if (as_json) {
            ojson j = ojson::array();
            for (int k = 0; k < kNumScores; ++k) {
                auto ps = percentiles(column(preds, k), qs);
                ojson row;
                row["column"] = cols[k];
                for (size_t i = 0; i < qs.size(); ++i) row[qlabels[i]] = ps[i];
                j.push_back(std::move(row));
            }
            out << j.dump(2) << '\n';
        } else {
            out << "column";
            for (const auto& l : qlabels) out << '\t' << l;
            out << '\n';
            for (int k = 0; k < kNumScores; ++k) {
                auto ps = percentiles(column(preds, k), qs);
                out << cols[k];
                for (double v : ps) out << '\t' << fmt_fixed(v);
                out << '\n';
            }
        }
    }
    {
        std::vector<double> xs = column(preds, 2);
        std::vector<double> grid, dens;
        if (xs.size() >= 2) {
            double h = 0.0;
            try {
                h = scott_bandwidth(xs);
            } catch (const std::exception&) {
                h = 0.0;
            }
            if (h > 0.0) {
                const double lo = *std::min_element(xs.begin(), xs.end()) - 4.0 * h;
                const double hi = *std::max_element(xs.begin(), xs.end()) + 4.0 * h;
                const int n = std::max(2, a.grid_points);
                grid.resize(n);
                for (int i = 0; i < n; ++i)
                    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
                dens = kde_scott(xs, grid);
            }
        }
        auto out = table_out("density");
        if (as_json) {
            ojson j = ojson::array();
            for (size_t i = 0; i < grid.size(); ++i)
                j.push_back(ojson{{"x", grid[i]}, {"density", dens[i]}});
            out << j.dump(2) << '\n';
        } else {
            out << "x\tdensity\n";
            for (size_t i = 0; i < grid.size(); ++i)
                out << fmt_fixed(grid[i]) << '\t' << fmt_fixed(dens[i]) << '\n';
        }
    }
    {
        std::vector<double> xs = column(preds, 2);
        const int bins = std::max(1, a.bins);
        std::vector<long long> counts(bins, 0);
        for (double x : xs) {
            int b = static_cast<int>(x * bins);
            b = std::max(0, std::min(bins - 1, b));
            ++counts[b];
        }
        auto out = table_out("histogram");
        if (as_json) {
            ojson j = ojson::array();
            for (int b = 0; b < bins; ++b)
                j.push_back(ojson{{"bin_lo", static_cast<double>(b) / bins},
                                  {"bin_hi", static_cast<double>(b + 1) / bins},
                                  {"count", counts[b]}});
            out << j.dump(2) << '\n';
        } else {
            out << "bin_lo\tbin_hi\tcount\n";
            for (int b = 0; b < bins; ++b)
                out << fmt_fixed(static_cast<double>(b) / bins) << '\t'
                    << fmt_fixed(static_cast<double>(b + 1) / bins) << '\t' << counts[b] << '\n';
        }
    }
    if (!a.gold_scores.empty()) {
        ScoreTable gold = read_score_table(a.gold_scores);
        std::vector<const std::array<double, kNumScores>*> gold_rows;
        for (const auto& id : preds.ids) {
            const auto* g = gold.find(id);
            if (g == nullptr) die("no gold score row for id " + id);
            gold_rows.push_back(g);
        }
        auto out = table_out("correlations");
        ojson j = ojson::array();
        if (!as_json) out << "column\trho\tp1\n";
        for (int k = 0; k < kNumScores; ++k) {
            std::vector<double> xs = column(preds, k), ys;
            ys.reserve(gold_rows.size());
            for (const auto* g : gold_rows) ys.push_back((*g)[k]);
            bool defined = true;
            double rho = 0.0;
            try {
                rho = pearson(xs, ys);
            } catch (const UndefinedCorrelation&) {
                defined = false;
            }
            const bool has_p1 = defined && xs.size() >= 3;
            const double p1 = has_p1 ? pearson_p1(rho, xs.size()) : 0.0;
            if (as_json) {
                ojson row;
                row["column"] = cols[k];
                row["rho"] = defined ? ojson(rho) : ojson(nullptr);
                row["p1"] = has_p1 ? ojson(p1) : ojson(nullptr);
                j.push_back(std::move(row));
            } else if (!defined) {
                out << cols[k] << "\tnan\tnan\n";
            } else {
                out << cols[k] << '\t' << fmt_fixed(rho) << '\t'
                    << (has_p1 ? fmt_fixed(p1) : std::string("nan")) << '\n';
            }
        }
        if (as_json) out << j.dump(2) << '\n';
    }
    std::cout << "wrote report tables to " << a.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AMR quality estimation toolkit"};
    app.require_subcommand(1);

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Score candidate graphs against gold graphs");
    eval->add_option("--pred", ev.pred, "candidate corpus")->required();
    eval->add_option("--gold", ev.gold, "gold corpus")->required();
    eval->add_option("--out", ev.out, "per-candidate score TSV")->required();
    eval->add_option("--summary", ev.summary, "column-average TSV");
    eval->add_option("--restarts", ev.restarts, "random restarts for graph matching");
    eval->add_option("--seed", ev.seed, "random seed");
    eval->add_option("--jobs", ev.jobs, "worker threads");

    GenArgs ge;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic scored corpus");
    gen->add_option("--out-dir", ge.out_dir, "output directory")->required();
    gen->add_option("--sentences", ge.sentences, "number of sentences");
    gen->add_option("--systems", ge.systems, "comma list of name:severity");
    gen->add_option("--seed", ge.seed, "random seed");
    gen->add_option("--nodes-min", ge.nodes_min, "minimum gold graph nodes");
    gen->add_option("--nodes-max", ge.nodes_max, "maximum gold graph nodes");
    gen->add_option("--restarts", ge.restarts, "random restarts for true scoring");

    PrepArgs pr;
    auto* prep = app.add_subcommand("prep", "Encode a corpus into model-ready instances");
    prep->add_option("--corpus", pr.corpus, "candidate corpus")->required();
    prep->add_option("--dep", pr.dep, "dependency TSV aligned with the corpus");
    auto* prep_gold = prep->add_option("--gold", pr.gold, "gold corpus to compute targets");
    auto* prep_scores =
        prep->add_option("--scores", pr.scores, "precomputed target score TSV");
    prep_gold->excludes(prep_scores);
    prep->add_option("--vocab", pr.vocab_in, "existing vocabulary file");
    prep->add_option("--vocab-out", pr.vocab_out, "build vocabulary and write it here");
    prep->add_option("--out", pr.out, "output JSONL")->required();
    prep->add_option("--max-len", pr.max_len, "maximum sequence length");
    prep->add_option("--min-freq", pr.min_freq, "vocabulary frequency threshold");
    prep->add_option("--restarts", pr.restarts, "random restarts for target scoring");
    prep->add_option("--seed", pr.seed, "random seed for target scoring");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train the score regressor");
    train->add_option("--train", tr.train, "training JSONL")->required();
    train->add_option("--dev", tr.dev, "development JSONL")->required();
    train->add_option("--vocab", tr.vocab, "vocabulary file")->required();
    train->add_option("--model-out", tr.model_out, "model output path")->required();
    train->add_option("--history", tr.history, "per-epoch history TSV");
    train->add_option("--lr", tr.lr, "learning rate");
    train->add_option("--epochs", tr.epochs, "training epochs");
    train->add_option("--batch", tr.batch, "batch size");
    train->add_option("--seed", tr.seed, "random seed");
    train->add_option("--embed-dim", tr.embed_dim, "embedding size");
    train->add_option("--hidden-dim", tr.hidden_dim, "LSTM hidden size");
    train->add_option("--layers", tr.layers, "LSTM layers per direction");
    train->add_option("--lambda1", tr.lambda1, "subtask loss weight");
    train->add_option("--lambda2", tr.lambda2, "main loss weight");
    train->add_flag("--one-lstm", tr.one_lstm, "share one encoder across both streams");
    train->add_flag("--no-dep", tr.no_dep, "encode raw words instead of dependencies");
    train->add_flag("--no-pointers", tr.no_pointers, "disable pointer embeddings");
    train->add_flag("--no-hl", tr.no_hl, "disable the hierarchical head");
    train->add_flag("--no-hmtl", tr.no_hmtl, "optimize the main scores only");

    PredictArgs pd;
    auto* predict = app.add_subcommand("predict", "Predict scores with a trained model");
    predict->add_option("--model", pd.model, "model file")->required();
    predict->add_option("--data", pd.data, "JSONL instances")->required();
    predict->add_option("--out", pd.out, "predicted score TSV")->required();
    predict->add_option("--batch", pd.batch, "batch size");

    RankArgs rk;
    auto* rank = app.add_subcommand("rank", "Pick the best parse per sentence");
    rank->add_option("--manifest", rk.manifest, "candidate manifest TSV")->required();
    rank->add_option("--predictions", rk.predictions, "predicted score TSV")->required();
    rank->add_option("--prior", rk.prior, "per-system prior weights TSV");
    rank->add_option("--gold-scores", rk.gold_scores, "true score TSV for reporting");
    rank->add_option("--out", rk.out, "selected parse TSV")->required();
    rank->add_option("--report", rk.report, "oracle comparison report");
    rank->add_option("--format", rk.format, "report format: tsv or json")
        ->check(CLI::IsMember({"tsv", "json"}));

    RankSystemsArgs rs;
    auto* rank_systems = app.add_subcommand("rank-systems", "Rank systems by predicted score");
    rank_systems->add_option("--predictions", rs.predictions,
                             "predicted score TSV with sentence|system ids");
    rank_systems->add_option("--true", rs.truth, "true per-system value TSV");
    rank_systems->add_option("--rank-pairs", rs.rank_pairs,
                             "precomputed [name] predicted_rank true_rank table");
    rank_systems->add_option("--trials", rs.trials, "permutation trials");
    rank_systems->add_option("--seed", rs.seed, "random seed");
    rank_systems->add_option("--out", rs.out, "output file");
    rank_systems->add_option("--format", rs.format, "output format: tsv or json")
        ->check(CLI::IsMember({"tsv", "json"}));

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Distribution tables for predicted scores");
    report->add_option("--predictions", rp.predictions, "predicted score TSV")->required();
    report->add_option("--gold-scores", rp.gold_scores, "true score TSV for correlations");
    report->add_option("--out-dir", rp.out_dir, "output directory")->required();
    report->add_option("--qs", rp.qs, "comma list of percentile ranks");
    report->add_option("--grid-points", rp.grid_points, "density grid size");
    report->add_option("--bins", rp.bins, "histogram bins");
    report->add_option("--format", rp.format, "table format: tsv or json")
        ->check(CLI::IsMember({"tsv", "json"}));

    CLI11_PARSE(app, argc, argv);
    try {
        if (eval->parsed()) return run_eval(ev);
        if (gen->parsed()) return run_gen(ge);
        if (prep->parsed()) return run_prep(pr);
        if (train->parsed()) return run_train(tr);
        if (predict->parsed()) return run_predict(pd);
        if (rank->parsed()) return run_rank(rk);
        if (rank_systems->parsed()) return run_rank_systems(rs);
        if (report->parsed()) return run_report(rp);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
