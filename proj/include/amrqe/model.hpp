#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "amrqe/dataset.hpp"
#include "amrqe/nn.hpp"
#include "amrqe/score.hpp"
#include "amrqe/stats.hpp"

namespace amrqe {

struct ModelConfig {
    int embed_dim = 128;
    int hidden_dim = 128;
    int lstm_layers = 2;
    bool use_dep = true;         // encode the dependency stream (else the raw word stream)
    bool use_pointers = true;    // add pointer embeddings to the token sum
    bool hierarchical = true;    // subtask outputs feed the main head
    bool multitask = true;       // false: optimize the main slice only (flat head)
    bool shared_encoder = false; // one LSTM stack for both streams
    int token_vocab = 0;
    int pointer_vocab = 0;
    int sense_vocab = 0;
    int max_len = kDefaultMaxLen;
    double lambda1 = 0.2;  // subtask loss weight
    double lambda2 = 1.0;  // main loss weight
};

inline void normalize_config(ModelConfig& cfg) {
    if (!cfg.multitask) cfg.hierarchical = false;
    if (cfg.token_vocab < 4 || cfg.pointer_vocab < 3 || cfg.sense_vocab < 1)
        throw std::invalid_argument("model config: vocabulary sizes not set");
    if (cfg.embed_dim <= 0 || cfg.hidden_dim <= 0 || cfg.lstm_layers <= 0)
        throw std::invalid_argument("model config: non-positive dimension");
}

// Embeddings are stored one column per id; column 0 of each table is the
// padding vector, pinned at zero and excluded from updates (for senses id 0
// doubles as "no sense").
struct Model {
    ModelConfig cfg;
    Mat tok_emb, ptr_emb, sense_emb;  // E x V
    std::vector<LstmCell> amr_cells;  // per layer: [2l] forward, [2l+1] backward
    std::vector<LstmCell> dep_cells;  // empty when cfg.shared_encoder
    Mat w_sub, b_sub;                 // hierarchical only: (d-k) x 6H
    Mat w_main, b_main;               // hierarchical: k x (6H + d - k); flat: d x 6H
};

namespace detail {

inline std::vector<LstmCell> make_cells(const ModelConfig& cfg) {
    std::vector<LstmCell> cells;
    for (int l = 0; l < cfg.lstm_layers; ++l) {
        const int in_dim = l == 0 ? cfg.embed_dim : 2 * cfg.hidden_dim;
        cells.push_back(LstmCell::zeros(in_dim, cfg.hidden_dim));
        cells.push_back(LstmCell::zeros(in_dim, cfg.hidden_dim));
    }
    return cells;
}

}  // namespace detail

// Shapes follow the config; every matrix starts at zero.
inline Model make_model(ModelConfig cfg) {
    normalize_config(cfg);
    Model m;
    m.cfg = cfg;
    m.tok_emb = Mat::Zero(cfg.embed_dim, cfg.token_vocab);
    m.ptr_emb = Mat::Zero(cfg.embed_dim, cfg.pointer_vocab);
    m.sense_emb = Mat::Zero(cfg.embed_dim, cfg.sense_vocab);
    m.amr_cells = detail::make_cells(cfg);
    if (!cfg.shared_encoder) m.dep_cells = detail::make_cells(cfg);
    const int rep = 6 * cfg.hidden_dim;
    if (cfg.hierarchical) {
        m.w_sub = Mat::Zero(kNumScores - kNumMainScores, rep);
        m.b_sub = Mat::Zero(kNumScores - kNumMainScores, 1);
        m.w_main = Mat::Zero(kNumMainScores, rep + kNumScores - kNumMainScores);
        m.b_main = Mat::Zero(kNumMainScores, 1);
    } else {
        m.w_main = Mat::Zero(kNumScores, rep);
        m.b_main = Mat::Zero(kNumScores, 1);
    }
    return m;
}

// Visits every trainable matrix in a fixed order; serialization, Adam state
// and initialization all rely on this order being stable.
template <class ModelT, class Fn>
void for_each_param(ModelT& model, Fn&& fn) {
    fn("emb.tok", model.tok_emb);
    fn("emb.ptr", model.ptr_emb);
    fn("emb.sense", model.sense_emb);
    auto visit_cells = [&](const char* prefix, auto& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            std::string base = std::string(prefix) + ".l" + std::to_string(i / 2) +
                               (i % 2 == 0 ? ".f" : ".r");
            fn(base + ".wx", cells[i].wx);
            fn(base + ".wh", cells[i].wh);
            fn(base + ".b", cells[i].b);
        }
    };
    visit_cells("enc.amr", model.amr_cells);
    visit_cells("enc.dep", model.dep_cells);
    if (model.cfg.hierarchical) {
        fn("head.sub.w", model.w_sub);
        fn("head.sub.b", model.b_sub);
    }
    fn("head.main.w", model.w_main);
    fn("head.main.b", model.b_main);
}

// Embeddings draw from U(-0.05, 0.05), weight matrices from the Glorot
// bound, biases start at zero except the forget gates at one. The draw order
// is the parameter order, so a seed pins the whole initialization.
inline Model init_model(const ModelConfig& cfg, uint64_t seed) {
    Model m = make_model(cfg);
    Rng rng(seed);
    uniform_fill(m.tok_emb, rng, 0.05);
    uniform_fill(m.ptr_emb, rng, 0.05);
    uniform_fill(m.sense_emb, rng, 0.05);
    m.tok_emb.col(0).setZero();
    m.ptr_emb.col(0).setZero();
    m.sense_emb.col(0).setZero();
    for (auto& c : m.amr_cells) c.init(rng);
    for (auto& c : m.dep_cells) c.init(rng);
    if (m.cfg.hierarchical) {
        glorot_fill(m.w_sub, rng);
        m.b_sub.setZero();
    }
    glorot_fill(m.w_main, rng);
    m.b_main.setZero();
    return m;
}

inline Model zero_like(const Model& m) { return make_model(m.cfg); }

// ---- batching ----

struct StreamBatch {
    Eigen::MatrixXi tok, ptr, sense;  // T x B; id 0 pads
    Mat mask;                         // T x B
    int T = 0, B = 0;
};

struct ModelBatch {
    StreamBatch amr, ctx;  // ctx: dependency stream, or word stream without it
    std::vector<int> index;
};

namespace detail {

inline StreamBatch make_stream_batch(const std::vector<const std::vector<int>*>& toks,
                                     const std::vector<const std::vector<int>*>& ptrs,
                                     const std::vector<const std::vector<int>*>& senses,
                                     bool use_pointers, int max_len) {
    StreamBatch sb;
    sb.B = static_cast<int>(toks.size());
    size_t longest = 1;
    for (const auto* t : toks) longest = std::max(longest, t->size());
    longest = std::min(longest, static_cast<size_t>(max_len));
    sb.T = static_cast<int>(longest);
    sb.tok = Eigen::MatrixXi::Zero(sb.T, sb.B);
    sb.ptr = Eigen::MatrixXi::Zero(sb.T, sb.B);
    sb.sense = Eigen::MatrixXi::Zero(sb.T, sb.B);
    sb.mask = Mat::Zero(sb.T, sb.B);
    for (int b = 0; b < sb.B; ++b) {
        const auto& tk = *toks[b];
        const size_t n = std::min(tk.size(), longest);
        for (size_t t = 0; t < n; ++t) {
            sb.tok(t, b) = tk[t];
            if (use_pointers && ptrs[b] != nullptr) sb.ptr(t, b) = (*ptrs[b])[t];
            if (senses[b] != nullptr) sb.sense(t, b) = (*senses[b])[t];
            sb.mask(t, b) = 1.0;
        }
    }
    return sb;
}

}  // namespace detail

inline ModelBatch make_batch(const ModelConfig& cfg, const std::vector<EncodedInstance>& data,
                             const std::vector<int>& index) {
    ModelBatch batch;
    batch.index = index;
    std::vector<const std::vector<int>*> toks, ptrs, senses;
    for (int i : index) {
        toks.push_back(&data[i].amr_tok);
        ptrs.push_back(&data[i].amr_ptr);
        senses.push_back(&data[i].amr_sense);
    }
    batch.amr = detail::make_stream_batch(toks, ptrs, senses, cfg.use_pointers, cfg.max_len);
    toks.clear();
    ptrs.clear();
    senses.clear();
    for (int i : index) {
        toks.push_back(cfg.use_dep ? &data[i].dep_tok : &data[i].snt_tok);
        ptrs.push_back(cfg.use_dep ? &data[i].dep_ptr : &data[i].snt_ptr);
        senses.push_back(nullptr);
    }
    batch.ctx = detail::make_stream_batch(toks, ptrs, senses, cfg.use_pointers, cfg.max_len);
    return batch;
}

// Bounds-check ids once per dataset rather than inside the hot loop.
inline void check_instances(const ModelConfig& cfg, const std::vector<EncodedInstance>& data) {
    auto check = [&](const std::vector<int>& ids, int limit, const char* what, const std::string& id) {
        for (int v : ids)
            if (v < 0 || v >= limit)
                throw std::invalid_argument("instance " + id + ": " + what + " id " +
                                            std::to_string(v) + " outside vocabulary of " +
                                            std::to_string(limit));
    };
    for (const auto& e : data) {
        check(e.amr_tok, cfg.token_vocab, "token", e.id);
        check(e.dep_tok, cfg.token_vocab, "token", e.id);
        check(e.snt_tok, cfg.token_vocab, "token", e.id);
        check(e.amr_ptr, cfg.pointer_vocab, "pointer", e.id);
        check(e.dep_ptr, cfg.pointer_vocab, "pointer", e.id);
        check(e.snt_ptr, cfg.pointer_vocab, "pointer", e.id);
        check(e.amr_sense, cfg.sense_vocab, "sense", e.id);
    }
}

// ---- forward ----

struct LayerTrace {
    std::vector<Mat> input;  // per position, layer input
    LstmDirTrace f, r;
};

struct EncoderTrace {
    std::vector<LayerTrace> layers;
    Mat final_state;  // 2H x B
};

struct ForwardTrace {
    ModelBatch batch;
    EncoderTrace amr, ctx;
    Mat va, vd, u;
    Mat sub, main_in, preds;
};

// Token, pointer and sense vectors summed per position.
inline std::vector<Mat> embed_and_sum(const Model& m, const StreamBatch& sb) {
    std::vector<Mat> xs(sb.T);
    for (int t = 0; t < sb.T; ++t) {
        Mat x(m.cfg.embed_dim, sb.B);
        for (int b = 0; b < sb.B; ++b) {
            x.col(b) = m.tok_emb.col(sb.tok(t, b)) + m.ptr_emb.col(sb.ptr(t, b)) +
                       m.sense_emb.col(sb.sense(t, b));
        }
        xs[t] = std::move(x);
    }
    return xs;
}

namespace detail {

inline void encode_stream(const std::vector<LstmCell>& cells, std::vector<Mat> xs, const Mat& mask,
                          EncoderTrace& trace) {
    const int layers = static_cast<int>(cells.size()) / 2;
    const int T = static_cast<int>(xs.size());
    trace.layers.assign(layers, LayerTrace{});
    for (int l = 0; l < layers; ++l) {
        LayerTrace& lt = trace.layers[l];
        lt.input = std::move(xs);
        lstm_forward(cells[2 * l], lt.input, mask, false, lt.f);
        lstm_forward(cells[2 * l + 1], lt.input, mask, true, lt.r);
        if (l + 1 < layers) {
            xs.assign(T, Mat());
            for (int t = 0; t < T; ++t) {
                Mat o(lt.f.h[t].rows() * 2, lt.f.h[t].cols());
                o << lt.f.h[t], lt.r.h[t];
                xs[t] = std::move(o);
            }
        }
    }
    const LayerTrace& last = trace.layers.back();
    const Mat& hf = lstm_final(last.f, false);
    const Mat& hr = lstm_final(last.r, true);
    trace.final_state.resize(hf.rows() * 2, hf.cols());
    trace.final_state << hf, hr;
}

inline std::vector<Mat> decode_stream(const Model& m, const std::vector<LstmCell>& cells,
                                      const Mat& mask, const EncoderTrace& trace,
                                      const Mat& dfinal, std::vector<LstmCell>& cell_grads) {
    const int layers = static_cast<int>(cells.size()) / 2;
    const int T = static_cast<int>(trace.layers[0].input.size());
    const int H = m.cfg.hidden_dim;
    std::vector<Mat> dh_f(T), dh_r(T);
    dh_f[T - 1] = dfinal.topRows(H);
    dh_r[0] = dfinal.bottomRows(H);
    std::vector<Mat> dx;
    for (int l = layers - 1; l >= 0; --l) {
        const LayerTrace& lt = trace.layers[l];
        dx.assign(T, Mat());
        lstm_backward(cells[2 * l], lt.input, mask, false, lt.f, dh_f, cell_grads[2 * l], dx);
        lstm_backward(cells[2 * l + 1], lt.input, mask, true, lt.r, dh_r, cell_grads[2 * l + 1], dx);
        if (l > 0) {
            for (int t = 0; t < T; ++t) {
                dh_f[t] = dx[t].topRows(H);
                dh_r[t] = dx[t].bottomRows(H);
            }
        }
    }
    return dx;  // layer-0 input gradients
}

inline void scatter_embeddings(const Model& m, const StreamBatch& sb, const std::vector<Mat>& dxs,
                               Model& grads) {
    (void)m;
    for (int t = 0; t < sb.T; ++t) {
        if (dxs[t].size() == 0) continue;
        for (int b = 0; b < sb.B; ++b) {
            grads.tok_emb.col(sb.tok(t, b)) += dxs[t].col(b);
            grads.ptr_emb.col(sb.ptr(t, b)) += dxs[t].col(b);
            grads.sense_emb.col(sb.sense(t, b)) += dxs[t].col(b);
        }
    }
}

}  // namespace detail

// Runs the full network on a batch; fills `trace` when given so backward()
// can reuse the activations.
inline Mat forward(const Model& m, const ModelBatch& batch, ForwardTrace* trace = nullptr) {
    ForwardTrace local;
    ForwardTrace& tr = trace != nullptr ? *trace : local;
    if (trace != nullptr) tr.batch = batch;
    auto xs_amr = embed_and_sum(m, batch.amr);
    auto xs_ctx = embed_and_sum(m, batch.ctx);
    const auto& ctx_cells = m.cfg.shared_encoder ? m.amr_cells : m.dep_cells;
    detail::encode_stream(m.amr_cells, std::move(xs_amr), batch.amr.mask, tr.amr);
    detail::encode_stream(ctx_cells, std::move(xs_ctx), batch.ctx.mask, tr.ctx);
    tr.va = tr.amr.final_state;
    tr.vd = tr.ctx.final_state;
    const int B = static_cast<int>(tr.va.cols());
    tr.u.resize(tr.va.rows() * 3, B);
    tr.u << (tr.va.array() * tr.vd.array()).matrix(), tr.va - tr.vd, tr.va + tr.vd;
    if (m.cfg.hierarchical) {
        tr.sub = sigmoid((m.w_sub * tr.u).colwise() + m.b_sub.col(0));
        tr.main_in.resize(tr.u.rows() + tr.sub.rows(), B);
        tr.main_in << tr.u, tr.sub;
        Mat main = sigmoid((m.w_main * tr.main_in).colwise() + m.b_main.col(0));
        tr.preds.resize(kNumScores, B);
        tr.preds.topRows(kNumMainScores) = main;
        tr.preds.bottomRows(kNumScores - kNumMainScores) = tr.sub;
    } else {
        tr.preds = sigmoid((m.w_main * tr.u).colwise() + m.b_main.col(0));
    }
    return tr.preds;
}

// Combined sentence representation [va*vd; va-vd; va+vd]; exposed for tests.
inline Mat encode_joint(const Model& m, const ModelBatch& batch) {
    ForwardTrace tr;
    forward(m, batch, &tr);
    return tr.u;
}

// Reverse-mode pass from dL/dpreds to a full gradient model. Padding columns
// contribute nothing, and the frozen embedding columns are zeroed at the end.
inline Model backward(const Model& m, const ForwardTrace& tr, const Mat& dpreds) {
    Model grads = zero_like(m);
    const int B = static_cast<int>(dpreds.cols());
    const int H = m.cfg.hidden_dim;
    Mat du;
    if (m.cfg.hierarchical) {
        const Mat& main = tr.preds.topRows(kNumMainScores);
        Mat dmain = dpreds.topRows(kNumMainScores);
        Mat dz_main = (dmain.array() * main.array() * (1.0 - main.array())).matrix();
        grads.w_main.noalias() += dz_main * tr.main_in.transpose();
        grads.b_main.col(0).noalias() += dz_main.rowwise().sum();
        Mat dmain_in = m.w_main.transpose() * dz_main;
        du = dmain_in.topRows(tr.u.rows());
        Mat dsub = dpreds.bottomRows(kNumScores - kNumMainScores) +
                   dmain_in.bottomRows(kNumScores - kNumMainScores);
        Mat dz_sub = (dsub.array() * tr.sub.array() * (1.0 - tr.sub.array())).matrix();
        grads.w_sub.noalias() += dz_sub * tr.u.transpose();
        grads.b_sub.col(0).noalias() += dz_sub.rowwise().sum();
        du.noalias() += m.w_sub.transpose() * dz_sub;
    } else {
        Mat dz = (dpreds.array() * tr.preds.array() * (1.0 - tr.preds.array())).matrix();
        grads.w_main.noalias() += dz * tr.u.transpose();
        grads.b_main.col(0).noalias() += dz.rowwise().sum();
        du = m.w_main.transpose() * dz;
    }
    const int twoH = 2 * H;
    Mat dva = (du.topRows(twoH).array() * tr.vd.array()).matrix() + du.middleRows(twoH, twoH) +
              du.bottomRows(twoH);
    Mat dvd = (du.topRows(twoH).array() * tr.va.array()).matrix() - du.middleRows(twoH, twoH) +
              du.bottomRows(twoH);
    (void)B;
    const auto& ctx_cells = m.cfg.shared_encoder ? m.amr_cells : m.dep_cells;
    auto& ctx_cell_grads = m.cfg.shared_encoder ? grads.amr_cells : grads.dep_cells;
    auto dx_amr =
        detail::decode_stream(m, m.amr_cells, tr.batch.amr.mask, tr.amr, dva, grads.amr_cells);
    auto dx_ctx =
        detail::decode_stream(m, ctx_cells, tr.batch.ctx.mask, tr.ctx, dvd, ctx_cell_grads);
    detail::scatter_embeddings(m, tr.batch.amr, dx_amr, grads);
    detail::scatter_embeddings(m, tr.batch.ctx, dx_ctx, grads);
    grads.tok_emb.col(0).setZero();
    grads.ptr_emb.col(0).setZero();
    grads.sense_emb.col(0).setZero();
    return grads;
}

// ---- losses ----

struct LossGrad {
    double loss = 0.0;
    Mat dpreds;
};

// Mean squared error over every output.
inline LossGrad loss_flat(const Mat& preds, const Mat& targets) {
    const double n = static_cast<double>(preds.size());
    Mat diff = preds - targets;
    LossGrad out;
    out.loss = diff.squaredNorm() / n;
    out.dpreds = (2.0 / n) * diff;
    return out;
}

// Weighted sum of a subtask MSE and a main-slice MSE.
inline LossGrad loss_hier(const Mat& preds, const Mat& targets, double lambda1, double lambda2) {
    const int k = kNumMainScores;
    const int dsub = kNumScores - k;
    const double nb = static_cast<double>(preds.cols());
    Mat diff = preds - targets;
    LossGrad out;
    out.dpreds = Mat::Zero(preds.rows(), preds.cols());
    const double main_scale = lambda2 / (k * nb);
    const double sub_scale = lambda1 / (dsub * nb);
    out.loss = main_scale * diff.topRows(k).squaredNorm() +
               sub_scale * diff.bottomRows(dsub).squaredNorm();
    out.dpreds.topRows(k) = 2.0 * main_scale * diff.topRows(k);
    out.dpreds.bottomRows(dsub) = 2.0 * sub_scale * diff.bottomRows(dsub);
    return out;
}

// MSE over the main slice alone (single-task baseline).
inline LossGrad loss_main_only(const Mat& preds, const Mat& targets) {
    const int k = kNumMainScores;
    const double n = static_cast<double>(k) * static_cast<double>(preds.cols());
    Mat diff = preds.topRows(k) - targets.topRows(k);
    LossGrad out;
    out.loss = diff.squaredNorm() / n;
    out.dpreds = Mat::Zero(preds.rows(), preds.cols());
    out.dpreds.topRows(k) = (2.0 / n) * diff;
    return out;
}

inline LossGrad loss_for_config(const ModelConfig& cfg, const Mat& preds, const Mat& targets) {
    if (cfg.hierarchical) return loss_hier(preds, targets, cfg.lambda1, cfg.lambda2);
    if (cfg.multitask) return loss_flat(preds, targets);
    return loss_main_only(preds, targets);
}

inline Mat targets_matrix(const std::vector<EncodedInstance>& data, const std::vector<int>& index) {
    Mat y(kNumScores, static_cast<int>(index.size()));
    for (size_t b = 0; b < index.size(); ++b)
        for (int i = 0; i < kNumScores; ++i) y(i, static_cast<int>(b)) = data[index[b]].targets[i];
    return y;
}

// ---- prediction ----

inline std::vector<std::array<double, kNumScores>> predict(
    const Model& m, const std::vector<EncodedInstance>& data, int batch_size = 16) {
    check_instances(m.cfg, data);
    std::vector<std::array<double, kNumScores>> out(data.size());
    for (size_t start = 0; start < data.size(); start += batch_size) {
        std::vector<int> idx;
        for (size_t i = start; i < std::min(data.size(), start + batch_size); ++i)
            idx.push_back(static_cast<int>(i));
        Mat preds = forward(m, make_batch(m.cfg, data, idx));
        for (size_t b = 0; b < idx.size(); ++b)
            for (int r = 0; r < kNumScores; ++r) out[idx[b]][r] = preds(r, static_cast<int>(b));
    }
    return out;
}

// ---- gradient check ----

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Central finite differences against the analytic gradient on a sample of
// coordinates spread over every parameter block. Frozen columns (id 0 of
// each embedding table) are excluded: they are pinned, not trained. The
// default step keeps loss-evaluation roundoff well below the difference;
// much smaller steps drown small gradients in cancellation noise.
inline GradCheckResult grad_check(Model& m, const std::vector<EncodedInstance>& data,
                                  double eps = 1e-4, int samples = 240, uint64_t seed = 13) {
    check_instances(m.cfg, data);
    std::vector<int> idx(data.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const ModelBatch batch = make_batch(m.cfg, data, idx);
    const Mat targets = targets_matrix(data, idx);

    ForwardTrace tr;
    forward(m, batch, &tr);
    LossGrad lg = loss_for_config(m.cfg, tr.preds, targets);
    Model grads = backward(m, tr, lg.dpreds);

    struct Block {
        std::string name;
        Mat* p;
        Mat* g;
        bool emb;
    };
    std::vector<Block> blocks;
    {
        std::vector<std::pair<std::string, Mat*>> ps, gs;
        for_each_param(m, [&](const std::string& n, Mat& mat) { ps.emplace_back(n, &mat); });
        for_each_param(grads, [&](const std::string& n, Mat& mat) { gs.emplace_back(n, &mat); });
        for (size_t i = 0; i < ps.size(); ++i)
            blocks.push_back({ps[i].first, ps[i].second, gs[i].second,
                              ps[i].first.starts_with("emb.")});
    }
    double total = 0.0;
    for (const auto& b : blocks) total += static_cast<double>(b.p->size());

    Rng rng(seed);
    GradCheckResult res;
    auto loss_now = [&] {
        Mat preds = forward(m, batch);
        return loss_for_config(m.cfg, preds, targets).loss;
    };
    for (const auto& b : blocks) {
        if (b.emb && b.p->cols() < 2) continue;  // only the frozen column exists
        int want = std::max(2, static_cast<int>(std::lround(
                                   samples * static_cast<double>(b.p->size()) / total)));
        for (int s = 0; s < want; ++s) {
            Eigen::Index off;
            do {
                off = static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(b.p->size())));
                // column 0 of an embedding table is frozen
            } while (b.emb && off < b.p->rows());
            double* cell = b.p->data() + off;
            const double orig = *cell;
            *cell = orig + eps;
            const double lp = loss_now();
            *cell = orig - eps;
            const double lm = loss_now();
            *cell = orig;
            const double fd = (lp - lm) / (2.0 * eps);
            const double an = *(b.g->data() + off);
            const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return res;
}

// ---- training ----

struct TrainOptions {
    double lr = 0.001;
    int epochs = 20;
    int batch_size = 16;
    uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double dev_rho = 0.0;
    bool dev_rho_defined = true;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;      // 1-based; 0 when no epoch produced a defined rho
    double best_rho = 0.0;
};

// Dev-set selection score: Pearson correlation between predicted and true
// main F1.
inline double dev_pearson(const Model& m, const std::vector<EncodedInstance>& dev,
                          int batch_size) {
    auto preds = predict(m, dev, batch_size);
    std::vector<double> xs, ys;
    xs.reserve(dev.size());
    ys.reserve(dev.size());
    for (size_t i = 0; i < dev.size(); ++i) {
        xs.push_back(preds[i][2]);  // main F1
        ys.push_back(dev[i].targets[2]);
    }
    return pearson(xs, ys);
}

// Adam/MSE training with per-epoch dev evaluation. The model is left at the
// parameters of the epoch with the highest dev correlation (earliest epoch on
// ties).
inline TrainResult train(Model& m, const std::vector<EncodedInstance>& train_data,
                         const std::vector<EncodedInstance>& dev_data, const TrainOptions& opt) {
    if (train_data.empty()) throw std::invalid_argument("train: empty training set");
    check_instances(m.cfg, train_data);
    check_instances(m.cfg, dev_data);
    Adam adam(opt.lr);
    Rng rng(Rng::mix(opt.seed, 0x7261696eull));
    std::vector<int> order(train_data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    std::vector<Mat*> param_ptrs;
    for_each_param(m, [&](const std::string&, Mat& mat) { param_ptrs.push_back(&mat); });

    TrainResult result;
    Model best = m;
    double best_rho = -std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += opt.batch_size) {
            std::vector<int> idx(order.begin() + start,
                                 order.begin() + std::min(order.size(),
                                                          start + opt.batch_size));
            ModelBatch batch = make_batch(m.cfg, train_data, idx);
            ForwardTrace tr;
            forward(m, batch, &tr);
            LossGrad lg = loss_for_config(m.cfg, tr.preds, targets_matrix(train_data, idx));
            loss_sum += lg.loss * static_cast<double>(idx.size());
            Model grads = backward(m, tr, lg.dpreds);
            std::vector<const Mat*> grad_ptrs;
            for_each_param(grads, [&](const std::string&, Mat& mat) { grad_ptrs.push_back(&mat); });
            adam.step(param_ptrs, grad_ptrs);
        }
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(train_data.size());
        if (!dev_data.empty()) {
            try {
                es.dev_rho = dev_pearson(m, dev_data, opt.batch_size);
            } catch (const UndefinedCorrelation&) {
                es.dev_rho = std::numeric_limits<double>::quiet_NaN();
                es.dev_rho_defined = false;
            }
            if (es.dev_rho_defined && es.dev_rho > best_rho) {
                best_rho = es.dev_rho;
                best = m;
                result.best_epoch = epoch;
            }
        }
        result.history.push_back(es);
    }
    if (result.best_epoch > 0) {
        m = best;
        result.best_rho = best_rho;
    }
    return result;
}

// ---- serialization ----

namespace detail {

inline void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("model file: truncated");
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

inline void write_f64(std::ostream& out, double v) {
    static_assert(sizeof(double) == 8);
    out.write(reinterpret_cast<const char*>(&v), 8);
}

inline double read_f64(std::istream& in) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw std::runtime_error("model file: truncated");
    return v;
}

}  // namespace detail

inline constexpr char kModelMagic[9] = "AMRQEMD1";

// Little-endian binary format: magic, config, then each parameter matrix as
// (name, rows, cols, float32 column-major data). Weights are stored in
// float32; a saved model reloads to exactly the same file bytes.
inline void save_model(std::ostream& out, const Model& m) {
    out.write(kModelMagic, 8);
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.embed_dim));
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.hidden_dim));
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.lstm_layers));
    uint32_t flags = (m.cfg.use_dep ? 1u : 0u) | (m.cfg.use_pointers ? 2u : 0u) |
                     (m.cfg.hierarchical ? 4u : 0u) | (m.cfg.multitask ? 8u : 0u) |
                     (m.cfg.shared_encoder ? 16u : 0u);
    detail::write_u32(out, flags);
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.token_vocab));
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.pointer_vocab));
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.sense_vocab));
    detail::write_u32(out, static_cast<uint32_t>(m.cfg.max_len));
    detail::write_f64(out, m.cfg.lambda1);
    detail::write_f64(out, m.cfg.lambda2);
    uint32_t count = 0;
    for_each_param(m, [&](const std::string&, const Mat&) { ++count; });
    detail::write_u32(out, count);
    for_each_param(m, [&](const std::string& name, const Mat& mat) {
        detail::write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(out, static_cast<uint32_t>(mat.rows()));
        detail::write_u32(out, static_cast<uint32_t>(mat.cols()));
        std::vector<float> buf(static_cast<size_t>(mat.size()));
        const double* src = mat.data();
        for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(src[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    });
    if (!out) throw std::runtime_error("model file: write failed");
}

inline Model load_model(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != std::string(kModelMagic, 8))
        throw std::runtime_error("model file: bad magic");
    ModelConfig cfg;
    cfg.embed_dim = static_cast<int>(detail::read_u32(in));
    cfg.hidden_dim = static_cast<int>(detail::read_u32(in));
    cfg.lstm_layers = static_cast<int>(detail::read_u32(in));
    uint32_t flags = detail::read_u32(in);
    cfg.use_dep = flags & 1u;
    cfg.use_pointers = flags & 2u;
    cfg.hierarchical = flags & 4u;
    cfg.multitask = flags & 8u;
    cfg.shared_encoder = flags & 16u;
    cfg.token_vocab = static_cast<int>(detail::read_u32(in));
    cfg.pointer_vocab = static_cast<int>(detail::read_u32(in));
    cfg.sense_vocab = static_cast<int>(detail::read_u32(in));
    cfg.max_len = static_cast<int>(detail::read_u32(in));
    cfg.lambda1 = detail::read_f64(in);
    cfg.lambda2 = detail::read_f64(in);
    Model m = make_model(cfg);
    uint32_t count = detail::read_u32(in);
    uint32_t expect = 0;
    for_each_param(m, [&](const std::string&, Mat&) { ++expect; });
    if (count != expect)
        throw std::runtime_error("model file: parameter count mismatch");
    for_each_param(m, [&](const std::string& name, Mat& mat) {
        uint32_t len = detail::read_u32(in);
        std::string got(len, '\0');
        in.read(got.data(), len);
        if (!in || got != name)
            throw std::runtime_error("model file: expected parameter '" + name + "', found '" +
                                     got + "'");
        uint32_t rows = detail::read_u32(in);
        uint32_t cols = detail::read_u32(in);
        if (rows != static_cast<uint32_t>(mat.rows()) || cols != static_cast<uint32_t>(mat.cols()))
            throw std::runtime_error("model file: shape mismatch for '" + name + "'");
        std::vector<float> buf(static_cast<size_t>(rows) * cols);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw std::runtime_error("model file: truncated");
        double* dst = mat.data();
        for (size_t i = 0; i < buf.size(); ++i) dst[i] = static_cast<double>(buf[i]);
    });
    return m;
}

}  // namespace amrqe
