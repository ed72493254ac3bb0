#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "amrqe/rng.hpp"

namespace amrqe {

using Mat = Eigen::MatrixXd;

inline Mat sigmoid(const Mat& z) { return ((-z.array()).exp() + 1.0).inverse().matrix(); }

// Uniform Glorot draw, bound sqrt(6 / (fan_in + fan_out)) with fans taken
// from the matrix shape. Elements are drawn in storage order so the result
// depends only on the seed sequence.
inline void glorot_fill(Mat& m, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    double* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-bound, bound);
}

inline void uniform_fill(Mat& m, Rng& rng, double bound) {
    double* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = rng.uniform(-bound, bound);
}

// One direction of one LSTM layer. Gate rows are ordered input, forget,
// cell, output.
struct LstmCell {
    Mat wx;  // 4H x In
    Mat wh;  // 4H x H
    Mat b;   // 4H x 1

    int hidden() const { return static_cast<int>(wh.cols()); }

    static LstmCell zeros(int in_dim, int hidden_dim) {
        LstmCell c;
        c.wx = Mat::Zero(4 * hidden_dim, in_dim);
        c.wh = Mat::Zero(4 * hidden_dim, hidden_dim);
        c.b = Mat::Zero(4 * hidden_dim, 1);
        return c;
    }

    // Forget-gate bias starts at one so cells retain state early in training.
    void init(Rng& rng) {
        glorot_fill(wx, rng);
        glorot_fill(wh, rng);
        b.setZero();
        b.block(hidden(), 0, hidden(), 1).setConstant(1.0);
    }
};

// Stored activations for one direction, indexed by sequence position. h and c
// are post-mask, so h[t] at a padded position equals the carried state and
// the final scan state is exactly the state at each column's true length.
struct LstmDirTrace {
    std::vector<Mat> gates;  // 4H x B, post-activation
    std::vector<Mat> h, c;   // H x B
};

// Masked scan over xs (T matrices of In x B). mask is T x B with 1 on real
// positions. With reverse set, positions are scanned right to left. Padded
// steps copy the carried state through unchanged, which makes outputs
// independent of how much padding a batch carries.
inline void lstm_forward(const LstmCell& cell, const std::vector<Mat>& xs, const Mat& mask,
                         bool reverse, LstmDirTrace& trace) {
    const int T = static_cast<int>(xs.size());
    const int B = T > 0 ? static_cast<int>(xs[0].cols()) : 0;
    const int H = cell.hidden();
    trace.gates.assign(T, Mat());
    trace.h.assign(T, Mat());
    trace.c.assign(T, Mat());
    Mat h_prev = Mat::Zero(H, B);
    Mat c_prev = Mat::Zero(H, B);
    Mat z(4 * H, B);
    for (int s = 0; s < T; ++s) {
        const int t = reverse ? T - 1 - s : s;
        z.noalias() = cell.wx * xs[t];
        z.noalias() += cell.wh * h_prev;
        z.colwise() += cell.b.col(0);
        Mat g(4 * H, B);
        g.topRows(2 * H) = sigmoid(z.topRows(2 * H));              // i, f
        g.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();  // g
        g.bottomRows(H) = sigmoid(z.bottomRows(H));                // o
        Mat c_new = (g.middleRows(H, H).array() * c_prev.array() +
                     g.topRows(H).array() * g.middleRows(2 * H, H).array())
                        .matrix();
        Mat h_new = (g.bottomRows(H).array() * c_new.array().tanh()).matrix();
        auto m = mask.row(t).array();
        Mat c_t(H, B), h_t(H, B);
        for (int col = 0; col < B; ++col) {
            if (m(col) != 0.0) {
                c_t.col(col) = c_new.col(col);
                h_t.col(col) = h_new.col(col);
            } else {
                c_t.col(col) = c_prev.col(col);
                h_t.col(col) = h_prev.col(col);
            }
        }
        trace.gates[t] = std::move(g);
        trace.c[t] = c_t;
        trace.h[t] = h_t;
        h_prev = std::move(h_t);
        c_prev = std::move(c_t);
    }
}

// Final state of a scan: position T-1 forward, position 0 reversed.
inline const Mat& lstm_final(const LstmDirTrace& trace, bool reverse) {
    return reverse ? trace.h.front() : trace.h.back();
}

// Reverse-mode pass for one direction. dh_out holds upstream gradients per
// position (empty matrices mean zero); dxs accumulates input gradients and
// grad accumulates parameter gradients.
inline void lstm_backward(const LstmCell& cell, const std::vector<Mat>& xs, const Mat& mask,
                          bool reverse, const LstmDirTrace& trace, const std::vector<Mat>& dh_out,
                          LstmCell& grad, std::vector<Mat>& dxs) {
    const int T = static_cast<int>(xs.size());
    if (T == 0) return;
    const int B = static_cast<int>(xs[0].cols());
    const int H = cell.hidden();
    Mat dh_carry = Mat::Zero(H, B);
    Mat dc_carry = Mat::Zero(H, B);
    for (int s = T - 1; s >= 0; --s) {
        const int t = reverse ? T - 1 - s : s;
        const int t_prev = reverse ? t + 1 : t - 1;
        const bool has_prev = reverse ? (t + 1 < T) : (t - 1 >= 0);
        Eigen::ArrayXXd m = mask.row(t).array().replicate(H, 1);
        Mat dh_acc = dh_carry;
        if (t < static_cast<int>(dh_out.size()) && dh_out[t].size() > 0) dh_acc += dh_out[t];
        const Mat& gates = trace.gates[t];
        auto gi = gates.topRows(H).array();
        auto gf = gates.middleRows(H, H).array();
        auto gg = gates.middleRows(2 * H, H).array();
        auto go = gates.bottomRows(H).array();
        Eigen::ArrayXXd tanh_c = trace.c[t].array().tanh();
        Mat c_prev = has_prev ? trace.c[t_prev] : Mat::Zero(H, B);
        Mat h_prev = has_prev ? trace.h[t_prev] : Mat::Zero(H, B);

        Eigen::ArrayXXd dh_new = m * dh_acc.array();
        Eigen::ArrayXXd dc_new = m * dc_carry.array() + dh_new * go * (1.0 - tanh_c.square());
        Eigen::ArrayXXd d_o = dh_new * tanh_c;
        Eigen::ArrayXXd d_i = dc_new * gg;
        Eigen::ArrayXXd d_g = dc_new * gi;
        Eigen::ArrayXXd d_f = dc_new * c_prev.array();

        Mat dz(4 * H, B);
        dz.topRows(H) = (d_i * gi * (1.0 - gi)).matrix();
        dz.middleRows(H, H) = (d_f * gf * (1.0 - gf)).matrix();
        dz.middleRows(2 * H, H) = (d_g * (1.0 - gg.square())).matrix();
        dz.bottomRows(H) = (d_o * go * (1.0 - go)).matrix();

        grad.wx.noalias() += dz * xs[t].transpose();
        grad.wh.noalias() += dz * h_prev.transpose();
        grad.b.col(0).noalias() += dz.rowwise().sum();
        if (dxs[t].size() == 0) dxs[t] = Mat::Zero(xs[t].rows(), B);
        dxs[t].noalias() += cell.wx.transpose() * dz;

        dh_carry = cell.wh.transpose() * dz + ((1.0 - m) * dh_acc.array()).matrix();
        dc_carry = ((gf * dc_new) + (1.0 - m) * dc_carry.array()).matrix();
    }
}

// Adam with bias correction; state blocks parallel the parameter list handed
// to each step call, which must keep a fixed order.
class Adam {
  public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
        if (m_.empty()) {
            for (const Mat* g : grads) {
                m_.push_back(Mat::Zero(g->rows(), g->cols()));
                v_.push_back(Mat::Zero(g->rows(), g->cols()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * (*grads[i]);
            v_[i] = (beta2_ * v_[i].array() + (1.0 - beta2_) * grads[i]->array().square()).matrix();
            params[i]->array() -=
                lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
        }
    }

  private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Mat> m_, v_;
};

}  // namespace amrqe
