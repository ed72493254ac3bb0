#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace amrqe {

struct Prf {
    double p = 0.0;
    double r = 0.0;
    double f1 = 0.0;

    bool operator==(const Prf&) const = default;
};

// Empty-set convention: both sides empty counts as a perfect match, one side
// empty as a total miss. Applies uniformly to every metric here.
inline Prf prf_from_counts(long long matched, long long n_pred, long long n_gold) {
    if (matched < 0 || n_pred < 0 || n_gold < 0)
        throw std::invalid_argument("prf_from_counts: negative count");
    if (matched > n_pred || matched > n_gold)
        throw std::invalid_argument("prf_from_counts: matched exceeds a side");
    if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0};
    if (n_pred == 0 || n_gold == 0) return {0.0, 0.0, 0.0};
    Prf out;
    out.p = static_cast<double>(matched) / static_cast<double>(n_pred);
    out.r = static_cast<double>(matched) / static_cast<double>(n_gold);
    out.f1 = (out.p + out.r) > 0.0 ? 2.0 * out.p * out.r / (out.p + out.r) : 0.0;
    return out;
}

enum class Task : int {
    Smatch = 0,
    Unlabeled,
    NoWsd,
    Concepts,
    NamedEntities,
    Negations,
    Wikification,
    Reentrancies,
    Srl,
    Frames,
    NonSenseFrames,
    IgnoreVars,
};

inline constexpr int kNumTasks = 12;
inline constexpr int kNumScores = 3 * kNumTasks;  // P, R, F1 per task
inline constexpr int kNumMainScores = 3;          // the Smatch slice

// Canonical task order; every flattened score vector, report column and model
// output follows it.
inline const std::array<std::string, kNumTasks>& task_names() {
    static const std::array<std::string, kNumTasks> names = {
        "smatch",       "unlabeled", "nowsd",  "concepts", "namedent", "negations",
        "wikification", "reentrancies", "srl", "frames",   "nsframes", "ignorevars",
    };
    return names;
}

struct ScoreVector {
    std::array<Prf, kNumTasks> tasks{};

    Prf& operator[](Task t) { return tasks[static_cast<int>(t)]; }
    const Prf& operator[](Task t) const { return tasks[static_cast<int>(t)]; }

    // Flattened layout: task-major, P then R then F1.
    std::array<double, kNumScores> flatten() const {
        std::array<double, kNumScores> out{};
        for (int i = 0; i < kNumTasks; ++i) {
            out[3 * i + 0] = tasks[i].p;
            out[3 * i + 1] = tasks[i].r;
            out[3 * i + 2] = tasks[i].f1;
        }
        return out;
    }

    static ScoreVector from_flat(const std::array<double, kNumScores>& flat) {
        ScoreVector sv;
        for (int i = 0; i < kNumTasks; ++i) {
            sv.tasks[i].p = flat[3 * i + 0];
            sv.tasks[i].r = flat[3 * i + 1];
            sv.tasks[i].f1 = flat[3 * i + 2];
        }
        return sv;
    }

    bool operator==(const ScoreVector&) const = default;
};

inline std::array<std::string, kNumScores> score_column_names() {
    std::array<std::string, kNumScores> cols;
    static const char* parts[3] = {"_p", "_r", "_f1"};
    for (int i = 0; i < kNumTasks; ++i)
        for (int j = 0; j < 3; ++j) cols[3 * i + j] = task_names()[i] + parts[j];
    return cols;
}

}  // namespace amrqe
