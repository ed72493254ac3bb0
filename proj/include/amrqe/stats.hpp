#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "amrqe/rng.hpp"

namespace amrqe {

class UndefinedCorrelation : public std::runtime_error {
  public:
    explicit UndefinedCorrelation(const std::string& msg) : std::runtime_error(msg) {}
};

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

// Sample standard deviation (n-1 denominator).
inline double stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("stddev: need at least two values");
    double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    const size_t n = xs.size();
    if (n < 2) throw std::invalid_argument("pearson: need at least two points");
    double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelation("pearson: zero variance on one side");
    return sxy / std::sqrt(sxx * syy);
}

// Two-sided p-value for the hypothesis of zero correlation via the t
// distribution with n-2 degrees of freedom.
inline double pearson_p1(double rho, size_t n) {
    if (n < 3) throw std::invalid_argument("pearson_p1: need at least three points");
    double df = static_cast<double>(n - 2);
    double denom = 1.0 - rho * rho;
    if (denom <= 0.0) return 0.0;
    double t = std::abs(rho) * std::sqrt(df / denom);
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

struct RankSignificance {
    double rho;  // Pearson correlation of the two rank vectors
    double p1;   // t-test, two-sided
    double p2;   // permutation estimate: P(random ranking achieves >= rho)
};

// Agreement between a predicted ranking and a reference ranking of the same
// systems, plus two significance estimates. `trials` permutations are drawn
// with a fixed seed, so reruns match exactly.
inline RankSignificance rank_significance(const std::vector<double>& predicted_ranks,
                                          const std::vector<double>& true_ranks,
                                          uint64_t trials = 1000000, uint64_t seed = 0) {
    if (predicted_ranks.size() != true_ranks.size())
        throw std::invalid_argument("rank_significance: length mismatch");
    const size_t n = predicted_ranks.size();
    if (n < 3) throw std::invalid_argument("rank_significance: need at least three systems");
    RankSignificance out{};
    out.rho = pearson(predicted_ranks, true_ranks);
    out.p1 = pearson_p1(out.rho, n);
    Rng rng(seed);
    std::vector<double> perm = predicted_ranks;
    uint64_t hits = 0;
    const double threshold = out.rho - 1e-12;
    for (uint64_t t = 0; t < trials; ++t) {
        rng.shuffle(perm);
        if (pearson(perm, true_ranks) >= threshold) ++hits;
    }
    out.p2 = static_cast<double>(hits) / static_cast<double>(trials);
    return out;
}

// Linear-interpolation percentiles; qs are in [0, 100].
inline std::vector<double> percentiles(std::vector<double> xs, const std::vector<double>& qs) {
    if (xs.empty()) throw std::invalid_argument("percentiles: empty sample");
    std::sort(xs.begin(), xs.end());
    std::vector<double> out;
    out.reserve(qs.size());
    for (double q : qs) {
        if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentiles: q outside [0, 100]");
        double rank = q / 100.0 * static_cast<double>(xs.size() - 1);
        size_t lo = static_cast<size_t>(rank);
        size_t hi = std::min(lo + 1, xs.size() - 1);
        double frac = rank - static_cast<double>(lo);
        out.push_back(xs[lo] + frac * (xs[hi] - xs[lo]));
    }
    return out;
}

// Gaussian kernel density with Scott's bandwidth, h = sigma * n^(-1/5),
// evaluated on the given grid.
inline std::vector<double> kde_scott(const std::vector<double>& xs,
                                     const std::vector<double>& grid) {
    if (xs.size() < 2) throw std::invalid_argument("kde_scott: need at least two values");
    double sd = stddev(xs);
    if (sd == 0.0) throw std::invalid_argument("kde_scott: zero variance sample");
    const double h = sd * std::pow(static_cast<double>(xs.size()), -0.2);
    const double norm = 1.0 / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * M_PI));
    std::vector<double> out;
    out.reserve(grid.size());
    for (double g : grid) {
        double acc = 0.0;
        for (double x : xs) {
            double z = (g - x) / h;
            acc += std::exp(-0.5 * z * z);
        }
        out.push_back(acc * norm);
    }
    return out;
}

inline double scott_bandwidth(const std::vector<double>& xs) {
    return stddev(xs) * std::pow(static_cast<double>(xs.size()), -0.2);
}

}  // namespace amrqe
