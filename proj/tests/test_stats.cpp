#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "amrqe/stats.hpp"

using namespace amrqe;
using Catch::Approx;

TEST_CASE("mean and standard deviation") {
    std::vector<double> xs = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    REQUIRE(mean(xs) == Approx(5.0));
    // Sample variance of this classic set is 32/7.
    REQUIRE(stddev(xs) == Approx(std::sqrt(32.0 / 7.0)).margin(1e-12));
    REQUIRE_THROWS_AS(stddev({1.0}), std::invalid_argument);
}

TEST_CASE("pearson correlation") {
    SECTION("perfect and inverse") {
        std::vector<double> x = {1, 2, 3, 4, 5};
        std::vector<double> up = {2, 4, 6, 8, 10};
        std::vector<double> down = {10, 8, 6, 4, 2};
        REQUIRE(pearson(x, up) == Approx(1.0).margin(1e-12));
        REQUIRE(pearson(x, down) == Approx(-1.0).margin(1e-12));
    }

    SECTION("hand-computed value") {
        // sum of products decomposition gives r = 0.9 exactly for this set
        std::vector<double> x = {1, 2, 3, 4, 5};
        std::vector<double> y = {1, 3, 2, 5, 4};
        // cov = 4.0/... compute directly from definition
        double mx = 3.0, my = 3.0;
        double sxy = 0, sxx = 0, syy = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        REQUIRE(pearson(x, y) == Approx(sxy / std::sqrt(sxx * syy)).margin(1e-15));
        REQUIRE(pearson(x, y) == Approx(0.8).margin(1e-12));
    }

    SECTION("degenerate inputs") {
        REQUIRE_THROWS_AS(pearson({1, 2}, {1, 2, 3}), std::invalid_argument);
        REQUIRE_THROWS_AS(pearson({1}, {1}), std::invalid_argument);
        REQUIRE_THROWS_AS(pearson({3, 3, 3}, {1, 2, 3}), UndefinedCorrelation);
        REQUIRE_THROWS_AS(pearson({1, 2, 3}, {7, 7, 7}), UndefinedCorrelation);
    }
}

TEST_CASE("two-sided p-value from the t distribution") {
    // r = 0 is the null itself, so the two-sided p is 1.
    REQUIRE(pearson_p1(0.0, 10) == Approx(1.0).margin(1e-12));
    // Perfect correlation of either sign is off the scale.
    REQUIRE(pearson_p1(1.0, 5) == 0.0);
    REQUIRE(pearson_p1(-1.0, 5) == 0.0);
    // Symmetric in the sign of r.
    REQUIRE(pearson_p1(0.7, 12) == Approx(pearson_p1(-0.7, 12)).margin(1e-12));
    // Monotone: stronger correlation, smaller p.
    REQUIRE(pearson_p1(0.9, 10) < pearson_p1(0.5, 10));
    // More data, same r, smaller p.
    REQUIRE(pearson_p1(0.6, 20) < pearson_p1(0.6, 5));
    // Hand anchor: r = 0.771 over six pairs sits just above the 0.05 line.
    REQUIRE(pearson_p1(27.0 / 35.0, 6) == Approx(0.0724).margin(0.0005));
    REQUIRE_THROWS_AS(pearson_p1(0.5, 2), std::invalid_argument);
}

TEST_CASE("ranking agreement on six systems") {
    // Predicted order vs reference order over six systems; the rank vectors
    // correlate at 27/35 and a full enumeration of the 720 permutations puts
    // 37 of them at or above that value.
    std::vector<double> pred = {1, 2, 3, 4, 5, 6};
    std::vector<double> truth = {3, 1, 2, 5, 4, 6};
    RankSignificance rs = rank_significance(pred, truth, 200000, 17);
    REQUIRE(rs.rho == Approx(27.0 / 35.0).margin(1e-12));
    REQUIRE(rs.p1 == Approx(0.0724).margin(0.001));
    REQUIRE(rs.p2 == Approx(37.0 / 720.0).margin(0.003));
}

TEST_CASE("ranking agreement on thirteen systems") {
    std::vector<double> pred = {7, 1, 2, 3, 4, 5, 6, 8, 9, 10, 11, 12, 13};
    std::vector<double> truth = {7, 4, 3, 1, 2, 8, 10, 12, 11, 5, 6, 13, 9};
    RankSignificance rs = rank_significance(pred, truth, 100000, 17);
    REQUIRE(rs.rho == Approx(0.642857).margin(1e-4));
    REQUIRE(rs.p1 == Approx(0.0178).margin(0.001));
    REQUIRE(rs.p2 > 0.0);
    REQUIRE(rs.p2 < 0.05);
}

TEST_CASE("ranking significance input checks and determinism") {
    REQUIRE_THROWS_AS(rank_significance({1, 2}, {2, 1}, 10, 0), std::invalid_argument);
    std::vector<double> a = {1, 2, 3, 4};
    std::vector<double> b = {2, 1, 4, 3};
    RankSignificance r1 = rank_significance(a, b, 20000, 5);
    RankSignificance r2 = rank_significance(a, b, 20000, 5);
    REQUIRE(r1.rho == r2.rho);
    REQUIRE(r1.p2 == r2.p2);
}

TEST_CASE("percentiles interpolate linearly") {
    std::vector<double> xs = {15.0, 20.0, 35.0, 40.0, 50.0};
    auto ps = percentiles(xs, {0, 25, 50, 75, 100});
    REQUIRE(ps[0] == Approx(15.0));
    REQUIRE(ps[1] == Approx(20.0));  // rank 1.0
    REQUIRE(ps[2] == Approx(35.0));  // rank 2.0
    REQUIRE(ps[3] == Approx(40.0));  // rank 3.0
    REQUIRE(ps[4] == Approx(50.0));

    // A q that lands between ranks interpolates: q=30 on 5 points is rank
    // 1.2, i.e. 20 + 0.2 * 15 = 23.
    REQUIRE(percentiles(xs, {30})[0] == Approx(23.0).margin(1e-12));

    SECTION("matches a brute-force oracle on random data") {
        Rng rng(99);
        std::vector<double> data;
        for (int i = 0; i < 257; ++i) data.push_back(rng.uniform(0.0, 1.0));
        std::vector<double> qs = {0, 1, 5, 10, 33.3, 50, 66.7, 90, 99, 100};
        auto got = percentiles(data, qs);
        std::vector<double> sorted = data;
        std::sort(sorted.begin(), sorted.end());
        for (size_t i = 0; i < qs.size(); ++i) {
            double rank = qs[i] / 100.0 * static_cast<double>(sorted.size() - 1);
            size_t lo = static_cast<size_t>(rank);
            size_t hi = std::min(lo + 1, sorted.size() - 1);
            double want = sorted[lo] + (rank - lo) * (sorted[hi] - sorted[lo]);
            REQUIRE(got[i] == Approx(want).margin(1e-12));
        }
    }

    SECTION("rejects bad input") {
        REQUIRE_THROWS_AS(percentiles({}, {50}), std::invalid_argument);
        REQUIRE_THROWS_AS(percentiles({1.0}, {-1}), std::invalid_argument);
        REQUIRE_THROWS_AS(percentiles({1.0}, {101}), std::invalid_argument);
    }
}

TEST_CASE("kernel density estimate") {
    Rng rng(123);
    std::vector<double> xs;
    for (int i = 0; i < 300; ++i) xs.push_back(rng.uniform(0.2, 0.8));

    REQUIRE(scott_bandwidth(xs) ==
            Approx(stddev(xs) * std::pow(300.0, -0.2)).margin(1e-15));

    // Integrating the density over a grid that extends well past the data
    // should give 1.
    const double h = scott_bandwidth(xs);
    const double lo = 0.2 - 8 * h, hi = 0.8 + 8 * h;
    const int n = 2001;
    std::vector<double> grid;
    for (int i = 0; i < n; ++i)
        grid.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    auto dens = kde_scott(xs, grid);
    double integral = 0.0;
    for (int i = 0; i + 1 < n; ++i)
        integral += 0.5 * (dens[i] + dens[i + 1]) * (grid[i + 1] - grid[i]);
    REQUIRE(integral == Approx(1.0).margin(0.01));

    // Every density value is nonnegative and the peak sits inside the data
    // range.
    size_t peak = std::max_element(dens.begin(), dens.end()) - dens.begin();
    REQUIRE(grid[peak] > 0.2);
    REQUIRE(grid[peak] < 0.8);
    for (double d : dens) REQUIRE(d >= 0.0);

    SECTION("rejects degenerate samples") {
        REQUIRE_THROWS_AS(kde_scott({1.0}, {1.0}), std::invalid_argument);
        REQUIRE_THROWS_AS(kde_scott({2.0, 2.0, 2.0}, {2.0}), std::invalid_argument);
    }
}
