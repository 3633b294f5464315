#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fade/assignment.hpp"
#include "fade/common.hpp"

using namespace fade;

namespace {

// exhaustive oracle for small matrices: best total over all injections of
// the smaller side into the larger
double brute_force_best(const std::vector<double>& cost, int m, int n) {
    std::vector<int> cols(static_cast<std::size_t>(n));
    std::iota(cols.begin(), cols.end(), 0);
    double best = 1e300;
    if (m <= n) {
        std::sort(cols.begin(), cols.end());
        do {
            double total = 0;
            for (int i = 0; i < m; ++i) total += cost[static_cast<std::size_t>(i) * n + cols[static_cast<std::size_t>(i)]];
            best = std::min(best, total);
        } while (std::next_permutation(cols.begin(), cols.end()));
    } else {
        std::vector<int> rows(static_cast<std::size_t>(m));
        std::iota(rows.begin(), rows.end(), 0);
        do {
            double total = 0;
            for (int j = 0; j < n; ++j) total += cost[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)]) * n + j];
            best = std::min(best, total);
        } while (std::next_permutation(rows.begin(), rows.end()));
    }
    return best;
}

}  // namespace

TEST_CASE("examples") {
    SUBCASE("1x1") {
        Assignment a = hungarian_solve({5.0}, 1, 1);
        CHECK(a.row_to_col[0] == 0);
        CHECK(a.total_cost == 5.0);
    }
    SUBCASE("2x2 cross assignment") {
        Assignment a = hungarian_solve({4, 1, 2, 3}, 2, 2);
        CHECK(a.row_to_col[0] == 1);
        CHECK(a.row_to_col[1] == 0);
        CHECK(a.total_cost == doctest::Approx(3.0));
    }
}

TEST_CASE("optimality against the exhaustive oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        int m = 1 + static_cast<int>(rng.uniform_index(6));
        int n = 1 + static_cast<int>(rng.uniform_index(6));
        std::vector<double> cost(static_cast<std::size_t>(m) * n);
        for (double& c : cost) c = rng.uniform(0.0, 10.0);
        Assignment a = hungarian_solve(cost, m, n);
        CHECK(a.total_cost == doctest::Approx(brute_force_best(cost, m, n)).epsilon(1e-9));
        // row_to_col is a partial injection of size min(m,n)
        std::vector<char> used(static_cast<std::size_t>(n), 0);
        int matched = 0;
        for (int i = 0; i < m; ++i) {
            int j = a.row_to_col[static_cast<std::size_t>(i)];
            if (j < 0) continue;
            CHECK(!used[static_cast<std::size_t>(j)]);
            used[static_cast<std::size_t>(j)] = 1;
            ++matched;
        }
        CHECK(matched == std::min(m, n));
    }
}

TEST_CASE("deterministic lexicographic tie break") {
    // every assignment costs 2: the lexicographically smallest must win
    Assignment a = hungarian_solve({1, 1, 1, 1}, 2, 2);
    CHECK(a.row_to_col[0] == 0);
    CHECK(a.row_to_col[1] == 1);

    // rows beyond the column count stay unmatched, preferring low rows matched
    Assignment b = hungarian_solve({1, 1, 1}, 3, 1);
    CHECK(b.row_to_col[0] == 0);
    CHECK(b.row_to_col[1] == -1);
    CHECK(b.row_to_col[2] == -1);
}

TEST_CASE("invalid input") {
    CHECK_THROWS_AS(hungarian_solve({1.0 / 0.0}, 1, 1), NumericError);
    CHECK_THROWS_AS(hungarian_solve({1, 2, 3}, 2, 2), DataError);
    Assignment e = hungarian_solve({}, 0, 0);
    CHECK(e.row_to_col.empty());
}
