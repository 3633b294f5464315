#include "fade/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace fade {

namespace {

// Square JV-style Hungarian on an s x s matrix; returns col_of_row and the
// dual potentials used to recover the tight-edge graph.
struct SquareSolution {
    std::vector<int> col_of_row;
    std::vector<double> u, v;
    double total = 0.0;
};

SquareSolution solve_square(const std::vector<double>& a, int s) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(s + 1, 0.0), v(s + 1, 0.0);
    std::vector<int> p(s + 1, 0), way(s + 1, 0);
    for (int i = 1; i <= s; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(s + 1, inf);
        std::vector<char> used(s + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= s; ++j) {
                if (used[j]) continue;
                double cur = a[static_cast<std::size_t>(i0 - 1) * s + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= s; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    SquareSolution sol;
    sol.col_of_row.assign(s, -1);
    for (int j = 1; j <= s; ++j)
        if (p[j]) sol.col_of_row[p[j] - 1] = j - 1;
    sol.u.assign(u.begin() + 1, u.end());
    sol.v.assign(v.begin() + 1, v.end());
    for (int i = 0; i < s; ++i)
        sol.total += a[static_cast<std::size_t>(i) * s + sol.col_of_row[i]];
    return sol;
}

// Kuhn augmenting-path matching restricted to the tight-edge graph; used to
// test whether a forced partial assignment still completes.
struct TightGraph {
    int s;
    std::vector<std::vector<int>> adj;  // per row, candidate cols ascending
};

bool complete_matching(const TightGraph& g, std::vector<int>& col_of_row,
                       std::vector<int>& row_of_col, const std::vector<char>& frozen) {
    std::vector<char> visited;
    std::vector<int> order;
    for (int r = 0; r < g.s; ++r)
        if (col_of_row[r] < 0) order.push_back(r);

    // frozen rows keep their committed column; augmenting paths may not
    // steal from them
    std::function<bool(int)> augment = [&](int r) -> bool {
        for (int c : g.adj[static_cast<std::size_t>(r)]) {
            if (visited[static_cast<std::size_t>(c)]) continue;
            visited[static_cast<std::size_t>(c)] = 1;
            int occupant = row_of_col[static_cast<std::size_t>(c)];
            if (occupant >= 0 && frozen[static_cast<std::size_t>(occupant)]) continue;
            if (occupant < 0 || augment(occupant)) {
                row_of_col[static_cast<std::size_t>(c)] = r;
                col_of_row[static_cast<std::size_t>(r)] = c;
                return true;
            }
        }
        return false;
    };

    for (int r : order) {
        visited.assign(static_cast<std::size_t>(g.s), 0);
        if (!augment(r)) return false;
    }
    return true;
}

}  // namespace

Assignment hungarian_solve(const std::vector<double>& cost, int m, int n) {
    if (m < 0 || n < 0 || cost.size() != static_cast<std::size_t>(m) * n)
        throw DataError("hungarian: cost matrix size does not match dimensions");
    for (double c : cost)
        if (!std::isfinite(c)) throw NumericError("hungarian: non-finite cost entry");

    Assignment out;
    out.row_to_col.assign(static_cast<std::size_t>(m), -1);
    if (m == 0 || n == 0) return out;

    // Pad to square with zero-cost dummies; a constant dummy column/row cost
    // shifts every assignment equally, so real pair optimality is unchanged.
    int s = std::max(m, n);
    std::vector<double> a(static_cast<std::size_t>(s) * s, 0.0);
    double scale = 1.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double c = cost[static_cast<std::size_t>(i) * n + j];
            a[static_cast<std::size_t>(i) * s + j] = c;
            scale = std::max(scale, std::fabs(c));
        }

    SquareSolution sol = solve_square(a, s);

    // Complementary slackness: optimal assignments use only tight edges.
    // Greedy row-by-row pick of the smallest feasible tight column yields the
    // lexicographically smallest optimum. Dummy columns (>= n) sort last so
    // "unmatched" loses to every real column.
    double eps = 1e-9 * scale;
    TightGraph g;
    g.s = s;
    g.adj.assign(static_cast<std::size_t>(s), {});
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j)
            if (a[static_cast<std::size_t>(i) * s + j] - sol.u[static_cast<std::size_t>(i)] -
                    sol.v[static_cast<std::size_t>(j)] <=
                eps)
                g.adj[static_cast<std::size_t>(i)].push_back(j);

    std::vector<int> col_of_row(static_cast<std::size_t>(s), -1);
    std::vector<int> row_of_col(static_cast<std::size_t>(s), -1);
    std::vector<char> frozen(static_cast<std::size_t>(s), 0);
    for (int r = 0; r < m; ++r) {
        bool committed = false;
        frozen[static_cast<std::size_t>(r)] = 1;
        for (int c : g.adj[static_cast<std::size_t>(r)]) {
            if (row_of_col[static_cast<std::size_t>(c)] >= 0) continue;
            col_of_row[static_cast<std::size_t>(r)] = c;
            row_of_col[static_cast<std::size_t>(c)] = r;
            std::vector<int> cr = col_of_row, rc = row_of_col;
            if (complete_matching(g, cr, rc, frozen)) {
                committed = true;
                break;
            }
            col_of_row[static_cast<std::size_t>(r)] = -1;
            row_of_col[static_cast<std::size_t>(c)] = -1;
        }
        if (!committed)
            throw NumericError("hungarian: tight graph lost feasibility (numeric ties)");
    }

    out.total_cost = 0.0;
    for (int r = 0; r < m; ++r) {
        int c = col_of_row[static_cast<std::size_t>(r)];
        if (c < n) {
            out.row_to_col[static_cast<std::size_t>(r)] = c;
            out.total_cost += cost[static_cast<std::size_t>(r) * n + c];
        }
    }
    return out;
}

}  // namespace fade
