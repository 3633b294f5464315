#pragma once

#include <vector>

#include "fade/common.hpp"

namespace fade {

struct Assignment {
    std::vector<int> row_to_col;  // -1 when a row stays unmatched (m > n)
    double total_cost = 0.0;
};

// Minimum-cost assignment for an m x n matrix (row-major). Matches min(m,n)
// pairs. Among all optimal assignments, returns the lexicographically
// smallest row_to_col vector (unmatched sorts after every real column).
Assignment hungarian_solve(const std::vector<double>& cost, int m, int n);

}  // namespace fade
