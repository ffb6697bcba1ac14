#include "mtmc/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtmc {

// Kuhn-Munkres with potentials and shortest augmenting paths, O(n^3).
// The matrix is padded to square; padding and forbidden entries share one
// large finite cost so an all-forbidden row simply lands on a pad column.
std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);

    const std::size_t n = std::max(rows, cols);
    const double pad = kForbidden;
    std::vector<double> a(n * n, pad);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) a[r * n + c] = std::min(cost[r * cols + c], pad);

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; way[j] = previous column on the augmenting path.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = static_cast<int>(i);
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = static_cast<std::size_t>(p[j0]);
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = static_cast<int>(j0);
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[static_cast<std::size_t>(p[j])] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = static_cast<std::size_t>(way[j0]);
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> match(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t r = static_cast<std::size_t>(p[j]);
        if (r == 0 || r > rows) continue;
        if (j > cols) continue;  // pad column
        if (a[(r - 1) * n + (j - 1)] >= kForbidden / 2) continue;
        match[r - 1] = static_cast<int>(j - 1);
    }
    return match;
}

} // namespace mtmc
