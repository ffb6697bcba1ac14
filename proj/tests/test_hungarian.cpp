#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "mtmc/hungarian.hpp"

using namespace mtmc;

namespace {

// exhaustive minimum over all one-to-one assignments
double brute_force_best(const std::vector<double>& cost, std::size_t rows, std::size_t cols) {
    std::vector<int> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kForbidden * static_cast<double>(rows + 1);
    do {
        double total = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            const double c = cost[r * cols + static_cast<std::size_t>(perm[r])];
            total += std::min(c, kForbidden);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double solution_cost(const std::vector<double>& cost, std::size_t cols, const std::vector<int>& match) {
    double total = 0.0;
    for (std::size_t r = 0; r < match.size(); ++r)
        total += match[r] >= 0 ? cost[r * cols + static_cast<std::size_t>(match[r])] : kForbidden;
    return total;
}

} // namespace

TEST_CASE("assignment matches brute force on random rectangular instances") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::uniform_real_distribution<double> gate(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t rows = 1 + rng() % 5;
        const std::size_t cols = rows + rng() % 3;  // cols >= rows keeps brute force simple
        std::vector<double> cost(rows * cols);
        for (auto& c : cost) c = gate(rng) < 0.2 ? kForbidden : u(rng);
        const auto match = solve_assignment(cost, rows, cols);
        // compare optimal totals with forbidden treated as "leave unassigned"
        const double got = solution_cost(cost, cols, match);
        const double want = brute_force_best(cost, rows, cols);
        CHECK(got == doctest::Approx(want).epsilon(1e-9));
        // no column used twice
        std::vector<int> used(cols, 0);
        for (int m : match)
            if (m >= 0) CHECK(++used[static_cast<std::size_t>(m)] == 1);
    }
}

TEST_CASE("forbidden-only rows stay unassigned") {
    std::vector<double> cost = {kForbidden, kForbidden, 1.0, 2.0};
    const auto match = solve_assignment(cost, 2, 2);
    CHECK(match[0] == -1);
    CHECK(match[1] == 0);
}

TEST_CASE("more rows than columns leaves the worst rows out") {
    std::vector<double> cost = {1.0, 5.0, 9.0};  // 3 rows, 1 col
    const auto match = solve_assignment(cost, 3, 1);
    CHECK(match[0] == 0);
    CHECK(match[1] == -1);
    CHECK(match[2] == -1);
}

TEST_CASE("empty inputs") {
    CHECK(solve_assignment({}, 0, 0).empty());
    const auto m = solve_assignment({}, 2, 0);
    CHECK(m.size() == 2);
    CHECK(m[0] == -1);
}
