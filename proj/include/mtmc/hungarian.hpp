#pragma once

#include <cstddef>
#include <vector>

namespace mtmc {

// Sentinel cost for inadmissible pairs.
inline constexpr double kForbidden = 1e30;

// Minimum-cost one-to-one assignment on a dense rows x cols cost matrix
// (row-major). Entries >= kForbidden/2 are treated as inadmissible.
// Returns per-row column index, or -1 for rows left unassigned (all
// admissible columns taken or none admissible). Deterministic.
std::vector<int> solve_assignment(const std::vector<double>& cost, std::size_t rows, std::size_t cols);

} // namespace mtmc
