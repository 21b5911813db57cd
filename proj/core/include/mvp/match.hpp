#pragma once

#include <vector>

#include "mvp/array.hpp"
#include "mvp/scene.hpp"

namespace mvp {

// Result of bipartite matching: perm[row] = assigned column. Rows are GT
// slots (padded to N), columns prediction indices.
struct Assignment {
    std::vector<int> perm;
    int matched_count = 0;  // rows holding real (non-padding) GT
    double total_cost = 0.0;

    bool is_permutation() const;
};

// Matching cost of one (GT pose, prediction) pair: -confidence plus the
// mean absolute difference of workspace-normalized coordinates.
double match_cost(const Array& gt_pose, const Array& pred_pose, double confidence, const Workspace& ws);

// Minimum-cost perfect matching on a square cost matrix, O(N^3) shortest
// augmenting paths. Among equal-cost optima the returned permutation is the
// lexicographically smallest (lowest row index gets its lowest usable
// column). Throws UsageError on NaN entries or a non-square matrix.
Assignment hungarian(const Array& cost);

}  // namespace mvp
