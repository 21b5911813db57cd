#include "mvp/match.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

// Jonker-Volgenant shortest augmenting path over row potentials u and
// column potentials v; 1-based internal indexing, row 0 / column 0 are
// sentinels. Returns the optimal total; fills col_of_row.
double solve_jv(const Array& cost, int n, std::vector<int>& col_of_row) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            int j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur =
                    cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    col_of_row.assign(static_cast<std::size_t>(n), -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int i = p[static_cast<std::size_t>(j)];
        col_of_row[static_cast<std::size_t>(i - 1)] = j - 1;
        total += cost[static_cast<std::size_t>(i - 1) * n + (j - 1)];
    }
    return total;
}

// Optimal total of the subproblem over rows [row..n) and the unused columns.
double completion_cost(const Array& cost, int n, int row, const std::vector<char>& col_used) {
    const int k = n - row;
    if (k == 0) return 0.0;
    std::vector<int> cols;
    for (int j = 0; j < n; ++j)
        if (!col_used[static_cast<std::size_t>(j)]) cols.push_back(j);
    Array sub(Shape{k, k}, 0.0);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            sub[static_cast<std::size_t>(a) * k + b] = cost[static_cast<std::size_t>(row + a) * n + cols[static_cast<std::size_t>(b)]];
    std::vector<int> ignore;
    return solve_jv(sub, k, ignore);
}

}  // namespace

bool Assignment::is_permutation() const {
    std::vector<char> seen(perm.size(), 0);
    for (int c : perm) {
        if (c < 0 || c >= static_cast<int>(perm.size()) || seen[static_cast<std::size_t>(c)]) return false;
        seen[static_cast<std::size_t>(c)] = 1;
    }
    return true;
}

double match_cost(const Array& gt_pose, const Array& pred_pose, double confidence, const Workspace& ws) {
    if (!(gt_pose.shape() == pred_pose.shape()) || gt_pose.rank() != 2 || gt_pose.dim(1) != 3)
        throw ShapeError("match_cost: poses must both be [J,3]");
    const Eigen::Vector3d ext = ws.extents();
    double acc = 0.0;
    for (std::size_t i = 0; i < gt_pose.size(); ++i)
        acc += std::abs(gt_pose[i] - pred_pose[i]) / ext[static_cast<int>(i % 3)];
    return -confidence + acc / static_cast<double>(gt_pose.size());
}

Assignment hungarian(const Array& cost) {
    if (cost.rank() != 2 || cost.dim(0) != cost.dim(1)) throw UsageError("hungarian: cost matrix must be square");
    const int n = cost.dim(0);
    for (std::size_t i = 0; i < cost.size(); ++i)
        if (std::isnan(cost[i])) throw UsageError("hungarian: NaN in cost matrix");

    Assignment out;
    out.matched_count = n;
    if (n == 0) return out;

    std::vector<int> jv_perm;
    const double best = solve_jv(cost, n, jv_perm);

    // Lexicographic refinement: row by row, commit the smallest column that
    // still admits an optimal completion. Equality is tested with a scaled
    // tolerance since costs are floating point.
    const double tol = 1e-9 * (1.0 + std::abs(best));
    out.perm.assign(static_cast<std::size_t>(n), -1);
    std::vector<char> col_used(static_cast<std::size_t>(n), 0);
    double committed = 0.0;
    for (int i = 0; i < n; ++i) {
        bool done = false;
        for (int j = 0; j < n && !done; ++j) {
            if (col_used[static_cast<std::size_t>(j)]) continue;
            col_used[static_cast<std::size_t>(j)] = 1;
            const double with_j = committed + cost[static_cast<std::size_t>(i) * n + j] +
                                  completion_cost(cost, n, i + 1, col_used);
            if (with_j <= best + tol) {
                out.perm[static_cast<std::size_t>(i)] = j;
                committed += cost[static_cast<std::size_t>(i) * n + j];
                done = true;
            } else {
                col_used[static_cast<std::size_t>(j)] = 0;
            }
        }
        if (!done) throw NumericError("hungarian: refinement failed to preserve the optimal cost");
    }
    out.total_cost = committed;
    return out;
}

}  // namespace mvp
