#pragma once

#include <functional>
#include <vector>

#include "mvp/graph.hpp"
#include "mvp/ops.hpp"

namespace mvp::testing {

// Max relative error between analytic gradients and central finite
// differences of sum(build(leaves)) with respect to every leaf scalar.
// `build` must construct the expression from the given leaf nodes only.
inline double fd_max_rel(std::vector<Array> leaves,
                         const std::function<Node*(Graph&, const std::vector<Node*>&)>& build,
                         double step = 1e-6) {
    auto eval = [&](bool with_grads, std::vector<Array>* grads) {
        Graph g;
        std::vector<Node*> nodes;
        nodes.reserve(leaves.size());
        for (auto& a : leaves) nodes.push_back(g.param(a));
        Node* out = sum_all(build(g, nodes));
        if (with_grads) {
            g.backward(out);
            grads->clear();
            for (Node* n : nodes) grads->push_back(n->grad);
        }
        return out->value[0];
    };
    std::vector<Array> grads;
    eval(true, &grads);

    double max_rel = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t i = 0; i < leaves[li].size(); ++i) {
            const double saved = leaves[li][i];
            const double h = step * std::max(1.0, std::abs(saved));
            leaves[li][i] = saved + h;
            const double fp = eval(false, nullptr);
            leaves[li][i] = saved - h;
            const double fm = eval(false, nullptr);
            leaves[li][i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double anal = grads[li][i];
            const double denom = std::max({std::abs(anal), std::abs(numeric), 1e-6});
            max_rel = std::max(max_rel, std::abs(anal - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace mvp::testing
