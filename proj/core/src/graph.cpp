#include "mvp/graph.hpp"

#include <cmath>

#include "mvp/errors.hpp"

namespace mvp {

Node* Graph::leaf(Array v, bool requires_grad) {
    auto n = std::make_unique<Node>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad = Array::zeros(n->value.shape());
    n->id = static_cast<int>(nodes_.size());
    n->owner = this;
    finalize_value(n.get(), "leaf");
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

Node* Graph::make(const char* op, Array value, std::vector<Node*> parents,
                  std::function<void(Node&)> backward) {
    bool rg = false;
    for (const Node* p : parents) {
        if (p->owner != this) throw UsageError(std::string(op) + ": input node belongs to a different graph");
        if (p->id >= static_cast<int>(nodes_.size())) throw UsageError(std::string(op) + ": parent ordering broken");
        rg = rg || p->requires_grad;
    }
    auto n = std::make_unique<Node>();
    n->value = std::move(value);
    n->requires_grad = rg;
    if (rg) {
        n->grad = Array::zeros(n->value.shape());
        n->backward_fn = std::move(backward);
    }
    n->parents = std::move(parents);
    n->op = op;
    n->id = static_cast<int>(nodes_.size());
    n->owner = this;
    finalize_value(n.get(), op);
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
}

void Graph::finalize_value(Node* n, const char* op) {
    if (precision_ == Precision::f32) {
        double* d = n->value.data();
        for (std::size_t i = 0, e = n->value.size(); i < e; ++i)
            d[i] = static_cast<double>(static_cast<float>(d[i]));
    }
    if (!n->value.all_finite())
        throw NumericError(std::string(op) + " produced a non-finite value");
}

void Graph::backward(Node* loss) {
    if (loss == nullptr || loss->owner != this) throw UsageError("backward: loss not owned by this graph");
    if (loss->size() != 1) throw UsageError("backward: loss must be scalar, got shape " + shape_str(loss->shape()));
    if (!loss->requires_grad) return;  // nothing depends on parameters

    // Reachable set via parents-closure from the loss.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<Node*> stack{loss};
    reach[static_cast<std::size_t>(loss->id)] = 1;
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        for (Node* p : n->parents) {
            if (p->requires_grad && !reach[static_cast<std::size_t>(p->id)]) {
                reach[static_cast<std::size_t>(p->id)] = 1;
                stack.push_back(p);
            }
        }
    }

    // Stash pre-existing gradients so this sweep runs on clean buffers, then
    // add them back: gradients accumulate across backward() calls for every
    // node, and rules stay a plain += into parent->grad.
    std::vector<Array> stashed(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!reach[i]) continue;
        Node* n = nodes_[i].get();
        stashed[i] = std::move(n->grad);
        n->grad = Array::zeros(n->value.shape());
    }

    loss->grad[0] = 1.0;
    for (int i = loss->id; i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        if (!reach[idx]) continue;
        Node* n = nodes_[idx].get();
        if (n->backward_fn) n->backward_fn(*n);
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (!reach[i]) continue;
        Node* n = nodes_[i].get();
        const Array& old = stashed[i];
        if (old.empty()) continue;
        double* g = n->grad.data();
        const double* o = old.data();
        for (std::size_t k = 0, e = n->grad.size(); k < e; ++k) g[k] += o[k];
    }
}

Graph& graph_of(std::initializer_list<const Node*> nodes) {
    Graph* g = nullptr;
    for (const Node* n : nodes) {
        if (n == nullptr) throw UsageError("null node");
        if (g == nullptr) g = n->owner;
        if (n->owner != g) throw UsageError("nodes belong to different graphs");
    }
    if (g == nullptr) throw UsageError("no nodes given");
    return *g;
}

}  // namespace mvp
