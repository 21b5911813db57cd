#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mvp/array.hpp"

namespace mvp {

class Graph;

/// f32 mode quantizes every op result (and leaf) to binary32 storage while
/// keeping binary64 accumulation inside kernels.
enum class Precision { f64, f32 };

/// One vertex of the tape: a value, a gradient slot of the same shape, and
/// the rule that pushes the incoming gradient into the parents.
struct Node {
    Array value;
    Array grad;  // allocated iff requires_grad, zero-initialized
    bool requires_grad = false;
    std::vector<Node*> parents;
    std::function<void(Node&)> backward_fn;  // empty for leaves
    const char* op = "leaf";
    int id = -1;
    Graph* owner = nullptr;

    const Shape& shape() const { return value.shape(); }
    std::size_t size() const { return value.size(); }
};

/// Dynamic tape. Nodes are appended in creation order, which is a
/// topological order by construction, and owned by the graph; raw Node*
/// handles stay valid for the graph's lifetime. A graph instance is
/// single-threaded; independent graphs may run concurrently.
class Graph {
 public:
    explicit Graph(Precision p = Precision::f64) : precision_(p) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Leaf with requires_grad = false.
    Node* constant(Array v) { return leaf(std::move(v), false); }
    /// Leaf with requires_grad = true.
    Node* param(Array v) { return leaf(std::move(v), true); }

    /// Interior node. requires_grad is inherited from parents; the result
    /// value is finite-checked (NaN/Inf is an error state) and quantized in
    /// f32 mode.
    Node* make(const char* op, Array value, std::vector<Node*> parents,
               std::function<void(Node&)> backward);

    /// Reverse sweep from a scalar loss: afterwards every reachable
    /// requires_grad node holds d(loss)/d(node). Repeated calls accumulate.
    void backward(Node* loss);

    Precision precision() const { return precision_; }
    std::size_t node_count() const { return nodes_.size(); }

 private:
    Node* leaf(Array v, bool requires_grad);
    void finalize_value(Node* n, const char* op);

    Precision precision_;
    std::vector<std::unique_ptr<Node>> nodes_;
};

/// The common graph of a set of nodes; throws UsageError when they disagree.
Graph& graph_of(std::initializer_list<const Node*> nodes);

}  // namespace mvp
