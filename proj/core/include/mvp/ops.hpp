#pragma once

#include <vector>

#include "mvp/graph.hpp"

namespace mvp {

// Differentiable primitives over tape nodes. Binary elementwise ops
// broadcast the second operand to the first in numpy fashion (right-aligned,
// extents equal or 1); the output always takes the first operand's shape.

Node* add(Node* a, Node* b);
Node* mul(Node* a, Node* b);
Node* sub(Node* a, Node* b);

Node* scale(Node* x, double c);       // c * x
Node* add_scalar(Node* x, double c);  // x + c

Node* relu(Node* x);
Node* sigmoid(Node* x);
Node* log_op(Node* x);  // elementwise natural log; non-positive input poisons (NumericError)
Node* abs_op(Node* x);
Node* clamp(Node* x, double lo, double hi);

/// Matrix product. Rank 2, or batched with identical leading dimensions.
Node* matmul(Node* a, Node* b);

/// Numerically stabilized softmax along `axis` (negative counts from the end).
Node* softmax(Node* x, int axis);

/// Cross-correlation of x[Cin,H,W] with w[Cout,Cin,kh,kw]; optional bias[Cout].
/// Output extent (H + 2*pad - kh) must divide stride exactly.
Node* conv2d(Node* x, Node* w, Node* bias, int stride, int pad);

/// Normalizes over the last axis; gamma/beta have that axis's extent.
Node* layernorm(Node* x, Node* gamma, Node* beta, double eps = 1e-5);

Node* concat(const std::vector<Node*>& xs, int axis);
Node* reshape(Node* x, Shape s);
Node* permute(Node* x, const std::vector<int>& perm);

/// Slices along `axis` at the given indices (repeats allowed); backward
/// scatter-adds.
Node* gather(Node* x, int axis, const std::vector<int>& indices);

Node* reduce_sum(Node* x, int axis);
Node* reduce_mean(Node* x, int axis);
Node* sum_all(Node* x);   // -> shape {1}
Node* mean_all(Node* x);  // -> shape {1}

// Value-level helpers shared by op kernels and other modules.
namespace detail {
/// Strides of `b` right-aligned to `out`, zero on broadcast axes; throws
/// ShapeError when incompatible.
std::vector<std::size_t> broadcast_strides(const Shape& out, const Shape& b, const char* op);
/// Folds `src` (shaped like the broadcast output) into `dst` by summing over
/// the axes along which `dst` was broadcast.
void reduce_into_broadcast(Array& dst, const Array& src, const char* op);
}  // namespace detail

}  // namespace mvp
