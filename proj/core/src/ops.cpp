#include "mvp/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mvp/errors.hpp"

namespace mvp {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int canonical_axis(int axis, int rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw ShapeError(std::string(op) + ": axis out of range for rank " + std::to_string(rank));
    return axis;
}

// outer * axis * inner decomposition around one axis.
void split_at_axis(const Shape& s, int axis, std::size_t& outer, std::size_t& extent, std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(s[static_cast<std::size_t>(i)]);
    extent = static_cast<std::size_t>(s[static_cast<std::size_t>(axis)]);
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
        inner *= static_cast<std::size_t>(s[i]);
}

void add_same_shape(Array& dst, const Array& src) {
    double* d = dst.data();
    const double* s = src.data();
    for (std::size_t i = 0, e = dst.size(); i < e; ++i) d[i] += s[i];
}

// Walks the output index space once, applying fn(out_flat, b_flat).
template <class F>
void broadcast_walk(const Shape& out, const std::vector<std::size_t>& bstride, F&& fn) {
    const int rank = static_cast<int>(out.size());
    std::vector<std::size_t> counter(static_cast<std::size_t>(rank), 0);
    const std::size_t total = shape_numel(out);
    std::size_t bidx = 0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        fn(flat, bidx);
        for (int ax = rank - 1; ax >= 0; --ax) {
            const auto a = static_cast<std::size_t>(ax);
            bidx += bstride[a];
            if (++counter[a] < static_cast<std::size_t>(out[a])) break;
            bidx -= bstride[a] * static_cast<std::size_t>(out[a]);
            counter[a] = 0;
        }
    }
}

Node* binary_elementwise(const char* op, Node* a, Node* b, bool is_mul) {
    Graph& g = graph_of({a, b});
    const Shape& os = a->shape();
    const auto bstride = detail::broadcast_strides(os, b->shape(), op);
    Array out(os, 0.0);
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    if (a->shape() == b->shape()) {
        for (std::size_t i = 0, e = out.size(); i < e; ++i)
            po[i] = is_mul ? pa[i] * pb[i] : pa[i] + pb[i];
    } else {
        broadcast_walk(os, bstride, [&](std::size_t o, std::size_t bi) {
            po[o] = is_mul ? pa[o] * pb[bi] : pa[o] + pb[bi];
        });
    }
    auto backward = [is_mul](Node& self) {
        Node* a = self.parents[0];
        Node* b = self.parents[1];
        if (!is_mul) {
            if (a->requires_grad) add_same_shape(a->grad, self.grad);
            if (b->requires_grad) detail::reduce_into_broadcast(b->grad, self.grad, self.op);
        } else {
            if (a->requires_grad) {
                const auto bs = detail::broadcast_strides(self.shape(), b->shape(), self.op);
                double* ga = a->grad.data();
                const double* sg = self.grad.data();
                const double* pb = b->value.data();
                broadcast_walk(self.shape(), bs, [&](std::size_t o, std::size_t bi) { ga[o] += sg[o] * pb[bi]; });
            }
            if (b->requires_grad) {
                Array tmp(self.shape(), 0.0);
                double* t = tmp.data();
                const double* sg = self.grad.data();
                const double* pa = a->value.data();
                for (std::size_t i = 0, e = tmp.size(); i < e; ++i) t[i] = sg[i] * pa[i];
                detail::reduce_into_broadcast(b->grad, tmp, self.op);
            }
        }
    };
    return g.make(op, std::move(out), {a, b}, backward);
}

template <class Fwd, class Bwd>
Node* unary_elementwise(const char* op, Node* x, Fwd fwd, Bwd bwd) {
    Graph& g = graph_of({x});
    Array out(x->shape(), 0.0);
    const double* px = x->value.data();
    double* po = out.data();
    for (std::size_t i = 0, e = out.size(); i < e; ++i) po[i] = fwd(px[i]);
    auto backward = [bwd](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        double* gx = x->grad.data();
        const double* sg = self.grad.data();
        const double* px = x->value.data();
        const double* py = self.value.data();
        for (std::size_t i = 0, e = self.size(); i < e; ++i) gx[i] += sg[i] * bwd(px[i], py[i]);
    };
    return g.make(op, std::move(out), {x}, backward);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

}  // namespace

namespace detail {

std::vector<std::size_t> broadcast_strides(const Shape& out, const Shape& b, const char* op) {
    if (b.size() > out.size())
        throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " to " + shape_str(out));
    std::vector<std::size_t> stride(out.size(), 0);
    std::size_t run = 1;
    const int off = static_cast<int>(out.size() - b.size());
    for (int i = static_cast<int>(b.size()) - 1; i >= 0; --i) {
        const int bext = b[static_cast<std::size_t>(i)];
        const int oext = out[static_cast<std::size_t>(i + off)];
        if (bext == oext) {
            stride[static_cast<std::size_t>(i + off)] = run;
        } else if (bext == 1) {
            stride[static_cast<std::size_t>(i + off)] = 0;
        } else {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b) + " to " + shape_str(out));
        }
        run *= static_cast<std::size_t>(bext);
    }
    return stride;
}

void reduce_into_broadcast(Array& dst, const Array& src, const char* op) {
    if (dst.shape() == src.shape()) {
        add_same_shape(dst, src);
        return;
    }
    const auto bstride = broadcast_strides(src.shape(), dst.shape(), op);
    double* d = dst.data();
    const double* s = src.data();
    broadcast_walk(src.shape(), bstride, [&](std::size_t o, std::size_t bi) { d[bi] += s[o]; });
}

}  // namespace detail

Node* add(Node* a, Node* b) { return binary_elementwise("add", a, b, false); }
Node* mul(Node* a, Node* b) { return binary_elementwise("mul", a, b, true); }

Node* sub(Node* a, Node* b) { return add(a, scale(b, -1.0)); }

Node* scale(Node* x, double c) {
    return unary_elementwise(
        "scale", x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Node* add_scalar(Node* x, double c) {
    return unary_elementwise(
        "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Node* relu(Node* x) {
    return unary_elementwise(
        "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Node* sigmoid(Node* x) {
    return unary_elementwise(
        "sigmoid", x, [](double v) { return stable_sigmoid(v); },
        [](double, double y) { return y * (1.0 - y); });
}

Node* log_op(Node* x) {
    return unary_elementwise(
        "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Node* abs_op(Node* x) {
    return unary_elementwise(
        "abs", x, [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Node* clamp(Node* x, double lo, double hi) {
    if (!(lo <= hi)) throw UsageError("clamp: lo > hi");
    return unary_elementwise(
        "clamp", x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Node* matmul(Node* a, Node* b) {
    Graph& g = graph_of({a, b});
    const Shape& sa = a->shape();
    const Shape& sb = b->shape();
    if (sa.size() < 2 || sa.size() != sb.size())
        throw ShapeError("matmul: ranks must match and be >= 2, got " + shape_str(sa) + " and " + shape_str(sb));
    for (std::size_t i = 0; i + 2 < sa.size(); ++i)
        if (sa[i] != sb[i]) throw ShapeError("matmul: leading dims differ: " + shape_str(sa) + " vs " + shape_str(sb));
    const int m = sa[sa.size() - 2], k = sa[sa.size() - 1];
    const int k2 = sb[sb.size() - 2], n = sb[sb.size() - 1];
    if (k != k2) throw ShapeError("matmul: inner dims differ: " + shape_str(sa) + " vs " + shape_str(sb));
    Shape so(sa.begin(), sa.end() - 2);
    so.push_back(m);
    so.push_back(n);
    std::size_t batch = 1;
    for (std::size_t i = 0; i + 2 < sa.size(); ++i) batch *= static_cast<std::size_t>(sa[i]);

    Array out(so, 0.0);
    for (std::size_t s = 0; s < batch; ++s) {
        ConstMatMap A(a->value.data() + s * static_cast<std::size_t>(m * k), m, k);
        ConstMatMap B(b->value.data() + s * static_cast<std::size_t>(k * n), k, n);
        MatMap O(out.data() + s * static_cast<std::size_t>(m * n), m, n);
        O.noalias() = A * B;
    }
    auto backward = [m, k, n, batch](Node& self) {
        Node* a = self.parents[0];
        Node* b = self.parents[1];
        for (std::size_t s = 0; s < batch; ++s) {
            ConstMatMap G(self.grad.data() + s * static_cast<std::size_t>(m * n), m, n);
            if (a->requires_grad) {
                ConstMatMap B(b->value.data() + s * static_cast<std::size_t>(k * n), k, n);
                MatMap GA(a->grad.data() + s * static_cast<std::size_t>(m * k), m, k);
                GA.noalias() += G * B.transpose();
            }
            if (b->requires_grad) {
                ConstMatMap A(a->value.data() + s * static_cast<std::size_t>(m * k), m, k);
                MatMap GB(b->grad.data() + s * static_cast<std::size_t>(k * n), k, n);
                GB.noalias() += A.transpose() * G;
            }
        }
    };
    return g.make("matmul", std::move(out), {a, b}, backward);
}

Node* softmax(Node* x, int axis) {
    Graph& g = graph_of({x});
    const int ax = canonical_axis(axis, x->value.rank(), "softmax");
    std::size_t outer, extent, inner;
    split_at_axis(x->shape(), ax, outer, extent, inner);
    Array out(x->shape(), 0.0);
    const double* px = x->value.data();
    double* po = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * extent * inner + in;
            double mx = px[base];
            for (std::size_t e = 1; e < extent; ++e) mx = std::max(mx, px[base + e * inner]);
            double sum = 0.0;
            for (std::size_t e = 0; e < extent; ++e) {
                const double v = std::exp(px[base + e * inner] - mx);
                po[base + e * inner] = v;
                sum += v;
            }
            for (std::size_t e = 0; e < extent; ++e) po[base + e * inner] /= sum;
        }
    }
    auto backward = [outer, extent, inner](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        const double* y = self.value.data();
        const double* gy = self.grad.data();
        double* gx = x->grad.data();
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * extent * inner + in;
                double dot = 0.0;
                for (std::size_t e = 0; e < extent; ++e) dot += gy[base + e * inner] * y[base + e * inner];
                for (std::size_t e = 0; e < extent; ++e) {
                    const std::size_t i = base + e * inner;
                    gx[i] += y[i] * (gy[i] - dot);
                }
            }
        }
    };
    return g.make("softmax", std::move(out), {x}, backward);
}

namespace {

struct ConvDims {
    int cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

ConvDims conv_dims(const Shape& xs, const Shape& ws, int stride, int pad) {
    if (xs.size() != 3) throw ShapeError("conv2d: input must be [C,H,W], got " + shape_str(xs));
    if (ws.size() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(ws));
    if (ws[1] != xs[0])
        throw ShapeError("conv2d: input channels " + std::to_string(xs[0]) + " vs kernel " + std::to_string(ws[1]));
    if (stride < 1 || pad < 0) throw ConfigError("conv2d: stride must be >= 1 and pad >= 0");
    ConvDims d{xs[0], xs[1], xs[2], ws[0], ws[2], ws[3], stride, pad, 0, 0};
    const int eh = d.h + 2 * pad - d.kh;
    const int ew = d.w + 2 * pad - d.kw;
    if (eh < 0 || ew < 0) throw ConfigError("conv2d: kernel does not fit padded input");
    if (eh % stride != 0 || ew % stride != 0)
        throw ShapeError("conv2d: output extent is not integral for stride " + std::to_string(stride));
    d.ho = eh / stride + 1;
    d.wo = ew / stride + 1;
    return d;
}

}  // namespace

Node* conv2d(Node* x, Node* w, Node* bias, int stride, int pad) {
    Graph& g = bias ? graph_of({x, w, bias}) : graph_of({x, w});
    const ConvDims d = conv_dims(x->shape(), w->shape(), stride, pad);
    if (bias && !(bias->value.rank() == 1 && bias->value.dim(0) == d.cout))
        throw ShapeError("conv2d: bias must be [Cout]");

    Array out(Shape{d.cout, d.ho, d.wo}, 0.0);
    const bool pointwise = (d.kh == 1 && d.kw == 1 && stride == 1 && pad == 0);
    const double* px = x->value.data();
    const double* pw = w->value.data();
    double* po = out.data();
    const std::size_t hw = static_cast<std::size_t>(d.h) * static_cast<std::size_t>(d.w);

    if (pointwise) {
        // [Cout,Cin] x [Cin,H*W]
        ConstMatMap W(pw, d.cout, d.cin);
        ConstMatMap X(px, d.cin, static_cast<int>(hw));
        MatMap O(po, d.cout, static_cast<int>(hw));
        O.noalias() = W * X;
    } else {
        for (int co = 0; co < d.cout; ++co)
            for (int oy = 0; oy < d.ho; ++oy)
                for (int ox = 0; ox < d.wo; ++ox) {
                    double acc = 0.0;
                    for (int ci = 0; ci < d.cin; ++ci)
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= d.h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= d.w) continue;
                                acc += px[(static_cast<std::size_t>(ci) * d.h + iy) * d.w + ix] *
                                       pw[((static_cast<std::size_t>(co) * d.cin + ci) * d.kh + ky) * d.kw + kx];
                            }
                        }
                    po[(static_cast<std::size_t>(co) * d.ho + oy) * d.wo + ox] = acc;
                }
    }
    if (bias) {
        const double* pb = bias->value.data();
        const std::size_t howo = static_cast<std::size_t>(d.ho) * static_cast<std::size_t>(d.wo);
        for (int co = 0; co < d.cout; ++co)
            for (std::size_t i = 0; i < howo; ++i) po[co * howo + i] += pb[co];
    }

    std::vector<Node*> parents{x, w};
    if (bias) parents.push_back(bias);
    auto backward = [d, pointwise](Node& self) {
        Node* x = self.parents[0];
        Node* w = self.parents[1];
        Node* bias = self.parents.size() > 2 ? self.parents[2] : nullptr;
        const double* gy = self.grad.data();
        const std::size_t hw = static_cast<std::size_t>(d.h) * static_cast<std::size_t>(d.w);
        const std::size_t howo = static_cast<std::size_t>(d.ho) * static_cast<std::size_t>(d.wo);
        if (pointwise) {
            ConstMatMap G(gy, d.cout, static_cast<int>(howo));
            if (x->requires_grad) {
                ConstMatMap W(w->value.data(), d.cout, d.cin);
                MatMap GX(x->grad.data(), d.cin, static_cast<int>(hw));
                GX.noalias() += W.transpose() * G;
            }
            if (w->requires_grad) {
                ConstMatMap X(x->value.data(), d.cin, static_cast<int>(hw));
                MatMap GW(w->grad.data(), d.cout, d.cin);
                GW.noalias() += G * X.transpose();
            }
        } else {
            const double* px = x->value.data();
            const double* pw = w->value.data();
            double* gx = x->requires_grad ? x->grad.data() : nullptr;
            double* gw = w->requires_grad ? w->grad.data() : nullptr;
            for (int co = 0; co < d.cout; ++co)
                for (int oy = 0; oy < d.ho; ++oy)
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const double go = gy[(static_cast<std::size_t>(co) * d.ho + oy) * d.wo + ox];
                        if (go == 0.0) continue;
                        for (int ci = 0; ci < d.cin; ++ci)
                            for (int ky = 0; ky < d.kh; ++ky) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.h) continue;
                                for (int kx = 0; kx < d.kw; ++kx) {
                                    const int ix = ox * d.stride + kx - d.pad;
                                    if (ix < 0 || ix >= d.w) continue;
                                    const std::size_t xi = (static_cast<std::size_t>(ci) * d.h + iy) * d.w + ix;
                                    const std::size_t wi =
                                        ((static_cast<std::size_t>(co) * d.cin + ci) * d.kh + ky) * d.kw + kx;
                                    if (gx) gx[xi] += go * pw[wi];
                                    if (gw) gw[wi] += go * px[xi];
                                }
                            }
                    }
        }
        if (bias && bias->requires_grad) {
            double* gb = bias->grad.data();
            for (int co = 0; co < d.cout; ++co) {
                double acc = 0.0;
                for (std::size_t i = 0; i < howo; ++i) acc += gy[co * howo + i];
                gb[co] += acc;
            }
        }
    };
    return g.make("conv2d", std::move(out), std::move(parents), backward);
}

Node* layernorm(Node* x, Node* gamma, Node* beta, double eps) {
    Graph& g = graph_of({x, gamma, beta});
    const int rank = x->value.rank();
    if (rank < 1) throw ShapeError("layernorm: rank must be >= 1");
    const int c = x->value.dim(rank - 1);
    if (!(gamma->value.rank() == 1 && gamma->value.dim(0) == c && beta->value.rank() == 1 && beta->value.dim(0) == c))
        throw ShapeError("layernorm: gamma/beta must match the last axis extent " + std::to_string(c));

    const std::size_t rows = x->value.size() / static_cast<std::size_t>(c);
    Array out(x->shape(), 0.0);
    Array xhat(x->shape(), 0.0);     // captured for backward
    Array inv_std(Shape{static_cast<int>(rows)}, 0.0);
    const double* px = x->value.data();
    const double* pg = gamma->value.data();
    const double* pb = beta->value.data();
    double* po = out.data();
    double* ph = xhat.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = px + r * static_cast<std::size_t>(c);
        double mean = 0.0;
        for (int i = 0; i < c; ++i) mean += row[i];
        mean /= c;
        double var = 0.0;
        for (int i = 0; i < c; ++i) {
            const double dv = row[i] - mean;
            var += dv * dv;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int i = 0; i < c; ++i) {
            const double h = (row[i] - mean) * is;
            ph[r * static_cast<std::size_t>(c) + i] = h;
            po[r * static_cast<std::size_t>(c) + i] = h * pg[i] + pb[i];
        }
    }
    auto backward = [c, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node* x = self.parents[0];
        Node* gamma = self.parents[1];
        Node* beta = self.parents[2];
        const double* gy = self.grad.data();
        const double* ph = xhat.data();
        const double* pg = gamma->value.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t base = r * static_cast<std::size_t>(c);
            if (x->requires_grad) {
                double mean_g = 0.0, mean_gh = 0.0;
                for (int i = 0; i < c; ++i) {
                    const double t = gy[base + i] * pg[i];
                    mean_g += t;
                    mean_gh += t * ph[base + i];
                }
                mean_g /= c;
                mean_gh /= c;
                double* gx = x->grad.data();
                for (int i = 0; i < c; ++i) {
                    const double t = gy[base + i] * pg[i];
                    gx[base + i] += (t - mean_g - ph[base + i] * mean_gh) * inv_std[r];
                }
            }
            if (gamma->requires_grad) {
                double* gg = gamma->grad.data();
                for (int i = 0; i < c; ++i) gg[i] += gy[base + i] * ph[base + i];
            }
            if (beta->requires_grad) {
                double* gb = beta->grad.data();
                for (int i = 0; i < c; ++i) gb[i] += gy[base + i];
            }
        }
    };
    return g.make("layernorm", std::move(out), {x, gamma, beta}, backward);
}

Node* concat(const std::vector<Node*>& xs, int axis) {
    if (xs.empty()) throw UsageError("concat: no inputs");
    Graph& g = *xs[0]->owner;
    for (Node* n : xs)
        if (n->owner != &g) throw UsageError("concat: nodes from different graphs");
    const int rank = xs[0]->value.rank();
    const int ax = canonical_axis(axis, rank, "concat");
    Shape os = xs[0]->shape();
    int total = 0;
    for (Node* n : xs) {
        if (n->value.rank() != rank) throw ShapeError("concat: rank mismatch");
        for (int i = 0; i < rank; ++i)
            if (i != ax && n->value.dim(i) != os[static_cast<std::size_t>(i)])
                throw ShapeError("concat: shape mismatch off-axis: " + shape_str(n->shape()) + " vs " + shape_str(os));
        total += n->value.dim(ax);
    }
    os[static_cast<std::size_t>(ax)] = total;

    std::size_t outer, extent, inner;
    split_at_axis(os, ax, outer, extent, inner);
    (void)extent;
    Array out(os, 0.0);
    double* po = out.data();
    std::vector<std::size_t> piece(xs.size());
    for (std::size_t p = 0; p < xs.size(); ++p)
        piece[p] = static_cast<std::size_t>(xs[p]->value.dim(ax)) * inner;
    const std::size_t row = static_cast<std::size_t>(total) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < xs.size(); ++p) {
            const double* src = xs[p]->value.data() + o * piece[p];
            std::memcpy(po + o * row + off, src, piece[p] * sizeof(double));
            off += piece[p];
        }
    }
    auto backward = [outer, row, piece](Node& self) {
        const double* gy = self.grad.data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::size_t off = 0;
            for (std::size_t p = 0; p < self.parents.size(); ++p) {
                Node* par = self.parents[p];
                if (par->requires_grad) {
                    double* gp = par->grad.data() + o * piece[p];
                    const double* src = gy + o * row + off;
                    for (std::size_t i = 0; i < piece[p]; ++i) gp[i] += src[i];
                }
                off += piece[p];
            }
        }
    };
    return g.make("concat", std::move(out), xs, backward);
}

Node* reshape(Node* x, Shape s) {
    Graph& g = graph_of({x});
    if (shape_numel(s) != x->value.size())
        throw ShapeError("reshape: element count mismatch: " + shape_str(x->shape()) + " -> " + shape_str(s));
    Array out(std::move(s), std::vector<double>(x->value.data(), x->value.data() + x->value.size()));
    auto backward = [](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        double* gx = x->grad.data();
        const double* gy = self.grad.data();
        for (std::size_t i = 0, e = self.size(); i < e; ++i) gx[i] += gy[i];
    };
    return g.make("reshape", std::move(out), {x}, backward);
}

namespace {

// dst[i] (+)= src at permuted index; used by permute forward and backward.
void permute_copy(const Array& src, Array& dst, const std::vector<int>& perm, bool accumulate) {
    const int rank = src.rank();
    std::vector<std::size_t> sstride(static_cast<std::size_t>(rank), 1);
    for (int i = rank - 2; i >= 0; --i)
        sstride[static_cast<std::size_t>(i)] =
            sstride[static_cast<std::size_t>(i + 1)] * static_cast<std::size_t>(src.dim(i + 1));
    std::vector<std::size_t> counter(static_cast<std::size_t>(rank), 0);
    const Shape& ds = dst.shape();
    const double* ps = src.data();
    double* pd = dst.data();
    const std::size_t total = dst.size();
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t si = 0;
        for (int i = 0; i < rank; ++i)
            si += counter[static_cast<std::size_t>(i)] * sstride[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        if (accumulate)
            pd[flat] += ps[si];
        else
            pd[flat] = ps[si];
        for (int ax = rank - 1; ax >= 0; --ax) {
            const auto a = static_cast<std::size_t>(ax);
            if (++counter[a] < static_cast<std::size_t>(ds[a])) break;
            counter[a] = 0;
        }
    }
}

}  // namespace

Node* permute(Node* x, const std::vector<int>& perm) {
    Graph& g = graph_of({x});
    const int rank = x->value.rank();
    if (static_cast<int>(perm.size()) != rank) throw ShapeError("permute: perm rank mismatch");
    std::vector<char> seen(static_cast<std::size_t>(rank), 0);
    Shape os(static_cast<std::size_t>(rank));
    for (int i = 0; i < rank; ++i) {
        const int p = perm[static_cast<std::size_t>(i)];
        if (p < 0 || p >= rank || seen[static_cast<std::size_t>(p)]) throw ShapeError("permute: invalid permutation");
        seen[static_cast<std::size_t>(p)] = 1;
        os[static_cast<std::size_t>(i)] = x->value.dim(p);
    }
    Array out(os, 0.0);
    permute_copy(x->value, out, perm, false);
    auto backward = [perm](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        // grad wrt input = inverse-permuted output grad
        std::vector<int> inv(perm.size());
        for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
        permute_copy(self.grad, x->grad, inv, true);
    };
    return g.make("permute", std::move(out), {x}, backward);
}

Node* gather(Node* x, int axis, const std::vector<int>& indices) {
    Graph& g = graph_of({x});
    const int ax = canonical_axis(axis, x->value.rank(), "gather");
    const int extent = x->value.dim(ax);
    for (int i : indices)
        if (i < 0 || i >= extent)
            throw ShapeError("gather: index " + std::to_string(i) + " out of range [0," + std::to_string(extent) + ")");
    if (indices.empty()) throw UsageError("gather: empty index list");
    Shape os = x->shape();
    os[static_cast<std::size_t>(ax)] = static_cast<int>(indices.size());
    std::size_t outer, ext, inner;
    split_at_axis(x->shape(), ax, outer, ext, inner);
    Array out(os, 0.0);
    double* po = out.data();
    const double* px = x->value.data();
    const std::size_t n_idx = indices.size();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < n_idx; ++j)
            std::memcpy(po + (o * n_idx + j) * inner,
                        px + (o * ext + static_cast<std::size_t>(indices[j])) * inner, inner * sizeof(double));
    auto backward = [outer, ext, inner, indices](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        double* gx = x->grad.data();
        const double* gy = self.grad.data();
        const std::size_t n_idx = indices.size();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < n_idx; ++j) {
                double* dst = gx + (o * ext + static_cast<std::size_t>(indices[j])) * inner;
                const double* src = gy + (o * n_idx + j) * inner;
                for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
    };
    return g.make("gather", std::move(out), {x}, backward);
}

namespace {

Node* reduce_axis(Node* x, int axis, bool mean) {
    Graph& g = graph_of({x});
    const int ax = canonical_axis(axis, x->value.rank(), mean ? "reduce_mean" : "reduce_sum");
    std::size_t outer, extent, inner;
    split_at_axis(x->shape(), ax, outer, extent, inner);
    Shape os;
    for (int i = 0; i < x->value.rank(); ++i)
        if (i != ax) os.push_back(x->value.dim(i));
    if (os.empty()) os = {1};
    Array out(os, 0.0);
    const double* px = x->value.data();
    double* po = out.data();
    const double norm = mean ? 1.0 / static_cast<double>(extent) : 1.0;
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            double acc = 0.0;
            for (std::size_t e = 0; e < extent; ++e) acc += px[(o * extent + e) * inner + in];
            po[o * inner + in] = acc * norm;
        }
    auto backward = [outer, extent, inner, norm](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        double* gx = x->grad.data();
        const double* gy = self.grad.data();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t e = 0; e < extent; ++e)
                for (std::size_t in = 0; in < inner; ++in)
                    gx[(o * extent + e) * inner + in] += gy[o * inner + in] * norm;
    };
    return g.make(mean ? "reduce_mean" : "reduce_sum", std::move(out), {x}, backward);
}

Node* reduce_all(Node* x, bool mean) {
    Graph& g = graph_of({x});
    const double norm = mean ? 1.0 / static_cast<double>(x->value.size()) : 1.0;
    double acc = 0.0;
    const double* px = x->value.data();
    for (std::size_t i = 0, e = x->value.size(); i < e; ++i) acc += px[i];
    Array out = Array::scalar(acc * norm);
    auto backward = [norm](Node& self) {
        Node* x = self.parents[0];
        if (!x->requires_grad) return;
        const double gy = self.grad[0] * norm;
        double* gx = x->grad.data();
        for (std::size_t i = 0, e = x->value.size(); i < e; ++i) gx[i] += gy;
    };
    return g.make(mean ? "mean_all" : "sum_all", std::move(out), {x}, backward);
}

}  // namespace

Node* reduce_sum(Node* x, int axis) { return reduce_axis(x, axis, false); }
Node* reduce_mean(Node* x, int axis) { return reduce_axis(x, axis, true); }
Node* sum_all(Node* x) { return reduce_all(x, false); }
Node* mean_all(Node* x) { return reduce_all(x, true); }

}  // namespace mvp
