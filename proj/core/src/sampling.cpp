#include "mvp/sampling.hpp"

#include <cmath>

#include "mvp/errors.hpp"
#include "mvp/ops.hpp"

namespace mvp {

namespace {

struct Tap {
    int x, y;        // pixel indices, -1 when off the map
    double weight;   // bilinear weight
    double dwdu, dwdv;
};

// The four interpolation taps around continuous pixel coordinate (u, v) on
// an HxW map, in the grid frame where pixel centers sit at integers.
void taps_at(double u, double v, int w, int h, Tap out[4]) {
    const double gu = u - 0.5;
    const double gv = v - 0.5;
    const double fx = std::floor(gu);
    const double fy = std::floor(gv);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double au = gu - fx;
    const double av = gv - fy;
    const int xs[2] = {x0, x0 + 1};
    const int ys[2] = {y0, y0 + 1};
    const double wu[2] = {1.0 - au, au};
    const double wv[2] = {1.0 - av, av};
    const double du[2] = {-1.0, 1.0};  // d(wu)/d(gu) per tap
    int k = 0;
    for (int jy = 0; jy < 2; ++jy)
        for (int jx = 0; jx < 2; ++jx, ++k) {
            Tap& t = out[k];
            const bool in = xs[jx] >= 0 && xs[jx] < w && ys[jy] >= 0 && ys[jy] < h;
            t.x = in ? xs[jx] : -1;
            t.y = ys[jy];
            t.weight = wu[jx] * wv[jy];
            t.dwdu = du[jx] * wv[jy];
            t.dwdv = wu[jx] * du[jy];
        }
}

void check_map(const Shape& zs) {
    if (zs.size() != 3) throw ShapeError("bilinear_sample: map must be [C,H,W], got " + shape_str(zs));
}

}  // namespace

Node* grid_sample(Node* Z, Node* pts) {
    Graph& g = graph_of({Z, pts});
    check_map(Z->shape());
    const Shape& ps = pts->shape();
    if (ps.size() != 2 || ps[1] != 2)
        throw ShapeError("grid_sample: points must be [Q,2], got " + shape_str(ps));
    const int c = Z->value.dim(0), h = Z->value.dim(1), w = Z->value.dim(2);
    const int q = ps[0];
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);

    Array out(Shape{q, c}, 0.0);
    const double* pz = Z->value.data();
    const double* pp = pts->value.data();
    double* po = out.data();
    for (int i = 0; i < q; ++i) {
        Tap taps[4];
        taps_at(pp[2 * i], pp[2 * i + 1], w, h, taps);
        for (const Tap& t : taps) {
            if (t.x < 0 || t.y < 0 || t.y >= h || t.weight == 0.0) continue;
            const std::size_t px = static_cast<std::size_t>(t.y) * w + t.x;
            for (int ch = 0; ch < c; ++ch) po[static_cast<std::size_t>(i) * c + ch] += t.weight * pz[ch * plane + px];
        }
    }
    auto backward = [c, h, w, q, plane](Node& self) {
        Node* Z = self.parents[0];
        Node* pts = self.parents[1];
        const double* gy = self.grad.data();
        const double* pz = Z->value.data();
        const double* pp = pts->value.data();
        for (int i = 0; i < q; ++i) {
            Tap taps[4];
            taps_at(pp[2 * i], pp[2 * i + 1], w, h, taps);
            double du = 0.0, dv = 0.0;
            for (const Tap& t : taps) {
                if (t.x < 0 || t.y < 0 || t.y >= h) continue;
                const std::size_t px = static_cast<std::size_t>(t.y) * w + t.x;
                for (int ch = 0; ch < c; ++ch) {
                    const double go = gy[static_cast<std::size_t>(i) * c + ch];
                    if (Z->requires_grad) Z->grad.data()[ch * plane + px] += go * t.weight;
                    const double zval = pz[ch * plane + px];
                    du += go * t.dwdu * zval;
                    dv += go * t.dwdv * zval;
                }
            }
            if (pts->requires_grad) {
                pts->grad.data()[2 * i] += du;
                pts->grad.data()[2 * i + 1] += dv;
            }
        }
    };
    return g.make("grid_sample", std::move(out), {Z, pts}, backward);
}

Node* bilinear_sample(Node* Z, Node* p) {
    if (!(p->value.rank() == 1 && p->value.dim(0) == 2))
        throw ShapeError("bilinear_sample: point must be [2], got " + shape_str(p->shape()));
    check_map(Z->shape());
    Node* row = reshape(p, {1, 2});
    Node* sampled = grid_sample(Z, row);
    return reshape(sampled, {Z->value.dim(0)});
}

Node* project_points(Node* pts, const CameraParams& cam, std::vector<unsigned char>* valid) {
    Graph& g = graph_of({pts});
    const Shape& ps = pts->shape();
    if (ps.size() != 2 || ps[1] != 3)
        throw ShapeError("project_points: points must be [Q,3], got " + shape_str(ps));
    const int q = ps[0];
    if (valid) valid->assign(static_cast<std::size_t>(q), 0);

    Array out(Shape{q, 2}, 0.0);
    const double* pp = pts->value.data();
    double* po = out.data();
    for (int i = 0; i < q; ++i) {
        const Eigen::Vector3d y(pp[3 * i], pp[3 * i + 1], pp[3 * i + 2]);
        const Eigen::Vector3d xc = cam.R * y + cam.t;
        if (valid && xc.z() > kMinCameraDepth) (*valid)[static_cast<std::size_t>(i)] = 1;
        const double z = std::max(xc.z(), kMinCameraDepth);
        po[2 * i] = cam.fx * xc.x() / z + cam.cx;
        po[2 * i + 1] = cam.fy * xc.y() / z + cam.cy;
    }
    auto backward = [cam, q](Node& self) {
        Node* pts = self.parents[0];
        if (!pts->requires_grad) return;
        const double* pp = pts->value.data();
        const double* gy = self.grad.data();
        double* gp = pts->grad.data();
        for (int i = 0; i < q; ++i) {
            const Eigen::Vector3d y(pp[3 * i], pp[3 * i + 1], pp[3 * i + 2]);
            const Eigen::Vector3d xc = cam.R * y + cam.t;
            const bool clamped = xc.z() <= kMinCameraDepth;
            const double z = std::max(xc.z(), kMinCameraDepth);
            // du/dxc = (fx/z, 0, -fx*x/z^2), dv/dxc = (0, fy/z, -fy*y/z^2);
            // the depth partial vanishes where the clamp is active.
            Eigen::Vector3d du_dxc(cam.fx / z, 0.0, clamped ? 0.0 : -cam.fx * xc.x() / (z * z));
            Eigen::Vector3d dv_dxc(0.0, cam.fy / z, clamped ? 0.0 : -cam.fy * xc.y() / (z * z));
            const Eigen::Vector3d grad_world =
                cam.R.transpose() * (gy[2 * i] * du_dxc + gy[2 * i + 1] * dv_dxc);
            gp[3 * i] += grad_world.x();
            gp[3 * i + 1] += grad_world.y();
            gp[3 * i + 2] += grad_world.z();
        }
    };
    return g.make("project_points", std::move(out), {pts}, backward);
}

}  // namespace mvp
