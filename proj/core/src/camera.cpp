#include "mvp/camera.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "mvp/errors.hpp"

namespace mvp {

void CameraParams::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw GeometryError("camera: fx and fy must be positive");
    const Eigen::Matrix3d gram = R.transpose() * R;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        throw GeometryError("camera: R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-9)
        throw GeometryError("camera: R is not a proper rotation (det != +1)");
}

Eigen::Vector2d project(const Eigen::Vector3d& y, const CameraParams& cam) {
    const Eigen::Vector3d xc = cam.R * y + cam.t;
    if (xc.z() <= kMinCameraDepth)
        throw GeometryError("project: point at or behind the camera plane (depth " +
                            std::to_string(xc.z()) + ")");
    return {cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy};
}

std::optional<Eigen::Vector2d> try_project(const Eigen::Vector3d& y, const CameraParams& cam) {
    const Eigen::Vector3d xc = cam.R * y + cam.t;
    if (xc.z() <= kMinCameraDepth) return std::nullopt;
    return Eigen::Vector2d{cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy};
}

Array ray_field(const CameraParams& cam) {
    cam.validate();
    if (cam.width <= 0 || cam.height <= 0) throw GeometryError("ray_field: camera has no image extent");
    const int h = cam.height, w = cam.width;
    Array out(Shape{3, h, w}, 0.0);
    const Eigen::Matrix3d Rt = cam.R.transpose();
    double* p = out.data();
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            Eigen::Vector3d d_cam((i + 0.5 - cam.cx) / cam.fx, (j + 0.5 - cam.cy) / cam.fy, 1.0);
            d_cam.normalize();
            const Eigen::Vector3d d = Rt * d_cam;
            const std::size_t px = static_cast<std::size_t>(j) * w + i;
            p[0 * plane + px] = d.x();
            p[1 * plane + px] = d.y();
            p[2 * plane + px] = d.z();
        }
    return out;
}

Eigen::Vector3d triangulate_dlt(const std::vector<std::pair<Eigen::Vector2d, CameraParams>>& obs) {
    if (obs.size() < 2) throw GeometryError("triangulate_dlt: needs at least 2 views");
    Eigen::MatrixXd A(2 * static_cast<int>(obs.size()), 4);
    for (std::size_t k = 0; k < obs.size(); ++k) {
        const auto& [uv, cam] = obs[k];
        Eigen::Matrix<double, 3, 4> P;
        P.leftCols<3>() = cam.R;
        P.col(3) = cam.t;
        Eigen::Matrix3d K;
        K << cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1;
        P = K * P;
        A.row(2 * static_cast<int>(k)) = uv.x() * P.row(2) - P.row(0);
        A.row(2 * static_cast<int>(k) + 1) = uv.y() * P.row(2) - P.row(1);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Rank must be at least 3 for a unique homogeneous solution.
    if (sv(2) <= 1e-10 * sv(0))
        throw GeometryError("triangulate_dlt: degenerate geometry (rank-deficient system)");
    const Eigen::Vector4d x = svd.matrixV().col(3);
    if (std::abs(x(3)) < 1e-12 * x.head<3>().norm())
        throw GeometryError("triangulate_dlt: solution at infinity");
    return x.head<3>() / x(3);
}

CameraParams look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                     const Eigen::Vector3d& up, double fx, double fy, int width, int height) {
    const Eigen::Vector3d f = target - eye;
    if (f.norm() < 1e-12) throw GeometryError("look_at: eye and target coincide");
    const Eigen::Vector3d z = f.normalized();
    Eigen::Vector3d x = z.cross(up);
    if (x.norm() < 1e-9) throw GeometryError("look_at: view direction parallel to up");
    x.normalize();
    const Eigen::Vector3d y = z.cross(x);

    CameraParams cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    cam.R.row(0) = x;
    cam.R.row(1) = y;
    cam.R.row(2) = z;
    cam.t = -cam.R * eye;
    cam.validate();
    return cam;
}

}  // namespace mvp
