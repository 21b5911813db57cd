#include "mvp/scene.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mvp/errors.hpp"
#include "mvp/rng.hpp"

namespace mvp {

namespace {

// Unit vector uniform over the spherical cap of half-angle `cone_deg`
// around `axis`.
Eigen::Vector3d sample_cone(Rng& rng, const Eigen::Vector3d& axis, double cone_deg) {
    if (cone_deg <= 0.0) return axis;
    const double cos_min = std::cos(cone_deg * std::numbers::pi / 180.0);
    const double cos_t = 1.0 - rng.uniform() * (1.0 - cos_min);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const Eigen::Vector3d e1 = axis.unitOrthogonal();
    const Eigen::Vector3d e2 = axis.cross(e1);
    return sin_t * (std::cos(phi) * e1 + std::sin(phi) * e2) + cos_t * axis;
}

// Focal length so every workspace corner projects at least `margin_px`
// inside the image border of a camera at `eye` looking at area center.
double fit_focal(const CameraParams& cam, const Workspace& ws, double margin_px) {
    double max_xz = 0.0, max_yz = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
        const Eigen::Vector3d corner((mask & 1) ? ws.hi.x() : ws.lo.x(),
                                     (mask & 2) ? ws.hi.y() : ws.lo.y(),
                                     (mask & 4) ? ws.hi.z() : ws.lo.z());
        const Eigen::Vector3d xc = cam.R * corner + cam.t;
        if (xc.z() <= kMinCameraDepth) throw GeometryError("camera ring placed inside the workspace");
        max_xz = std::max(max_xz, std::abs(xc.x()) / xc.z());
        max_yz = std::max(max_yz, std::abs(xc.y()) / xc.z());
    }
    const double fx = (cam.width * 0.5 - margin_px) / max_xz;
    const double fy = (cam.height * 0.5 - margin_px) / max_yz;
    const double f = std::min(fx, fy);
    if (!(f > 0.0)) throw GeometryError("image too small to cover the workspace with margin");
    return f;
}

std::vector<CameraParams> make_ring(Rng& rng, const SceneConfig& cfg) {
    const Eigen::Vector3d c = cfg.workspace.center();
    const Eigen::Vector3d ext = cfg.workspace.extents();
    const double ring = 0.5 * std::hypot(ext.x(), ext.y());
    std::vector<CameraParams> cams;
    cams.reserve(static_cast<std::size_t>(cfg.views));
    for (int v = 0; v < cfg.views; ++v) {
        const double slice = 2.0 * std::numbers::pi / cfg.views;
        const double angle = slice * v + rng.uniform(-0.15, 0.15) * slice;
        const double radius = ring * rng.uniform(1.5, 1.8);
        const double height = c.z() + ext.z() * rng.uniform(0.2, 0.8);
        const Eigen::Vector3d eye = c + Eigen::Vector3d(radius * std::cos(angle), radius * std::sin(angle),
                                                        height - c.z());
        CameraParams cam = look_at(eye, c, Eigen::Vector3d(0, 0, 1), 1.0, 1.0, cfg.width, cfg.height);
        const double f = fit_focal(cam, cfg.workspace, 2.0 + 2.0 * cfg.heatmap_sigma_px);
        cam.fx = f;
        cam.fy = f;
        cams.push_back(cam);
    }
    return cams;
}

// Joints of one skeleton, sampled in topological order: bone direction from
// the template cone (rotated by the person's yaw), length from the range.
std::vector<Eigen::Vector3d> sample_person(Rng& rng, const SkeletonTemplate& tpl, const Workspace& ws) {
    const Eigen::Vector3d ext = ws.extents();
    Eigen::Vector3d root = ws.lo;
    for (int a = 0; a < 3; ++a) root[a] += rng.uniform() * ext[a];
    const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Matrix3d yaw_rot = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();

    std::vector<Eigen::Vector3d> joints(static_cast<std::size_t>(tpl.joints()));
    for (int j : tpl.topo_order()) {
        const auto js = static_cast<std::size_t>(j);
        if (tpl.parent[js] == j) {
            joints[js] = root;
            continue;
        }
        const double len = rng.uniform(tpl.bone_length_range[js][0], tpl.bone_length_range[js][1]);
        const Eigen::Vector3d axis = yaw_rot * tpl.bone_dir[js];
        joints[js] = joints[static_cast<std::size_t>(tpl.parent[js])] + len * sample_cone(rng, axis, tpl.bone_cone_deg[js]);
    }
    return joints;
}

bool person_ok(const std::vector<Eigen::Vector3d>& joints, const Workspace& ws,
               const std::vector<CameraParams>& cams) {
    for (const auto& p : joints)
        if (!ws.contains(p)) return false;
    int visible_views = 0;
    for (const auto& cam : cams) {
        bool all_in = true;
        for (const auto& p : joints) {
            const auto uv = try_project(p, cam);
            if (!uv || uv->x() < 0.0 || uv->x() > cam.width || uv->y() < 0.0 || uv->y() > cam.height) {
                all_in = false;
                break;
            }
        }
        if (all_in) ++visible_views;
    }
    return visible_views >= 2;
}

// Information sufficiency of the max-combined heatmaps: every joint of every
// person must keep at least two views where it projects >= 1 px inside the
// frame and no other person's same joint lands within `exclusion_px`. A
// foreign blob can only corrupt a local peak fit from closer than ~3 sigma,
// so scenes passing this check stay exactly recoverable per channel.
bool scene_ok(const std::vector<std::vector<Eigen::Vector3d>>& persons,
              const std::vector<CameraParams>& cams, double exclusion_px) {
    for (std::size_t a = 0; a < persons.size(); ++a) {
        for (std::size_t j = 0; j < persons[a].size(); ++j) {
            int clean = 0;
            for (const auto& cam : cams) {
                const auto uv = try_project(persons[a][j], cam);
                if (!uv || uv->x() < 1.0 || uv->x() > cam.width - 1.0 || uv->y() < 1.0 ||
                    uv->y() > cam.height - 1.0)
                    continue;
                bool contaminated = false;
                for (std::size_t b = 0; b < persons.size() && !contaminated; ++b) {
                    if (b == a) continue;
                    const auto uv2 = try_project(persons[b][j], cam);
                    if (uv2 && (*uv2 - *uv).norm() < exclusion_px) contaminated = true;
                }
                if (!contaminated) ++clean;
            }
            if (clean < 2) return false;
        }
    }
    return true;
}

void quantize_f32(Array& a) {
    double* p = a.data();
    for (std::size_t i = 0, e = a.size(); i < e; ++i) p[i] = static_cast<double>(static_cast<float>(p[i]));
}

}  // namespace

void Workspace::validate() const {
    if (!((hi - lo).array() > 0.0).all()) throw ConfigError("workspace: hi must exceed lo on every axis");
}

Eigen::Vector3d Scene::joint(int person, int j) const {
    return {gt_poses.at({person, j, 0}), gt_poses.at({person, j, 1}), gt_poses.at({person, j, 2})};
}

namespace {

void splat_raw(double* chan, int h, int w, double u, double v, double sigma, double peak) {
    const int rad = static_cast<int>(std::ceil(4.0 * sigma)) + 1;
    const int x0 = std::max(0, static_cast<int>(std::floor(u - 0.5)) - rad);
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(u - 0.5)) + rad);
    const int y0 = std::max(0, static_cast<int>(std::floor(v - 0.5)) - rad);
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(v - 0.5)) + rad);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double du = (x + 0.5) - u;
            const double dv = (y + 0.5) - v;
            const double val = peak * std::exp(-(du * du + dv * dv) * inv);
            double& cell = chan[static_cast<std::size_t>(y) * w + x];
            cell = std::max(cell, val);
        }
}

}  // namespace

void splat_max_gaussian(Array& chan, double u, double v, double sigma, double peak) {
    if (chan.rank() != 2) throw ShapeError("splat_max_gaussian: channel must be [H,W]");
    splat_raw(chan.data(), chan.dim(0), chan.dim(1), u, v, sigma, peak);
}

Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
    if (cfg.views < 1) throw ConfigError("generate_scene: needs at least one view");
    if (cfg.max_persons < 1) throw ConfigError("generate_scene: max_persons must be >= 1");
    if (cfg.height < 8 || cfg.width < 8) throw ConfigError("generate_scene: feature map too small");
    cfg.workspace.validate();
    const SkeletonTemplate tpl = template_for_joints(cfg.joints);

    Rng rng(seed);
    Scene scene;
    scene.workspace = cfg.workspace;
    scene.cameras = make_ring(rng, cfg);

    const int n_gt = rng.uniform_int(1, cfg.max_persons);
    const int budget = 10 * cfg.max_persons;
    std::vector<std::vector<Eigen::Vector3d>> persons;
    for (int n = 0; n < n_gt; ++n) {
        bool placed = false;
        for (int attempt = 0; attempt < budget; ++attempt) {
            auto joints = sample_person(rng, tpl, cfg.workspace);
            if (!person_ok(joints, cfg.workspace, scene.cameras)) continue;
            persons.push_back(std::move(joints));
            if (scene_ok(persons, scene.cameras, 3.0 * cfg.heatmap_sigma_px)) {
                placed = true;
                break;
            }
            persons.pop_back();
        }
        if (!placed)
            throw GenerationError("generate_scene: could not place a visible person within " +
                                  std::to_string(budget) +
                                  " attempts (workspace too small or actors not separable at this "
                                  "resolution)");
    }

    scene.gt_poses = Array(Shape{n_gt, tpl.joints(), 3}, 0.0);
    for (int n = 0; n < n_gt; ++n)
        for (int j = 0; j < tpl.joints(); ++j)
            for (int a = 0; a < 3; ++a)
                scene.gt_poses.at({n, j, a}) = persons[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)][a];

    scene.features.reserve(scene.cameras.size());
    const std::size_t plane = static_cast<std::size_t>(cfg.height) * static_cast<std::size_t>(cfg.width);
    for (const auto& cam : scene.cameras) {
        Array feat(Shape{tpl.joints(), cfg.height, cfg.width}, 0.0);
        for (int j = 0; j < tpl.joints(); ++j) {
            double* chan = feat.data() + static_cast<std::size_t>(j) * plane;
            for (int n = 0; n < n_gt; ++n) {
                const auto uv = try_project(scene.joint(n, j), cam);
                if (!uv) continue;
                splat_raw(chan, cfg.height, cfg.width, uv->x(), uv->y(), cfg.heatmap_sigma_px, 1.0);
            }
        }
        const int blobs = rng.poisson(cfg.distractor_rate);
        for (int b = 0; b < blobs; ++b) {
            const int j = rng.uniform_int(0, tpl.joints() - 1);
            const double u = rng.uniform(0.0, static_cast<double>(cfg.width));
            const double v = rng.uniform(0.0, static_cast<double>(cfg.height));
            const double peak = rng.uniform(0.3, 1.0);
            splat_raw(feat.data() + static_cast<std::size_t>(j) * plane, cfg.height, cfg.width, u, v,
                      cfg.heatmap_sigma_px, peak);
        }
        if (cfg.noise_std > 0.0) {
            double* p = feat.data();
            for (std::size_t i = 0; i < feat.size(); ++i) p[i] += rng.normal(0.0, cfg.noise_std);
        }
        quantize_f32(feat);
        scene.features.push_back(std::move(feat));
    }
    return scene;
}

}  // namespace mvp
