#include "mvp/skeleton.hpp"

#include <cstddef>

#include "mvp/errors.hpp"

namespace mvp {

std::vector<std::pair<int, int>> SkeletonTemplate::limbs() const {
    std::vector<std::pair<int, int>> out;
    for (int j = 0; j < joints(); ++j)
        if (parent[static_cast<std::size_t>(j)] != j) out.emplace_back(parent[static_cast<std::size_t>(j)], j);
    return out;
}

void SkeletonTemplate::validate() const {
    const int j = joints();
    if (j < 1) throw ConfigError("skeleton: needs at least one joint");
    if (static_cast<int>(joint_names.size()) != j || static_cast<int>(bone_length_range.size()) != j ||
        static_cast<int>(bone_dir.size()) != j || static_cast<int>(bone_cone_deg.size()) != j)
        throw ConfigError("skeleton: per-joint tables must all have length J");
    int roots = 0;
    for (int i = 0; i < j; ++i) {
        const int p = parent[static_cast<std::size_t>(i)];
        if (p < 0 || p >= j) throw ConfigError("skeleton: parent index out of range");
        if (p == i) {
            ++roots;
            continue;
        }
        const auto& r = bone_length_range[static_cast<std::size_t>(i)];
        if (!(r[0] > 0.0 && r[1] >= r[0])) throw ConfigError("skeleton: bone length range must be positive");
        // Walk to the root; revisiting i means a cycle.
        int cur = p;
        int hops = 0;
        while (parent[static_cast<std::size_t>(cur)] != cur) {
            cur = parent[static_cast<std::size_t>(cur)];
            if (++hops > j) throw ConfigError("skeleton: parent array contains a cycle");
        }
    }
    if (roots != 1) throw ConfigError("skeleton: exactly one root required");
}

std::vector<int> SkeletonTemplate::topo_order() const {
    const int j = joints();
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(j));
    std::vector<char> placed(static_cast<std::size_t>(j), 0);
    // Quadratic scan is fine at skeleton scale.
    while (static_cast<int>(order.size()) < j) {
        bool progress = false;
        for (int i = 0; i < j; ++i) {
            if (placed[static_cast<std::size_t>(i)]) continue;
            const int p = parent[static_cast<std::size_t>(i)];
            if (p == i || placed[static_cast<std::size_t>(p)]) {
                order.push_back(i);
                placed[static_cast<std::size_t>(i)] = 1;
                progress = true;
            }
        }
        if (!progress) throw ConfigError("skeleton: parent array contains a cycle");
    }
    return order;
}

SkeletonTemplate desk_template() {
    SkeletonTemplate t;
    t.parent = {0, 0, 1, 1, 1};
    t.joint_names = {"pelvis", "neck", "head", "lhand", "rhand"};
    t.bone_length_range = {{0, 0}, {0.45, 0.60}, {0.20, 0.30}, {0.50, 0.70}, {0.50, 0.70}};
    t.bone_dir = {
        {0, 0, 1},
        {0, 0, 1},
        {0, 0, 1},
        Eigen::Vector3d(0.2, 0.9, -0.3).normalized(),
        Eigen::Vector3d(0.2, -0.9, -0.3).normalized(),
    };
    t.bone_cone_deg = {0, 15, 15, 40, 40};
    t.validate();
    return t;
}

SkeletonTemplate humanoid_template() {
    SkeletonTemplate t;
    //            0:pelvis 1:neck 2:head 3:lsho 4:lelb 5:lwri 6:rsho 7:relb 8:rwri
    //            9:lhip  10:lkne 11:lank 12:rhip 13:rkne 14:rank
    t.parent = {0, 0, 1, 1, 3, 4, 1, 6, 7, 0, 9, 10, 0, 12, 13};
    t.joint_names = {"pelvis", "neck",   "head",   "lshoulder", "lelbow", "lwrist", "rshoulder", "relbow",
                     "rwrist", "lhip",   "lknee",  "lankle",    "rhip",   "rknee",  "rankle"};
    t.bone_length_range = {{0, 0},       {0.40, 0.55}, {0.20, 0.28}, {0.15, 0.22}, {0.25, 0.33},
                           {0.22, 0.30}, {0.15, 0.22}, {0.25, 0.33}, {0.22, 0.30}, {0.08, 0.14},
                           {0.35, 0.45}, {0.35, 0.45}, {0.08, 0.14}, {0.35, 0.45}, {0.35, 0.45}};
    t.bone_dir = {
        {0, 0, 1},                                    // pelvis (unused)
        {0, 0, 1},                                    // neck
        {0, 0, 1},                                    // head
        {0, 1, 0},                                    // lshoulder
        Eigen::Vector3d(0.1, 0.4, -0.9).normalized(), // lelbow
        Eigen::Vector3d(0.2, 0.2, -0.9).normalized(), // lwrist
        {0, -1, 0},                                   // rshoulder
        Eigen::Vector3d(0.1, -0.4, -0.9).normalized(),// relbow
        Eigen::Vector3d(0.2, -0.2, -0.9).normalized(),// rwrist
        {0, 1, 0},                                    // lhip
        {0, 0, -1},                                   // lknee
        {0, 0, -1},                                   // lankle
        {0, -1, 0},                                   // rhip
        {0, 0, -1},                                   // rknee
        {0, 0, -1},                                   // rankle
    };
    t.bone_cone_deg = {0, 10, 12, 8, 45, 45, 8, 45, 45, 8, 20, 25, 8, 20, 25};
    t.validate();
    return t;
}

SkeletonTemplate template_for_joints(int j) {
    if (j == 5) return desk_template();
    if (j == 15) return humanoid_template();
    throw ConfigError("no skeleton template with " + std::to_string(j) + " joints (have 5, 15)");
}

}  // namespace mvp
