#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace mvp {

// Kinematic tree with per-bone length ranges and canonical directions used
// for sampling. Joint j != root hangs off parent[j] by one bone; the root is
// its own parent. Canonical bone directions live in a person-local frame
// (x forward, y left, z up) and get rotated by the person's yaw.
struct SkeletonTemplate {
    std::vector<int> parent;
    std::vector<std::string> joint_names;
    std::vector<std::array<double, 2>> bone_length_range;  // meters, root entry unused
    std::vector<Eigen::Vector3d> bone_dir;                 // unit, root entry unused
    std::vector<double> bone_cone_deg;                     // sampling cone half-angle

    int joints() const { return static_cast<int>(parent.size()); }

    // Bones as (parent, child) joint index pairs, child order.
    std::vector<std::pair<int, int>> limbs() const;

    // Throws ConfigError unless parent forms a tree with exactly one root,
    // all per-bone tables are sized J, and length ranges are positive.
    void validate() const;

    // Joint order such that every joint appears after its parent.
    std::vector<int> topo_order() const;
};

// 5-joint template (pelvis, neck, head, two hands) for fast tests.
SkeletonTemplate desk_template();

// 15-joint humanoid (head, arms with elbows/wrists, legs with knees/ankles).
SkeletonTemplate humanoid_template();

// Picks the shipped template with the given joint count (5 or 15).
SkeletonTemplate template_for_joints(int j);

}  // namespace mvp
