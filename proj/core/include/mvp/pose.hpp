#pragma once

#include "mvp/array.hpp"

namespace mvp {

// One scene's predicted (or ground-truth) person set.
struct PoseSet {
    Array poses;        // [N, J, 3] meters
    Array confidences;  // [N], each in [0,1]

    int persons() const { return poses.dim(0); }
    int joints() const { return poses.dim(1); }

    // Throws ShapeError/NumericError when shapes disagree or confidences
    // leave [0,1].
    void validate() const;
};

}  // namespace mvp
