#include "mvp/pose.hpp"

#include "mvp/errors.hpp"

namespace mvp {

void PoseSet::validate() const {
    if (poses.rank() != 3 || poses.dim(2) != 3)
        throw ShapeError("PoseSet: poses must be [N,J,3], got " + shape_str(poses.shape()));
    if (confidences.rank() != 1 || confidences.dim(0) != poses.dim(0))
        throw ShapeError("PoseSet: confidences must be [N]");
    if (!poses.all_finite()) throw NumericError("PoseSet: non-finite pose coordinate");
    for (std::size_t i = 0; i < confidences.size(); ++i)
        if (!(confidences[i] >= 0.0 && confidences[i] <= 1.0))
            throw NumericError("PoseSet: confidence outside [0,1]");
}

}  // namespace mvp
