#pragma once

// Motion-capture ground truth for object poses.
//
// Frames: O object, OB marker body on the object, C camera, CB marker body
// on the camera, M mocap world. T_{A,B} maps A coordinates into B.

#include <span>

#include "posefuse/se3.hpp"

namespace posefuse {

struct MocapFrame {
  int frame = 0;
  Pose t_ob_m;  // object body in mocap world
  Pose t_cb_m;  // camera body in mocap world
};

struct HandEye {
  Pose t_c_cb;  // camera -> camera body
};

/// T_{O,OB} = T_{OB,M}^-1 T_{CB,M} T_{C,CB} T_{O,C} from one trusted frame.
Pose solve_object_offset(const MocapFrame& frame, const HandEye& handeye, const Pose& t_o_c);

/// T_{O,C} = T_{C,CB}^-1 T_{CB,M}^-1 T_{OB,M} T_{O,OB}
Pose gt_object_pose(const MocapFrame& frame, const HandEye& handeye, const Pose& offset);

/// Offset averaged over several trusted frames: chordal quaternion mean
/// (principal eigenvector of sum q q^T) and arithmetic translation mean.
Pose solve_object_offset_mean(std::span<const MocapFrame> frames, const HandEye& handeye,
                              std::span<const Pose> t_o_c);

/// Principal-eigenvector mean of unit quaternions (sign-invariant).
Rotation quaternion_mean(std::span<const Rotation> rotations);

}  // namespace posefuse
