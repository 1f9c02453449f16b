#include "posefuse/calib_gt.hpp"

#include <Eigen/Eigenvalues>
#include <vector>

#include "posefuse/error.hpp"

namespace posefuse {

Pose solve_object_offset(const MocapFrame& frame, const HandEye& handeye, const Pose& t_o_c) {
  return frame.t_ob_m.inverse() * frame.t_cb_m * handeye.t_c_cb * t_o_c;
}

Pose gt_object_pose(const MocapFrame& frame, const HandEye& handeye, const Pose& offset) {
  return handeye.t_c_cb.inverse() * frame.t_cb_m.inverse() * frame.t_ob_m * offset;
}

Rotation quaternion_mean(std::span<const Rotation> rotations) {
  if (rotations.empty()) throw Error(ErrorKind::kInvalidArgument, "no rotations to average");
  Eigen::Matrix4d acc = Eigen::Matrix4d::Zero();
  for (const auto& r : rotations) {
    const Eigen::Vector4d q(r.w(), r.x(), r.y(), r.z());
    acc += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(acc);
  const Eigen::Vector4d q = eig.eigenvectors().col(3);
  return Rotation::from_wxyz(q[0], q[1], q[2], q[3]).aligned_to(rotations.front());
}

Pose solve_object_offset_mean(std::span<const MocapFrame> frames, const HandEye& handeye,
                              std::span<const Pose> t_o_c) {
  if (frames.empty() || frames.size() != t_o_c.size()) {
    throw Error(ErrorKind::kInvalidArgument, "need one trusted object pose per mocap frame");
  }
  std::vector<Rotation> rots;
  Vec3 t = Vec3::Zero();
  for (size_t i = 0; i < frames.size(); ++i) {
    const Pose offset = solve_object_offset(frames[i], handeye, t_o_c[i]);
    rots.push_back(offset.rotation());
    t += offset.translation();
  }
  return Pose(quaternion_mean(rots), t / static_cast<double>(frames.size()));
}

}  // namespace posefuse
